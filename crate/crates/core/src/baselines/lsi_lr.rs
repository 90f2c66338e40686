//! Content-only baseline: items are projected onto latent topics of the
//! item-feature matrix, then every user gets an independent L2-regularised
//! logistic regression over those topics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{truncated_svd, SparseMatrix};
use crate::error::{Error, Result};
use crate::eval::Scorer;
use crate::interactions::InteractionSet;
use crate::mapping::Side;
use crate::model::sigmoid;

/// L2 strength on the topic weights (the intercept is not penalised).
pub const DEFAULT_L2: f64 = 1.0;
/// Base rates of single-class users are clamped to this margin from 0 and 1.
const PRIOR_CLAMP: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct LsiConfig {
    /// Requested number of topics; capped at the rank bound of the matrix.
    pub dim: usize,
    pub l2: f64,
    pub seed: u64,
}

impl LsiConfig {
    pub fn new(dim: usize, seed: u64) -> Self {
        LsiConfig {
            dim,
            l2: DEFAULT_L2,
            seed,
        }
    }
}

/// Per-user logistic regression in topic space.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl UserRegression {
    fn prior(dim: usize, bias: f64) -> Self {
        UserRegression {
            weights: vec![0.0; dim],
            bias,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct LsiLr {
    /// `n_items x topics`: each item's coordinates in topic space.
    item_topics: DMatrix<f64>,
    users: Vec<UserRegression>,
}

impl LsiLr {
    pub fn topics(&self) -> usize {
        self.item_topics.ncols()
    }

    pub fn user(&self, user: u32) -> Option<&UserRegression> {
        self.users.get(user as usize)
    }

    pub fn item_topics(&self, item: u32) -> Option<Vec<f64>> {
        ((item as usize) < self.item_topics.nrows())
            .then(|| self.item_topics.row(item as usize).iter().copied().collect())
    }
}

impl Scorer for LsiLr {
    /// Users absent from training get the zero model (constant score).
    fn score(&self, user: u32, item: u32) -> Result<f64> {
        let x = self.item_topics(item).ok_or(Error::EntityIndex {
            side: Side::Item,
            id: item as usize,
            len: self.item_topics.nrows(),
        })?;
        Ok(self.user(user).map_or(0.0, |r| r.score(&x)))
    }
}

/// Regularised logistic loss
/// `sum_j [log(1 + exp(s_j)) - y_j s_j] + l2/2 |w|^2` with `s_j = w.x_j + b`.
pub fn logistic_objective(xs: &[Vec<f64>], ys: &[bool], weights: &[f64], bias: f64, l2: f64) -> f64 {
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let s = bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            softplus(s) - if y { s } else { 0.0 }
        })
        .sum();
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Fits one user's regression by damped Newton iterations.
///
/// With a single class (or no data) the user gets the prior-only model:
/// zero weights and the clamped log-odds of the base rate as intercept.
pub fn fit_logistic(xs: &[Vec<f64>], ys: &[bool], dim: usize, l2: f64) -> UserRegression {
    let n_pos = ys.iter().filter(|&&y| y).count();
    if xs.is_empty() {
        return UserRegression::prior(dim, 0.0);
    }
    if n_pos == 0 || n_pos == ys.len() {
        let rate = (n_pos as f64 / ys.len() as f64).clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP);
        return UserRegression::prior(dim, (rate / (1.0 - rate)).ln());
    }

    // parameters: [w_0 .. w_{dim-1}, b]
    let p = dim + 1;
    let mut theta = DVector::<f64>::zeros(p);
    let objective = |t: &DVector<f64>| logistic_objective(xs, ys, &t.as_slice()[..dim], t[dim], l2);
    let mut current = objective(&theta);

    for _ in 0..100 {
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for (x, &y) in xs.iter().zip(ys) {
            let s = theta[dim] + x.iter().zip(theta.iter()).map(|(v, w)| v * w).sum::<f64>();
            let r = sigmoid(s);
            let g = r - if y { 1.0 } else { 0.0 };
            let h = r * (1.0 - r);
            for a in 0..p {
                let xa = if a < dim { x[a] } else { 1.0 };
                grad[a] += g * xa;
                for b in 0..=a {
                    let xb = if b < dim { x[b] } else { 1.0 };
                    hess[(a, b)] += h * xa * xb;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        for a in 0..dim {
            grad[a] += l2 * theta[a];
            hess[(a, a)] += l2;
        }
        // tiny ridge on the intercept keeps the Hessian definite when the
        // predictions saturate
        hess[(dim, dim)] += 1e-12;

        if grad.amax() < 1e-10 {
            break;
        }
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let candidate = &theta - &step * t;
            let value = objective(&candidate);
            if value <= current {
                theta = candidate;
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    UserRegression {
        weights: theta.as_slice()[..dim].to_vec(),
        bias: theta[dim],
    }
}

/// Projects items onto `config.dim` topics (capped at the matrix rank bound)
/// and fits one regression per user on that user's labelled training items.
pub fn train_lsi_lr(item_features: &SparseMatrix, train: &InteractionSet, config: &LsiConfig) -> Result<LsiLr> {
    if train.item_bound() > item_features.rows() {
        return Err(Error::validation(format!(
            "training data references item {} but the item-feature matrix has {} rows",
            train.item_bound() - 1,
            item_features.rows()
        )));
    }
    let topics = config.dim.min(item_features.rows()).min(item_features.cols());
    let factors = truncated_svd(item_features, topics, config.seed)?;
    // item coordinates = A V = U diag(s)
    let item_topics = item_features.mul_dense(&factors.right);

    let n_users = train.user_bound();
    let mut per_user: Vec<(Vec<Vec<f64>>, Vec<bool>)> = vec![(Vec::new(), Vec::new()); n_users];
    for x in train {
        let row = item_topics.row(x.item as usize).iter().copied().collect();
        let entry = &mut per_user[x.user as usize];
        entry.0.push(row);
        entry.1.push(x.label.is_positive());
    }
    let users = per_user
        .par_iter()
        .map(|(xs, ys)| fit_logistic(xs, ys, topics, config.l2))
        .collect();
    Ok(LsiLr { item_topics, users })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::eval::{evaluate, per_user_auc, score_all};
    use crate::interactions::{Interaction, Label};

    /// Plain gradient descent on the same objective, run to a tight
    /// gradient tolerance. Oracle for the Newton solver.
    fn gradient_descent(xs: &[Vec<f64>], ys: &[bool], dim: usize, l2: f64) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        // step below 1/L where L bounds the Hessian of the objective
        let lipschitz = 0.25 * xs.iter().map(|x| 1.0 + x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() + l2;
        let lr = 1.0 / lipschitz;
        for _ in 0..2_000_000 {
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for (x, &y) in xs.iter().zip(ys) {
                let s = b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                let g = 1.0 / (1.0 + (-s).exp()) - if y { 1.0 } else { 0.0 };
                for k in 0..dim {
                    gw[k] += g * x[k];
                }
                gb += g;
            }
            for k in 0..dim {
                gw[k] += l2 * w[k];
            }
            let norm = gw.iter().map(|g| g.abs()).fold(gb.abs(), f64::max);
            if norm < 1e-9 {
                break;
            }
            for k in 0..dim {
                w[k] -= lr * gw[k];
            }
            b -= lr * gb;
        }
        (w, b)
    }

    #[test]
    fn newton_matches_gradient_descent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dim = 4;
        for _user in 0..50 {
            let n = rng.random_range(4..20);
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let mut ys: Vec<bool> = xs.iter().map(|x| x[0] + 0.3 * x[1] + rng.random_range(-0.5..0.5) > 0.0).collect();
            ys[0] = true;
            ys[1] = false;
            let fitted = fit_logistic(&xs, &ys, dim, DEFAULT_L2);
            let (w, b) = gradient_descent(&xs, &ys, dim, DEFAULT_L2);
            for k in 0..dim {
                assert!((fitted.weights[k] - w[k]).abs() < 1e-3, "{:?} vs {:?}", fitted.weights, w);
            }
            assert!((fitted.bias - b).abs() < 1e-3);
            let zero = logistic_objective(&xs, &ys, &vec![0.0; dim], 0.0, DEFAULT_L2);
            assert!(logistic_objective(&xs, &ys, &fitted.weights, fitted.bias, DEFAULT_L2) <= zero);
        }
    }

    #[test]
    fn prior_only_users() {
        let r = fit_logistic(&[vec![1.0], vec![2.0]], &[true, true], 1, 1.0);
        assert_eq!(r.weights, vec![0.0]);
        assert!((r.bias - (0.99f64 / 0.01).ln()).abs() < 1e-12);
        let r = fit_logistic(&[], &[], 3, 1.0);
        assert_eq!(r, UserRegression::prior(3, 0.0));
    }

    fn two_topic_items() -> SparseMatrix {
        // items 0-2 carry feature 0, items 3-5 carry feature 1
        SparseMatrix::binary(6, 2, &[vec![0], vec![0], vec![0], vec![1], vec![1], vec![1]]).unwrap()
    }

    #[test]
    fn separable_user_is_ranked_perfectly() {
        let items = two_topic_items();
        let train = InteractionSet::new(vec![
            Interaction::positive(0, 0),
            Interaction::positive(0, 1),
            Interaction::negative(0, 3),
            Interaction::negative(0, 4),
        ])
        .unwrap();
        let model = train_lsi_lr(&items, &train, &LsiConfig::new(2, 0)).unwrap();
        let test = InteractionSet::new(vec![Interaction::positive(0, 2), Interaction::negative(0, 5)]).unwrap();
        assert_eq!(evaluate(&model, &test).unwrap(), 1.0);
    }

    #[test]
    fn user_without_training_data_scores_constant() {
        let items = two_topic_items();
        let train = InteractionSet::new(vec![Interaction::positive(1, 0), Interaction::negative(1, 3)]).unwrap();
        let model = train_lsi_lr(&items, &train, &LsiConfig::new(2, 0)).unwrap();
        let test = InteractionSet::new(vec![
            Interaction::positive(0, 2),
            Interaction::negative(0, 5),
            Interaction::new(0, 1, Label::Negative),
        ])
        .unwrap();
        let scores = score_all(&model, &test).unwrap();
        assert!(scores.iter().all(|&s| s == scores[0]));
        assert_eq!(per_user_auc(&scores, &test).unwrap()[&0], 0.5);
    }

    #[test]
    fn topics_capped_at_rank_bound() {
        let items = two_topic_items();
        let train = InteractionSet::new(vec![Interaction::positive(0, 0)]).unwrap();
        let model = train_lsi_lr(&items, &train, &LsiConfig::new(64, 0)).unwrap();
        assert_eq!(model.topics(), 2);
        let bad = InteractionSet::new(vec![Interaction::positive(0, 9)]).unwrap();
        assert!(train_lsi_lr(&items, &bad, &LsiConfig::new(2, 0)).is_err());
    }
}
