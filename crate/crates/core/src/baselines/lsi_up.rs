//! User-profile LSI baseline.
//!
//! Each user's profile is the sum of the content rows of the items they
//! interacted with positively. Profiles are L2-normalised per row, then
//! factorised with a truncated SVD `P ~ U S V^T`. Users are represented by
//! `P V` (= `U S`), items by their content row projected onto the feature
//! latents, `A V`, and a pair is scored by the inner product.

use nalgebra::DMatrix;

use super::{truncated_svd, SparseMatrix};
use crate::error::{Error, Result};
use crate::eval::Scorer;
use crate::interactions::InteractionSet;
use crate::mapping::Side;

#[derive(Clone, Debug)]
pub struct LsiUp {
    user_latent: DMatrix<f64>,
    feature_latent: DMatrix<f64>,
    item_latent: DMatrix<f64>,
}

impl LsiUp {
    pub fn dim(&self) -> usize {
        self.feature_latent.ncols()
    }

    /// `n_features x dim`.
    pub fn feature_latent(&self) -> &DMatrix<f64> {
        &self.feature_latent
    }

    /// `n_items x dim`.
    pub fn item_latent(&self) -> &DMatrix<f64> {
        &self.item_latent
    }

    /// `n_users x dim`.
    pub fn user_latent(&self) -> &DMatrix<f64> {
        &self.user_latent
    }
}

impl Scorer for LsiUp {
    /// Users absent from training have a zero profile (constant score).
    fn score(&self, user: u32, item: u32) -> Result<f64> {
        let (u, i) = (user as usize, item as usize);
        if i >= self.item_latent.nrows() {
            return Err(Error::EntityIndex {
                side: Side::Item,
                id: i,
                len: self.item_latent.nrows(),
            });
        }
        if u >= self.user_latent.nrows() {
            return Ok(0.0);
        }
        Ok(self.user_latent.row(u).dot(&self.item_latent.row(i)))
    }
}

/// Sum of content rows of each user's positively-rated items.
pub fn user_profile_matrix(item_features: &SparseMatrix, train: &InteractionSet) -> Result<SparseMatrix> {
    let n_users = train.user_bound();
    let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n_users];
    for x in train.positives() {
        if x.item as usize >= item_features.rows() {
            return Err(Error::validation(format!(
                "item {} has no row in the item-feature matrix",
                x.item
            )));
        }
        let (cols, vals) = item_features.row(x.item as usize);
        for (&c, &v) in cols.iter().zip(vals) {
            *dense[x.user as usize].entry(c as usize).or_default() += v;
        }
    }
    let entries = dense
        .into_iter()
        .enumerate()
        .flat_map(|(u, row)| row.into_iter().map(move |(c, v)| (u, c, v)))
        .collect();
    SparseMatrix::from_triplets(n_users, item_features.cols(), entries)
}

/// `dim` is capped at the rank bound of the profile matrix.
pub fn train_lsi_up(item_features: &SparseMatrix, train: &InteractionSet, dim: usize, seed: u64) -> Result<LsiUp> {
    if train.item_bound() > item_features.rows() {
        return Err(Error::validation(format!(
            "training data references item {} but the item-feature matrix has {} rows",
            train.item_bound() - 1,
            item_features.rows()
        )));
    }
    let profiles = user_profile_matrix(item_features, train)?.l2_normalize_rows();
    let k = dim.min(profiles.rows()).min(profiles.cols());
    let factors = truncated_svd(&profiles, k, seed)?;
    let user_latent = &factors.left * DMatrix::from_diagonal(&factors.singular_values);
    let item_latent = item_features.mul_dense(&factors.right);
    Ok(LsiUp {
        user_latent,
        feature_latent: factors.right,
        item_latent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{per_user_auc, score_all};
    use crate::interactions::Interaction;

    #[test]
    fn single_user_single_feature() {
        let items = SparseMatrix::binary(1, 1, &[vec![0]]).unwrap();
        let train = InteractionSet::new(vec![Interaction::positive(0, 0)]).unwrap();
        let profiles = user_profile_matrix(&items, &train).unwrap();
        assert_eq!(profiles.to_dense(), DMatrix::from_element(1, 1, 1.0));
        let model = train_lsi_up(&items, &train, 8, 0).unwrap();
        assert_eq!(model.dim(), 1);
        assert!((model.score(0, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_sums_positive_items_only() {
        let items = SparseMatrix::binary(3, 3, &[vec![0, 1], vec![1], vec![2]]).unwrap();
        let train = InteractionSet::new(vec![
            Interaction::positive(0, 0),
            Interaction::positive(0, 1),
            Interaction::negative(0, 2),
        ])
        .unwrap();
        let p = user_profile_matrix(&items, &train).unwrap().to_dense();
        assert_eq!(p.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn user_without_positives_scores_constant() {
        let items = SparseMatrix::binary(4, 3, &[vec![0], vec![1], vec![2], vec![0, 2]]).unwrap();
        let train = InteractionSet::new(vec![
            Interaction::positive(0, 0),
            Interaction::positive(0, 3),
            Interaction::negative(1, 1),
        ])
        .unwrap();
        let model = train_lsi_up(&items, &train, 2, 0).unwrap();
        assert!(model.user_latent().row(1).iter().all(|&v| v == 0.0));
        let test = InteractionSet::new(vec![Interaction::positive(1, 2), Interaction::negative(1, 0)]).unwrap();
        let scores = score_all(&model, &test).unwrap();
        assert_eq!(scores[0], scores[1]);
        assert_eq!(per_user_auc(&scores, &test).unwrap()[&1], 0.5);
    }

    #[test]
    fn item_latent_is_projection_onto_feature_latents() {
        let items = SparseMatrix::binary(
            5,
            4,
            &[vec![0, 1], vec![1, 2], vec![2, 3], vec![0, 3], vec![0, 1, 2]],
        )
        .unwrap();
        let train = InteractionSet::new(vec![
            Interaction::positive(0, 0),
            Interaction::positive(0, 4),
            Interaction::positive(1, 2),
            Interaction::positive(2, 1),
            Interaction::positive(2, 3),
            Interaction::negative(1, 0),
        ])
        .unwrap();
        let model = train_lsi_up(&items, &train, 2, 4).unwrap();
        let v = model.feature_latent();
        // explicit sum of feature-latent rows over each item's features
        for i in 0..5 {
            let (cols, vals) = items.row(i);
            for k in 0..model.dim() {
                let mut expected = 0.0;
                for (&c, &w) in cols.iter().zip(vals) {
                    expected += w * v[(c as usize, k)];
                }
                assert!((model.item_latent()[(i, k)] - expected).abs() < 1e-6);
            }
        }
    }
}
