//! Model parameters, feature-sum representations and the sigmoid predictor.
//!
//! A user (item) is represented by the sum of the embeddings of its features
//! and a bias equal to the sum of the feature biases. The predicted
//! probability of a positive interaction is
//! `sigmoid(q_u . p_i + b_u + b_i)`.
//!
//! Parameters are stored as `f32` (the on-disk format is 32-bit); all
//! arithmetic on them is carried out in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::mapping::{FeatureMapping, Side};
use crate::shared::SharedF32s;

/// Initial value of every Adagrad accumulator. Starting at one means the
/// first step of every parameter uses the full base learning rate.
pub const INITIAL_ACCUMULATOR: f32 = 1.0;

/// Numerically stable logistic function, kept strictly inside (0, 1).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Parameters attached to one side's features.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    pub(crate) embeddings: SharedF32s,
    pub(crate) biases: SharedF32s,
    pub(crate) embedding_accum: SharedF32s,
    pub(crate) bias_accum: SharedF32s,
}

impl FeatureTable {
    fn new(n_features: usize, dim: usize, rng: &mut impl Rng) -> Self {
        FeatureTable {
            embeddings: init_embeddings(n_features * dim, dim, rng).into(),
            biases: SharedF32s::filled(n_features, 0.0),
            embedding_accum: SharedF32s::filled(n_features * dim, INITIAL_ACCUMULATOR),
            bias_accum: SharedF32s::filled(n_features, INITIAL_ACCUMULATOR),
        }
    }

    pub(crate) fn from_raw(
        embeddings: Vec<f32>,
        biases: Vec<f32>,
        embedding_accum: Vec<f32>,
        bias_accum: Vec<f32>,
    ) -> Self {
        FeatureTable {
            embeddings: embeddings.into(),
            biases: biases.into(),
            embedding_accum: embedding_accum.into(),
            bias_accum: bias_accum.into(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.biases.len()
    }

    fn bits_eq(&self, other: &FeatureTable) -> bool {
        self.embeddings.bits_eq(&other.embeddings)
            && self.biases.bits_eq(&other.biases)
            && self.embedding_accum.bits_eq(&other.embedding_accum)
            && self.bias_accum.bits_eq(&other.bias_accum)
    }

    fn extended(&self, count: usize, dim: usize, rng: &mut impl Rng) -> Self {
        FeatureTable {
            embeddings: self.embeddings.extended(init_embeddings(count * dim, dim, rng)),
            biases: self.biases.extended(std::iter::repeat_n(0.0, count)),
            embedding_accum: self
                .embedding_accum
                .extended(std::iter::repeat_n(INITIAL_ACCUMULATOR, count * dim)),
            bias_accum: self
                .bias_accum
                .extended(std::iter::repeat_n(INITIAL_ACCUMULATOR, count)),
        }
    }
}

/// Embeddings are drawn uniformly from `[-0.5/d, 0.5/d]`.
fn init_embeddings(len: usize, dim: usize, rng: &mut impl Rng) -> Vec<f32> {
    let half = 0.5 / dim as f32;
    let dist = Uniform::new_inclusive(-half, half).expect("finite bounds");
    (0..len).map(|_| dist.sample(rng)).collect()
}

/// Latent representation of a single user or item.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub latent: Vec<f64>,
    pub bias: f64,
}

impl Representation {
    pub fn dot(&self, other: &Representation) -> f64 {
        self.latent.iter().zip(&other.latent).map(|(a, b)| a * b).sum()
    }
}

/// All trainable state: embeddings and biases for both sides, their Adagrad
/// accumulators and the number of completed epochs.
#[derive(Clone, Debug)]
pub struct ModelState {
    dim: usize,
    pub(crate) user: FeatureTable,
    pub(crate) item: FeatureTable,
    pub(crate) epoch: u64,
}

impl ModelState {
    pub fn new(
        dim: usize,
        n_user_features: usize,
        n_item_features: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("latent dimensionality must be positive"));
        }
        Ok(ModelState {
            dim,
            user: FeatureTable::new(n_user_features, dim, rng),
            item: FeatureTable::new(n_item_features, dim, rng),
            epoch: 0,
        })
    }

    /// Fresh model sized for `mapping`, initialised from `seed`.
    pub fn for_mapping(dim: usize, mapping: &FeatureMapping, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(
            dim,
            mapping.n_features(Side::User),
            mapping.n_features(Side::Item),
            &mut rng,
        )
    }

    /// Model with every embedding and bias set to zero.
    pub fn zeros(dim: usize, n_user_features: usize, n_item_features: usize) -> Result<Self> {
        let mut model = Self::new(dim, 0, 0, &mut ChaCha8Rng::seed_from_u64(0))?;
        let zero_table = |n: usize| {
            FeatureTable::from_raw(
                vec![0.0; n * dim],
                vec![0.0; n],
                vec![INITIAL_ACCUMULATOR; n * dim],
                vec![INITIAL_ACCUMULATOR; n],
            )
        };
        model.user = zero_table(n_user_features);
        model.item = zero_table(n_item_features);
        Ok(model)
    }

    pub(crate) fn from_tables(dim: usize, user: FeatureTable, item: FeatureTable, epoch: u64) -> Self {
        ModelState {
            dim,
            user,
            item,
            epoch,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of completed training epochs.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn table(&self, side: Side) -> &FeatureTable {
        match side {
            Side::User => &self.user,
            Side::Item => &self.item,
        }
    }

    pub fn n_features(&self, side: Side) -> usize {
        self.table(side).n_features()
    }

    /// Number of trainable scalars: one embedding row plus one bias per feature.
    pub fn parameter_count(&self) -> usize {
        (self.n_features(Side::User) + self.n_features(Side::Item)) * (self.dim + 1)
    }

    fn check_feature(&self, side: Side, feature: usize) -> Result<()> {
        let len = self.n_features(side);
        if feature >= len {
            return Err(Error::FeatureIndex {
                side,
                index: feature,
                len,
            });
        }
        Ok(())
    }

    pub fn embedding(&self, side: Side, feature: usize) -> Result<Vec<f32>> {
        self.check_feature(side, feature)?;
        let table = self.table(side);
        let start = feature * self.dim;
        Ok((start..start + self.dim).map(|i| table.embeddings.get(i)).collect())
    }

    pub fn set_embedding(&mut self, side: Side, feature: usize, values: &[f32]) -> Result<()> {
        self.check_feature(side, feature)?;
        if values.len() != self.dim {
            return Err(Error::validation(format!(
                "embedding has length {}, model dimension is {}",
                values.len(),
                self.dim
            )));
        }
        let table = self.table(side);
        let start = feature * self.dim;
        for (k, &v) in values.iter().enumerate() {
            table.embeddings.set(start + k, v);
        }
        Ok(())
    }

    pub fn bias(&self, side: Side, feature: usize) -> Result<f32> {
        self.check_feature(side, feature)?;
        Ok(self.table(side).biases.get(feature))
    }

    pub fn set_bias(&mut self, side: Side, feature: usize, value: f32) -> Result<()> {
        self.check_feature(side, feature)?;
        self.table(side).biases.set(feature, value);
        Ok(())
    }

    pub fn embedding_accumulator(&self, side: Side, feature: usize) -> Result<Vec<f32>> {
        self.check_feature(side, feature)?;
        let table = self.table(side);
        let start = feature * self.dim;
        Ok((start..start + self.dim)
            .map(|i| table.embedding_accum.get(i))
            .collect())
    }

    pub fn bias_accumulator(&self, side: Side, feature: usize) -> Result<f32> {
        self.check_feature(side, feature)?;
        Ok(self.table(side).bias_accum.get(feature))
    }

    /// Embedding matrix of one side, row-major, one row per feature.
    pub fn embedding_rows(&self, side: Side) -> Vec<Vec<f32>> {
        (0..self.n_features(side))
            .map(|f| self.embedding(side, f).expect("index in range"))
            .collect()
    }

    /// Validates a feature set for `side`.
    pub(crate) fn check_features(&self, side: Side, features: &[u32]) -> Result<()> {
        if features.is_empty() {
            return Err(Error::validation(format!("empty {side} feature set")));
        }
        let len = self.n_features(side);
        match features.iter().find(|&&f| f as usize >= len) {
            Some(&bad) => Err(Error::FeatureIndex {
                side,
                index: bad as usize,
                len,
            }),
            None => Ok(()),
        }
    }

    /// Sums the embeddings of `features` into `latent` and returns the summed
    /// bias. Indices must already be validated.
    #[inline]
    pub(crate) fn combine_unchecked(&self, side: Side, features: &[u32], latent: &mut [f64]) -> f64 {
        let table = self.table(side);
        latent.iter_mut().for_each(|x| *x = 0.0);
        let mut bias = 0.0;
        for &f in features {
            let start = f as usize * self.dim;
            for (k, x) in latent.iter_mut().enumerate() {
                *x += table.embeddings.get(start + k) as f64;
            }
            bias += table.biases.get(f as usize) as f64;
        }
        bias
    }

    /// Representation of an entity described by `features`.
    pub fn combine(&self, side: Side, features: &[u32]) -> Result<Representation> {
        self.check_features(side, features)?;
        let mut latent = vec![0.0; self.dim];
        let bias = self.combine_unchecked(side, features, &mut latent);
        Ok(Representation { latent, bias })
    }

    /// Raw score `q_u . p_i + b_u + b_i` before the link function.
    pub fn score(&self, user_features: &[u32], item_features: &[u32]) -> Result<f64> {
        let user = self.combine(Side::User, user_features)?;
        let item = self.combine(Side::Item, item_features)?;
        Ok(user.dot(&item) + user.bias + item.bias)
    }

    /// Probability of a positive interaction.
    pub fn predict(&self, user_features: &[u32], item_features: &[u32]) -> Result<f64> {
        self.score(user_features, item_features).map(sigmoid)
    }

    /// Appends `count` freshly initialised features to `side`. Existing
    /// parameters and accumulators are copied bit for bit.
    pub fn append_features(&mut self, side: Side, count: usize, rng: &mut impl Rng) {
        let dim = self.dim;
        match side {
            Side::User => self.user = self.user.extended(count, dim, rng),
            Side::Item => self.item = self.item.extended(count, dim, rng),
        }
    }

    /// True when every parameter, accumulator and the epoch counter match
    /// bit for bit.
    pub fn bits_eq(&self, other: &ModelState) -> bool {
        self.dim == other.dim
            && self.epoch == other.epoch
            && self.user.bits_eq(&other.user)
            && self.item.bits_eq(&other.item)
    }

    /// True when no parameter is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        [&self.user, &self.item].iter().all(|t| {
            t.embeddings.to_vec().iter().all(|v| v.is_finite())
                && t.biases.to_vec().iter().all(|v| v.is_finite())
        })
    }
}

/// Representations of every user and item in a mapping, computed once so
/// that scoring a pair is a single dot product.
#[derive(Clone, Debug)]
pub struct EntityRepresentations {
    dim: usize,
    user_latent: Vec<f64>,
    user_bias: Vec<f64>,
    item_latent: Vec<f64>,
    item_bias: Vec<f64>,
}

impl EntityRepresentations {
    pub fn n_users(&self) -> usize {
        self.user_bias.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_bias.len()
    }

    pub fn user(&self, user: u32) -> Option<&[f64]> {
        let u = user as usize;
        (u < self.n_users()).then(|| &self.user_latent[u * self.dim..(u + 1) * self.dim])
    }

    pub fn item(&self, item: u32) -> Option<&[f64]> {
        let i = item as usize;
        (i < self.n_items()).then(|| &self.item_latent[i * self.dim..(i + 1) * self.dim])
    }

    /// Raw score of a (user, item) pair.
    pub fn score(&self, user: u32, item: u32) -> Result<f64> {
        let q = self.user(user).ok_or(Error::EntityIndex {
            side: Side::User,
            id: user as usize,
            len: self.n_users(),
        })?;
        let p = self.item(item).ok_or(Error::EntityIndex {
            side: Side::Item,
            id: item as usize,
            len: self.n_items(),
        })?;
        let dot: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
        Ok(dot + self.user_bias[user as usize] + self.item_bias[item as usize])
    }
}

impl ModelState {
    /// Combines the features of every user and item in `mapping`.
    pub fn representations(&self, mapping: &FeatureMapping) -> Result<EntityRepresentations> {
        let side_reps = |side: Side| -> Result<(Vec<f64>, Vec<f64>)> {
            let n = mapping.n_entities(side);
            let mut latent = vec![0.0; n * self.dim];
            let mut bias = Vec::with_capacity(n);
            for (e, chunk) in latent.chunks_exact_mut(self.dim).enumerate() {
                let features = mapping.entity_features(side, e as u32)?;
                self.check_features(side, features)?;
                bias.push(self.combine_unchecked(side, features, chunk));
            }
            Ok((latent, bias))
        };
        let (user_latent, user_bias) = side_reps(Side::User)?;
        let (item_latent, item_bias) = side_reps(Side::Item)?;
        Ok(EntityRepresentations {
            dim: self.dim,
            user_latent,
            user_bias,
            item_latent,
            item_bias,
        })
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn two_by_two() -> ModelState {
        let mut m = ModelState::zeros(2, 2, 2).unwrap();
        m.set_embedding(Side::User, 0, &[1.0, 0.0]).unwrap();
        m.set_embedding(Side::User, 1, &[0.0, 1.0]).unwrap();
        m.set_bias(Side::User, 0, 0.5).unwrap();
        m.set_bias(Side::User, 1, -0.5).unwrap();
        m
    }

    #[test]
    fn combine_single_feature() {
        let m = two_by_two();
        let r = m.combine(Side::User, &[0]).unwrap();
        assert_eq!(r.latent, vec![1.0, 0.0]);
        assert_eq!(r.bias, 0.5);
    }

    #[test]
    fn combine_two_features() {
        let m = two_by_two();
        let r = m.combine(Side::User, &[0, 1]).unwrap();
        assert_eq!(r.latent, vec![1.0, 1.0]);
        assert_eq!(r.bias, 0.0);
    }

    #[test]
    fn combine_zero_tables() {
        let m = ModelState::zeros(3, 4, 4).unwrap();
        let r = m.combine(Side::Item, &[0, 2, 3]).unwrap();
        assert_eq!(r.latent, vec![0.0; 3]);
        assert_eq!(r.bias, 0.0);
    }

    #[test]
    fn combine_errors() {
        let m = ModelState::zeros(2, 2, 3).unwrap();
        assert!(matches!(m.combine(Side::User, &[]), Err(Error::Validation(_))));
        assert!(matches!(
            m.combine(Side::Item, &[1, 3]),
            Err(Error::FeatureIndex { side: Side::Item, index: 3, len: 3 })
        ));
    }

    #[test]
    fn predict_examples() {
        let zero = ModelState::zeros(2, 1, 1).unwrap();
        assert_eq!(zero.predict(&[0], &[0]).unwrap(), 0.5);

        let mut m = ModelState::zeros(2, 1, 1).unwrap();
        m.set_embedding(Side::User, 0, &[1.0, 0.0]).unwrap();
        m.set_embedding(Side::Item, 0, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(m.predict(&[0], &[0]).unwrap(), 0.7310586, epsilon = 1e-7);

        m.set_embedding(Side::User, 0, &[1.0, 1.0]).unwrap();
        m.set_embedding(Side::Item, 0, &[1.0, 1.0]).unwrap();
        m.set_bias(Side::User, 0, 0.5).unwrap();
        assert_abs_diff_eq!(m.predict(&[0], &[0]).unwrap(), 0.9241418, epsilon = 1e-7);
    }

    #[test]
    fn sigmoid_stays_inside_unit_interval() {
        for x in [-1000.0, -500.0, -40.0, 0.0, 40.0, 500.0, 1000.0] {
            let p = sigmoid(x);
            assert!(p > 0.0 && p < 1.0, "sigmoid({x}) = {p}");
        }
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-500.0) < sigmoid(-499.0));
    }

    #[test]
    fn init_is_small_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ModelState::new(8, 10, 20, &mut rng).unwrap();
        for side in [Side::User, Side::Item] {
            for row in m.embedding_rows(side) {
                assert!(row.iter().all(|v| v.abs() <= 0.5 / 8.0));
            }
            assert_eq!(m.bias_accumulator(side, 0).unwrap(), 1.0);
            assert_eq!(m.bias(side, 0).unwrap(), 0.0);
        }
        assert_eq!(m.parameter_count(), 30 * 9);
        assert!(ModelState::new(0, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn append_preserves_existing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = ModelState::new(4, 3, 3, &mut rng).unwrap();
        let before = m.clone();
        m.append_features(Side::Item, 2, &mut rng);
        assert_eq!(m.n_features(Side::Item), 5);
        assert!(m.user.bits_eq(&before.user));
        for f in 0..3 {
            let a = m.embedding(Side::Item, f).unwrap();
            let b = before.embedding(Side::Item, f).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(m.embedding_accumulator(Side::Item, 4).unwrap(), vec![1.0; 4]);
    }
}
