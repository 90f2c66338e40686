//! Comparison models: plain matrix factorisation (the hybrid model with
//! indicator features only), LSI-LR and LSI-UP.

pub mod lsi_lr;
pub mod lsi_up;
pub mod sparse;
pub mod svd;

use crate::error::{Error, Result};
use crate::mapping::{FeatureMapping, Side, Vocabulary};

pub use lsi_lr::{train_lsi_lr, LsiConfig, LsiLr, DEFAULT_L2};
pub use lsi_up::{train_lsi_up, LsiUp};
pub use sparse::SparseMatrix;
pub use svd::{truncated_svd, LatentFactorization};

/// Mapping in which every user and every item has exactly one private
/// feature. Training the hybrid model on it gives standard biased MF.
pub fn make_indicator_mapping(n_users: usize, n_items: usize) -> Result<FeatureMapping> {
    if n_users == 0 || n_items == 0 {
        return Err(Error::validation("indicator mapping needs at least one user and one item"));
    }
    let users: Vocabulary = (0..n_users).map(|u| format!("user:{u}")).collect();
    let items: Vocabulary = (0..n_items).map(|i| format!("item:{i}")).collect();
    let mut mapping = FeatureMapping::new(users, items);
    for u in 0..n_users {
        mapping.add_entity(Side::User, &[u as u32])?;
    }
    for i in 0..n_items {
        mapping.add_entity(Side::Item, &[i as u32])?;
    }
    Ok(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelState;

    #[test]
    fn indicator_mapping_shape() {
        let m = make_indicator_mapping(2, 3).unwrap();
        assert_eq!(m.n_features(Side::User), 2);
        assert_eq!(m.n_features(Side::Item), 3);
        for i in 0..3 {
            assert_eq!(m.item_features(i).unwrap(), &[i]);
        }
        assert!(make_indicator_mapping(0, 3).is_err());
    }

    #[test]
    fn no_feature_is_shared() {
        let m = make_indicator_mapping(5, 7).unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..7 {
            for &f in m.item_features(i).unwrap() {
                assert!(seen.insert(f));
            }
        }
    }

    #[test]
    fn mf_parameter_count() {
        let m = make_indicator_mapping(13, 29).unwrap();
        let model = ModelState::for_mapping(16, &m, 0).unwrap();
        assert_eq!(model.parameter_count(), (13 + 29) * (16 + 1));
    }
}
