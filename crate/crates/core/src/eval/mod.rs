//! Splits, metrics and experiment drivers.

pub mod auc;
pub mod experiment;
pub mod split;
pub mod synth;

use rayon::prelude::*;

use crate::error::Result;
use crate::interactions::InteractionSet;
use crate::model::EntityRepresentations;

pub use auc::{mean_auc, per_user_auc};
pub use experiment::{
    dimension_sweep, mean_std, run_experiment, run_split, write_results_table, write_sweep_table,
    ExperimentConfig, ExperimentReport, SweepRow,
};
pub use split::{cold_item_split, warm_split, DatasetSplit, SplitKind};
pub use synth::{SyntheticConfig, SyntheticData};

/// Anything that assigns a ranking score to a (user, item) pair.
pub trait Scorer: Sync {
    fn score(&self, user: u32, item: u32) -> Result<f64>;
}

impl Scorer for EntityRepresentations {
    fn score(&self, user: u32, item: u32) -> Result<f64> {
        EntityRepresentations::score(self, user, item)
    }
}

/// Scores every interaction of `test`, in order.
pub fn score_all<S: Scorer + ?Sized>(scorer: &S, test: &InteractionSet) -> Result<Vec<f64>> {
    test.as_slice()
        .par_iter()
        .map(|x| scorer.score(x.user, x.item))
        .collect()
}

/// Mean per-user AUC of `scorer` on `test`.
pub fn evaluate<S: Scorer + ?Sized>(scorer: &S, test: &InteractionSet) -> Result<f64> {
    mean_auc(&score_all(scorer, test)?, test)
}
