//! Mean per-user ROC AUC.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::interactions::InteractionSet;

/// AUC of one user's scores: the probability that a random positive is
/// scored above a random negative, ties counting one half.
///
/// Returns `None` unless there is at least one positive and one negative.
/// Computed from tie-averaged ranks (Mann-Whitney U) in `O(n log n)`.
pub fn auc(scored: &mut [(f64, bool)]) -> Option<f64> {
    let n_pos = scored.iter().filter(|(_, p)| *p).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < scored.len() {
        let mut end = start + 1;
        while end < scored.len() && scored[end].0 == scored[start].0 {
            end += 1;
        }
        // ranks are 1-based; the tied block occupies ranks start+1 ..= end
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_block = scored[start..end].iter().filter(|(_, p)| *p).count();
        pos_rank_sum += avg_rank * pos_in_block as f64;
        start = end;
    }

    let n_pos = n_pos as f64;
    let u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Some(u / (n_pos * n_neg as f64))
}

/// AUC per user that has both a positive and a negative in `test`, keyed by
/// user id. `scores[k]` is the score of the `k`-th test interaction.
pub fn per_user_auc(scores: &[f64], test: &InteractionSet) -> Result<BTreeMap<u32, f64>> {
    if scores.len() != test.len() {
        return Err(Error::validation(format!(
            "{} scores for {} test interactions",
            scores.len(),
            test.len()
        )));
    }
    if let Some(k) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::validation(format!("score {k} is NaN")));
    }

    let mut by_user: BTreeMap<u32, Vec<(f64, bool)>> = BTreeMap::new();
    for (x, &s) in test.iter().zip(scores) {
        by_user.entry(x.user).or_default().push((s, x.label.is_positive()));
    }
    Ok(by_user
        .into_iter()
        .filter_map(|(user, mut scored)| auc(&mut scored).map(|a| (user, a)))
        .collect())
}

/// Unweighted mean of the per-user AUCs. Users whose test data is all one
/// class are left out.
pub fn mean_auc(scores: &[f64], test: &InteractionSet) -> Result<f64> {
    let per_user = per_user_auc(scores, test)?;
    if per_user.is_empty() {
        return Err(Error::validation(
            "no test user has both a positive and a negative interaction",
        ));
    }
    Ok(per_user.values().sum::<f64>() / per_user.len() as f64)
}
