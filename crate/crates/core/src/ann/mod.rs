//! Similarity search over embedding tables: exact cosine top-k, sign
//! random-projection hashing and random-projection trees.

pub mod lsh;
pub mod rptree;

use crate::error::{Error, Result};

pub use lsh::{lsh_code, HyperplaneSet, LshCode, LshIndex};
pub use rptree::{RpForest, RpTree};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a . b / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "vectors of length {} and {} cannot be compared",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::validation("cosine similarity of a zero vector is undefined"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Orders by similarity (descending), then id (ascending).
pub(crate) fn rank(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// The `k` rows of `table` most cosine-similar to row `query`, excluding
/// `query` itself.
pub fn top_k_exact(table: &[Vec<f64>], query: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let q = table
        .get(query)
        .ok_or_else(|| Error::validation(format!("query id {query} not in a table of {} rows", table.len())))?;
    if k >= table.len() {
        return Err(Error::validation(format!(
            "k = {k} but only {} other rows exist",
            table.len() - 1
        )));
    }
    top_k_vector(table, q, k, Some(query))
}

/// The `k` rows of `table` most cosine-similar to `query`, optionally
/// skipping one row id.
pub fn top_k_vector(table: &[Vec<f64>], query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<(usize, f64)>> {
    let scored = table
        .iter()
        .enumerate()
        .filter(|&(id, _)| Some(id) != exclude)
        .map(|(id, row)| Ok((id, cosine_similarity(query, row)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank(scored, k))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, -2.0], &[-1.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn duplicate_wins() {
        let table = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let top = top_k_exact(&table, 0, 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, 1);
    }

    #[test]
    fn all_others_sorted() {
        let table = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.1]];
        let ids: Vec<usize> = top_k_exact(&table, 0, 3).unwrap().iter().map(|r| r.0).collect();
        assert_eq!(ids, vec![2, 1, 3]);
        assert!(top_k_exact(&table, 0, 4).is_err());
        assert!(top_k_exact(&table, 4, 1).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let table = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0], vec![0.0, 2.0]];
        let ids: Vec<usize> = top_k_exact(&table, 0, 3).unwrap().iter().map(|r| r.0).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    proptest! {
        #[test]
        fn results_totally_ordered(
            table in prop::collection::vec(prop::collection::vec(-3i8..3, 3), 2..30),
            k in 1usize..5,
        ) {
            // small integer coordinates produce plenty of exact ties
            let table: Vec<Vec<f64>> = table
                .into_iter()
                .map(|r| r.into_iter().map(f64::from).collect::<Vec<_>>())
                .filter(|r| r.iter().any(|&x| x != 0.0))
                .collect();
            prop_assume!(table.len() > k);
            let top = top_k_exact(&table, 0, k).unwrap();
            prop_assert_eq!(top.len(), k);
            for w in top.windows(2) {
                prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
            }
            prop_assert!(top.iter().all(|r| r.0 != 0));
        }
    }
}
