//! Sign random projections: bit `j` of a code is set when the vector lies
//! on the non-negative side of hyperplane `j`. For two vectors at angle
//! `theta`, each bit differs with probability `theta / pi`.
//!
//! The index buckets points by their full code; a query is answered from
//! its own bucket only (no Hamming-radius probing).

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{cosine_similarity, dot, norm, rank};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HyperplaneSet {
    dim: usize,
    normals: Vec<Vec<f64>>,
}

impl HyperplaneSet {
    /// `k` normals with standard normal coordinates.
    pub fn new(k: usize, dim: usize, seed: u64) -> Result<HyperplaneSet> {
        if k == 0 || dim == 0 {
            return Err(Error::validation("need at least one hyperplane of dimension at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normals = (0..k)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if norm(&v) > 0.0 {
                    break v;
                }
            })
            .collect();
        Ok(HyperplaneSet { dim, normals })
    }

    pub fn from_normals(normals: Vec<Vec<f64>>) -> Result<HyperplaneSet> {
        let dim = normals.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::validation("need at least one non-empty hyperplane"));
        }
        if normals.iter().any(|n| n.len() != dim || norm(n) == 0.0) {
            return Err(Error::validation("hyperplane normals must be non-zero and of equal length"));
        }
        Ok(HyperplaneSet { dim, normals })
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code(&self, v: &[f64]) -> Result<LshCode> {
        if v.len() != self.dim {
            return Err(Error::validation(format!(
                "vector of length {} hashed with {}-dimensional hyperplanes",
                v.len(),
                self.dim
            )));
        }
        let mut code = LshCode {
            words: vec![0; self.normals.len().div_ceil(64)],
            len: self.normals.len(),
        };
        for (j, n) in self.normals.iter().enumerate() {
            if dot(v, n) >= 0.0 {
                code.words[j / 64] |= 1 << (j % 64);
            }
        }
        Ok(code)
    }
}

pub fn lsh_code(v: &[f64], hyperplanes: &HyperplaneSet) -> Result<LshCode> {
    hyperplanes.code(v)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LshCode {
    words: Vec<u64>,
    len: usize,
}

impl LshCode {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, j: usize) -> bool {
        assert!(j < self.len, "bit {j} of a {}-bit code", self.len);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    /// Number of differing bits. Both codes must have the same length.
    pub fn hamming(&self, other: &LshCode) -> usize {
        assert_eq!(self.len, other.len, "codes of different length");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

/// Points bucketed by their LSH code.
#[derive(Clone, Debug)]
pub struct LshIndex {
    hyperplanes: HyperplaneSet,
    points: Vec<Vec<f64>>,
    buckets: HashMap<LshCode, Vec<usize>>,
}

impl LshIndex {
    pub fn build(points: Vec<Vec<f64>>, hyperplanes: HyperplaneSet) -> Result<LshIndex> {
        let mut buckets: HashMap<LshCode, Vec<usize>> = HashMap::new();
        for (id, p) in points.iter().enumerate() {
            buckets.entry(hyperplanes.code(p)?).or_default().push(id);
        }
        Ok(LshIndex {
            hyperplanes,
            points,
            buckets,
        })
    }

    pub fn n_buckets(&self) -> usize {
        self.buckets.len()
    }

    /// Up to `k` members of the query's bucket, ranked by exact cosine.
    pub fn query(&self, q: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        let code = self.hyperplanes.code(q)?;
        let candidates = self.buckets.get(&code).map_or(&[][..], Vec::as_slice);
        let scored = candidates
            .iter()
            .map(|&id| Ok((id, cosine_similarity(q, &self.points[id])?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(rank(scored, k))
    }
}
