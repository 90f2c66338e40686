//! Random-projection trees. Each internal node projects its points onto a
//! random direction and cuts at the median projection, so the two children
//! receive `ceil(n/2)` and `floor(n/2)` points.
//!
//! Points are ordered by `(projection, id)` and the first half goes left;
//! the threshold is the largest projection on the left. A query whose
//! projection equals the threshold descends into both children, so every
//! indexed point reaches its own leaf.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{cosine_similarity, dot, rank};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Node {
    Split {
        normal: Vec<f64>,
        threshold: f64,
        left: usize,
        right: usize,
        sizes: (usize, usize),
    },
    Leaf(Vec<u32>),
}

#[derive(Clone, Debug)]
pub struct RpTree {
    dim: usize,
    leaf_capacity: usize,
    nodes: Vec<Node>,
}

fn check_points(points: &[Vec<f64>], leaf_capacity: usize) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::validation("cannot index an empty point set"));
    }
    if leaf_capacity == 0 {
        return Err(Error::validation("leaf capacity must be at least 1"));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::validation("points must be non-empty vectors of equal length"));
    }
    if points.len() > u32::MAX as usize {
        return Err(Error::validation("too many points"));
    }
    Ok(dim)
}

impl RpTree {
    pub fn build(points: &[Vec<f64>], leaf_capacity: usize, seed: u64) -> Result<RpTree> {
        Self::build_with(points, leaf_capacity, ChaCha8Rng::seed_from_u64(seed))
    }

    fn build_with(points: &[Vec<f64>], leaf_capacity: usize, mut rng: ChaCha8Rng) -> Result<RpTree> {
        let dim = check_points(points, leaf_capacity)?;
        let mut nodes = vec![Node::Leaf(Vec::new())];
        // (node slot, member ids); depth-first so the RNG draw order is fixed
        let mut stack: Vec<(usize, Vec<u32>)> = vec![(0, (0..points.len() as u32).collect())];
        while let Some((slot, ids)) = stack.pop() {
            if ids.len() <= leaf_capacity {
                nodes[slot] = Node::Leaf(ids);
                continue;
            }
            let normal: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut projected: Vec<(f64, u32)> = ids
                .iter()
                .map(|&id| (dot(&points[id as usize], &normal), id))
                .collect();
            projected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let n_left = ids.len().div_ceil(2);
            let threshold = projected[n_left - 1].0;
            let left_ids: Vec<u32> = projected[..n_left].iter().map(|p| p.1).collect();
            let right_ids: Vec<u32> = projected[n_left..].iter().map(|p| p.1).collect();

            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf(Vec::new()));
            nodes.push(Node::Leaf(Vec::new()));
            nodes[slot] = Node::Split {
                normal,
                threshold,
                left,
                right,
                sizes: (left_ids.len(), right_ids.len()),
            };
            stack.push((right, right_ids));
            stack.push((left, left_ids));
        }
        Ok(RpTree {
            dim,
            leaf_capacity,
            nodes,
        })
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn leaves(&self) -> Vec<&[u32]> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(ids) => Some(ids.as_slice()),
                Node::Split { .. } => None,
            })
            .collect()
    }

    /// `(left, right)` point counts of every internal node.
    pub fn split_sizes(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { sizes, .. } => Some(*sizes),
                Node::Leaf(_) => None,
            })
            .collect()
    }

    /// Ids in every leaf the query reaches.
    pub fn candidates(&self, q: &[f64]) -> Result<Vec<u32>> {
        if q.len() != self.dim {
            return Err(Error::validation(format!(
                "query of length {} against a {}-dimensional tree",
                q.len(),
                self.dim
            )));
        }
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(k) = stack.pop() {
            match &self.nodes[k] {
                Node::Leaf(ids) => out.extend_from_slice(ids),
                Node::Split {
                    normal,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let p = dot(q, normal);
                    if p <= *threshold {
                        stack.push(*left);
                    }
                    if p >= *threshold {
                        stack.push(*right);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Several independently seeded trees over the same points. Queries take
/// the union of the leaves reached in every tree and rerank it by exact
/// cosine similarity.
#[derive(Clone, Debug)]
pub struct RpForest {
    points: Vec<Vec<f64>>,
    trees: Vec<RpTree>,
}

impl RpForest {
    pub fn build(points: Vec<Vec<f64>>, n_trees: usize, leaf_capacity: usize, seed: u64) -> Result<RpForest> {
        if n_trees == 0 {
            return Err(Error::validation("a forest needs at least one tree"));
        }
        check_points(&points, leaf_capacity)?;
        let trees = (0..n_trees as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t);
                RpTree::build_with(&points, leaf_capacity, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RpForest { points, trees })
    }

    pub fn trees(&self) -> &[RpTree] {
        &self.trees
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Deduplicated candidate ids from all trees, ascending.
    pub fn candidates(&self, q: &[f64]) -> Result<Vec<u32>> {
        let mut all = Vec::new();
        for t in &self.trees {
            all.extend(t.candidates(q)?);
        }
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }

    /// Approximate top-`k` by cosine similarity, optionally skipping one id.
    pub fn query(&self, q: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<(usize, f64)>> {
        let scored = self
            .candidates(q)?
            .into_iter()
            .map(|id| id as usize)
            .filter(|&id| Some(id) != exclude)
            .map(|id| Ok((id, cosine_similarity(q, &self.points[id])?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(rank(scored, k))
    }
}
