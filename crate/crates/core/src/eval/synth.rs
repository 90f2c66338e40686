//! Synthetic datasets with a planted latent structure in which item
//! metadata fully determines preference.
//!
//! Tags are split into groups. Each group has a random centroid in the
//! planted latent space and every tag sits near its group centroid. An item
//! draws one group and a few distinct tags from it; its latent vector is the
//! sum of its tags' vectors. Users have Gaussian taste vectors and like an
//! item exactly when the dot product with its latent vector is positive.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, DatasetBuilder};
use crate::interactions::Label;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_tags: usize,
    pub n_groups: usize,
    pub tags_per_item: usize,
    /// Dimension of the planted latent space.
    pub latent_dim: usize,
    pub interactions_per_user: usize,
    /// Standard deviation of a tag around its group centroid.
    pub tag_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 2000,
            n_items: 500,
            n_tags: 50,
            n_groups: 5,
            tags_per_item: 3,
            latent_dim: 8,
            interactions_per_user: 20,
            tag_noise: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("n_tags", self.n_tags),
            ("n_groups", self.n_groups),
            ("tags_per_item", self.tags_per_item),
            ("latent_dim", self.latent_dim),
            ("interactions_per_user", self.interactions_per_user),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::validation(format!("{name} must be positive")));
        }
        if self.n_tags % self.n_groups != 0 {
            return Err(Error::validation("n_tags must be a multiple of n_groups"));
        }
        if self.tags_per_item > self.n_tags / self.n_groups {
            return Err(Error::validation("tags_per_item exceeds the group size"));
        }
        if self.interactions_per_user > self.n_items {
            return Err(Error::validation("interactions_per_user exceeds n_items"));
        }
        if !(self.tag_noise >= 0.0 && self.tag_noise.is_finite()) {
            return Err(Error::validation("tag_noise must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticData> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.latent_dim;
        let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(rng)).collect() };

        let group_size = self.n_tags / self.n_groups;
        let tag_name = |t: usize| format!("g{}t{}", t / group_size, t % group_size);
        let centroids: Vec<Vec<f64>> = (0..self.n_groups).map(|_| gaussian(&mut rng)).collect();
        let tag_latent: Vec<Vec<f64>> = (0..self.n_tags)
            .map(|t| {
                let noise = gaussian(&mut rng);
                centroids[t / group_size]
                    .iter()
                    .zip(noise)
                    .map(|(c, n)| c + self.tag_noise * n)
                    .collect()
            })
            .collect();

        let mut builder = DatasetBuilder::new();
        let mut item_latent = Vec::with_capacity(self.n_items);
        for i in 0..self.n_items {
            let name = format!("i{i}");
            let group = rng.random_range(0..self.n_groups);
            let mut tags: Vec<usize> = index::sample(&mut rng, group_size, self.tags_per_item)
                .into_iter()
                .map(|k| group * group_size + k)
                .collect();
            tags.sort_unstable();
            let mut latent = vec![0.0; d];
            for &t in &tags {
                builder.tag(&name, &tag_name(t));
                latent.iter_mut().zip(&tag_latent[t]).for_each(|(l, x)| *l += x);
            }
            item_latent.push(latent);
        }

        for u in 0..self.n_users {
            let name = format!("u{u}");
            let taste = gaussian(&mut rng);
            let mut items: Vec<usize> = index::sample(&mut rng, self.n_items, self.interactions_per_user).into_vec();
            items.sort_unstable();
            for i in items {
                let s: f64 = taste.iter().zip(&item_latent[i]).map(|(a, b)| a * b).sum();
                let label = if s > 0.0 { Label::Positive } else { Label::Negative };
                builder.interaction(&name, &format!("i{i}"), label);
            }
        }

        let tag_groups = (0..self.n_groups)
            .map(|g| (0..group_size).map(|k| tag_name(g * group_size + k)).collect())
            .collect();
        Ok(SyntheticData {
            dataset: builder.build()?,
            tag_groups,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Tag names of each planted group.
    pub tag_groups: Vec<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_users: 50,
            n_items: 40,
            interactions_per_user: 10,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn shape() {
        let data = small().generate().unwrap();
        let d = &data.dataset;
        assert_eq!(d.n_users(), 50);
        assert_eq!(d.n_items(), 40);
        assert_eq!(d.interactions.len(), 500);
        assert_eq!(data.tag_groups.len(), 5);
        assert!(data.tag_groups.iter().all(|g| g.len() == 10));
        for tags in &d.item_tags {
            assert_eq!(tags.len(), 3);
            // all from one group
            let group = &tags[0][..tags[0].find('t').unwrap()];
            assert!(tags.iter().all(|t| t.starts_with(group)));
        }
    }

    #[test]
    fn both_labels_occur() {
        let d = small().generate().unwrap().dataset;
        let pos = d.interactions.positives().count();
        assert!(pos > 100 && pos < 400, "{pos}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(small().generate().unwrap(), small().generate().unwrap());
        let other = SyntheticConfig { seed: 1, ..small() }.generate().unwrap();
        assert_ne!(other, small().generate().unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SyntheticConfig { n_tags: 51, ..small() }.generate().is_err());
        assert!(SyntheticConfig { tags_per_item: 11, ..small() }.generate().is_err());
        assert!(SyntheticConfig { interactions_per_user: 41, ..small() }.generate().is_err());
    }
}
