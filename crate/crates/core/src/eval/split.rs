//! Warm and cold-item train/validation/test splits.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interactions::{Interaction, InteractionSet};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
/// Share of the training pairs moved to the validation set.
pub const VALIDATION_FRACTION: f64 = 0.1;
pub const MIN_COLD_ITEMS: usize = 5;

// separate RNG streams so the validation carve-out does not shift the test draw
const TEST_STREAM: u64 = 0;
const VALIDATION_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Warm,
    ColdItem,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Warm => "warm",
            SplitKind::ColdItem => "cold",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warm" => Ok(SplitKind::Warm),
            "cold" | "cold_item" | "cold-item" => Ok(SplitKind::ColdItem),
            _ => Err(Error::validation(format!("unknown split `{s}` (expected warm or cold)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: InteractionSet,
    pub validation: InteractionSet,
    pub test: InteractionSet,
    pub kind: SplitKind,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn new(kind: SplitKind, data: &InteractionSet, fraction: f64, seed: u64) -> Result<DatasetSplit> {
        match kind {
            SplitKind::Warm => warm_split(data, fraction, seed),
            SplitKind::ColdItem => cold_item_split(data, fraction, seed),
        }
    }

    /// Training and validation pairs together.
    pub fn train_and_validation(&self) -> Result<InteractionSet> {
        self.train.union(&self.validation)
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::validation(format!("split fraction {fraction} not in [0, 1)")));
    }
    Ok(())
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Picks up to `target` pairs in a random order, skipping any pair whose
/// removal would leave its user or item without a remaining pair.
fn draw_keeping_coverage(pairs: &[Interaction], target: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut user_left: HashMap<u32, usize> = HashMap::new();
    let mut item_left: HashMap<u32, usize> = HashMap::new();
    for x in pairs {
        *user_left.entry(x.user).or_default() += 1;
        *item_left.entry(x.item).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);

    let mut taken = vec![false; pairs.len()];
    let mut count = 0;
    for k in order {
        if count == target {
            break;
        }
        let x = pairs[k];
        let (u, i) = (user_left[&x.user], item_left[&x.item]);
        if u > 1 && i > 1 {
            user_left.insert(x.user, u - 1);
            item_left.insert(x.item, i - 1);
            taken[k] = true;
            count += 1;
        }
    }
    taken
}

fn partition(pairs: &[Interaction], taken: &[bool]) -> (InteractionSet, InteractionSet) {
    let (mut kept, mut moved) = (Vec::new(), Vec::new());
    for (x, &t) in pairs.iter().zip(taken) {
        if t {
            moved.push(*x);
        } else {
            kept.push(*x);
        }
    }
    (InteractionSet::from_unique(kept), InteractionSet::from_unique(moved))
}

/// Moves about a tenth of `train` into a validation set while keeping every
/// training user and item represented. Falls short silently if the data are
/// too sparse.
fn carve_validation(train: InteractionSet, seed: u64) -> (InteractionSet, InteractionSet) {
    let target = (VALIDATION_FRACTION * train.len() as f64).round() as usize;
    let taken = draw_keeping_coverage(train.as_slice(), target, &mut rng(seed, VALIDATION_STREAM));
    partition(train.as_slice(), &taken)
}

/// Sends `round(test_fraction * n)` random pairs to the test set such that
/// every user and item keeps at least one training pair. Pairs that would
/// break that guarantee are skipped and the next random pair is tried.
pub fn warm_split(data: &InteractionSet, test_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    check_fraction(test_fraction)?;
    let target = (test_fraction * data.len() as f64).round() as usize;
    let taken = draw_keeping_coverage(data.as_slice(), target, &mut rng(seed, TEST_STREAM));
    let got = taken.iter().filter(|&&t| t).count();
    if got < target {
        return Err(Error::validation(format!(
            "only {got} of {target} test pairs can be held out while keeping every user and item in training"
        )));
    }
    let (train, test) = partition(data.as_slice(), &taken);
    let (train, validation) = carve_validation(train, seed);
    Ok(DatasetSplit {
        train,
        validation,
        test,
        kind: SplitKind::Warm,
        seed,
    })
}

/// Holds out `round(item_fraction * n_items)` random items, counting items
/// that occur in `data`; all their pairs form the test set.
pub fn cold_item_split(data: &InteractionSet, item_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    check_fraction(item_fraction)?;
    let items: Vec<u32> = data.iter().map(|x| x.item).collect::<BTreeSet<_>>().into_iter().collect();
    if items.len() < MIN_COLD_ITEMS {
        return Err(Error::validation(format!(
            "a cold-item split needs at least {MIN_COLD_ITEMS} items, got {}",
            items.len()
        )));
    }
    let n_held = (item_fraction * items.len() as f64).round() as usize;
    let held: BTreeSet<u32> = index::sample(&mut rng(seed, TEST_STREAM), items.len(), n_held)
        .into_iter()
        .map(|k| items[k])
        .collect();
    let taken: Vec<bool> = data.iter().map(|x| held.contains(&x.item)).collect();
    let (train, test) = partition(data.as_slice(), &taken);
    let (train, validation) = carve_validation(train, seed);
    Ok(DatasetSplit {
        train,
        validation,
        test,
        kind: SplitKind::ColdItem,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    fn grid(users: u32, items: u32) -> InteractionSet {
        let mut v = Vec::new();
        for u in 0..users {
            for i in 0..items {
                v.push(if (u + i) % 2 == 0 {
                    Interaction::positive(u, i)
                } else {
                    Interaction::negative(u, i)
                });
            }
        }
        InteractionSet::new(v).unwrap()
    }

    fn pairs(s: &InteractionSet) -> HashSet<(u32, u32)> {
        s.iter().map(|x| (x.user, x.item)).collect()
    }

    #[test]
    fn ten_pairs_two_to_test() {
        let data = grid(2, 5);
        let split = warm_split(&data, 0.2, 3).unwrap();
        assert_eq!(split.test.len(), 2);
        assert_eq!(split.train.len() + split.validation.len(), 8);
        assert_eq!(split.validation.len(), 1);
    }

    #[test]
    fn warm_test_entities_stay_in_train() {
        let data = grid(10, 12);
        let split = warm_split(&data, 0.2, 9).unwrap();
        let users: HashSet<u32> = split.train.iter().map(|x| x.user).collect();
        let items: HashSet<u32> = split.train.iter().map(|x| x.item).collect();
        assert!(split.test.iter().all(|x| users.contains(&x.user) && items.contains(&x.item)));
        assert!(split.validation.iter().all(|x| users.contains(&x.user) && items.contains(&x.item)));
    }

    #[test]
    fn unsatisfiable_warm_split() {
        // a perfect matching: every pair is the only one of its user and item
        let data = InteractionSet::new((0..10).map(|k| Interaction::positive(k, k)).collect()).unwrap();
        assert!(matches!(warm_split(&data, 0.2, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn cold_split_holds_out_whole_items() {
        let data = grid(6, 10);
        let split = cold_item_split(&data, 0.2, 4).unwrap();
        let test_items: HashSet<u32> = split.test.iter().map(|x| x.item).collect();
        assert_eq!(test_items.len(), 2);
        assert_eq!(split.test.len(), 12);
        assert!(split
            .train
            .iter()
            .chain(split.validation.iter())
            .all(|x| !test_items.contains(&x.item)));
    }

    #[test]
    fn cold_split_needs_five_items() {
        assert!(cold_item_split(&grid(3, 4), 0.2, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let data = grid(8, 9);
        assert_eq!(warm_split(&data, 0.2, 1).unwrap(), warm_split(&data, 0.2, 1).unwrap());
        assert_ne!(warm_split(&data, 0.2, 1).unwrap().test, warm_split(&data, 0.2, 2).unwrap().test);
        assert_eq!(cold_item_split(&data, 0.2, 5).unwrap(), cold_item_split(&data, 0.2, 5).unwrap());
    }

    #[test]
    fn split_names() {
        assert_eq!("cold".parse::<SplitKind>().unwrap(), SplitKind::ColdItem);
        assert_eq!(SplitKind::Warm.to_string(), "warm");
        assert!("hot".parse::<SplitKind>().is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_the_data(
            raw in prop::collection::btree_set((0u32..15, 0u32..15), 20..120),
            seed in any::<u64>(),
            cold in any::<bool>(),
        ) {
            let data = InteractionSet::new(raw.iter().map(|&(u, i)| Interaction::positive(u, i)).collect()).unwrap();
            let kind = if cold { SplitKind::ColdItem } else { SplitKind::Warm };
            let split = match DatasetSplit::new(kind, &data, 0.2, seed) {
                Ok(s) => s,
                // sparse draws can make the warm constraint or the item minimum unsatisfiable
                Err(_) => return Ok(()),
            };
            prop_assert_eq!(split.train.len() + split.validation.len() + split.test.len(), data.len());
            let (tr, va, te) = (pairs(&split.train), pairs(&split.validation), pairs(&split.test));
            prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
            let all: HashSet<_> = tr.union(&va).chain(te.iter()).copied().collect();
            prop_assert_eq!(all, pairs(&data));
            if cold {
                let train_items: HashSet<u32> = split.train.iter().chain(split.validation.iter()).map(|x| x.item).collect();
                prop_assert!(split.test.iter().all(|x| !train_items.contains(&x.item)));
            }
        }
    }
}
