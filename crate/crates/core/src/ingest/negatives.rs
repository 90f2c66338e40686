use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interactions::{Interaction, InteractionSet};

pub const DEFAULT_NEGATIVE_RATIO: usize = 3;

/// Draws `ratio` negatives per positive of each user, uniformly and without
/// replacement from the items the user has no positive for. Negatives
/// already present in `positives` are ignored; the result holds negatives
/// only. Users are processed in ascending id order and each user's sample
/// is sorted, so the output is a pure function of the inputs and `seed`.
pub fn sample_negatives(
    positives: &InteractionSet,
    n_items: usize,
    ratio: usize,
    seed: u64,
) -> Result<InteractionSet> {
    if positives.item_bound() > n_items {
        return Err(Error::validation(format!(
            "positives reference item {} but only {n_items} items exist",
            positives.item_bound() - 1
        )));
    }
    let mut by_user: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for x in positives.positives() {
        by_user.entry(x.user).or_default().push(x.item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (user, mut liked) in by_user {
        liked.sort_unstable();
        let wanted = ratio * liked.len();
        let available = n_items - liked.len();
        if wanted > available {
            return Err(Error::validation(format!(
                "user {user} needs {wanted} negatives but only {available} unseen items exist"
            )));
        }
        let mut drawn: Vec<u32> = index::sample(&mut rng, available, wanted)
            .into_iter()
            .map(|c| nth_unseen(&liked, c))
            .collect();
        drawn.sort_unstable();
        out.extend(drawn.into_iter().map(|i| Interaction::negative(user, i)));
    }
    Ok(InteractionSet::from_unique(out))
}

/// The `c`-th item id (0-based) that does not occur in sorted `liked`.
fn nth_unseen(liked: &[u32], c: usize) -> u32 {
    let mut item = c as u32;
    for &p in liked {
        if p <= item {
            item += 1;
        } else {
            break;
        }
    }
    item
}
