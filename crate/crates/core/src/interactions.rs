use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// 1.0 for positives, 0.0 for negatives.
    pub fn target(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub label: Label,
}

impl Interaction {
    pub fn new(user: u32, item: u32, label: Label) -> Self {
        Interaction { user, item, label }
    }

    pub fn positive(user: u32, item: u32) -> Self {
        Self::new(user, item, Label::Positive)
    }

    pub fn negative(user: u32, item: u32) -> Self {
        Self::new(user, item, Label::Negative)
    }
}

/// Labelled user-item pairs. Each (user, item) pair appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionSet {
    interactions: Vec<Interaction>,
}

impl InteractionSet {
    /// Builds a set, dropping exact duplicates. A pair carrying both labels
    /// is rejected.
    pub fn new(interactions: Vec<Interaction>) -> Result<Self> {
        let mut seen: HashMap<(u32, u32), Label> = HashMap::with_capacity(interactions.len());
        let mut kept = Vec::with_capacity(interactions.len());
        for x in interactions {
            match seen.insert((x.user, x.item), x.label) {
                None => kept.push(x),
                Some(prev) if prev == x.label => {}
                Some(_) => {
                    return Err(Error::validation(format!(
                        "user {} / item {} has both positive and negative labels",
                        x.user, x.item
                    )))
                }
            }
        }
        Ok(InteractionSet { interactions: kept })
    }

    /// Builds a set from interactions already known to be unique.
    pub(crate) fn from_unique(interactions: Vec<Interaction>) -> Self {
        InteractionSet { interactions }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn as_slice(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interaction> {
        self.interactions.iter()
    }

    pub fn positives(&self) -> impl Iterator<Item = &Interaction> {
        self.iter().filter(|x| x.label.is_positive())
    }

    pub fn negatives(&self) -> impl Iterator<Item = &Interaction> {
        self.iter().filter(|x| !x.label.is_positive())
    }

    /// One past the largest user id referenced.
    pub fn user_bound(&self) -> usize {
        self.iter().map(|x| x.user as usize + 1).max().unwrap_or(0)
    }

    /// One past the largest item id referenced.
    pub fn item_bound(&self) -> usize {
        self.iter().map(|x| x.item as usize + 1).max().unwrap_or(0)
    }

    /// Concatenates two sets; fails on conflicting labels.
    pub fn union(&self, other: &InteractionSet) -> Result<InteractionSet> {
        InteractionSet::new(self.iter().chain(other.iter()).copied().collect())
    }
}

impl<'a> IntoIterator for &'a InteractionSet {
    type Item = &'a Interaction;
    type IntoIter = std::slice::Iter<'a, Interaction>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedups_and_rejects_conflicts() {
        let set = InteractionSet::new(vec![
            Interaction::positive(0, 1),
            Interaction::positive(0, 1),
            Interaction::negative(1, 1),
        ])
        .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.positives().count(), 1);
        assert_eq!(set.negatives().count(), 1);

        let err = InteractionSet::new(vec![Interaction::positive(0, 1), Interaction::negative(0, 1)]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn bounds() {
        let set = InteractionSet::new(vec![Interaction::positive(4, 1), Interaction::negative(2, 9)]).unwrap();
        assert_eq!(set.user_bound(), 5);
        assert_eq!(set.item_bound(), 10);
        assert_eq!(InteractionSet::default().user_bound(), 0);
    }
}
