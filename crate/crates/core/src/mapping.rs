//! Feature vocabularies and per-entity feature assignments.

use std::fmt;
use std::io::Write;

use indexmap::IndexSet;

use crate::error::{Error, Result};

/// Which half of the model a feature or entity belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    User,
    Item,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::User => f.write_str("user"),
            Side::Item => f.write_str("item"),
        }
    }
}

/// Bidirectional name <-> dense index table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: IndexSet<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `name`, returning its index.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(idx) = self.names.get_index_of(name) {
            idx
        } else {
            self.names.insert_full(name.to_owned()).0
        }
    }

    /// Inserts a name that must not already be present.
    pub fn insert_new(&mut self, name: &str) -> Result<usize> {
        if self.names.contains(name) {
            return Err(Error::validation(format!("duplicate name `{name}`")));
        }
        Ok(self.names.insert_full(name.to_owned()).0)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.get_index_of(name)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get_index(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

impl<S: AsRef<str>> FromIterator<S> for Vocabulary {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        let mut vocab = Vocabulary::new();
        for name in iter {
            vocab.intern(name.as_ref());
        }
        vocab
    }
}

/// Feature vocabularies for both sides plus the feature set of every user
/// and item. Entity ids are dense indices into `users` / `items`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureMapping {
    user_features: Vocabulary,
    item_features: Vocabulary,
    users: Vec<Vec<u32>>,
    items: Vec<Vec<u32>>,
}

impl FeatureMapping {
    pub fn new(user_features: Vocabulary, item_features: Vocabulary) -> Self {
        Self {
            user_features,
            item_features,
            users: Vec::new(),
            items: Vec::new(),
        }
    }

    pub fn features(&self, side: Side) -> &Vocabulary {
        match side {
            Side::User => &self.user_features,
            Side::Item => &self.item_features,
        }
    }

    fn features_mut(&mut self, side: Side) -> &mut Vocabulary {
        match side {
            Side::User => &mut self.user_features,
            Side::Item => &mut self.item_features,
        }
    }

    fn entities(&self, side: Side) -> &[Vec<u32>] {
        match side {
            Side::User => &self.users,
            Side::Item => &self.items,
        }
    }

    pub fn n_features(&self, side: Side) -> usize {
        self.features(side).len()
    }

    pub fn n_entities(&self, side: Side) -> usize {
        self.entities(side).len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Appends an entity described by `features`, returning its id.
    ///
    /// Duplicate indices are removed; the stored list is sorted.
    pub fn add_entity(&mut self, side: Side, features: &[u32]) -> Result<u32> {
        let n = self.n_features(side);
        if features.is_empty() {
            return Err(Error::validation(format!("{side} entity has an empty feature set")));
        }
        if let Some(&bad) = features.iter().find(|&&f| f as usize >= n) {
            return Err(Error::FeatureIndex {
                side,
                index: bad as usize,
                len: n,
            });
        }
        let mut list = features.to_vec();
        list.sort_unstable();
        list.dedup();
        let list_vec = match side {
            Side::User => &mut self.users,
            Side::Item => &mut self.items,
        };
        list_vec.push(list);
        Ok((list_vec.len() - 1) as u32)
    }

    /// Same as [`add_entity`](Self::add_entity) but by feature name,
    /// interning unseen names.
    pub fn add_entity_named<S: AsRef<str>>(&mut self, side: Side, names: &[S]) -> Result<u32> {
        let indices: Vec<u32> = names
            .iter()
            .map(|n| self.features_mut(side).intern(n.as_ref()) as u32)
            .collect();
        self.add_entity(side, &indices)
    }

    /// Registers previously unseen feature names. Fails without modifying the
    /// mapping if any name is already present.
    pub fn extend_features<S: AsRef<str>>(&mut self, side: Side, names: &[S]) -> Result<()> {
        let vocab = self.features(side);
        let mut seen = std::collections::HashSet::new();
        for name in names {
            let name = name.as_ref();
            if vocab.index_of(name).is_some() || !seen.insert(name) {
                return Err(Error::validation(format!(
                    "{side} feature `{name}` is already mapped"
                )));
            }
        }
        let vocab = self.features_mut(side);
        for name in names {
            vocab.insert_new(name.as_ref())?;
        }
        Ok(())
    }

    /// Feature set of entity `id`.
    pub fn entity_features(&self, side: Side, id: u32) -> Result<&[u32]> {
        let entities = self.entities(side);
        entities
            .get(id as usize)
            .map(Vec::as_slice)
            .ok_or(Error::EntityIndex {
                side,
                id: id as usize,
                len: entities.len(),
            })
    }

    pub fn user_features(&self, user: u32) -> Result<&[u32]> {
        self.entity_features(Side::User, user)
    }

    pub fn item_features(&self, item: u32) -> Result<&[u32]> {
        self.entity_features(Side::Item, item)
    }

    /// Writes one `index<TAB>name` line per feature of `side`.
    pub fn write_feature_dump<W: Write>(&self, side: Side, mut out: W) -> Result<()> {
        for (idx, name) in self.features(side).iter().enumerate() {
            writeln!(out, "{idx}\t{name}")?;
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        user_features: Vocabulary,
        item_features: Vocabulary,
        users: Vec<Vec<u32>>,
        items: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let mut mapping = FeatureMapping::new(user_features, item_features);
        for u in &users {
            mapping.add_entity(Side::User, u)?;
        }
        for i in &items {
            mapping.add_entity(Side::Item, i)?;
        }
        Ok(mapping)
    }

    pub(crate) fn entity_lists(&self, side: Side) -> &[Vec<u32>] {
        self.entities(side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_a_bijection() {
        let vocab: Vocabulary = ["a", "b", "a", "c"].into_iter().collect();
        assert_eq!(vocab.len(), 3);
        for (i, name) in vocab.iter().enumerate() {
            assert_eq!(vocab.index_of(name), Some(i));
            assert_eq!(vocab.name(i), Some(name));
        }
    }

    #[test]
    fn rejects_empty_and_out_of_range_sets() {
        let mut m = FeatureMapping::new(["u0"].into_iter().collect(), ["i0", "i1"].into_iter().collect());
        assert!(matches!(m.add_entity(Side::User, &[]), Err(Error::Validation(_))));
        assert!(matches!(
            m.add_entity(Side::Item, &[2]),
            Err(Error::FeatureIndex { index: 2, len: 2, .. })
        ));
        assert_eq!(m.add_entity(Side::Item, &[1, 0, 1]).unwrap(), 0);
        assert_eq!(m.item_features(0).unwrap(), &[0, 1]);
    }

    #[test]
    fn extend_is_all_or_nothing() {
        let mut m = FeatureMapping::new(Vocabulary::new(), ["x"].into_iter().collect());
        assert!(m.extend_features(Side::Item, &["y", "x"]).is_err());
        assert_eq!(m.n_features(Side::Item), 1);
        assert!(m.extend_features(Side::Item, &["y", "y"]).is_err());
        m.extend_features(Side::Item, &["y", "z"]).unwrap();
        assert_eq!(m.features(Side::Item).index_of("z"), Some(2));
    }

    #[test]
    fn feature_dump_format() {
        let m = FeatureMapping::new(Vocabulary::new(), ["rock", "jazz"].into_iter().collect());
        let mut buf = Vec::new();
        m.write_feature_dump(Side::Item, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0\trock\n1\tjazz\n");
    }
}
