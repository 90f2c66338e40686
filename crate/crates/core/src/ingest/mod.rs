//! Dataset parsing and the canonical on-disk dataset layout.
//!
//! A dataset directory holds three tab-delimited UTF-8 files:
//!
//! * `interactions.tsv`: `user<TAB>item<TAB>label`, label `1` or `0`
//! * `item_features.tsv`: `item<TAB>tag`
//! * `user_features.tsv`: `user<TAB>token` (bag-of-words user metadata)
//! * `users.tsv`, `items.tsv`: one name per line in id order, so that ids
//!   and entities without any interaction or feature survive a round trip

pub mod movielens;
pub mod negatives;
pub mod stackexchange;
pub mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::baselines::{make_indicator_mapping, SparseMatrix};
use crate::error::{Error, Result};
use crate::interactions::{Interaction, InteractionSet, Label};
use crate::mapping::{FeatureMapping, Side, Vocabulary};

pub use movielens::{
    binarize, movielens_dataset, parse_genome_tags, parse_movies, parse_ratings, parse_tag_genome, RawRating,
    TagAssignment, DEFAULT_GENOME_THRESHOLD,
};
pub use negatives::{sample_negatives, DEFAULT_NEGATIVE_RATIO};
pub use stackexchange::{parse_stackexchange, stackexchange_dataset, StackExchangeData};
pub use tokenize::tokenize_about;

pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const ITEM_FEATURES_FILE: &str = "item_features.tsv";
pub const USER_FEATURES_FILE: &str = "user_features.tsv";
pub const USERS_FILE: &str = "users.tsv";
pub const ITEMS_FILE: &str = "items.tsv";

/// Size of the user word dictionary: only this many of the most frequent
/// tokens become user features.
pub const ABOUT_DICTIONARY_SIZE: usize = 5000;

/// Feature given to items that carry no tags, so that every item keeps a
/// non-empty feature set.
pub const UNTAGGED_FEATURE: &str = "__untagged__";

/// How users and items are turned into feature sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureVariant {
    /// One indicator per user and per item (plain MF).
    Indicators,
    /// Users by indicator, items by tags only.
    Tags,
    /// Users by indicator, items by tags plus an item indicator.
    TagsIds,
    /// Users by indicator plus about-me words, items by tags.
    TagsAbout,
}

impl FeatureVariant {
    pub fn needs_user_metadata(self) -> bool {
        self == FeatureVariant::TagsAbout
    }
}

/// Interactions plus raw metadata, with external ids interned densely.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub users: Vocabulary,
    pub items: Vocabulary,
    pub interactions: InteractionSet,
    /// Tags of each item, indexed by item id.
    pub item_tags: Vec<Vec<String>>,
    /// Metadata tokens of each user, indexed by user id.
    pub user_tokens: Vec<Vec<String>>,
}

/// Accumulates named interactions and metadata into a [`Dataset`].
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    users: Vocabulary,
    items: Vocabulary,
    interactions: Vec<Interaction>,
    item_tags: Vec<Vec<String>>,
    user_tokens: Vec<Vec<String>>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn user(&mut self, name: &str) -> u32 {
        let id = self.users.intern(name);
        if id == self.user_tokens.len() {
            self.user_tokens.push(Vec::new());
        }
        id as u32
    }

    pub fn item(&mut self, name: &str) -> u32 {
        let id = self.items.intern(name);
        if id == self.item_tags.len() {
            self.item_tags.push(Vec::new());
        }
        id as u32
    }

    pub fn interaction(&mut self, user: &str, item: &str, label: Label) {
        let u = self.user(user);
        let i = self.item(item);
        self.interactions.push(Interaction::new(u, i, label));
    }

    pub fn push_interaction(&mut self, interaction: Interaction) {
        self.interactions.push(interaction);
    }

    /// Adds a tag to an item; repeated tags are ignored.
    pub fn tag(&mut self, item: &str, tag: &str) {
        let i = self.item(item) as usize;
        if !self.item_tags[i].iter().any(|t| t == tag) {
            self.item_tags[i].push(tag.to_owned());
        }
    }

    /// Adds a metadata token to a user; repeated tokens are ignored.
    pub fn token(&mut self, user: &str, token: &str) {
        let u = self.user(user) as usize;
        if !self.user_tokens[u].iter().any(|t| t == token) {
            self.user_tokens[u].push(token.to_owned());
        }
    }

    pub fn build(self) -> Result<Dataset> {
        Ok(Dataset {
            users: self.users,
            items: self.items,
            interactions: InteractionSet::new(self.interactions)?,
            item_tags: self.item_tags,
            user_tokens: self.user_tokens,
        })
    }
}

impl Dataset {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn has_user_metadata(&self) -> bool {
        self.user_tokens.iter().any(|t| !t.is_empty())
    }

    /// Tag vocabulary in order of first appearance over items.
    pub fn tag_vocabulary(&self) -> Vocabulary {
        self.item_tags.iter().flatten().collect()
    }

    /// The `size` most frequent user tokens (ties broken alphabetically).
    pub fn token_dictionary(&self, size: usize) -> Vocabulary {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for token in self.user_tokens.iter().flatten() {
            *counts.entry(token).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(size);
        ranked.into_iter().map(|(t, _)| t).collect()
    }

    /// Builds the feature mapping for one of the model variants.
    pub fn feature_mapping(&self, variant: FeatureVariant) -> Result<FeatureMapping> {
        if variant == FeatureVariant::Indicators {
            return make_indicator_mapping(self.n_users(), self.n_items());
        }
        if variant.needs_user_metadata() && !self.has_user_metadata() {
            return Err(Error::validation(
                "this feature variant needs user metadata, which the dataset does not have",
            ));
        }

        let mut mapping = FeatureMapping::new(Vocabulary::new(), Vocabulary::new());

        let dictionary = match variant {
            FeatureVariant::TagsAbout => Some(self.token_dictionary(ABOUT_DICTIONARY_SIZE)),
            _ => None,
        };
        for (u, name) in self.users.iter().enumerate() {
            let mut features = vec![format!("user:{name}")];
            if let Some(dict) = &dictionary {
                features.extend(
                    self.user_tokens[u]
                        .iter()
                        .filter(|t| dict.index_of(t).is_some())
                        .map(|t| format!("about:{t}")),
                );
            }
            mapping.add_entity_named(Side::User, &features)?;
        }

        // register tags first so tag indices match `tag_vocabulary`
        let tags = self.tag_vocabulary();
        mapping.extend_features(Side::Item, &tags.iter().collect::<Vec<_>>())?;
        for (i, name) in self.items.iter().enumerate() {
            let mut features: Vec<String> = self.item_tags[i].clone();
            if variant == FeatureVariant::TagsIds {
                features.push(format!("item:{name}"));
            }
            if features.is_empty() {
                features.push(UNTAGGED_FEATURE.to_owned());
            }
            mapping.add_entity_named(Side::Item, &features)?;
        }
        Ok(mapping)
    }

    /// Binary `items x tags` matrix, columns ordered as in
    /// [`tag_vocabulary`](Self::tag_vocabulary).
    pub fn item_feature_matrix(&self) -> Result<SparseMatrix> {
        let tags = self.tag_vocabulary();
        let rows: Vec<Vec<u32>> = self
            .item_tags
            .iter()
            .map(|ts| ts.iter().map(|t| tags.index_of(t).expect("interned") as u32).collect())
            .collect();
        SparseMatrix::binary(self.n_items(), tags.len().max(1), &rows)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let check = |s: &str| -> Result<()> {
            if s.contains(['\t', '\n', '\r']) {
                return Err(Error::validation(format!("name `{s}` contains a tab or newline")));
            }
            Ok(())
        };

        for (file, vocab) in [(USERS_FILE, &self.users), (ITEMS_FILE, &self.items)] {
            let mut out = BufWriter::new(File::create(dir.join(file))?);
            for name in vocab.iter() {
                check(name)?;
                writeln!(out, "{name}")?;
            }
            out.flush()?;
        }

        let mut out = BufWriter::new(File::create(dir.join(INTERACTIONS_FILE))?);
        for x in &self.interactions {
            let user = self.users.name(x.user as usize).expect("interned user");
            let item = self.items.name(x.item as usize).expect("interned item");
            check(user)?;
            check(item)?;
            writeln!(out, "{user}\t{item}\t{}", if x.label.is_positive() { 1 } else { 0 })?;
        }
        out.flush()?;

        for (file, vocab, lists) in [
            (ITEM_FEATURES_FILE, &self.items, &self.item_tags),
            (USER_FEATURES_FILE, &self.users, &self.user_tokens),
        ] {
            let mut out = BufWriter::new(File::create(dir.join(file))?);
            for (name, features) in vocab.iter().zip(lists) {
                for f in features {
                    check(f)?;
                    writeln!(out, "{name}\t{f}")?;
                }
            }
            out.flush()?;
        }
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
        let dir = dir.as_ref();
        let mut builder = DatasetBuilder::new();

        for (file, is_item) in [(USERS_FILE, false), (ITEMS_FILE, true)] {
            let path = dir.join(file);
            if !path.exists() {
                continue;
            }
            for_each_line(&path, |line_no, fields| {
                let [name] = fields[..] else {
                    return Err(line_error(&path, line_no, "expected a single name"));
                };
                if is_item {
                    builder.item(name);
                } else {
                    builder.user(name);
                }
                Ok(())
            })?;
        }

        let path = dir.join(INTERACTIONS_FILE);
        for_each_line(&path, |line_no, fields| {
            let [user, item, label] = fields[..] else {
                return Err(line_error(&path, line_no, "expected user<TAB>item<TAB>label"));
            };
            let label = match label {
                "1" => Label::Positive,
                "0" => Label::Negative,
                other => return Err(line_error(&path, line_no, format!("bad label `{other}`"))),
            };
            builder.interaction(user, item, label);
            Ok(())
        })?;

        for (file, is_item) in [(ITEM_FEATURES_FILE, true), (USER_FEATURES_FILE, false)] {
            let path = dir.join(file);
            if !path.exists() {
                continue;
            }
            for_each_line(&path, |line_no, fields| {
                let [entity, feature] = fields[..] else {
                    return Err(line_error(&path, line_no, "expected entity<TAB>feature"));
                };
                if is_item {
                    builder.tag(entity, feature);
                } else {
                    builder.token(entity, feature);
                }
                Ok(())
            })?;
        }
        builder.build()
    }
}

fn line_error(path: &Path, line_no: usize, message: impl Into<String>) -> Error {
    Error::parse(format!("{} line {line_no}", path.display()), message)
}

fn for_each_line<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(usize, Vec<&str>) -> Result<()>,
{
    let reader = BufReader::new(File::open(path)?);
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        f(k + 1, line.split('\t').collect())?;
    }
    Ok(())
}

/// Model families understood by the experiment driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mf,
    LsiLr,
    LsiUp,
    LightFmTags,
    LightFmTagsIds,
    LightFmTagsAbout,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::LsiLr,
        ModelKind::LsiUp,
        ModelKind::Mf,
        ModelKind::LightFmTags,
        ModelKind::LightFmTagsIds,
        ModelKind::LightFmTagsAbout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::LsiLr => "lsi-lr",
            ModelKind::LsiUp => "lsi-up",
            ModelKind::LightFmTags => "lightfm-tags",
            ModelKind::LightFmTagsIds => "lightfm-tags-ids",
            ModelKind::LightFmTagsAbout => "lightfm-tags-about",
        }
    }

    /// Feature variant for the factorisation models, `None` for LSI ones.
    pub fn feature_variant(self) -> Option<FeatureVariant> {
        match self {
            ModelKind::Mf => Some(FeatureVariant::Indicators),
            ModelKind::LightFmTags => Some(FeatureVariant::Tags),
            ModelKind::LightFmTagsIds => Some(FeatureVariant::TagsIds),
            ModelKind::LightFmTagsAbout => Some(FeatureVariant::TagsAbout),
            ModelKind::LsiLr | ModelKind::LsiUp => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown model `{s}` (expected one of: {})",
                    ModelKind::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        let mut b = DatasetBuilder::new();
        b.interaction("alice", "m1", Label::Positive);
        b.interaction("alice", "m2", Label::Negative);
        b.interaction("bob", "m2", Label::Positive);
        b.tag("m1", "noir");
        b.tag("m1", "heist");
        b.tag("m2", "noir");
        b.item("m3");
        b.token("alice", "stats");
        b.token("alice", "bayes");
        b.token("bob", "stats");
        b.build().unwrap()
    }

    #[test]
    fn mapping_variants() {
        let d = small();
        let tags = d.feature_mapping(FeatureVariant::Tags).unwrap();
        assert_eq!(tags.n_features(Side::User), 2);
        // noir, heist, untagged placeholder for m3
        assert_eq!(tags.n_features(Side::Item), 3);
        assert_eq!(tags.item_features(0).unwrap(), &[0, 1]);
        assert_eq!(tags.item_features(2).unwrap(), &[2]);

        let ids = d.feature_mapping(FeatureVariant::TagsIds).unwrap();
        assert_eq!(ids.n_features(Side::Item), 2 + 3);
        assert_eq!(ids.item_features(1).unwrap().len(), 2);

        let about = d.feature_mapping(FeatureVariant::TagsAbout).unwrap();
        assert_eq!(about.user_features(0).unwrap().len(), 3);
        assert_eq!(about.features(Side::User).index_of("about:stats").is_some(), true);

        let mf = d.feature_mapping(FeatureVariant::Indicators).unwrap();
        assert_eq!(mf.n_features(Side::Item), 3);
    }

    #[test]
    fn about_variant_needs_user_metadata() {
        let mut d = small();
        d.user_tokens.iter_mut().for_each(Vec::clear);
        assert!(matches!(d.feature_mapping(FeatureVariant::TagsAbout), Err(Error::Validation(_))));
    }

    #[test]
    fn token_dictionary_keeps_most_frequent() {
        let d = small();
        let dict = d.token_dictionary(1);
        assert_eq!(dict.iter().collect::<Vec<_>>(), vec!["stats"]);
    }

    #[test]
    fn item_feature_matrix_is_binary() {
        let m = small().item_feature_matrix().unwrap();
        assert_eq!((m.rows(), m.cols(), m.nnz()), (3, 2, 3));
    }

    #[test]
    fn directory_round_trip() {
        let d = small();
        let dir = tempfile::tempdir().unwrap();
        d.write_dir(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(INTERACTIONS_FILE)).unwrap();
        assert_eq!(text, "alice\tm1\t1\nalice\tm2\t0\nbob\tm2\t1\n");
        let back = Dataset::read_dir(dir.path()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn malformed_interaction_line() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(INTERACTIONS_FILE), "a\tb\t1\na\tc\tyes\n").unwrap();
        let err = Dataset::read_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn model_kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svd++".parse::<ModelKind>().is_err());
    }
}
