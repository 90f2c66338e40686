//! StackExchange data-dump parsing (`Posts.xml`, `Users.xml`).

use std::collections::HashSet;
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::negatives::sample_negatives;
use super::tokenize::tokenize_about;
use super::{Dataset, DatasetBuilder};
use crate::error::{Error, Result};
use crate::interactions::{InteractionSet, Label};

const QUESTION: &str = "1";
const ANSWER: &str = "2";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StackExchangeData {
    /// Question id and its tags, in file order.
    pub questions: Vec<(String, Vec<String>)>,
    /// `(answerer, question)` for every answer whose question exists.
    pub answers: Vec<(String, String)>,
    /// `(user, AboutMe)` for users with a non-empty profile text.
    pub about: Vec<(String, String)>,
    /// Answers whose parent question is not in the dump.
    pub skipped_answers: usize,
    /// Answers without an owner (deleted accounts).
    pub anonymous_answers: usize,
}

/// Splits `<a><b>` or `|a|b|` into tag names.
pub fn parse_tags(raw: &str) -> Vec<String> {
    raw.split(['<', '>', '|'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn xml_error<R>(reader: &Reader<R>, what: &str, e: impl std::fmt::Display) -> Error {
    Error::parse(format!("{what} (byte {})", reader.buffer_position()), e.to_string())
}

/// Calls `f` with the attributes of every `<row .../>` element.
fn for_each_row<R, F>(source: R, what: &str, mut f: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(&mut dyn FnMut(&str) -> Option<String>) -> Result<()>,
{
    let mut reader = Reader::from_reader(source);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| xml_error(&reader, what, e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) if e.name().as_ref() == b"row" => {
                let attrs = row_attributes(e).map_err(|e| xml_error(&reader, what, e))?;
                let mut get = |key: &str| attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone());
                f(&mut get)?;
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(())
}

fn row_attributes(e: &BytesStart<'_>) -> std::result::Result<Vec<(String, String)>, quick_xml::Error> {
    let mut out = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(quick_xml::Error::from)?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value()?.into_owned();
        out.push((key, value));
    }
    Ok(out)
}

/// Reads questions, answers and user profiles. Comments, wiki posts and
/// other post types are ignored.
pub fn parse_stackexchange<P: BufRead, U: BufRead>(posts: P, users: U) -> Result<StackExchangeData> {
    let mut data = StackExchangeData::default();
    let mut raw_answers: Vec<(Option<String>, String)> = Vec::new();

    for_each_row(posts, "posts", |get| {
        let post_type = get("PostTypeId");
        match post_type.as_deref() {
            Some(QUESTION) => {
                let id = get("Id").ok_or_else(|| Error::parse("posts", "question without Id"))?;
                let tags = get("Tags").map(|t| parse_tags(&t)).unwrap_or_default();
                data.questions.push((id, tags));
            }
            Some(ANSWER) => {
                let parent = get("ParentId").ok_or_else(|| Error::parse("posts", "answer without ParentId"))?;
                raw_answers.push((get("OwnerUserId"), parent));
            }
            _ => {}
        }
        Ok(())
    })?;

    let known: HashSet<&str> = data.questions.iter().map(|(id, _)| id.as_str()).collect();
    for (owner, parent) in raw_answers {
        if !known.contains(parent.as_str()) {
            data.skipped_answers += 1;
            continue;
        }
        match owner {
            Some(user) => data.answers.push((user, parent)),
            None => data.anonymous_answers += 1,
        }
    }
    if data.skipped_answers > 0 {
        log::warn!("skipped {} answers to questions missing from the dump", data.skipped_answers);
    }

    for_each_row(users, "users", |get| {
        if let (Some(id), Some(about)) = (get("Id"), get("AboutMe")) {
            if !about.trim().is_empty() {
                data.about.push((id, about));
            }
        }
        Ok(())
    })?;
    Ok(data)
}

/// Every question is an item, every answerer a user. Answers are positives;
/// `ratio` negatives per positive are drawn from unanswered questions.
/// Profile text is tokenized into user tokens.
pub fn stackexchange_dataset(data: &StackExchangeData, ratio: usize, seed: u64) -> Result<Dataset> {
    let mut builder = DatasetBuilder::new();
    for (id, tags) in &data.questions {
        builder.item(id);
        for t in tags {
            builder.tag(id, t);
        }
    }
    for (user, question) in &data.answers {
        builder.interaction(user, question, Label::Positive);
    }
    let positives = builder.build()?;
    let mut builder = DatasetBuilder::new();
    for name in positives.items.iter() {
        builder.item(name);
    }
    for (item, tags) in positives.items.iter().zip(&positives.item_tags) {
        for t in tags {
            builder.tag(item, t);
        }
    }
    for name in positives.users.iter() {
        builder.user(name);
    }
    for (user, text) in &data.about {
        if positives.users.index_of(user).is_some() {
            for token in tokenize_about(text) {
                builder.token(user, &token);
            }
        }
    }
    let negatives = sample_negatives(&positives.interactions, positives.n_items(), ratio, seed)?;
    let all: InteractionSet = positives.interactions.union(&negatives)?;
    for x in &all {
        builder.push_interaction(*x);
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const POSTS: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" Tags="&lt;regression&gt;&lt;multicollinearity&gt;" Title="q1" />
  <row Id="2" PostTypeId="2" ParentId="1" OwnerUserId="7" />
  <row Id="3" PostTypeId="1" Tags="|bayesian|prior|" />
  <row Id="4" PostTypeId="2" ParentId="99" OwnerUserId="7" />
  <row Id="5" PostTypeId="2" ParentId="3" />
  <row Id="6" PostTypeId="5" />
  <row Id="8" PostTypeId="1" Tags="&lt;r&gt;" />
  <row Id="9" PostTypeId="1" />
  <row Id="10" PostTypeId="1" />
  <row Id="11" PostTypeId="2" ParentId="3" OwnerUserId="8" />
</posts>"#;

    const USERS: &str = r#"<users>
  <row Id="7" AboutMe="&lt;p&gt;I love R &amp;amp; stats!&lt;/p&gt;" />
  <row Id="8" />
  <row Id="9" AboutMe="never answered" />
</users>"#;

    #[test]
    fn parses_posts_and_users() {
        let d = parse_stackexchange(POSTS.as_bytes(), USERS.as_bytes()).unwrap();
        assert_eq!(d.questions.len(), 5);
        assert_eq!(d.questions[0].1, vec!["regression", "multicollinearity"]);
        assert_eq!(d.questions[1].1, vec!["bayesian", "prior"]);
        assert!(d.questions[3].1.is_empty());
        assert_eq!(
            d.answers,
            vec![("7".to_owned(), "1".to_owned()), ("8".to_owned(), "3".to_owned())]
        );
        assert_eq!(d.skipped_answers, 1);
        assert_eq!(d.anonymous_answers, 1);
        assert_eq!(d.about.len(), 2);
        assert_eq!(d.about[0].1, "<p>I love R &amp; stats!</p>");
    }

    #[test]
    fn builds_dataset_with_negatives() {
        let raw = parse_stackexchange(POSTS.as_bytes(), USERS.as_bytes()).unwrap();
        let d = stackexchange_dataset(&raw, 3, 5).unwrap();
        assert_eq!(d.n_items(), 5);
        assert_eq!(d.n_users(), 2);
        assert_eq!(d.interactions.positives().count(), 2);
        assert_eq!(d.interactions.negatives().count(), 6);
        let q = d.items.index_of("1").unwrap();
        assert_eq!(d.item_tags[q], vec!["regression", "multicollinearity"]);
        let u7 = d.users.index_of("7").unwrap();
        assert_eq!(d.user_tokens[u7], vec!["i", "love", "r", "amp", "stats"]);
        assert!(d.users.index_of("9").is_none());
        // positive(7, 1)
        assert!(d
            .interactions
            .positives()
            .any(|x| x.user as usize == u7 && x.item as usize == q));
    }

    #[test]
    fn malformed_xml_is_a_parse_error() {
        let err = parse_stackexchange("<posts><row Id=\"1\" PostTypeId=\"1></posts>".as_bytes(), "".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }
}
