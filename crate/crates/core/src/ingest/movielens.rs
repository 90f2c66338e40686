//! MovieLens ratings, movie genres and tag-genome relevance scores.

use std::collections::HashMap;
use std::io::{BufRead, Read};

use super::{Dataset, DatasetBuilder};
use crate::error::{Error, Result};
use crate::interactions::Label;

pub const POSITIVE_RATING: f64 = 4.0;
pub const DEFAULT_GENOME_THRESHOLD: f64 = 0.8;
const MIN_RATING: f64 = 0.5;
const MAX_RATING: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RawRating {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TagAssignment {
    pub item: String,
    pub tag: String,
    pub relevance: f64,
}

fn line_error(line_no: usize, message: impl Into<String>) -> Error {
    Error::parse(format!("line {line_no}"), message)
}

/// Parses `user::item::rating::timestamp` lines. Tab-separated lines (the
/// 100k release layout) are accepted as well. Blank lines are skipped.
pub fn parse_ratings<R: BufRead>(reader: R) -> Result<Vec<RawRating>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains("::") {
            line.split("::").collect()
        } else {
            line.split('\t').collect()
        };
        let [user, item, rating, timestamp] = &fields[..] else {
            return Err(line_error(
                line_no,
                format!("expected user::item::rating::timestamp, got `{line}`"),
            ));
        };
        let rating: f64 = rating
            .trim()
            .parse()
            .map_err(|_| line_error(line_no, format!("rating `{rating}` is not a number")))?;
        if !(MIN_RATING..=MAX_RATING).contains(&rating) {
            return Err(line_error(
                line_no,
                format!("rating {rating} outside [{MIN_RATING}, {MAX_RATING}]"),
            ));
        }
        let timestamp: i64 = timestamp
            .trim()
            .parse()
            .map_err(|_| line_error(line_no, format!("timestamp `{timestamp}` is not an integer")))?;
        let (user, item) = (user.trim(), item.trim());
        if user.is_empty() || item.is_empty() {
            return Err(line_error(line_no, "empty user or item id"));
        }
        out.push(RawRating {
            user: user.to_owned(),
            item: item.to_owned(),
            rating,
            timestamp,
        });
    }
    Ok(out)
}

/// Ratings of 4.0 and above are positive, the rest negative. A user rating
/// the same item twice keeps the latest rating.
pub fn binarize(ratings: &[RawRating]) -> Result<Dataset> {
    let mut latest: HashMap<(&str, &str), usize> = HashMap::new();
    for (k, r) in ratings.iter().enumerate() {
        latest
            .entry((&r.user, &r.item))
            .and_modify(|prev| {
                if ratings[*prev].timestamp <= r.timestamp {
                    *prev = k;
                }
            })
            .or_insert(k);
    }
    let mut builder = DatasetBuilder::new();
    for (k, r) in ratings.iter().enumerate() {
        if latest[&(r.user.as_str(), r.item.as_str())] != k {
            continue;
        }
        let label = if r.rating >= POSITIVE_RATING {
            Label::Positive
        } else {
            Label::Negative
        };
        builder.interaction(&r.user, &r.item, label);
    }
    builder.build()
}

/// Parses `id::title::Genre1|Genre2` lines into `(item, genres)`.
pub fn parse_movies<R: BufRead>(reader: R) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        // titles may themselves contain "::" so split from both ends
        let (id, rest) = line
            .split_once("::")
            .ok_or_else(|| line_error(k + 1, "expected id::title::genres"))?;
        let (_, genres) = rest
            .rsplit_once("::")
            .ok_or_else(|| line_error(k + 1, "expected id::title::genres"))?;
        let genres = genres
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty() && *g != "(no genres listed)")
            .map(str::to_owned)
            .collect();
        out.push((id.trim().to_owned(), genres));
    }
    Ok(out)
}

/// Parses `tag_id<SEP>tag` lines (the genome tag list) into a lookup table.
pub fn parse_genome_tags<R: Read>(reader: R) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (line_no, fields) in delimited_rows(reader)? {
        let [id, tag] = &fields[..] else {
            return Err(line_error(line_no, "expected tag_id and tag"));
        };
        out.insert(id.to_owned(), tag.to_owned());
    }
    Ok(out)
}

/// Parses `item<SEP>tag<SEP>relevance` rows, tab- or comma-delimited, with
/// an optional header row, and keeps assignments whose relevance is at
/// least `threshold`.
pub fn parse_tag_genome<R: Read>(reader: R, threshold: f64) -> Result<Vec<TagAssignment>> {
    let mut out = Vec::new();
    for (line_no, fields) in delimited_rows(reader)? {
        let [item, tag, relevance] = &fields[..] else {
            return Err(line_error(line_no, "expected item, tag, relevance"));
        };
        let relevance: f64 = match relevance.trim().parse() {
            Ok(r) => r,
            // a non-numeric first row is a header
            Err(_) if line_no == 1 => continue,
            Err(_) => {
                return Err(line_error(line_no, format!("relevance `{relevance}` is not a number")))
            }
        };
        if !(0.0..=1.0).contains(&relevance) {
            return Err(Error::validation(format!(
                "line {line_no}: relevance {relevance} outside [0, 1]"
            )));
        }
        if relevance >= threshold {
            out.push(TagAssignment {
                item: item.trim().to_owned(),
                tag: tag.trim().to_owned(),
                relevance,
            });
        }
    }
    Ok(out)
}

/// Reads all rows with the delimiter sniffed from the first line.
fn delimited_rows<R: Read>(mut reader: R) -> Result<Vec<(usize, Vec<String>)>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            line_error(line, e.to_string())
        })?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        out.push((line_no, record.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

/// Combines binarized ratings with genre and tag features. Genres are
/// always kept; tags are the already-thresholded genome assignments.
pub fn movielens_dataset(
    ratings: &[RawRating],
    movies: &[(String, Vec<String>)],
    tags: &[TagAssignment],
) -> Result<Dataset> {
    let rated = binarize(ratings)?;
    let mut builder = DatasetBuilder::new();
    for x in &rated.interactions {
        builder.push_interaction(*x);
    }
    for name in rated.users.iter() {
        builder.user(name);
    }
    for name in rated.items.iter() {
        builder.item(name);
    }
    // metadata for movies nobody rated is dropped
    let mut features = |item: &str, feature: &str| {
        if rated.items.index_of(item).is_some() {
            builder.tag(item, feature);
        }
    };
    for (item, genres) in movies {
        for g in genres {
            features(item, g);
        }
    }
    for t in tags {
        features(&t.item, &t.tag);
    }
    builder.build()
}
