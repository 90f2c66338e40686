//! Binary model files.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! "HYBRIDFM"                       8-byte magic
//! u32 version
//! u32 dim, u32 |F_U|, u32 |F_I|, u64 epoch
//! "NAME"  user feature names, item feature names
//!         (u32 count, then per name: u32 byte length + UTF-8 bytes)
//! "ENTS"  user feature lists, item feature lists
//!         (u32 count, then per entity: u32 length + u32 indices)
//! "UPAR"  user embeddings (|F_U| x dim, row-major f32), biases,
//!         embedding accumulators, bias accumulators
//! "IPAR"  same for items
//! "END."
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mapping::{FeatureMapping, Side, Vocabulary};
use crate::model::{FeatureTable, ModelState};

pub const MAGIC: &[u8; 8] = b"HYBRIDFM";
pub const FORMAT_VERSION: u32 = 1;

const TAG_NAMES: &[u8; 4] = b"NAME";
const TAG_ENTITIES: &[u8; 4] = b"ENTS";
const TAG_USER_PARAMS: &[u8; 4] = b"UPAR";
const TAG_ITEM_PARAMS: &[u8; 4] = b"IPAR";
const TAG_END: &[u8; 4] = b"END.";

pub fn save_model<W: Write>(model: &ModelState, mapping: &FeatureMapping, out: W) -> Result<()> {
    for side in [Side::User, Side::Item] {
        if model.n_features(side) != mapping.n_features(side) {
            return Err(Error::validation(format!(
                "model has {} {side} features but mapping has {}",
                model.n_features(side),
                mapping.n_features(side)
            )));
        }
    }

    let mut out = BufWriter::new(out);
    out.write_all(MAGIC)?;
    write_u32(&mut out, FORMAT_VERSION)?;
    write_u32(&mut out, model.dim() as u32)?;
    write_u32(&mut out, model.n_features(Side::User) as u32)?;
    write_u32(&mut out, model.n_features(Side::Item) as u32)?;
    out.write_all(&model.epoch().to_le_bytes())?;

    out.write_all(TAG_NAMES)?;
    for side in [Side::User, Side::Item] {
        let vocab = mapping.features(side);
        write_u32(&mut out, vocab.len() as u32)?;
        for name in vocab.iter() {
            write_u32(&mut out, name.len() as u32)?;
            out.write_all(name.as_bytes())?;
        }
    }

    out.write_all(TAG_ENTITIES)?;
    for side in [Side::User, Side::Item] {
        let lists = mapping.entity_lists(side);
        write_u32(&mut out, lists.len() as u32)?;
        for list in lists {
            write_u32(&mut out, list.len() as u32)?;
            for &f in list {
                write_u32(&mut out, f)?;
            }
        }
    }

    for (tag, side) in [(TAG_USER_PARAMS, Side::User), (TAG_ITEM_PARAMS, Side::Item)] {
        out.write_all(tag)?;
        let table = model.table(side);
        for values in [
            &table.embeddings,
            &table.biases,
            &table.embedding_accum,
            &table.bias_accum,
        ] {
            for i in 0..values.len() {
                out.write_all(&values.get(i).to_le_bytes())?;
            }
        }
    }

    out.write_all(TAG_END)?;
    out.flush()?;
    Ok(())
}

pub fn load_model<R: Read>(mut input: R) -> Result<(ModelState, FeatureMapping)> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut cur = Cursor {
        buf: &buf,
        pos: 0,
        section: "header",
    };

    if cur.take(MAGIC.len())? != MAGIC {
        return Err(cur.error("bad magic string; not a model file"));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dim = cur.u32()? as usize;
    let n_user = cur.u32()? as usize;
    let n_item = cur.u32()? as usize;
    let epoch = cur.u64()?;
    if dim == 0 {
        return Err(cur.error("latent dimensionality is zero"));
    }

    cur.section("names", TAG_NAMES)?;
    let mut vocabs = Vec::with_capacity(2);
    for expected in [n_user, n_item] {
        let count = cur.u32()? as usize;
        if count != expected {
            return Err(cur.error(format!("expected {expected} names, found {count}")));
        }
        let mut vocab = Vocabulary::new();
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let bytes = cur.take(len)?;
            let name = std::str::from_utf8(bytes).map_err(|_| cur.error("feature name is not UTF-8"))?;
            vocab
                .insert_new(name)
                .map_err(|_| cur.error(format!("duplicate feature name `{name}`")))?;
        }
        vocabs.push(vocab);
    }

    cur.section("entities", TAG_ENTITIES)?;
    let mut lists = Vec::with_capacity(2);
    for _ in 0..2 {
        let count = cur.u32()? as usize;
        let mut side_lists = Vec::with_capacity(count.min(cur.remaining() / 4));
        for _ in 0..count {
            let len = cur.u32()? as usize;
            cur.ensure(len.saturating_mul(4))?;
            let list = (0..len).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
            side_lists.push(list);
        }
        lists.push(side_lists);
    }
    let items = lists.pop().expect("two sides");
    let users = lists.pop().expect("two sides");
    let item_vocab = vocabs.pop().expect("two sides");
    let user_vocab = vocabs.pop().expect("two sides");
    let mapping = FeatureMapping::from_parts(user_vocab, item_vocab, users, items)
        .map_err(|e| cur.error(format!("invalid entity feature list: {e}")))?;

    cur.section("user parameters", TAG_USER_PARAMS)?;
    let user = cur.table(n_user, dim)?;
    cur.section("item parameters", TAG_ITEM_PARAMS)?;
    let item = cur.table(n_item, dim)?;
    cur.section("end marker", TAG_END)?;
    if cur.remaining() != 0 {
        return Err(cur.error("trailing bytes after end marker"));
    }

    Ok((ModelState::from_tables(dim, user, item, epoch), mapping))
}

pub fn save_model_file(model: &ModelState, mapping: &FeatureMapping, path: impl AsRef<Path>) -> Result<()> {
    save_model(model, mapping, File::create(path)?)
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<(ModelState, FeatureMapping)> {
    load_model(File::open(path)?)
}

fn write_u32<W: Write>(out: &mut W, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(format!("{} section (byte {})", self.section, self.pos), message)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn ensure(&self, n: usize) -> Result<()> {
        if self.remaining() < n {
            Err(self.error("unexpected end of file"))
        } else {
            Ok(())
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.ensure(n)?;
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.error("length overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn section(&mut self, name: &'static str, tag: &[u8; 4]) -> Result<()> {
        self.section = name;
        if self.take(4)? != tag {
            return Err(self.error(format!(
                "missing `{}` section tag",
                String::from_utf8_lossy(tag)
            )));
        }
        Ok(())
    }

    fn table(&mut self, n: usize, dim: usize) -> Result<FeatureTable> {
        let embeddings = self.f32s(n * dim)?;
        let biases = self.f32s(n)?;
        let embedding_accum = self.f32s(n * dim)?;
        let bias_accum = self.f32s(n)?;
        Ok(FeatureTable::from_raw(embeddings, biases, embedding_accum, bias_accum))
    }
}
