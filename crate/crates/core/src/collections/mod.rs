//! Named event collections, skims and migration.

pub mod namespace;
pub mod predicate;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::codec::{Reader, Writer};
use crate::engine::EventStore;
use crate::error::{Error, Result};
use crate::storage::Oref;
use crate::tag::{Tag, TagDescriptor};

pub use namespace::{resolve, validate_name, AccessMode, AccessRules, Glob};
pub use predicate::{parse_predicate, CmpOp, Literal, Operand, Predicate};

/// Persistent event layout, and the tag mode of a collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    V1,
    V2,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::V1 => "v1",
            Format::V2 => "v2",
        })
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "v1" => Ok(Format::V1),
            "2" | "v2" => Ok(Format::V2),
            _ => Err(Error::BadSpec(format!("format must be 1 or 2, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollectionEntry {
    pub event: Oref,
    pub owned: bool,
    /// Tag to use instead of the event's own, for tags rewritten against
    /// this collection's union descriptor.
    pub tag: Option<Oref>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collection {
    pub name: String,
    pub format: Format,
    pub entries: Vec<CollectionEntry>,
    /// Union descriptor id; only v1 collections have one.
    pub union: Option<u64>,
}

impl Collection {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn owned_count(&self) -> usize {
        self.entries.iter().filter(|e| e.owned).count()
    }
}

/// One committed change to a collection: the first record for a name
/// creates it, later ones append entries and may move the union descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CollectionRecord {
    pub name: String,
    pub format: Format,
    pub entries: Vec<CollectionEntry>,
    pub union: Option<u64>,
}

const OWNED: u8 = 1;
const TAG_OVERRIDE: u8 = 2;
const V1_MODE: u8 = 1;
const HAS_UNION: u8 = 2;

impl CollectionRecord {
    /// Name, u32 entry count, entries of (Oref, u8 flags, optional tag
    /// Oref), then u8 flags and an optional u64 union descriptor id.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(4 + self.name.len() + 4 + 13 * self.entries.len() + 9);
        w.string(&self.name);
        w.u32(self.entries.len() as u32);
        for e in &self.entries {
            w.oref(e.event);
            let flags = if e.owned { OWNED } else { 0 } | if e.tag.is_some() { TAG_OVERRIDE } else { 0 };
            w.u8(flags);
            if let Some(t) = e.tag {
                w.oref(t);
            }
        }
        let flags = if self.format == Format::V1 { V1_MODE } else { 0 } | if self.union.is_some() { HAS_UNION } else { 0 };
        w.u8(flags);
        if let Some(u) = self.union {
            w.u64(u);
        }
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        let mut r = Reader::new(b);
        let name = r.string()?;
        let n = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n.min(b.len() / 13));
        for _ in 0..n {
            let event = r.oref()?;
            let flags = r.u8()?;
            let tag = if flags & TAG_OVERRIDE != 0 { Some(r.oref()?) } else { None };
            entries.push(CollectionEntry { event, owned: flags & OWNED != 0, tag });
        }
        let flags = r.u8()?;
        let union = if flags & HAS_UNION != 0 { Some(r.u64()?) } else { None };
        r.end()?;
        let format = if flags & V1_MODE != 0 { Format::V1 } else { Format::V2 };
        Ok(CollectionRecord { name, format, entries, union })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkimReport {
    pub output: String,
    pub format: Format,
    /// Distinct input events examined.
    pub scanned: usize,
    pub selected: usize,
    /// New tag records written for the output.
    pub rewritten_tags: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MigrateReport {
    pub input: String,
    pub output: String,
    pub events: usize,
}

impl EventStore {
    /// Collection names matching a glob, sorted.
    pub fn resolve(&self, pattern: &str) -> Result<Vec<String>> {
        let cat = self.catalog();
        resolve(cat.collections.keys().map(String::as_str), pattern)
    }

    /// Reference of the tag a collection entry presents.
    pub fn entry_tag_ref(&self, entry: &CollectionEntry) -> Result<Oref> {
        match entry.tag {
            Some(t) => Ok(t),
            None => Ok(self.event_info(entry.event)?.tag),
        }
    }

    pub fn entry_tag(&self, entry: &CollectionEntry) -> Result<Tag> {
        self.read_tag_record(self.entry_tag_ref(entry)?)
    }

    /// Filters the events of `inputs` by `predicate` into a new non-owning
    /// collection `output`. Events reached twice are kept once, at their
    /// first position. If any input is a v1 collection the output is too,
    /// and every selected tag is rewritten against the output's union
    /// descriptor; otherwise the output shares the original tags.
    pub fn skim(&self, inputs: &[String], predicate: &Predicate, output: &str, strict: bool) -> Result<SkimReport> {
        let colls = inputs.iter().map(|n| self.collection(n)).collect::<Result<Vec<_>>>()?;
        validate_name(output)?;
        if self.catalog().collections.contains_key(output) {
            return Err(Error::NameExists(output.into()));
        }
        let format = if colls.iter().any(|c| c.format == Format::V1) { Format::V1 } else { Format::V2 };
        let mut seen = HashSet::new();
        let mut selected: Vec<(Oref, Tag)> = Vec::new();
        for c in &colls {
            for e in &c.entries {
                if !seen.insert(e.event) {
                    continue;
                }
                let tag = self.entry_tag(e)?;
                if predicate.eval(&tag, strict)? {
                    selected.push((e.event, tag));
                }
            }
        }
        let mut tx = self.begin()?;
        tx.create_collection(output, format)?;
        let mut rewritten = 0;
        match format {
            Format::V2 => {
                for (event, _) in &selected {
                    tx.append_event(output, *event, false)?;
                }
            }
            Format::V1 if !selected.is_empty() => {
                let mut descs: Vec<Arc<TagDescriptor>> = Vec::new();
                let mut ids = HashSet::new();
                for (_, t) in &selected {
                    if ids.insert(t.descriptor_id()) {
                        descs.push(t.descriptor().clone());
                    }
                }
                let union = tx.widen_union(output, &descs)?;
                for (event, t) in &selected {
                    let (at, _) = tx.persist_tag(&t.widen_to(union.clone())?)?;
                    tx.append_entry(output, CollectionEntry { event: *event, owned: false, tag: Some(at) })?;
                    rewritten += 1;
                }
            }
            Format::V1 => {}
        }
        tx.commit()?;
        Ok(SkimReport { output: output.into(), format, scanned: seen.len(), selected: selected.len(), rewritten_tags: rewritten })
    }

    /// Copies every event of `input` into a new v2 collection `output`,
    /// which owns the copies. Tags are taken as `input` presents them. The
    /// source data is left as it is. Runs as one transaction.
    pub fn migrate(&self, input: &str, output: &str) -> Result<MigrateReport> {
        let src = self.collection(input)?;
        let mut tx = self.begin()?;
        tx.create_collection(output, Format::V2)?;
        for e in &src.entries {
            let mut ev = self.read_event(e.event)?;
            if e.tag.is_some() {
                ev.tag = self.entry_tag(e)?;
            }
            let at = tx.assemble_v2(&ev)?;
            tx.append_event(output, at, true)?;
        }
        tx.commit()?;
        Ok(MigrateReport { input: input.into(), output: output.into(), events: src.entries.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_roundtrip() {
        let rec = CollectionRecord {
            name: "/a/b".into(),
            format: Format::V1,
            entries: vec![
                CollectionEntry { event: Oref::new(0, 5), owned: true, tag: None },
                CollectionEntry { event: Oref::new(1, 9), owned: false, tag: Some(Oref::new(2, 3)) },
            ],
            union: Some(0xdead_beef),
        };
        let b = rec.encode();
        assert_eq!(b.len(), 4 + 4 + 4 + 13 + 25 + 1 + 8);
        assert_eq!(CollectionRecord::decode(&b).unwrap(), rec);
        let v2 = CollectionRecord { name: "/x".into(), format: Format::V2, entries: vec![], union: None };
        assert_eq!(CollectionRecord::decode(&v2.encode()).unwrap(), v2);
    }
}
