//! Transient event model: identifiers, component keys and packed layouts.
//!
//! An event identifier is split into a static fragment, which changes only at
//! run boundaries and is shared through common objects, and a dynamic
//! fragment stored inline in every event. Component keying information is
//! flattened into a packed layout string of the form `key=type;key=type`.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::tag::Tag;

/// Longest key, type name, attribute name or label accepted, in bytes.
pub const MAX_NAME_LEN: usize = 255;

/// Full identifier of one event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventId {
    pub experiment_label: String,
    pub run_number: u32,
    /// Detector/configuration epoch.
    pub config_key: u32,
    pub event_number: u64,
    /// Microseconds since the Unix epoch.
    pub timestamp_us: u64,
}

/// The slowly changing part of an [`EventId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StaticIdFragment {
    pub experiment_label: String,
    pub run_number: u32,
    pub config_key: u32,
}

/// The per-event part of an [`EventId`]. Never shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DynamicIdFragment {
    pub event_number: u64,
    pub timestamp_us: u64,
}

impl EventId {
    pub fn split(&self) -> (StaticIdFragment, DynamicIdFragment) {
        split_event_id(self)
    }

    pub fn join(stat: &StaticIdFragment, dynamic: DynamicIdFragment) -> EventId {
        EventId {
            experiment_label: stat.experiment_label.clone(),
            run_number: stat.run_number,
            config_key: stat.config_key,
            event_number: dynamic.event_number,
            timestamp_us: dynamic.timestamp_us,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.experiment_label.len() > MAX_NAME_LEN {
            return Err(Error::InvalidName(self.experiment_label.clone()));
        }
        Ok(())
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/run{}/cfg{}/ev{}@{}",
            self.experiment_label, self.run_number, self.config_key, self.event_number, self.timestamp_us
        )
    }
}

pub fn split_event_id(id: &EventId) -> (StaticIdFragment, DynamicIdFragment) {
    (
        StaticIdFragment {
            experiment_label: id.experiment_label.clone(),
            run_number: id.run_number,
            config_key: id.config_key,
        },
        DynamicIdFragment {
            event_number: id.event_number,
            timestamp_us: id.timestamp_us,
        },
    )
}

/// Checks the shared charset rule for keys, type names and attribute names.
pub(crate) fn check_name(s: &str) -> Result<()> {
    if s.is_empty() || s.len() > MAX_NAME_LEN {
        return Err(Error::InvalidName(s.to_string()));
    }
    if s.contains([';', '=']) {
        return Err(Error::IllegalCharacter(s.to_string()));
    }
    Ok(())
}

/// A (key, type) pair identifying one data object of an event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentEntry {
    key: String,
    type_name: String,
}

impl ComponentEntry {
    pub fn new(key: impl Into<String>, type_name: impl Into<String>) -> Result<Self> {
        let key = key.into();
        let type_name = type_name.into();
        check_name(&key)?;
        check_name(&type_name)?;
        Ok(ComponentEntry { key, type_name })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn type_name(&self) -> &str {
        &self.type_name
    }
}

impl fmt::Display for ComponentEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.type_name)
    }
}

/// Ordered component layout together with its packed string form.
///
/// Layouts compare by order: a permutation of the same entries is a
/// different layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackedLayout {
    entries: Vec<ComponentEntry>,
    packed: String,
}

impl PackedLayout {
    pub fn empty() -> Self {
        PackedLayout { entries: Vec::new(), packed: String::new() }
    }

    pub fn entries(&self) -> &[ComponentEntry] {
        &self.entries
    }

    pub fn packed_form(&self) -> &str {
        &self.packed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn pack_layout(entries: &[ComponentEntry]) -> Result<PackedLayout> {
    let mut seen = HashSet::with_capacity(entries.len());
    for e in entries {
        // Entries built through `ComponentEntry::new` are already valid, but
        // the check is cheap next to the join.
        check_name(&e.key)?;
        check_name(&e.type_name)?;
        if !seen.insert((e.key.as_str(), e.type_name.as_str())) {
            return Err(Error::DuplicateEntry { key: e.key.clone(), type_name: e.type_name.clone() });
        }
    }
    let cap = entries.iter().map(|e| e.key.len() + e.type_name.len() + 1).sum::<usize>()
        + entries.len().saturating_sub(1);
    let mut packed = String::with_capacity(cap);
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            packed.push(';');
        }
        packed.push_str(&e.key);
        packed.push('=');
        packed.push_str(&e.type_name);
    }
    Ok(PackedLayout { entries: entries.to_vec(), packed })
}

pub fn parse_layout(packed: &str) -> Result<Vec<ComponentEntry>> {
    if packed.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, part) in packed.split(';').enumerate() {
        let (key, ty) = part
            .split_once('=')
            .ok_or_else(|| Error::MalformedLayout(format!("entry {i} has no '='")))?;
        if key.is_empty() || ty.is_empty() {
            return Err(Error::MalformedLayout(format!("entry {i} has an empty key or type")));
        }
        let entry = ComponentEntry::new(key, ty)
            .map_err(|e| Error::MalformedLayout(format!("entry {i}: {e}")))?;
        if !seen.insert((key, ty)) {
            return Err(Error::MalformedLayout(format!("duplicate entry {key}={ty}")));
        }
        out.push(entry);
    }
    Ok(out)
}

impl std::str::FromStr for PackedLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = parse_layout(s)?;
        Ok(PackedLayout { entries, packed: s.to_string() })
    }
}

/// One data object of a transient event.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub entry: ComponentEntry,
    pub payload: Vec<u8>,
}

/// An event as seen by analysis code: an id, a bag of typed keyed objects and a tag.
#[derive(Debug, Clone)]
pub struct TransientEvent {
    pub id: EventId,
    pub components: Vec<Component>,
    pub tag: Tag,
}

impl TransientEvent {
    pub fn layout(&self) -> Result<PackedLayout> {
        let entries: Vec<ComponentEntry> = self.components.iter().map(|c| c.entry.clone()).collect();
        pack_layout(&entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(run: u32, ev: u64) -> EventId {
        EventId { experiment_label: "E".into(), run_number: run, config_key: 0, event_number: ev, timestamp_us: ev * 10 }
    }

    fn entry(k: &str, t: &str) -> ComponentEntry {
        ComponentEntry::new(k, t).unwrap()
    }

    #[test]
    fn split_zero_id() {
        let (s, d) = split_event_id(&id(0, 0));
        assert_eq!(s, StaticIdFragment { experiment_label: "E".into(), run_number: 0, config_key: 0 });
        assert_eq!(d, DynamicIdFragment { event_number: 0, timestamp_us: 0 });
        assert_eq!(EventId::join(&s, d), id(0, 0));
    }

    #[test]
    fn fragments_shared_within_run() {
        assert_eq!(id(3, 1).split().0, id(3, 2).split().0);
        assert_ne!(id(3, 1).split().1, id(3, 2).split().1);
    }

    #[test]
    fn one_static_fragment_per_run() {
        let fragments: HashSet<_> = (0..1000u64).map(|i| id((i / 1000) as u32, i).split().0).collect();
        assert_eq!(fragments.len(), 1);
        let fragments: HashSet<_> = (0..5000u64).map(|i| id((i / 1000) as u32, i).split().0).collect();
        assert_eq!(fragments.len(), 5);
    }

    #[test]
    fn pack_examples() {
        assert_eq!(pack_layout(&[]).unwrap().packed_form(), "");
        let l = pack_layout(&[entry("aod", "TrkList"), entry("tag", "TagT")]).unwrap();
        assert_eq!(l.packed_form(), "aod=TrkList;tag=TagT");
        let r = pack_layout(&[entry("tag", "TagT"), entry("aod", "TrkList")]).unwrap();
        assert_ne!(l.packed_form(), r.packed_form());
        assert_ne!(l, r);
    }

    #[test]
    fn pack_rejects_duplicates() {
        let err = pack_layout(&[entry("a", "T"), entry("a", "T")]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry { .. }));
        // same key, different type is fine
        pack_layout(&[entry("a", "T"), entry("a", "U")]).unwrap();
    }

    #[test]
    fn entry_charset() {
        assert!(matches!(ComponentEntry::new("a;b", "T"), Err(Error::IllegalCharacter(_))));
        assert!(matches!(ComponentEntry::new("a", "T=U"), Err(Error::IllegalCharacter(_))));
        assert!(matches!(ComponentEntry::new("", "T"), Err(Error::InvalidName(_))));
        assert!(matches!(ComponentEntry::new("k".repeat(256), "T"), Err(Error::InvalidName(_))));
        ComponentEntry::new("k".repeat(255), "T").unwrap();
    }

    #[test]
    fn parse_examples() {
        assert!(parse_layout("").unwrap().is_empty());
        assert_eq!(parse_layout("aod=TrkList;tag=TagT").unwrap(), vec![entry("aod", "TrkList"), entry("tag", "TagT")]);
        for bad in ["aod=TrkList;aod=TrkList", "aod", "=T", "a=", "a=T;", ";a=T", "a=T=U"] {
            assert!(matches!(parse_layout(bad), Err(Error::MalformedLayout(_))), "{bad}");
        }
    }

    #[test]
    fn packed_length_formula() {
        let entries: Vec<_> = (0..7).map(|i| entry(&format!("key{i}"), &format!("Type{}", i * 11))).collect();
        let l = pack_layout(&entries).unwrap();
        let expected: usize = entries.iter().map(|e| e.key().len() + e.type_name().len() + 1).sum::<usize>() + 6;
        assert_eq!(l.packed_form().len(), expected);
    }
}
