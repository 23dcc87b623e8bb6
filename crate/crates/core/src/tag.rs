//! Event tags and interned tag descriptors.
//!
//! A [`TagDescriptor`] is an immutable look-up table from attribute name to a
//! (kind, position) slot. Tags hold one value array per kind and are
//! dereferenced positionally through their descriptor. Descriptors are
//! content-interned: every tag with the same attribute list shares one
//! descriptor, identified by the FNV-1a hash of its canonical encoding.
//!
//! Attributes declared `transient_only` live in the tag's transient map and
//! are never part of a descriptor or of the persistent tag bytes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hasher;
use std::sync::{Arc, RwLock};

use fnv::FnvHasher;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::model::check_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrKind {
    Bool,
    Int,
    Float,
}

impl AttrKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            AttrKind::Bool => b'B',
            AttrKind::Int => b'I',
            AttrKind::Float => b'F',
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            b'B' => Some(AttrKind::Bool),
            b'I' => Some(AttrKind::Int),
            b'F' => Some(AttrKind::Float),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn zero(self) -> TagValue {
        match self {
            AttrKind::Bool => TagValue::Bool(false),
            AttrKind::Int => TagValue::Int(0),
            AttrKind::Float => TagValue::Float(0.0),
        }
    }
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrKind::Bool => "bool",
            AttrKind::Int => "int",
            AttrKind::Float => "float",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TagValue {
    Bool(bool),
    Int(i32),
    Float(f32),
}

impl TagValue {
    pub fn kind(&self) -> AttrKind {
        match self {
            TagValue::Bool(_) => AttrKind::Bool,
            TagValue::Int(_) => AttrKind::Int,
            TagValue::Float(_) => AttrKind::Float,
        }
    }

    /// Numeric view used by predicates: booleans map to 0/1, and every i32
    /// and f32 is exactly representable.
    pub fn as_f64(&self) -> f64 {
        match *self {
            TagValue::Bool(b) => b as u8 as f64,
            TagValue::Int(i) => i as f64,
            TagValue::Float(x) => x as f64,
        }
    }

    /// Bitwise equality, so that NaN payloads round-trip as equal.
    pub fn same_bits(&self, other: &TagValue) -> bool {
        match (self, other) {
            (TagValue::Float(a), TagValue::Float(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

impl fmt::Display for TagValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TagValue::Bool(b) => write!(f, "{b}"),
            TagValue::Int(i) => write!(f, "{i}"),
            TagValue::Float(x) => write!(f, "{x:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttrKind,
    pub transient_only: bool,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, kind: AttrKind) -> Self {
        AttributeSpec { name: name.into(), kind, transient_only: false }
    }

    pub fn transient(name: impl Into<String>, kind: AttrKind) -> Self {
        AttributeSpec { name: name.into(), kind, transient_only: true }
    }
}

/// Hash function used to derive descriptor ids from canonical encodings.
pub type HashFn = fn(&[u8]) -> u64;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    kind: AttrKind,
    pos: u32,
}

/// Immutable, shareable attribute list of a tag.
#[derive(Debug, Clone)]
pub struct TagDescriptor {
    id: u64,
    specs: Vec<AttributeSpec>,
    slots: HashMap<String, Slot>,
    counts: [usize; 3],
}

impl PartialEq for TagDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.specs == other.specs
    }
}

impl Eq for TagDescriptor {}

impl TagDescriptor {
    pub fn new(specs: &[AttributeSpec]) -> Result<Self> {
        Self::with_hash(specs, fnv1a64)
    }

    /// Builds a descriptor from `specs`, dropping transient-only entries.
    pub fn with_hash(specs: &[AttributeSpec], hash: HashFn) -> Result<Self> {
        let mut names = HashSet::with_capacity(specs.len());
        for s in specs {
            check_name(&s.name)?;
            if !names.insert(s.name.as_str()) {
                return Err(Error::DuplicateAttributeName(s.name.clone()));
            }
        }
        let specs: Vec<AttributeSpec> = specs
            .iter()
            .filter(|s| !s.transient_only)
            .cloned()
            .collect();
        let mut counts = [0usize; 3];
        let mut slots = HashMap::with_capacity(specs.len());
        for s in &specs {
            let k = s.kind.index();
            slots.insert(s.name.clone(), Slot { kind: s.kind, pos: counts[k] as u32 });
            counts[k] += 1;
        }
        let id = hash(&canonical_encoding(&specs));
        Ok(TagDescriptor { id, specs, slots, counts })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn specs(&self) -> &[AttributeSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn count(&self, kind: AttrKind) -> usize {
        self.counts[kind.index()]
    }

    pub fn kind_of(&self, name: &str) -> Option<AttrKind> {
        self.slots.get(name).map(|s| s.kind)
    }

    pub fn canonical_encoding(&self) -> Vec<u8> {
        canonical_encoding(&self.specs)
    }

    /// Length of the persistent tag encoding for this descriptor, without
    /// the per-object header.
    pub fn tag_encoded_len(&self) -> usize {
        8 + self.count(AttrKind::Bool).div_ceil(8)
            + 4 * self.count(AttrKind::Int)
            + 4 * self.count(AttrKind::Float)
    }

    /// Spec list of `self` followed by any attributes of `other` not already
    /// present. Positions of existing attributes are unchanged.
    pub fn union_specs(&self, other: &TagDescriptor) -> Result<Vec<AttributeSpec>> {
        let mut out = self.specs.clone();
        for s in &other.specs {
            match self.kind_of(&s.name) {
                Some(k) if k == s.kind => {}
                Some(k) => {
                    return Err(Error::KindConflict { name: s.name.clone(), existing: k, got: s.kind })
                }
                None => out.push(s.clone()),
            }
        }
        Ok(out)
    }

    /// Persistent encoding: u64 id, u32 count, then per attribute a
    /// u32-length-prefixed name and a kind byte (`B`, `I` or `F`).
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(12 + self.specs.iter().map(|s| s.name.len() + 5).sum::<usize>());
        w.u64(self.id);
        w.u32(self.specs.len() as u32);
        for s in &self.specs {
            w.string(&s.name);
            w.u8(s.kind.code());
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8], hash: HashFn) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let id = r.u64()?;
        let n = r.u32()? as usize;
        let mut specs = Vec::with_capacity(n.min(bytes.len()));
        for _ in 0..n {
            let name = r.string()?;
            let code = r.u8()?;
            let kind = AttrKind::from_code(code)
                .ok_or_else(|| Error::Format(format!("unknown attribute kind {code:#x}")))?;
            specs.push(AttributeSpec::new(name, kind));
        }
        r.end()?;
        let desc = TagDescriptor::with_hash(&specs, hash)?;
        if desc.id != id {
            return Err(Error::Format(format!("descriptor id {id:#018x} does not match its content")));
        }
        Ok(desc)
    }

    /// True when every attribute of `other` is present here with the same kind.
    pub fn covers(&self, other: &TagDescriptor) -> bool {
        other.specs.iter().all(|s| self.kind_of(&s.name) == Some(s.kind))
    }
}

/// `name|K` entries joined by ';'; K is one of B, I, F.
fn canonical_encoding(specs: &[AttributeSpec]) -> Vec<u8> {
    let mut out = Vec::with_capacity(specs.iter().map(|s| s.name.len() + 3).sum());
    for (i, s) in specs.iter().enumerate() {
        if i > 0 {
            out.push(b';');
        }
        out.extend_from_slice(s.name.as_bytes());
        out.push(b'|');
        out.push(s.kind.code());
    }
    out
}

/// Content-interning registry of descriptors. Safe to share between threads;
/// concurrent interning of equal lists converges on one instance.
pub struct DescriptorRegistry {
    map: RwLock<HashMap<u64, Arc<TagDescriptor>>>,
    hash: HashFn,
}

impl Default for DescriptorRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for DescriptorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DescriptorRegistry").field("len", &self.len()).finish()
    }
}

impl DescriptorRegistry {
    pub fn new() -> Self {
        Self::with_hash(fnv1a64)
    }

    /// Registry using a custom id hash. Mostly useful for forcing collisions.
    pub fn with_hash(hash: HashFn) -> Self {
        DescriptorRegistry { map: RwLock::new(HashMap::new()), hash }
    }

    pub fn intern(&self, specs: &[AttributeSpec]) -> Result<Arc<TagDescriptor>> {
        let desc = TagDescriptor::with_hash(specs, self.hash)?;
        self.insert(desc)
    }

    /// Interns an already built descriptor, returning the shared instance.
    pub fn insert(&self, desc: TagDescriptor) -> Result<Arc<TagDescriptor>> {
        if let Some(existing) = self.map.read().unwrap().get(&desc.id) {
            return check_same(existing, &desc);
        }
        let mut map = self.map.write().unwrap();
        match map.get(&desc.id) {
            Some(existing) => check_same(existing, &desc),
            None => {
                let arc = Arc::new(desc);
                map.insert(arc.id, arc.clone());
                Ok(arc)
            }
        }
    }

    /// Like [`insert`](Self::insert), but skips the copy when `desc` is
    /// already registered.
    pub fn insert_shared(&self, desc: &Arc<TagDescriptor>) -> Result<Arc<TagDescriptor>> {
        if let Some(existing) = self.map.read().unwrap().get(&desc.id) {
            if Arc::ptr_eq(existing, desc) {
                return Ok(existing.clone());
            }
            return check_same(existing, desc);
        }
        self.insert(TagDescriptor::clone(desc))
    }

    pub fn get(&self, id: u64) -> Option<Arc<TagDescriptor>> {
        self.map.read().unwrap().get(&id).cloned()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.map.read().unwrap().contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Persistent bytes of `tag`. The tag's descriptor must be interned here.
    pub fn persist_tag(&self, tag: &Tag) -> Result<Vec<u8>> {
        match self.get(tag.descriptor_id()) {
            Some(d) if *d == *tag.descriptor => Ok(tag.encode()),
            _ => Err(Error::UnknownDescriptor(tag.descriptor_id())),
        }
    }

    pub fn decode_tag(&self, bytes: &[u8]) -> Result<Tag> {
        let id = bytes
            .get(..8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Format("tag shorter than its descriptor id".into()))?;
        let desc = self.get(id).ok_or(Error::UnknownDescriptor(id))?;
        Tag::decode(desc, bytes)
    }
}

fn check_same(existing: &Arc<TagDescriptor>, new: &TagDescriptor) -> Result<Arc<TagDescriptor>> {
    if existing.specs == new.specs {
        Ok(existing.clone())
    } else {
        Err(Error::HashCollision(new.id))
    }
}

/// Per-event summary record.
#[derive(Debug, Clone)]
pub struct Tag {
    descriptor: Arc<TagDescriptor>,
    bools: Vec<bool>,
    ints: Vec<i32>,
    floats: Vec<f32>,
    transient_specs: HashMap<String, AttrKind>,
    transient_values: HashMap<String, TagValue>,
}

impl Tag {
    /// New tag with every attribute at its zero default.
    pub fn new(descriptor: Arc<TagDescriptor>) -> Self {
        Tag {
            bools: vec![false; descriptor.count(AttrKind::Bool)],
            ints: vec![0; descriptor.count(AttrKind::Int)],
            floats: vec![0.0; descriptor.count(AttrKind::Float)],
            descriptor,
            transient_specs: HashMap::new(),
            transient_values: HashMap::new(),
        }
    }

    /// Tag built from per-kind value arrays, each in descriptor order.
    pub fn from_arrays(descriptor: Arc<TagDescriptor>, bools: Vec<bool>, ints: Vec<i32>, floats: Vec<f32>) -> Result<Self> {
        if bools.len() != descriptor.count(AttrKind::Bool)
            || ints.len() != descriptor.count(AttrKind::Int)
            || floats.len() != descriptor.count(AttrKind::Float)
        {
            return Err(Error::Format("value arrays do not match the descriptor".into()));
        }
        Ok(Tag { descriptor, bools, ints, floats, transient_specs: HashMap::new(), transient_values: HashMap::new() })
    }

    /// New tag that also accepts the given transient-only attributes.
    pub fn with_transient(descriptor: Arc<TagDescriptor>, transient: &[AttributeSpec]) -> Result<Self> {
        let mut tag = Tag::new(descriptor);
        for s in transient {
            check_name(&s.name)?;
            if tag.descriptor.kind_of(&s.name).is_some()
                || tag.transient_specs.insert(s.name.clone(), s.kind).is_some()
            {
                return Err(Error::DuplicateAttributeName(s.name.clone()));
            }
        }
        Ok(tag)
    }

    pub fn descriptor(&self) -> &Arc<TagDescriptor> {
        &self.descriptor
    }

    pub fn descriptor_id(&self) -> u64 {
        self.descriptor.id
    }

    pub fn set(&mut self, name: &str, value: TagValue) -> Result<()> {
        if let Some(&kind) = self.transient_specs.get(name) {
            if kind != value.kind() {
                return Err(Error::KindMismatch { name: name.into(), expected: kind, got: value.kind() });
            }
            self.transient_values.insert(name.to_string(), value);
            return Ok(());
        }
        let slot = *self
            .descriptor
            .slots
            .get(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))?;
        let pos = slot.pos as usize;
        match (slot.kind, value) {
            (AttrKind::Bool, TagValue::Bool(b)) => self.bools[pos] = b,
            (AttrKind::Int, TagValue::Int(i)) => self.ints[pos] = i,
            (AttrKind::Float, TagValue::Float(x)) => self.floats[pos] = x,
            (expected, v) => {
                return Err(Error::KindMismatch { name: name.into(), expected, got: v.kind() })
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<TagValue> {
        if let Some(&kind) = self.transient_specs.get(name) {
            return Ok(self.transient_values.get(name).copied().unwrap_or(kind.zero()));
        }
        let slot = self
            .descriptor
            .slots
            .get(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))?;
        Ok(self.value_at(slot.kind, slot.pos as usize))
    }

    fn value_at(&self, kind: AttrKind, pos: usize) -> TagValue {
        match kind {
            AttrKind::Bool => TagValue::Bool(self.bools[pos]),
            AttrKind::Int => TagValue::Int(self.ints[pos]),
            AttrKind::Float => TagValue::Float(self.floats[pos]),
        }
    }

    /// Persistent (name, value) pairs in descriptor order.
    pub fn values(&self) -> impl Iterator<Item = (&str, TagValue)> + '_ {
        let mut next = [0usize; 3];
        self.descriptor.specs.iter().map(move |s| {
            let pos = next[s.kind.index()];
            next[s.kind.index()] += 1;
            (s.name.as_str(), self.value_at(s.kind, pos))
        })
    }

    /// Copy of this tag re-expressed against a wider descriptor. Attributes
    /// missing from `self` keep their zero defaults. Transient values are dropped.
    pub fn widen_to(&self, wider: Arc<TagDescriptor>) -> Result<Tag> {
        let mut out = Tag::new(wider);
        for (name, value) in self.values() {
            match out.descriptor.kind_of(name) {
                Some(k) if k == value.kind() => out.set(name, value)?,
                Some(k) => {
                    return Err(Error::KindConflict { name: name.into(), existing: k, got: value.kind() })
                }
                None => return Err(Error::UnknownAttribute(name.into())),
            }
        }
        Ok(out)
    }

    /// Persistent encoding: descriptor id (u64 LE), LSB-first bit-packed
    /// bools, i32 LE ints, f32 LE floats. Transient values are not encoded.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.descriptor.tag_encoded_len());
        out.extend_from_slice(&self.descriptor.id.to_le_bytes());
        for chunk in self.bools.chunks(8) {
            let mut byte = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                byte |= (b as u8) << i;
            }
            out.push(byte);
        }
        for i in &self.ints {
            out.extend_from_slice(&i.to_le_bytes());
        }
        for x in &self.floats {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(descriptor: Arc<TagDescriptor>, bytes: &[u8]) -> Result<Tag> {
        if bytes.len() != descriptor.tag_encoded_len() {
            return Err(Error::Format(format!(
                "tag is {} bytes, descriptor {:#018x} needs {}",
                bytes.len(),
                descriptor.id,
                descriptor.tag_encoded_len()
            )));
        }
        let id = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        if id != descriptor.id {
            return Err(Error::UnknownDescriptor(id));
        }
        let mut tag = Tag::new(descriptor);
        let nb = tag.bools.len();
        let mut at = 8;
        for (i, b) in tag.bools.iter_mut().enumerate() {
            *b = bytes[at + i / 8] >> (i % 8) & 1 == 1;
        }
        at += nb.div_ceil(8);
        for v in tag.ints.iter_mut() {
            *v = i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            at += 4;
        }
        for v in tag.floats.iter_mut() {
            *v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            at += 4;
        }
        Ok(tag)
    }

    /// Compares descriptor and persistent values (floats bitwise).
    pub fn same_persistent(&self, other: &Tag) -> bool {
        self.descriptor_id() == other.descriptor_id()
            && self.bools == other.bools
            && self.ints == other.ints
            && self.floats.len() == other.floats.len()
            && self.floats.iter().zip(&other.floats).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs(n: usize, prefix: &str, kind: AttrKind) -> Vec<AttributeSpec> {
        (0..n).map(|i| AttributeSpec::new(format!("{prefix}{i}"), kind)).collect()
    }

    #[test]
    fn fnv_reference_vectors() {
        // independent loop over the published FNV-1a 64 parameters
        fn reference(bytes: &[u8]) -> u64 {
            let mut h: u64 = 0xcbf29ce484222325;
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h
        }
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"isMuon|B;nTracks|I"), reference(b"isMuon|B;nTracks|I"));
    }

    #[test]
    fn canonical_form() {
        let d = TagDescriptor::new(&[
            AttributeSpec::new("isMuon", AttrKind::Bool),
            AttributeSpec::new("nTracks", AttrKind::Int),
            AttributeSpec::transient("calibPass", AttrKind::Int),
            AttributeSpec::new("eTotal", AttrKind::Float),
        ])
        .unwrap();
        assert_eq!(d.canonical_encoding(), b"isMuon|B;nTracks|I;eTotal|F");
        assert_eq!(d.id(), fnv1a64(b"isMuon|B;nTracks|I;eTotal|F"));
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn empty_descriptor_interned_once() {
        let reg = DescriptorRegistry::new();
        let a = reg.intern(&[]).unwrap();
        let b = reg.intern(&[]).unwrap();
        assert_eq!(a.id(), fnv1a64(b""));
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn same_list_from_many_tags_is_one_descriptor() {
        let reg = DescriptorRegistry::new();
        let list = vec![
            AttributeSpec::new("a", AttrKind::Bool),
            AttributeSpec::new("b", AttrKind::Int),
            AttributeSpec::new("c", AttrKind::Float),
        ];
        let first = reg.intern(&list).unwrap().id();
        for _ in 0..10_000 {
            assert_eq!(reg.intern(&list).unwrap().id(), first);
        }
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn one_kind_change_in_500_gives_new_id() {
        let base = specs(500, "attr", AttrKind::Int);
        let mut changed = base.clone();
        changed[250].kind = AttrKind::Float;
        let a = TagDescriptor::new(&base).unwrap();
        let b = TagDescriptor::new(&changed).unwrap();
        assert_ne!(a.canonical_encoding(), b.canonical_encoding());
        assert_ne!(a.id(), b.id());
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = TagDescriptor::new(&[
            AttributeSpec::new("x", AttrKind::Int),
            AttributeSpec::transient("x", AttrKind::Bool),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateAttributeName(_)));
    }

    #[test]
    fn forced_collision_is_detected() {
        let reg = DescriptorRegistry::with_hash(|_| 7);
        reg.intern(&specs(2, "a", AttrKind::Int)).unwrap();
        reg.intern(&specs(2, "a", AttrKind::Int)).unwrap();
        let err = reg.intern(&specs(2, "b", AttrKind::Int)).unwrap_err();
        assert!(matches!(err, Error::HashCollision(7)));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn set_get() {
        let reg = DescriptorRegistry::new();
        let d = reg
            .intern(&[
                AttributeSpec::new("isMuon", AttrKind::Bool),
                AttributeSpec::new("nTracks", AttrKind::Int),
                AttributeSpec::new("x", AttrKind::Float),
            ])
            .unwrap();
        let mut tag = Tag::new(d);
        assert_eq!(tag.get("nTracks").unwrap(), TagValue::Int(0));
        tag.set("isMuon", TagValue::Bool(true)).unwrap();
        assert_eq!(tag.get("isMuon").unwrap(), TagValue::Bool(true));
        assert!(matches!(tag.set("nTracks", TagValue::Float(1.0)), Err(Error::KindMismatch { .. })));
        tag.set("x", TagValue::Float(3.5)).unwrap();
        assert_eq!(tag.get("x").unwrap(), TagValue::Float(3.5));
        assert!(matches!(tag.get("nope"), Err(Error::UnknownAttribute(_))));
        assert!(matches!(tag.set("nope", TagValue::Int(1)), Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn transient_attribute_is_not_persisted() {
        let reg = DescriptorRegistry::new();
        let d = reg.intern(&[AttributeSpec::new("nTracks", AttrKind::Int)]).unwrap();
        let mut tag = Tag::with_transient(d, &[AttributeSpec::transient("calibPass", AttrKind::Int)]).unwrap();
        tag.set("calibPass", TagValue::Int(3)).unwrap();
        tag.set("nTracks", TagValue::Int(7)).unwrap();
        assert_eq!(tag.get("calibPass").unwrap(), TagValue::Int(3));
        let bytes = reg.persist_tag(&tag).unwrap();
        let back = reg.decode_tag(&bytes).unwrap();
        assert_eq!(back.get("nTracks").unwrap(), TagValue::Int(7));
        assert!(matches!(back.get("calibPass"), Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn persisted_sizes() {
        let reg = DescriptorRegistry::new();
        let empty = reg.intern(&[]).unwrap();
        // 16 header + 8 descriptor ref = 24 under the byte model
        assert_eq!(16 + reg.persist_tag(&Tag::new(empty.clone())).unwrap().len(), 24);

        let d = reg.intern(&specs(500, "i", AttrKind::Int)).unwrap();
        assert_eq!(16 + reg.persist_tag(&Tag::new(d)).unwrap().len(), 2024);

        let mut only_transient =
            Tag::with_transient(empty.clone(), &[AttributeSpec::transient("t", AttrKind::Float)]).unwrap();
        only_transient.set("t", TagValue::Float(1.0)).unwrap();
        assert_eq!(reg.persist_tag(&only_transient).unwrap(), reg.persist_tag(&Tag::new(empty)).unwrap());
    }

    #[test]
    fn bit_layout_is_lsb_first() {
        let reg = DescriptorRegistry::new();
        let d = reg.intern(&specs(10, "b", AttrKind::Bool)).unwrap();
        let mut tag = Tag::new(d.clone());
        tag.set("b0", TagValue::Bool(true)).unwrap();
        tag.set("b3", TagValue::Bool(true)).unwrap();
        tag.set("b9", TagValue::Bool(true)).unwrap();
        let bytes = tag.encode();
        assert_eq!(&bytes[..8], &d.id().to_le_bytes());
        assert_eq!(&bytes[8..], &[0b0000_1001, 0b0000_0010]);
    }

    #[test]
    fn descriptor_encoding_roundtrip() {
        let d = TagDescriptor::new(&[AttributeSpec::new("nTracks", AttrKind::Int), AttributeSpec::new("mu", AttrKind::Bool)])
            .unwrap();
        let bytes = d.encode();
        assert_eq!(bytes.len(), 8 + 4 + (4 + 7 + 1) + (4 + 2 + 1));
        assert_eq!(TagDescriptor::decode(&bytes, fnv1a64).unwrap(), d);
        let mut bad = bytes.clone();
        bad[0] ^= 1;
        assert!(TagDescriptor::decode(&bad, fnv1a64).is_err());
    }

    #[test]
    fn persist_requires_interned_descriptor() {
        let reg = DescriptorRegistry::new();
        let d = Arc::new(TagDescriptor::new(&specs(1, "x", AttrKind::Int)).unwrap());
        assert!(matches!(reg.persist_tag(&Tag::new(d)), Err(Error::UnknownDescriptor(_))));
    }

    #[test]
    fn widen_keeps_values_and_zero_fills() {
        let reg = DescriptorRegistry::new();
        let a = reg.intern(&specs(3, "a", AttrKind::Int)).unwrap();
        let b = reg.intern(&specs(3, "b", AttrKind::Int)).unwrap();
        let u = reg.intern(&a.union_specs(&b).unwrap()).unwrap();
        assert_eq!(u.len(), 6);
        let mut tag = Tag::new(a);
        tag.set("a1", TagValue::Int(5)).unwrap();
        let wide = tag.widen_to(u).unwrap();
        assert_eq!(wide.get("a1").unwrap(), TagValue::Int(5));
        assert_eq!(wide.get("b2").unwrap(), TagValue::Int(0));

        let c = reg.intern(&specs(1, "a", AttrKind::Float)).unwrap();
        assert!(matches!(b.union_specs(&c).and_then(|_| wide.descriptor().union_specs(&c)), Err(Error::KindConflict { .. })));
    }
}
