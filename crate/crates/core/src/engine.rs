//! The event store: segment storage plus the in-memory catalog of interned
//! descriptors, common objects, collections and access rules.
//!
//! The catalog is never persisted as such. Opening a store rebuilds it with
//! one scan over the committed records.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::codec::{Reader, Writer};
use crate::collections::namespace::{self, AccessMode, AccessRules};
use crate::collections::{Collection, CollectionEntry, CollectionRecord, Format};
use crate::common::{CommonObject, CommonRegistry};
use crate::error::{Error, Result};
use crate::layout::{is_navigation, ByteModel, V1EventRecord, V2EventRecord};
use crate::model::{PackedLayout, StaticIdFragment};
use crate::storage::{Oref, RecordType, Store, StoreOptions, Txn};
use crate::tag::{DescriptorRegistry, TagDescriptor};

/// Object counts and model bytes per record type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Accounting {
    objects: [u64; 10],
    bytes: [u64; 10],
}

fn slot(ty: RecordType) -> usize {
    ty as usize - 1
}

impl Accounting {
    pub fn add(&mut self, ty: RecordType, model_bytes: u64) {
        self.objects[slot(ty)] += 1;
        self.bytes[slot(ty)] += model_bytes;
    }

    pub fn merge(&mut self, other: &Accounting) {
        for i in 0..10 {
            self.objects[i] += other.objects[i];
            self.bytes[i] += other.bytes[i];
        }
    }

    pub fn objects(&self, ty: RecordType) -> u64 {
        self.objects[slot(ty)]
    }

    pub fn model_bytes(&self, ty: RecordType) -> u64 {
        self.bytes[slot(ty)]
    }

    /// Objects of the event model, excluding collection and access records.
    pub fn model_objects(&self) -> u64 {
        RecordType::ALL
            .iter()
            .filter(|&&t| !matches!(t, RecordType::Collection | RecordType::Access))
            .map(|&t| self.objects(t))
            .sum()
    }

    pub fn navigation_bytes(&self) -> u64 {
        RecordType::ALL.iter().filter(|&&t| is_navigation(t)).map(|&t| self.model_bytes(t)).sum()
    }

    pub fn events(&self) -> u64 {
        self.objects(RecordType::V1Event) + self.objects(RecordType::V2Event)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Shared {
    pub at: Oref,
    pub refs: u64,
}

/// What the catalog remembers about each event record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventInfo {
    pub format: Format,
    pub tag: Oref,
    pub descriptor: u64,
}

/// A common object together with its storage location and reference count.
#[derive(Debug, Clone)]
pub struct CommonInfo {
    pub object: Arc<CommonObject>,
    pub at: Oref,
    pub ref_count: u64,
}

#[derive(Debug, Default)]
pub(crate) struct Catalog {
    pub descriptors: HashMap<u64, Shared>,
    pub commons: HashMap<u64, Shared>,
    pub common_at: HashMap<Oref, u64>,
    pub events: HashMap<Oref, EventInfo>,
    pub collections: BTreeMap<String, Collection>,
    pub owners: HashMap<Oref, String>,
    pub access: AccessRules,
    pub accounting: Accounting,
}

impl Catalog {
    fn apply_collection(&mut self, rec: CollectionRecord) {
        for e in &rec.entries {
            if e.owned {
                self.owners.insert(e.event, rec.name.clone());
            }
        }
        match self.collections.get_mut(&rec.name) {
            Some(c) => {
                c.entries.extend(rec.entries);
                if rec.union.is_some() {
                    c.union = rec.union;
                }
            }
            None => {
                self.collections.insert(
                    rec.name.clone(),
                    Collection { name: rec.name, format: rec.format, entries: rec.entries, union: rec.union },
                );
            }
        }
    }
}

pub(crate) fn encode_access(path: &str, mode: AccessMode) -> Vec<u8> {
    let mut w = Writer::with_capacity(5 + path.len());
    w.string(path);
    w.u8(mode as u8);
    w.finish()
}

pub(crate) fn decode_access(b: &[u8]) -> Result<(String, AccessMode)> {
    let mut r = Reader::new(b);
    let path = r.string()?;
    let mode = match r.u8()? {
        0 => AccessMode::ReadWrite,
        1 => AccessMode::ReadOnly,
        m => return Err(Error::Format(format!("unknown access mode {m}"))),
    };
    r.end()?;
    Ok((path, mode))
}

/// Handle on an open event store.
pub struct EventStore {
    store: Store,
    descriptors: DescriptorRegistry,
    commons: CommonRegistry,
    catalog: RwLock<Catalog>,
}

impl std::fmt::Debug for EventStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventStore").field("dir", &self.store.dir()).finish_non_exhaustive()
    }
}

fn at_err(at: Oref) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Format(reason) => Error::CorruptRecord { at, reason },
        other => other,
    }
}

impl EventStore {
    pub fn create(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        Self::load(Store::create(dir, options)?)
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        Self::load(Store::open(dir)?)
    }

    /// Opens without fsync during commits. For benchmarks and tests.
    pub fn open_with(dir: impl AsRef<Path>, sync: bool) -> Result<Self> {
        Self::load(Store::open_with(dir.as_ref(), sync)?)
    }

    fn load(store: Store) -> Result<Self> {
        let model = store.model();
        let descriptors = DescriptorRegistry::new();
        let commons = CommonRegistry::new();
        let mut cat = Catalog::default();
        let mut tag_desc: HashMap<Oref, u64> = HashMap::new();
        for rec in store.scan() {
            let rec = rec?;
            let at = rec.at;
            let p = &rec.payload;
            cat.accounting.add(rec.ty, model.record_bytes(rec.ty, p).map_err(at_err(at))?);
            match rec.ty {
                RecordType::Descriptor => {
                    let d = TagDescriptor::decode(p, crate::tag::fnv1a64).map_err(at_err(at))?;
                    let d = descriptors.insert(d)?;
                    cat.descriptors.entry(d.id()).or_insert(Shared { at, refs: 0 });
                }
                RecordType::Common => {
                    let c = CommonObject::decode(p).map_err(at_err(at))?;
                    let (c, _) = commons.insert(c)?;
                    cat.commons.entry(c.common_id).or_insert(Shared { at, refs: 0 });
                    cat.common_at.insert(at, c.common_id);
                }
                RecordType::Tag => {
                    let id = Reader::new(p).u64().map_err(at_err(at))?;
                    if let Some(d) = cat.descriptors.get_mut(&id) {
                        d.refs += 1;
                    } else {
                        return Err(Error::CorruptRecord { at, reason: format!("tag uses unknown descriptor {id:#018x}") });
                    }
                    tag_desc.insert(at, id);
                }
                RecordType::V2Event => {
                    let ev = V2EventRecord::decode(p).map_err(at_err(at))?;
                    let cid = *cat.common_at.get(&ev.common).ok_or_else(|| Error::CorruptRecord {
                        at,
                        reason: format!("common ref {} is not a common object", ev.common),
                    })?;
                    cat.commons.get_mut(&cid).unwrap().refs += 1;
                    let descriptor = tag_of(&tag_desc, at, ev.tag)?;
                    cat.events.insert(at, EventInfo { format: Format::V2, tag: ev.tag, descriptor });
                }
                RecordType::V1Event => {
                    let ev = V1EventRecord::decode(p).map_err(at_err(at))?;
                    let descriptor = tag_of(&tag_desc, at, ev.tag)?;
                    cat.events.insert(at, EventInfo { format: Format::V1, tag: ev.tag, descriptor });
                }
                RecordType::Collection => {
                    let c = CollectionRecord::decode(p).map_err(at_err(at))?;
                    cat.apply_collection(c);
                }
                RecordType::Access => {
                    let (path, mode) = decode_access(p).map_err(at_err(at))?;
                    cat.access.set(&path, mode);
                }
                RecordType::Header | RecordType::Id | RecordType::Data => {}
            }
        }
        Ok(EventStore { store, descriptors, commons, catalog: RwLock::new(cat) })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn model(&self) -> ByteModel {
        self.store.model()
    }

    pub fn descriptors(&self) -> &DescriptorRegistry {
        &self.descriptors
    }

    pub fn begin(&self) -> Result<WriteTxn<'_>> {
        Ok(WriteTxn { es: self, txn: self.store.begin()?, p: Pending::default() })
    }

    pub(crate) fn catalog(&self) -> std::sync::RwLockReadGuard<'_, Catalog> {
        self.catalog.read().unwrap()
    }

    /// Live accounting of everything committed so far.
    pub fn accounting(&self) -> Accounting {
        self.catalog().accounting.clone()
    }

    pub fn descriptor(&self, id: u64) -> Result<Arc<TagDescriptor>> {
        self.descriptors.get(id).ok_or(Error::UnknownDescriptor(id))
    }

    /// Ids of the descriptors persisted in this store, sorted.
    pub fn stored_descriptors(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.catalog().descriptors.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn descriptor_ref_count(&self, id: u64) -> u64 {
        self.catalog().descriptors.get(&id).map_or(0, |d| d.refs)
    }

    pub fn common_get(&self, common_id: u64) -> Result<CommonInfo> {
        let cat = self.catalog();
        let s = cat.commons.get(&common_id).ok_or(Error::UnknownCommonObject(common_id))?;
        Ok(CommonInfo { object: self.commons.get(common_id)?, at: s.at, ref_count: s.refs })
    }

    pub fn common_count(&self) -> usize {
        self.catalog().commons.len()
    }

    pub(crate) fn common_id_at(&self, at: Oref) -> Result<u64> {
        self.catalog()
            .common_at
            .get(&at)
            .copied()
            .ok_or_else(|| Error::CorruptRecord { at, reason: "not a common object".into() })
    }

    pub(crate) fn common_at(&self, at: Oref) -> Result<Arc<CommonObject>> {
        self.commons.get(self.common_id_at(at)?)
    }

    pub fn event_info(&self, event: Oref) -> Result<EventInfo> {
        self.catalog().events.get(&event).copied().ok_or(Error::UnknownRef(event))
    }

    pub fn event_count(&self) -> usize {
        self.catalog().events.len()
    }

    pub fn collection(&self, name: &str) -> Result<Collection> {
        self.catalog().collections.get(name).cloned().ok_or_else(|| Error::UnknownCollection(name.into()))
    }

    pub fn collection_names(&self) -> Vec<String> {
        self.catalog().collections.keys().cloned().collect()
    }

    pub fn owner_of(&self, event: Oref) -> Option<String> {
        self.catalog().owners.get(&event).cloned()
    }

    pub fn access_mode(&self, path: &str) -> AccessMode {
        self.catalog().access.mode(path)
    }

    pub fn access_rules(&self) -> Vec<(String, AccessMode)> {
        self.catalog().access.rules()
    }
}

fn tag_of(tag_desc: &HashMap<Oref, u64>, at: Oref, tag: Oref) -> Result<u64> {
    tag_desc
        .get(&tag)
        .copied()
        .ok_or_else(|| Error::CorruptRecord { at, reason: format!("tag ref {tag} is not a tag record") })
}

#[derive(Debug)]
struct Delta {
    format: Format,
    created: bool,
    entries: Vec<CollectionEntry>,
    union: Option<u64>,
}

#[derive(Debug, Default)]
struct Pending {
    descriptors: HashMap<u64, Oref>,
    commons: HashMap<u64, Oref>,
    descriptor_refs: HashMap<u64, u64>,
    common_refs: HashMap<u64, u64>,
    events: HashMap<Oref, EventInfo>,
    tags: HashMap<Oref, u64>,
    collections: BTreeMap<String, Delta>,
    owners: HashMap<Oref, String>,
    access: Vec<(String, AccessMode)>,
    accounting: Accounting,
}

/// A write transaction over an [`EventStore`]. Dropping it aborts.
pub struct WriteTxn<'a> {
    pub(crate) es: &'a EventStore,
    txn: Txn<'a>,
    p: Pending,
}

impl std::fmt::Debug for WriteTxn<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WriteTxn").field("txn", &self.txn).finish_non_exhaustive()
    }
}

impl<'a> WriteTxn<'a> {
    pub fn store(&self) -> &'a EventStore {
        self.es
    }

    pub(crate) fn put(&mut self, ty: RecordType, payload: &[u8], model_bytes: u64) -> Result<Oref> {
        let at = self.txn.put(ty, payload)?;
        self.p.accounting.add(ty, model_bytes);
        Ok(at)
    }

    /// Appends an arbitrary record, bypassing the catalog. Only useful for
    /// building damaged stores in tests.
    #[doc(hidden)]
    pub fn put_raw(&mut self, ty: RecordType, payload: &[u8]) -> Result<Oref> {
        self.txn.put(ty, payload)
    }

    /// Makes sure `desc` is persisted in this store and returns the shared instance.
    pub(crate) fn ensure_descriptor(&mut self, desc: &Arc<TagDescriptor>) -> Result<Arc<TagDescriptor>> {
        let shared = self.es.descriptors.insert_shared(desc)?;
        let id = shared.id();
        if !self.es.catalog().descriptors.contains_key(&id) && !self.p.descriptors.contains_key(&id) {
            let model = self.es.model();
            let at = self.put(RecordType::Descriptor, &shared.encode(), model.descriptor(&shared))?;
            self.p.descriptors.insert(id, at);
        }
        Ok(shared)
    }

    pub(crate) fn intern_common(&mut self, stat: StaticIdFragment, layout: PackedLayout) -> Result<(u64, Oref)> {
        let (obj, _) = self.es.commons.intern(stat, layout)?;
        let id = obj.common_id;
        if let Some(s) = self.es.catalog().commons.get(&id) {
            return Ok((id, s.at));
        }
        if let Some(&at) = self.p.commons.get(&id) {
            return Ok((id, at));
        }
        let model = self.es.model();
        let bytes = model.common(obj.static_fragment.experiment_label.len(), obj.layout.packed_form().len());
        let at = self.put(RecordType::Common, &obj.encode(), bytes)?;
        self.p.commons.insert(id, at);
        Ok((id, at))
    }

    pub(crate) fn note_tag(&mut self, descriptor: u64) {
        *self.p.descriptor_refs.entry(descriptor).or_default() += 1;
    }

    pub(crate) fn note_event(&mut self, at: Oref, tag: (Oref, u64), common: Option<u64>) {
        let format = if common.is_some() { Format::V2 } else { Format::V1 };
        if let Some(c) = common {
            *self.p.common_refs.entry(c).or_default() += 1;
        }
        self.p.events.insert(at, EventInfo { format, tag: tag.0, descriptor: tag.1 });
        self.p.tags.insert(tag.0, tag.1);
    }

    fn event_info(&self, at: Oref) -> Result<EventInfo> {
        match self.p.events.get(&at) {
            Some(e) => Ok(*e),
            None => self.es.event_info(at),
        }
    }

    fn collection_exists(&self, name: &str) -> bool {
        self.p.collections.get(name).is_some_and(|d| d.created) || self.es.catalog().collections.contains_key(name)
    }

    pub(crate) fn collection_format(&self, name: &str) -> Result<Format> {
        if let Some(d) = self.p.collections.get(name) {
            return Ok(d.format);
        }
        self.es
            .catalog()
            .collections
            .get(name)
            .map(|c| c.format)
            .ok_or_else(|| Error::UnknownCollection(name.into()))
    }

    /// Current union descriptor id of a collection, including this transaction's changes.
    pub(crate) fn union_of(&self, name: &str) -> Result<Option<u64>> {
        if let Some(d) = self.p.collections.get(name) {
            if d.union.is_some() || d.created {
                return Ok(d.union);
            }
        }
        self.es
            .catalog()
            .collections
            .get(name)
            .map(|c| c.union)
            .ok_or_else(|| Error::UnknownCollection(name.into()))
    }

    fn delta(&mut self, name: &str) -> Result<&mut Delta> {
        if !self.p.collections.contains_key(name) {
            let format = self.collection_format(name)?;
            self.p
                .collections
                .insert(name.to_string(), Delta { format, created: false, entries: Vec::new(), union: None });
        }
        Ok(self.p.collections.get_mut(name).unwrap())
    }

    fn check_writable(&self, path: &str) -> Result<()> {
        let mut rules = self.es.catalog().access.clone();
        for (p, m) in &self.p.access {
            rules.set(p, *m);
        }
        match rules.mode(path) {
            AccessMode::ReadWrite => Ok(()),
            AccessMode::ReadOnly => Err(Error::AccessDenied(path.into())),
        }
    }

    /// Grows the union descriptor of `collection` to cover `desc` and returns it.
    pub(crate) fn grow_union(&mut self, collection: &str, desc: &Arc<TagDescriptor>) -> Result<Arc<TagDescriptor>> {
        let current = self.union_of(collection)?;
        let union = match current {
            None => self.es.descriptors.insert_shared(desc)?,
            Some(id) => {
                let cur = self.es.descriptor(id)?;
                if cur.covers(desc) {
                    cur
                } else {
                    let specs = cur.union_specs(desc)?;
                    self.es.descriptors.intern(&specs)?
                }
            }
        };
        let union = self.ensure_descriptor(&union)?;
        if current != Some(union.id()) {
            self.delta(collection)?.union = Some(union.id());
        }
        Ok(union)
    }

    /// Declares attributes a v1 collection will hold before any event is
    /// written, so its union descriptor does not grow event by event.
    pub fn widen_union(&mut self, collection: &str, descriptors: &[Arc<TagDescriptor>]) -> Result<Arc<TagDescriptor>> {
        self.check_writable(collection)?;
        let mut union = None;
        for d in descriptors {
            let current = self.union_of(collection)?;
            let merged = match current {
                None => self.es.descriptors.insert_shared(d)?,
                Some(id) => {
                    let cur = self.es.descriptor(id)?;
                    if cur.covers(d) {
                        cur
                    } else {
                        self.es.descriptors.intern(&cur.union_specs(d)?)?
                    }
                }
            };
            if current != Some(merged.id()) {
                self.delta(collection)?.union = Some(merged.id());
            }
            union = Some(merged);
        }
        match union {
            Some(u) => self.ensure_descriptor(&u),
            None => match self.union_of(collection)? {
                Some(id) => self.es.descriptor(id),
                None => self.ensure_descriptor(&self.es.descriptors.intern(&[])?),
            },
        }
    }

    pub fn create_collection(&mut self, name: &str, format: Format) -> Result<()> {
        namespace::validate_name(name)?;
        if self.collection_exists(name) {
            return Err(Error::NameExists(name.into()));
        }
        self.check_writable(name)?;
        self.p
            .collections
            .insert(name.to_string(), Delta { format, created: true, entries: Vec::new(), union: None });
        Ok(())
    }

    /// Appends an event to a collection. An owned append fails if another
    /// collection (or this one) already owns the event.
    pub fn append_event(&mut self, collection: &str, event: Oref, owned: bool) -> Result<()> {
        self.append_entry(collection, CollectionEntry { event, owned, tag: None })
    }

    pub(crate) fn append_entry(&mut self, collection: &str, entry: CollectionEntry) -> Result<()> {
        if !self.collection_exists(collection) {
            return Err(Error::UnknownCollection(collection.into()));
        }
        self.check_writable(collection)?;
        self.event_info(entry.event)?;
        if entry.owned {
            let owner = self.p.owners.get(&entry.event).cloned().or_else(|| self.es.owner_of(entry.event));
            if let Some(owner) = owner {
                return Err(Error::AlreadyOwned(entry.event, owner));
            }
            self.p.owners.insert(entry.event, collection.to_string());
        }
        self.delta(collection)?.entries.push(entry);
        Ok(())
    }

    /// Sets the access mode of a namespace subtree. `path` must be `/`, a
    /// collection, or a parent namespace of one.
    pub fn set_access(&mut self, path: &str, mode: AccessMode) -> Result<()> {
        let known = path == "/"
            || self
                .es
                .catalog()
                .collections
                .keys()
                .chain(self.p.collections.keys())
                .any(|n| namespace::is_within(n, path));
        if !known {
            return Err(Error::UnknownPath(path.into()));
        }
        let path = namespace::normalize(path);
        self.p.access.retain(|(p, _)| *p != path);
        self.p.access.push((path, mode));
        Ok(())
    }

    pub fn commit(mut self) -> Result<()> {
        let model = self.es.model();
        let deltas = std::mem::take(&mut self.p.collections);
        for (name, d) in &deltas {
            if !d.created && d.entries.is_empty() && d.union.is_none() {
                continue;
            }
            let rec = CollectionRecord { name: name.clone(), format: d.format, entries: d.entries.clone(), union: d.union };
            let bytes = rec.encode();
            self.put(RecordType::Collection, &bytes, model.data(bytes.len()))?;
        }
        for (path, mode) in std::mem::take(&mut self.p.access) {
            let bytes = encode_access(&path, mode);
            self.put(RecordType::Access, &bytes, model.data(bytes.len()))?;
            self.p.access.push((path, mode));
        }
        let WriteTxn { es, txn, p } = self;
        txn.commit()?;

        let mut cat = es.catalog.write().unwrap();
        for (id, at) in p.descriptors {
            cat.descriptors.insert(id, Shared { at, refs: 0 });
        }
        for (id, at) in p.commons {
            cat.commons.insert(id, Shared { at, refs: 0 });
            cat.common_at.insert(at, id);
        }
        for (id, n) in p.descriptor_refs {
            cat.descriptors.get_mut(&id).expect("tag descriptor persisted").refs += n;
        }
        for (id, n) in p.common_refs {
            cat.commons.get_mut(&id).expect("common object persisted").refs += n;
        }
        cat.events.extend(p.events);
        for (name, d) in deltas {
            cat.apply_collection(CollectionRecord { name, format: d.format, entries: d.entries, union: d.union });
        }
        for (path, mode) in p.access {
            cat.access.set(&path, mode);
        }
        cat.accounting.merge(&p.accounting);
        Ok(())
    }

    pub fn abort(self) -> Result<()> {
        self.txn.abort()
    }
}
