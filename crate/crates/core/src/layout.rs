//! Persistent event structures and navigation byte accounting.
//!
//! Two layouts share one store and one reader:
//!
//! * **v2** (redesigned): one event record holding the dynamic id fragment
//!   inline, a reference to an interned common object (static id fragment and
//!   packed component layout), a single array of data references matched
//!   positionally to that layout, and a reference to the tag.
//! * **v1** (legacy emulation): an event object pointing at one header object
//!   per component (key, type, data reference), a full id object, and a tag
//!   widened to its collection's union descriptor.
//!
//! The [`ByteModel`] prices every persistent object: a fixed per-object
//! header, 8 bytes per object reference, 4 + len for strings, and the plain
//! width of fixed integers. Navigation bytes are everything except component
//! payloads.

use std::sync::Arc;

use serde::Serialize;

use crate::codec::{Reader, Writer};
use crate::collections::Format;
use crate::engine::{EventStore, WriteTxn};
use crate::error::{Error, Result};
use crate::model::{Component, ComponentEntry, DynamicIdFragment, EventId, TransientEvent};
use crate::storage::{Oref, RecordType};
use crate::tag::{Tag, TagDescriptor};

/// Size constants of the byte-accounting model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ByteModel {
    /// Cost charged to every persistent object for its header.
    pub object_header: u64,
    /// Width of one object reference field.
    pub oref: u64,
}

impl Default for ByteModel {
    fn default() -> Self {
        ByteModel { object_header: 16, oref: 8 }
    }
}

const U32: u64 = 4;
const U64: u64 = 8;

fn string(len: usize) -> u64 {
    U32 + len as u64
}

impl ByteModel {
    /// Dynamic fragment, common ref, one ref per component, tag ref. The
    /// component count is implied by the common object's layout.
    pub fn v2_event(&self, components: usize) -> u64 {
        self.object_header + 2 * U64 + self.oref + components as u64 * self.oref + self.oref
    }

    /// Header-ref array (count + refs), id ref, tag ref.
    pub fn v1_event(&self, components: usize) -> u64 {
        self.object_header + U32 + components as u64 * self.oref + self.oref + self.oref
    }

    pub fn header(&self, key_len: usize, type_len: usize) -> u64 {
        self.object_header + string(key_len) + string(type_len) + self.oref
    }

    pub fn id_object(&self, label_len: usize) -> u64 {
        self.object_header + string(label_len) + 2 * U32 + 2 * U64
    }

    pub fn tag(&self, desc: &TagDescriptor) -> u64 {
        self.object_header + desc.tag_encoded_len() as u64
    }

    pub fn common(&self, label_len: usize, packed_len: usize) -> u64 {
        self.object_header + U64 + string(label_len) + 2 * U32 + string(packed_len)
    }

    pub fn descriptor(&self, desc: &TagDescriptor) -> u64 {
        self.object_header
            + U64
            + U32
            + desc.specs().iter().map(|s| string(s.name.len()) + 1).sum::<u64>()
    }

    pub fn data(&self, payload_len: usize) -> u64 {
        self.object_header + payload_len as u64
    }

    /// Model bytes of a stored record, worked out from its payload.
    pub fn record_bytes(&self, ty: RecordType, payload: &[u8]) -> Result<u64> {
        let h = self.object_header;
        Ok(match ty {
            RecordType::V2Event => self.v2_event(V2EventRecord::decode(payload)?.data.len()),
            RecordType::V1Event => self.v1_event(V1EventRecord::decode(payload)?.headers.len()),
            RecordType::Header => {
                let r = HeaderRecord::decode(payload)?;
                self.header(r.entry.key().len(), r.entry.type_name().len())
            }
            // these payloads carry no object references, so the stored
            // length is already the model length
            RecordType::Id | RecordType::Tag | RecordType::Common | RecordType::Descriptor => {
                h + payload.len() as u64
            }
            RecordType::Data | RecordType::Collection | RecordType::Access => h + payload.len() as u64,
        })
    }
}

/// Record types counted as navigation (everything but payloads and catalog records).
pub fn is_navigation(ty: RecordType) -> bool {
    !matches!(ty, RecordType::Data | RecordType::Collection | RecordType::Access)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct V2EventRecord {
    pub dynamic: DynamicIdFragment,
    pub common: Oref,
    pub data: Vec<Oref>,
    pub tag: Oref,
}

impl V2EventRecord {
    /// u64 event number, u64 timestamp, common ref, u32 count, data refs, tag ref.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(16 + 12 + 4 + 12 * self.data.len() + 12);
        w.u64(self.dynamic.event_number);
        w.u64(self.dynamic.timestamp_us);
        w.oref(self.common);
        w.u32(self.data.len() as u32);
        for r in &self.data {
            w.oref(*r);
        }
        w.oref(self.tag);
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        let mut r = Reader::new(b);
        let dynamic = DynamicIdFragment { event_number: r.u64()?, timestamp_us: r.u64()? };
        let common = r.oref()?;
        let n = r.u32()? as usize;
        let data = (0..n).map(|_| r.oref()).collect::<Result<Vec<_>>>()?;
        let tag = r.oref()?;
        r.end()?;
        Ok(V2EventRecord { dynamic, common, data, tag })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct V1EventRecord {
    pub headers: Vec<Oref>,
    pub id: Oref,
    pub tag: Oref,
}

impl V1EventRecord {
    /// u32 count, header refs, id ref, tag ref.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(4 + 12 * self.headers.len() + 24);
        w.u32(self.headers.len() as u32);
        for r in &self.headers {
            w.oref(*r);
        }
        w.oref(self.id);
        w.oref(self.tag);
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        let mut r = Reader::new(b);
        let n = r.u32()? as usize;
        let headers = (0..n).map(|_| r.oref()).collect::<Result<Vec<_>>>()?;
        let id = r.oref()?;
        let tag = r.oref()?;
        r.end()?;
        Ok(V1EventRecord { headers, id, tag })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderRecord {
    pub entry: ComponentEntry,
    pub data: Oref,
}

impl HeaderRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(8 + self.entry.key().len() + self.entry.type_name().len() + 12);
        w.string(self.entry.key());
        w.string(self.entry.type_name());
        w.oref(self.data);
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self> {
        let mut r = Reader::new(b);
        let key = r.string()?;
        let ty = r.string()?;
        let data = r.oref()?;
        r.end()?;
        Ok(HeaderRecord { entry: ComponentEntry::new(key, ty)?, data })
    }
}

pub(crate) fn encode_id(id: &EventId) -> Vec<u8> {
    let mut w = Writer::with_capacity(28 + id.experiment_label.len());
    w.string(&id.experiment_label);
    w.u32(id.run_number);
    w.u32(id.config_key);
    w.u64(id.event_number);
    w.u64(id.timestamp_us);
    w.finish()
}

pub(crate) fn decode_id(b: &[u8]) -> Result<EventId> {
    let mut r = Reader::new(b);
    let id = EventId {
        experiment_label: r.string()?,
        run_number: r.u32()?,
        config_key: r.u32()?,
        event_number: r.u64()?,
        timestamp_us: r.u64()?,
    };
    r.end()?;
    Ok(id)
}

/// Navigation bytes attributed to one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NavFootprint {
    pub format: Format,
    pub event_record: u64,
    /// v1 only.
    pub headers: u64,
    /// v1 only.
    pub id_object: u64,
    pub tag: u64,
    /// Amortized share of the common object (v2) and of the tag's descriptor.
    pub shared: f64,
}

impl NavFootprint {
    pub fn own_bytes(&self) -> u64 {
        self.event_record + self.headers + self.id_object + self.tag
    }

    pub fn total(&self) -> f64 {
        self.own_bytes() as f64 + self.shared
    }
}

fn corrupt(at: Oref, e: Error) -> Error {
    match e {
        Error::Format(reason) => Error::CorruptRecord { at, reason },
        other => other,
    }
}

fn expect_type(at: Oref, got: RecordType, want: RecordType) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::CorruptRecord { at, reason: format!("expected a {} record, found {}", want.name(), got.name()) })
    }
}

/// A decoded event record of either layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventRecord {
    V1(V1EventRecord),
    V2(V2EventRecord),
}

impl EventRecord {
    pub fn format(&self) -> Format {
        match self {
            EventRecord::V1(_) => Format::V1,
            EventRecord::V2(_) => Format::V2,
        }
    }

    pub fn tag_ref(&self) -> Oref {
        match self {
            EventRecord::V1(r) => r.tag,
            EventRecord::V2(r) => r.tag,
        }
    }
}

impl<'a> WriteTxn<'a> {
    /// Persists `event` in the redesigned layout and returns its reference.
    pub fn assemble_v2(&mut self, event: &TransientEvent) -> Result<Oref> {
        event.id.validate()?;
        let model = self.es.model();
        let layout = event.layout()?;
        let (stat, dynamic) = event.id.split();
        let common = self.intern_common(stat, layout)?;
        let tag = self.persist_tag(&event.tag)?;
        let mut data = Vec::with_capacity(event.components.len());
        for c in &event.components {
            data.push(self.put(RecordType::Data, &c.payload, model.data(c.payload.len()))?);
        }
        let n = data.len();
        let rec = V2EventRecord { dynamic, common: common.1, data, tag: tag.0 };
        let at = self.put(RecordType::V2Event, &rec.encode(), model.v2_event(n))?;
        self.note_event(at, tag, Some(common.0));
        Ok(at)
    }

    /// Persists `event` in the legacy layout. Its tag is widened to the
    /// union descriptor of `collection`, which grows if the tag brings new
    /// attributes.
    pub fn assemble_v1(&mut self, event: &TransientEvent, collection: &str) -> Result<Oref> {
        event.id.validate()?;
        let model = self.es.model();
        // reject duplicate (key, type) pairs the same way v2 does
        event.layout()?;
        let union = self.grow_union(collection, event.tag.descriptor())?;
        let wide = event.tag.widen_to(union)?;
        let tag = self.persist_tag(&wide)?;
        let mut headers = Vec::with_capacity(event.components.len());
        for c in &event.components {
            let data = self.put(RecordType::Data, &c.payload, model.data(c.payload.len()))?;
            let h = HeaderRecord { entry: c.entry.clone(), data };
            let bytes = model.header(c.entry.key().len(), c.entry.type_name().len());
            headers.push(self.put(RecordType::Header, &h.encode(), bytes)?);
        }
        let id = self.put(
            RecordType::Id,
            &encode_id(&event.id),
            model.id_object(event.id.experiment_label.len()),
        )?;
        let n = headers.len();
        let rec = V1EventRecord { headers, id, tag: tag.0 };
        let at = self.put(RecordType::V1Event, &rec.encode(), model.v1_event(n))?;
        self.note_event(at, tag, None);
        Ok(at)
    }

    /// Assembles `event` in `collection`'s format and makes the collection its owner.
    pub fn ingest(&mut self, event: &TransientEvent, collection: &str) -> Result<Oref> {
        let format = self.collection_format(collection)?;
        let at = match format {
            Format::V1 => self.assemble_v1(event, collection)?,
            Format::V2 => self.assemble_v2(event)?,
        };
        self.append_event(collection, at, true)?;
        Ok(at)
    }

    /// Persists a tag record, interning its descriptor first.
    pub(crate) fn persist_tag(&mut self, tag: &Tag) -> Result<(Oref, u64)> {
        let desc = self.ensure_descriptor(tag.descriptor())?;
        let bytes = self.es.descriptors().persist_tag(tag)?;
        let at = self.put(RecordType::Tag, &bytes, self.es.model().tag(&desc))?;
        self.note_tag(desc.id());
        Ok((at, desc.id()))
    }
}

impl EventStore {
    pub fn read_event_record(&self, at: Oref) -> Result<EventRecord> {
        let (ty, payload) = self.store().read(at)?;
        match ty {
            RecordType::V2Event => Ok(EventRecord::V2(V2EventRecord::decode(&payload).map_err(|e| corrupt(at, e))?)),
            RecordType::V1Event => Ok(EventRecord::V1(V1EventRecord::decode(&payload).map_err(|e| corrupt(at, e))?)),
            other => Err(Error::CorruptRecord { at, reason: format!("{} record is not an event", other.name()) }),
        }
    }

    pub fn read_tag_record(&self, at: Oref) -> Result<Tag> {
        let (ty, payload) = self.store().read(at)?;
        expect_type(at, ty, RecordType::Tag)?;
        self.descriptors().decode_tag(&payload).map_err(|e| corrupt(at, e))
    }

    /// The persistent tag of an event.
    pub fn read_tag(&self, event: Oref) -> Result<Tag> {
        let rec = self.read_event_record(event)?;
        self.read_tag_record(rec.tag_ref())
    }

    fn read_data(&self, at: Oref) -> Result<Vec<u8>> {
        let (ty, payload) = self.store().read(at)?;
        expect_type(at, ty, RecordType::Data)?;
        Ok(payload)
    }

    /// Reads an event of either layout back into its transient form.
    pub fn read_event(&self, at: Oref) -> Result<TransientEvent> {
        match self.read_event_record(at)? {
            EventRecord::V2(rec) => {
                let common = self.common_at(rec.common)?;
                let entries = common.layout.entries();
                if entries.len() != rec.data.len() {
                    return Err(Error::CorruptRecord {
                        at,
                        reason: format!("{} data refs for a {}-entry layout", rec.data.len(), entries.len()),
                    });
                }
                let components = entries
                    .iter()
                    .zip(&rec.data)
                    .map(|(e, &d)| Ok(Component { entry: e.clone(), payload: self.read_data(d)? }))
                    .collect::<Result<Vec<_>>>()?;
                Ok(TransientEvent {
                    id: EventId::join(&common.static_fragment, rec.dynamic),
                    components,
                    tag: self.read_tag_record(rec.tag)?,
                })
            }
            EventRecord::V1(rec) => {
                let mut components = Vec::with_capacity(rec.headers.len());
                for &h in &rec.headers {
                    let (ty, payload) = self.store().read(h)?;
                    expect_type(h, ty, RecordType::Header)?;
                    let hdr = HeaderRecord::decode(&payload).map_err(|e| corrupt(h, e))?;
                    components.push(Component { entry: hdr.entry, payload: self.read_data(hdr.data)? });
                }
                let (ty, payload) = self.store().read(rec.id)?;
                expect_type(rec.id, ty, RecordType::Id)?;
                let id = decode_id(&payload).map_err(|e| corrupt(rec.id, e))?;
                Ok(TransientEvent { id, components, tag: self.read_tag_record(rec.tag)? })
            }
        }
    }

    /// Navigation bytes of one committed event under the store's byte model.
    pub fn nav_footprint(&self, at: Oref) -> Result<NavFootprint> {
        let model = self.model();
        match self.read_event_record(at)? {
            EventRecord::V2(rec) => {
                let tag = self.read_tag_record(rec.tag)?;
                let desc = tag.descriptor().clone();
                let common_id = self.common_id_at(rec.common)?;
                let common = self.common_get(common_id)?;
                let common_share = model.common(
                    common.object.static_fragment.experiment_label.len(),
                    common.object.layout.packed_form().len(),
                ) as f64
                    / common.ref_count.max(1) as f64;
                Ok(NavFootprint {
                    format: Format::V2,
                    event_record: model.v2_event(rec.data.len()),
                    headers: 0,
                    id_object: 0,
                    tag: model.tag(&desc),
                    shared: common_share + self.descriptor_share(&desc),
                })
            }
            EventRecord::V1(rec) => {
                let mut headers = 0;
                for &h in &rec.headers {
                    let (ty, payload) = self.store().read(h)?;
                    expect_type(h, ty, RecordType::Header)?;
                    let hdr = HeaderRecord::decode(&payload).map_err(|e| corrupt(h, e))?;
                    headers += model.header(hdr.entry.key().len(), hdr.entry.type_name().len());
                }
                let (ty, payload) = self.store().read(rec.id)?;
                expect_type(rec.id, ty, RecordType::Id)?;
                let tag = self.read_tag_record(rec.tag)?;
                let desc = tag.descriptor().clone();
                Ok(NavFootprint {
                    format: Format::V1,
                    event_record: model.v1_event(rec.headers.len()),
                    headers,
                    id_object: model.record_bytes(RecordType::Id, &payload)?,
                    tag: model.tag(&desc),
                    shared: self.descriptor_share(&desc),
                })
            }
        }
    }

    fn descriptor_share(&self, desc: &Arc<TagDescriptor>) -> f64 {
        let refs = self.descriptor_ref_count(desc.id()).max(1);
        self.model().descriptor(desc) as f64 / refs as f64
    }
}
