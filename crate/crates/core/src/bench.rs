//! Synthetic workloads, footprint comparison and store verification.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_pcg::Pcg64;
use serde::Serialize;

use crate::codec::Reader;
use crate::collections::{CollectionRecord, Format};
use crate::common::CommonObject;
use crate::engine::{Accounting, EventStore};
use crate::error::{Error, Result};
use crate::layout::{ByteModel, V1EventRecord, V2EventRecord};
use crate::model::{Component, ComponentEntry, EventId};
use crate::storage::{Oref, RecordType, Store, StoreOptions};
use crate::tag::{AttrKind, AttributeSpec, Tag, TagDescriptor};
use crate::TransientEvent;

/// Parameters of a generated workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkloadSpec {
    pub event_count: u64,
    pub components_per_event: usize,
    pub key_len: usize,
    pub type_len: usize,
    pub payload_len: usize,
    pub tag_int: usize,
    pub tag_float: usize,
    pub tag_bool: usize,
    /// Events per static-fragment change; `None` never changes.
    pub static_change_period: Option<u64>,
    pub descriptor_pool: usize,
    pub seed: u64,
    pub label: String,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            event_count: 1000,
            components_per_event: 4,
            key_len: 8,
            type_len: 8,
            payload_len: 64,
            tag_int: 8,
            tag_float: 4,
            tag_bool: 4,
            static_change_period: Some(1000),
            descriptor_pool: 1,
            seed: 1,
            label: "BaBar".into(),
        }
    }
}

const KEYS: &[&str] = &[
    "event_count",
    "components_per_event",
    "key_len",
    "type_len",
    "payload_len",
    "tag_int",
    "tag_float",
    "tag_bool",
    "static_change_period",
    "descriptor_pool",
    "seed",
    "label",
];

fn digits(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

impl WorkloadSpec {
    /// The reference workload: 10^5 events of 10 components and a
    /// 500-attribute tag drawn from a pool of 4 descriptors.
    pub fn w0() -> Self {
        WorkloadSpec {
            event_count: 100_000,
            components_per_event: 10,
            key_len: 8,
            type_len: 8,
            payload_len: 256,
            tag_int: 400,
            tag_float: 80,
            tag_bool: 20,
            static_change_period: Some(1000),
            descriptor_pool: 4,
            seed: 42,
            label: "BaBar".into(),
        }
    }

    /// Parses `key=value` lines. Blank lines and `#` comments are ignored;
    /// unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = WorkloadSpec::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::BadSpec(format!("not key=value: {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<u64>().map_err(|_| Error::BadSpec(format!("{k}: not a number: {v:?}")));
            match k {
                "event_count" => s.event_count = num()?,
                "components_per_event" => s.components_per_event = num()? as usize,
                "key_len" => s.key_len = num()? as usize,
                "type_len" => s.type_len = num()? as usize,
                "payload_len" => s.payload_len = num()? as usize,
                "tag_int" => s.tag_int = num()? as usize,
                "tag_float" => s.tag_float = num()? as usize,
                "tag_bool" => s.tag_bool = num()? as usize,
                "static_change_period" => {
                    s.static_change_period = if v == "inf" { None } else { Some(num()?) }
                }
                "descriptor_pool" => s.descriptor_pool = num()? as usize,
                "seed" => s.seed = num()?,
                "label" => s.label = v.to_string(),
                _ => return Err(Error::BadSpec(format!("unknown key {k:?} (known: {})", KEYS.join(", ")))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        let period = self.static_change_period.map_or("inf".to_string(), |p| p.to_string());
        format!(
            "event_count={}\ncomponents_per_event={}\nkey_len={}\ntype_len={}\npayload_len={}\n\
             tag_int={}\ntag_float={}\ntag_bool={}\nstatic_change_period={}\ndescriptor_pool={}\nseed={}\nlabel={}\n",
            self.event_count,
            self.components_per_event,
            self.key_len,
            self.type_len,
            self.payload_len,
            self.tag_int,
            self.tag_float,
            self.tag_bool,
            period,
            self.descriptor_pool,
            self.seed,
            self.label
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadSpec(m));
        if self.event_count == 0 {
            return bad("event_count must be positive".into());
        }
        if self.descriptor_pool == 0 {
            return bad("descriptor_pool must be positive".into());
        }
        if self.static_change_period == Some(0) {
            return bad("static_change_period must be positive or inf".into());
        }
        if self.label.is_empty() || self.label.len() > crate::model::MAX_NAME_LEN {
            return bad(format!("label must be 1..={} bytes", crate::model::MAX_NAME_LEN));
        }
        let need = 1 + digits(self.components_per_event);
        if self.components_per_event > 0 && (self.key_len < need || self.type_len < need) {
            return bad(format!("key_len and type_len must be at least {need} for {} components", self.components_per_event));
        }
        if self.key_len > crate::model::MAX_NAME_LEN || self.type_len > crate::model::MAX_NAME_LEN {
            return bad("key_len and type_len are limited to 255".into());
        }
        if self.event_count / self.static_change_period.unwrap_or(u64::MAX) > u32::MAX as u64 {
            return bad("too many runs for a u32 run number".into());
        }
        Ok(())
    }

    /// Component layout shared by every event: fixed-width keys `k000…`
    /// and types `T000…`.
    pub fn layout_entries(&self) -> Vec<ComponentEntry> {
        (0..self.components_per_event)
            .map(|j| {
                let key = format!("k{j:0w$}", w = self.key_len - 1);
                let ty = format!("T{j:0w$}", w = self.type_len - 1);
                ComponentEntry::new(key, ty).expect("validated names")
            })
            .collect()
    }

    /// The descriptor pool. Descriptor `k` names its attributes `d{k}_i{j}`,
    /// `d{k}_f{j}` and `d{k}_b{j}`, so pool members share no names.
    pub fn descriptor_pool(&self) -> Result<Vec<Arc<TagDescriptor>>> {
        (0..self.descriptor_pool)
            .map(|k| {
                let mut specs = Vec::with_capacity(self.tag_int + self.tag_float + self.tag_bool);
                specs.extend((0..self.tag_int).map(|j| AttributeSpec::new(format!("d{k}_i{j}"), AttrKind::Int)));
                specs.extend((0..self.tag_float).map(|j| AttributeSpec::new(format!("d{k}_f{j}"), AttrKind::Float)));
                specs.extend((0..self.tag_bool).map(|j| AttributeSpec::new(format!("d{k}_b{j}"), AttrKind::Bool)));
                TagDescriptor::new(&specs).map(Arc::new)
            })
            .collect()
    }
}

/// Deterministic event stream for a [`WorkloadSpec`].
pub struct Workload {
    spec: WorkloadSpec,
    rng: Pcg64,
    next: u64,
    entries: Vec<ComponentEntry>,
    pool: Vec<Arc<TagDescriptor>>,
}

/// Microseconds; a fixed origin keeps streams reproducible.
const TIME_ORIGIN_US: u64 = 946_684_800_000_000;

pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    Ok(Workload {
        rng: Pcg64::seed_from_u64(spec.seed),
        next: 0,
        entries: spec.layout_entries(),
        pool: spec.descriptor_pool()?,
        spec: spec.clone(),
    })
}

impl Workload {
    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    pub fn pool(&self) -> &[Arc<TagDescriptor>] {
        &self.pool
    }
}

impl Iterator for Workload {
    type Item = TransientEvent;

    fn next(&mut self) -> Option<TransientEvent> {
        if self.next >= self.spec.event_count {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let run = self.spec.static_change_period.map_or(0, |p| i / p) as u32;
        let id = EventId {
            experiment_label: self.spec.label.clone(),
            run_number: run,
            config_key: 1,
            event_number: i,
            timestamp_us: TIME_ORIGIN_US + i * 1000 + self.rng.gen_range(0..1000),
        };
        let components = self
            .entries
            .iter()
            .map(|e| {
                let mut payload = vec![0u8; self.spec.payload_len];
                self.rng.fill_bytes(&mut payload);
                Component { entry: e.clone(), payload }
            })
            .collect();
        let desc = self.pool[(i % self.pool.len() as u64) as usize].clone();
        let bools = (0..self.spec.tag_bool).map(|_| self.rng.gen()).collect();
        let ints = (0..self.spec.tag_int).map(|_| self.rng.gen_range(0..1000)).collect();
        let floats = (0..self.spec.tag_float).map(|_| self.rng.gen::<f32>()).collect();
        let tag = Tag::from_arrays(desc, bools, ints, floats).expect("arrays sized from the descriptor");
        Some(TransientEvent { id, components, tag })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.spec.event_count - self.next) as usize;
        (n, Some(n))
    }
}

/// Events per write transaction during bulk ingest.
pub const INGEST_BATCH: usize = 10_000;

/// Ingests a workload into `collection`, creating it if needed. v1
/// collections get their union descriptor declared up front from the whole
/// descriptor pool. Returns the number of events written.
pub fn ingest_workload(es: &EventStore, spec: &WorkloadSpec, collection: &str, format: Format) -> Result<u64> {
    let mut events = generate_workload(spec)?;
    let mut tx = es.begin()?;
    match es.collection(collection) {
        Ok(c) if c.format != format => {
            return Err(Error::BadSpec(format!("{collection} is a {} collection", c.format)));
        }
        Ok(_) => {}
        Err(Error::UnknownCollection(_)) => tx.create_collection(collection, format)?,
        Err(e) => return Err(e),
    }
    if format == Format::V1 {
        tx.widen_union(collection, events.pool())?;
    }
    let mut n = 0u64;
    for ev in events.by_ref() {
        tx.ingest(&ev, collection)?;
        n += 1;
        if n.is_multiple_of(INGEST_BATCH as u64) {
            tx.commit()?;
            tx = es.begin()?;
        }
    }
    tx.commit()?;
    Ok(n)
}

/// Objects and model bytes of one record type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TypeTotals {
    pub objects: u64,
    pub bytes: u64,
}

/// Footprint of one store.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VersionFootprint {
    pub format: Format,
    pub events: u64,
    pub nav_bytes_total: u64,
    pub nav_bytes_per_event: f64,
    /// Mean of the per-event footprints; matches `nav_bytes_per_event` up
    /// to rounding.
    pub footprint_per_event: f64,
    pub object_count: u64,
    pub distinct_descriptors: u64,
    pub distinct_commons: u64,
    pub by_type: BTreeMap<String, TypeTotals>,
}

impl VersionFootprint {
    fn from_accounting(format: Format, acc: &Accounting, footprint_sum: f64) -> Self {
        let events = acc.events();
        let nav = acc.navigation_bytes();
        let per = |x: f64| if events == 0 { 0.0 } else { x / events as f64 };
        VersionFootprint {
            format,
            events,
            nav_bytes_total: nav,
            nav_bytes_per_event: per(nav as f64),
            footprint_per_event: per(footprint_sum),
            object_count: acc.model_objects(),
            distinct_descriptors: acc.objects(RecordType::Descriptor),
            distinct_commons: acc.objects(RecordType::Common),
            by_type: RecordType::ALL
                .iter()
                .map(|&t| (t.name().to_string(), TypeTotals { objects: acc.objects(t), bytes: acc.model_bytes(t) }))
                .collect(),
        }
    }
}

/// Side-by-side navigation footprint of the same workload in both layouts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FootprintReport {
    pub model: ByteModel,
    pub workload: WorkloadSpec,
    pub v1: VersionFootprint,
    pub v2: VersionFootprint,
    /// `1 - v2/v1` of navigation bytes per event.
    pub reduction_ratio: f64,
}

/// Footprint of a store from its accounting, plus the sum of per-event
/// footprints of every event in `collection`.
pub fn store_footprint(es: &EventStore, collection: &str, format: Format, accounting: &Accounting) -> Result<VersionFootprint> {
    let mut sum = 0.0;
    for e in &es.collection(collection)?.entries {
        sum += es.nav_footprint(e.event)?.total();
    }
    Ok(VersionFootprint::from_accounting(format, accounting, sum))
}

impl FootprintReport {
    pub fn new(model: ByteModel, workload: WorkloadSpec, v1: VersionFootprint, v2: VersionFootprint) -> Self {
        let reduction_ratio =
            if v1.nav_bytes_per_event > 0.0 { 1.0 - v2.nav_bytes_per_event / v1.nav_bytes_per_event } else { 0.0 };
        FootprintReport { model, workload, v1, v2, reduction_ratio }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model.object_header_bytes={}", self.model.object_header);
        let _ = writeln!(s, "model.oref_bytes={}", self.model.oref);
        for line in self.workload.render().lines() {
            let _ = writeln!(s, "workload.{line}");
        }
        for v in [&self.v1, &self.v2] {
            let p = v.format;
            let _ = writeln!(s, "{p}.events={}", v.events);
            let _ = writeln!(s, "{p}.nav_bytes_total={}", v.nav_bytes_total);
            let _ = writeln!(s, "{p}.nav_bytes_per_event={:.3}", v.nav_bytes_per_event);
            let _ = writeln!(s, "{p}.footprint_per_event={:.3}", v.footprint_per_event);
            let _ = writeln!(s, "{p}.object_count={}", v.object_count);
            let _ = writeln!(s, "{p}.distinct_descriptors={}", v.distinct_descriptors);
            let _ = writeln!(s, "{p}.distinct_commons={}", v.distinct_commons);
            for (name, t) in &v.by_type {
                if t.objects > 0 {
                    let _ = writeln!(s, "{p}.{name}.objects={}", t.objects);
                    let _ = writeln!(s, "{p}.{name}.bytes={}", t.bytes);
                }
            }
        }
        let _ = writeln!(s, "reduction_ratio={:.6}", self.reduction_ratio);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "version,events,nav_bytes_total,nav_bytes_per_event,footprint_per_event,object_count,distinct_descriptors,distinct_commons,reduction_ratio\n",
        );
        for v in [&self.v1, &self.v2] {
            let _ = writeln!(
                s,
                "{},{},{},{:.3},{:.3},{},{},{},{:.6}",
                v.format,
                v.events,
                v.nav_bytes_total,
                v.nav_bytes_per_event,
                v.footprint_per_event,
                v.object_count,
                v.distinct_descriptors,
                v.distinct_commons,
                self.reduction_ratio
            );
        }
        s
    }
}

pub const BENCH_V1_DIR: &str = "v1";
pub const BENCH_V2_DIR: &str = "v2";
pub const BENCH_V1_COLLECTION: &str = "/bench/v1";
pub const BENCH_V2_COLLECTION: &str = "/bench/v2";

/// Result of [`run_comparison`]: the report from live accounting and the
/// same report rebuilt from a cold scan of the reopened stores.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub live: FootprintReport,
    pub scanned: FootprintReport,
}

/// Ingests `spec` into fresh v1 and v2 stores under `dir` and compares
/// their navigation footprints.
pub fn run_comparison(spec: &WorkloadSpec, dir: &Path, options: StoreOptions) -> Result<Comparison> {
    spec.validate()?;
    let mut live = Vec::new();
    for (sub, coll, format) in
        [(BENCH_V1_DIR, BENCH_V1_COLLECTION, Format::V1), (BENCH_V2_DIR, BENCH_V2_COLLECTION, Format::V2)]
    {
        let es = EventStore::create(dir.join(sub), options)?;
        ingest_workload(&es, spec, coll, format)?;
        live.push(store_footprint(&es, coll, format, &es.accounting())?);
    }
    let v2 = live.pop().unwrap();
    let v1 = live.pop().unwrap();
    let live = FootprintReport::new(options.model, spec.clone(), v1, v2);
    let scanned = scan_comparison(spec, dir)?;
    Ok(Comparison { live, scanned })
}

/// Rebuilds the comparison report of existing bench stores from disk.
pub fn scan_comparison(spec: &WorkloadSpec, dir: &Path) -> Result<FootprintReport> {
    let v1 = EventStore::open(dir.join(BENCH_V1_DIR))?;
    let v2 = EventStore::open(dir.join(BENCH_V2_DIR))?;
    let f1 = store_footprint(&v1, BENCH_V1_COLLECTION, Format::V1, &scan_accounting(v1.store())?)?;
    let f2 = store_footprint(&v2, BENCH_V2_COLLECTION, Format::V2, &scan_accounting(v2.store())?)?;
    Ok(FootprintReport::new(v2.model(), spec.clone(), f1, f2))
}

/// Accounting recomputed from the raw records of a store.
pub fn scan_accounting(store: &Store) -> Result<Accounting> {
    let model = store.model();
    let mut acc = Accounting::default();
    for rec in store.scan() {
        let rec = rec?;
        acc.add(rec.ty, model.record_bytes(rec.ty, &rec.payload)?);
    }
    Ok(acc)
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub records: u64,
    pub events_v1: u64,
    pub events_v2: u64,
    pub descriptors: u64,
    pub union_descriptors: u64,
    pub commons: u64,
    pub collections: u64,
    /// References of records whose checksum failed.
    pub corrupt: Vec<Oref>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "check.{}={}{}", c.name, if c.passed { "pass" } else { "FAIL" }, if c.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", c.detail)
            });
        }
        let _ = writeln!(s, "records={}", self.records);
        let _ = writeln!(s, "events.v1={}", self.events_v1);
        let _ = writeln!(s, "events.v2={}", self.events_v2);
        let _ = writeln!(s, "descriptors={}", self.descriptors);
        let _ = writeln!(s, "union_descriptors={}", self.union_descriptors);
        let _ = writeln!(s, "commons={}", self.commons);
        let _ = writeln!(s, "collections={}", self.collections);
        let _ = writeln!(s, "result={}", if self.passed() { "pass" } else { "FAIL" });
        s
    }
}

fn check(name: &'static str, problems: Vec<String>) -> Check {
    let mut detail = problems.iter().take(5).cloned().collect::<Vec<_>>().join("; ");
    if problems.len() > 5 {
        let _ = write!(detail, "; and {} more", problems.len() - 5);
    }
    Check { name, passed: problems.is_empty(), detail }
}

/// Full-scan consistency check of the store in `dir`. Findings are
/// reported, not returned as errors; only an unopenable store is an error.
pub fn verify_store(dir: &Path) -> Result<VerifyReport> {
    let store = Store::open(dir)?;
    let model = store.model();
    let mut corrupt = Vec::new();
    let mut other_scan = Vec::new();
    let mut decode = Vec::new();
    let mut types: HashMap<Oref, RecordType> = HashMap::new();
    let mut acc = Accounting::default();
    let mut tag_desc: HashMap<Oref, u64> = HashMap::new();
    let mut desc_ids: HashMap<u64, u32> = HashMap::new();
    let mut common_ids: HashMap<u64, u32> = HashMap::new();
    let mut v2_events: Vec<(Oref, V2EventRecord)> = Vec::new();
    let mut v1_events: Vec<(Oref, V1EventRecord)> = Vec::new();
    let mut coll_recs: Vec<CollectionRecord> = Vec::new();
    let mut records = 0;

    for rec in store.scan() {
        let rec = match rec {
            Ok(r) => r,
            Err(Error::CorruptRecord { at, reason }) => {
                corrupt.push(at);
                other_scan.push(format!("{at}: {reason}"));
                continue;
            }
            Err(e) => {
                other_scan.push(e.to_string());
                continue;
            }
        };
        records += 1;
        types.insert(rec.at, rec.ty);
        let at = rec.at;
        let p = &rec.payload;
        match model.record_bytes(rec.ty, p) {
            Ok(b) => acc.add(rec.ty, b),
            Err(e) => {
                decode.push(format!("{at}: {e}"));
                continue;
            }
        }
        let r: Result<()> = (|| {
            match rec.ty {
                RecordType::Descriptor => {
                    let d = TagDescriptor::decode(p, crate::tag::fnv1a64)?;
                    *desc_ids.entry(d.id()).or_default() += 1;
                }
                RecordType::Common => {
                    let c = CommonObject::decode(p)?;
                    *common_ids.entry(c.common_id).or_default() += 1;
                }
                RecordType::Tag => {
                    tag_desc.insert(at, Reader::new(p).u64()?);
                }
                RecordType::V2Event => v2_events.push((at, V2EventRecord::decode(p)?)),
                RecordType::V1Event => v1_events.push((at, V1EventRecord::decode(p)?)),
                RecordType::Collection => coll_recs.push(CollectionRecord::decode(p)?),
                RecordType::Access => {
                    crate::engine::decode_access(p)?;
                }
                RecordType::Header => {
                    crate::layout::HeaderRecord::decode(p)?;
                }
                RecordType::Id => {
                    crate::layout::decode_id(p)?;
                }
                RecordType::Data => {}
            }
            Ok(())
        })();
        if let Err(e) = r {
            decode.push(format!("{at}: {e}"));
        }
    }

    let is = |at: &Oref, ty: RecordType| types.get(at) == Some(&ty);
    let mut refs = Vec::new();
    let mut data_refs = 0u64;
    let mut header_refs = 0u64;
    for (at, ev) in &v2_events {
        if !is(&ev.common, RecordType::Common) {
            refs.push(format!("{at}: common ref {} is not a common object", ev.common));
        }
        if !is(&ev.tag, RecordType::Tag) {
            refs.push(format!("{at}: tag ref {} is not a tag", ev.tag));
        }
        for d in &ev.data {
            if !is(d, RecordType::Data) {
                refs.push(format!("{at}: data ref {d} is not a data object"));
            }
        }
        data_refs += ev.data.len() as u64;
    }
    for (at, ev) in &v1_events {
        if !is(&ev.id, RecordType::Id) {
            refs.push(format!("{at}: id ref {} is not an id object", ev.id));
        }
        if !is(&ev.tag, RecordType::Tag) {
            refs.push(format!("{at}: tag ref {} is not a tag", ev.tag));
        }
        for h in &ev.headers {
            if !is(h, RecordType::Header) {
                refs.push(format!("{at}: header ref {h} is not a header"));
            }
        }
        header_refs += ev.headers.len() as u64;
    }
    for (at, d) in &tag_desc {
        if !desc_ids.contains_key(d) {
            refs.push(format!("{at}: tag uses unpersisted descriptor {d:#018x}"));
        }
    }

    // collections: ownership and tag overrides
    let mut ownership = Vec::new();
    let mut owners: HashMap<Oref, u32> = HashMap::new();
    let mut overrides: HashSet<Oref> = HashSet::new();
    let mut unions: HashSet<u64> = HashSet::new();
    let mut names: HashSet<&str> = HashSet::new();
    for c in &coll_recs {
        names.insert(&c.name);
        if let Some(u) = c.union {
            unions.insert(u);
            if !desc_ids.contains_key(&u) {
                refs.push(format!("{}: union descriptor {u:#018x} is not persisted", c.name));
            }
        }
        for e in &c.entries {
            if !is(&e.event, RecordType::V1Event) && !is(&e.event, RecordType::V2Event) {
                refs.push(format!("{}: member {} is not an event", c.name, e.event));
            }
            if let Some(t) = e.tag {
                if !is(&t, RecordType::Tag) {
                    refs.push(format!("{}: tag override {t} is not a tag", c.name));
                }
                overrides.insert(t);
            }
            if e.owned {
                *owners.entry(e.event).or_default() += 1;
            }
        }
    }
    for (at, _) in v1_events.iter().map(|(a, _)| (a, ())).chain(v2_events.iter().map(|(a, _)| (a, ()))) {
        match owners.get(at).copied().unwrap_or(0) {
            1 => {}
            n => ownership.push(format!("event {at} has {n} owners")),
        }
    }

    let mut interning = Vec::new();
    for (id, n) in desc_ids.iter().filter(|(_, &n)| n > 1) {
        interning.push(format!("descriptor {id:#018x} stored {n} times"));
    }
    for (id, n) in common_ids.iter().filter(|(_, &n)| n > 1) {
        interning.push(format!("common object {id:#018x} stored {n} times"));
    }

    let e1 = v1_events.len() as u64;
    let e2 = v2_events.len() as u64;
    let mut law = Vec::new();
    let mut expect = |what: &str, got: u64, want: u64| {
        if got != want {
            law.push(format!("{what}: {got} stored, {want} expected"));
        }
    };
    expect("tags", acc.objects(RecordType::Tag), e1 + e2 + overrides.len() as u64);
    expect("data", acc.objects(RecordType::Data), data_refs + header_refs);
    expect("headers", acc.objects(RecordType::Header), header_refs);
    expect("ids", acc.objects(RecordType::Id), e1);
    expect("commons", acc.objects(RecordType::Common), common_ids.len() as u64);
    expect("descriptors", acc.objects(RecordType::Descriptor), desc_ids.len() as u64);
    let total = acc.model_objects();
    let want = 2 * (e1 + e2) + data_refs + 2 * header_refs + e1 + overrides.len() as u64 + acc.objects(RecordType::Common)
        + acc.objects(RecordType::Descriptor);
    expect("objects", total, want);

    Ok(VerifyReport {
        checks: vec![
            check("checksums", other_scan),
            check("decoding", decode),
            check("references", refs),
            check("object_counts", law),
            check("ownership", ownership),
            check("interning", interning),
        ],
        records,
        events_v1: e1,
        events_v2: e2,
        descriptors: desc_ids.len() as u64,
        union_descriptors: unions.len() as u64,
        commons: common_ids.len() as u64,
        collections: names.len() as u64,
        corrupt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_text_roundtrip() {
        let w = WorkloadSpec::w0();
        assert_eq!(WorkloadSpec::parse(&w.render()).unwrap(), w);
        let inf = WorkloadSpec::parse("static_change_period=inf\n").unwrap();
        assert_eq!(inf.static_change_period, None);
        assert!(matches!(WorkloadSpec::parse("bogus=1"), Err(Error::BadSpec(_))));
        assert!(matches!(WorkloadSpec::parse("event_count=0"), Err(Error::BadSpec(_))));
        assert!(matches!(WorkloadSpec::parse("components_per_event=100\nkey_len=2"), Err(Error::BadSpec(_))));
    }

    #[test]
    fn single_event() {
        let spec = WorkloadSpec { event_count: 1, ..Default::default() };
        let evs: Vec<_> = generate_workload(&spec).unwrap().collect();
        assert_eq!(evs.len(), 1);
        assert_eq!(evs[0].id.run_number, 0);
    }

    #[test]
    fn static_fragments_follow_period() {
        let spec = WorkloadSpec {
            event_count: 100_000,
            components_per_event: 0,
            tag_int: 0,
            tag_float: 0,
            tag_bool: 0,
            ..Default::default()
        };
        let runs: HashSet<_> = generate_workload(&spec).unwrap().map(|e| e.id.split().0).collect();
        assert_eq!(runs.len(), 100);
    }

    #[test]
    fn fixed_width_names() {
        let spec = WorkloadSpec::w0();
        let e = spec.layout_entries();
        assert_eq!(e.len(), 10);
        assert!(e.iter().all(|c| c.key().len() == 8 && c.type_name().len() == 8));
        assert_eq!(e[3].key(), "k0000003");
        let pool = spec.descriptor_pool().unwrap();
        assert_eq!(pool.len(), 4);
        assert!(pool.iter().all(|d| d.len() == 500 && d.count(AttrKind::Bool) == 20));
    }
}
