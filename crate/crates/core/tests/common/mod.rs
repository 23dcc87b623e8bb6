#![allow(dead_code)]

use std::sync::Arc;

use evstore::{
    AttrKind, AttributeSpec, Component, ComponentEntry, EventId, StoreOptions, Tag, TagDescriptor, TagValue,
    TransientEvent,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn opts() -> StoreOptions {
    StoreOptions { sync: false, ..Default::default() }
}

pub fn id(run: u32, ev: u64) -> EventId {
    EventId { experiment_label: "BaBar".into(), run_number: run, config_key: 7, event_number: ev, timestamp_us: 1_000 + ev }
}

pub fn desc(specs: &[(&str, AttrKind)]) -> Arc<TagDescriptor> {
    let specs: Vec<_> = specs.iter().map(|(n, k)| AttributeSpec::new(*n, *k)).collect();
    Arc::new(TagDescriptor::new(&specs).unwrap())
}

/// Descriptor of `n` int attributes named `{prefix}{i}`.
pub fn int_desc(prefix: &str, n: usize) -> Arc<TagDescriptor> {
    let specs: Vec<_> = (0..n).map(|i| AttributeSpec::new(format!("{prefix}{i}"), AttrKind::Int)).collect();
    Arc::new(TagDescriptor::new(&specs).unwrap())
}

pub fn components(keys: &[(&str, &str)]) -> Vec<Component> {
    keys.iter()
        .enumerate()
        .map(|(i, (k, t))| Component { entry: ComponentEntry::new(*k, *t).unwrap(), payload: vec![i as u8; 8 + i] })
        .collect()
}

pub fn event(ev: u64, comps: &[(&str, &str)], d: &Arc<TagDescriptor>) -> TransientEvent {
    let mut tag = Tag::new(d.clone());
    for s in d.specs() {
        let v = match s.kind {
            AttrKind::Bool => TagValue::Bool(ev % 2 == 1),
            AttrKind::Int => TagValue::Int(ev as i32),
            AttrKind::Float => TagValue::Float(ev as f32 * 0.5),
        };
        tag.set(&s.name, v).unwrap();
    }
    TransientEvent { id: id((ev / 1000) as u32, ev), components: components(comps), tag }
}

/// Fixed name→kind universe so random descriptors never disagree on kinds.
pub const NAMES: &[(&str, AttrKind)] = &[
    ("nTracks", AttrKind::Int),
    ("nLeptons", AttrKind::Int),
    ("charge", AttrKind::Int),
    ("run", AttrKind::Int),
    ("isMuon", AttrKind::Bool),
    ("isElectron", AttrKind::Bool),
    ("trigger", AttrKind::Bool),
    ("energy", AttrKind::Float),
    ("pt", AttrKind::Float),
    ("eta", AttrKind::Float),
    ("missingEt", AttrKind::Float),
    ("vertexZ", AttrKind::Float),
];

pub fn random_value<R: Rng>(rng: &mut R, kind: AttrKind) -> TagValue {
    match kind {
        AttrKind::Bool => TagValue::Bool(rng.gen()),
        AttrKind::Int => TagValue::Int(rng.gen_range(-20..20)),
        AttrKind::Float => TagValue::Float(rng.gen_range(-80..80) as f32 / 4.0),
    }
}

/// Random non-empty subset of [`NAMES`], in random order.
pub fn random_descriptor<R: Rng>(rng: &mut R) -> Arc<TagDescriptor> {
    let mut names: Vec<_> = NAMES.to_vec();
    names.shuffle(rng);
    let n = rng.gen_range(1..=names.len());
    desc(&names[..n])
}

pub fn random_tag<R: Rng>(rng: &mut R, d: &Arc<TagDescriptor>) -> Tag {
    let mut tag = Tag::new(d.clone());
    for s in d.specs() {
        tag.set(&s.name, random_value(rng, s.kind)).unwrap();
    }
    tag
}

fn random_name<R: Rng>(rng: &mut R, max: usize) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_:.-/";
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| CHARS[rng.gen_range(0..CHARS.len())] as char).collect()
}

/// Event with a random id, random distinct components and a random tag.
pub fn random_event<R: Rng>(rng: &mut R) -> TransientEvent {
    let n = rng.gen_range(0..8);
    let mut comps: Vec<Component> = Vec::with_capacity(n);
    while comps.len() < n {
        let entry = ComponentEntry::new(random_name(rng, 12), random_name(rng, 12)).unwrap();
        if comps.iter().any(|c| c.entry == entry) {
            continue;
        }
        let len = rng.gen_range(0..64);
        let payload = (0..len).map(|_| rng.gen()).collect();
        comps.push(Component { entry, payload });
    }
    let d = random_descriptor(rng);
    TransientEvent {
        id: EventId {
            experiment_label: random_name(rng, 10),
            run_number: rng.gen(),
            config_key: rng.gen(),
            event_number: rng.gen(),
            timestamp_us: rng.gen(),
        },
        components: comps,
        tag: random_tag(rng, &d),
    }
}

/// Field-wise comparison on id, ordered components and the values of
/// every attribute in `original`'s own descriptor.
pub fn same_event(original: &TransientEvent, read: &TransientEvent) -> Result<(), String> {
    if original.id != read.id {
        return Err(format!("id {} != {}", original.id, read.id));
    }
    if original.components != read.components {
        return Err(format!("components differ for {}", original.id));
    }
    for s in original.tag.descriptor().specs() {
        let a = original.tag.get(&s.name).unwrap();
        let b = read.tag.get(&s.name).map_err(|e| format!("{}: {e}", original.id))?;
        if !a.same_bits(&b) {
            return Err(format!("{}: tag {} {a} != {b}", original.id, s.name));
        }
    }
    Ok(())
}
