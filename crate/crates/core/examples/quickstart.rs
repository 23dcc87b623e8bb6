//! Create a store, write a few events into a collection and read them back.
//!
//! `cargo run --example quickstart`

use std::sync::Arc;

use evstore::{
    AttrKind, AttributeSpec, Component, ComponentEntry, EventId, EventStore, Format, StoreOptions, Tag,
    TagDescriptor, TagValue, TransientEvent,
};

fn main() -> evstore::Result<()> {
    let dir = tempfile::tempdir()?;
    let es = EventStore::create(dir.path(), StoreOptions::default())?;

    let desc = Arc::new(TagDescriptor::new(&[
        AttributeSpec::new("nTracks", AttrKind::Int),
        AttributeSpec::new("isMuon", AttrKind::Bool),
        AttributeSpec::new("energy", AttrKind::Float),
    ])?);

    let mut tx = es.begin()?;
    tx.create_collection("/prod/run12", Format::V2)?;
    for n in 0..5u64 {
        let mut tag = Tag::new(desc.clone());
        tag.set("nTracks", TagValue::Int(n as i32 * 2))?;
        tag.set("isMuon", TagValue::Bool(n % 2 == 0))?;
        tag.set("energy", TagValue::Float(5.25 + n as f32))?;
        let event = TransientEvent {
            id: EventId {
                experiment_label: "BaBar".into(),
                run_number: 12,
                config_key: 1,
                event_number: n,
                timestamp_us: 946_684_800_000_000 + n,
            },
            components: vec![
                Component { entry: ComponentEntry::new("aod", "TrkList")?, payload: vec![1; 32] },
                Component { entry: ComponentEntry::new("tag", "TagT")?, payload: vec![2; 8] },
            ],
            tag,
        };
        tx.ingest(&event, "/prod/run12")?;
    }
    tx.commit()?;

    for entry in es.collection("/prod/run12")?.entries {
        let ev = es.read_event(entry.event)?;
        let nav = es.nav_footprint(entry.event)?;
        println!(
            "{} run={} event={} layout={} nTracks={} nav_bytes={:.1}",
            entry.event,
            ev.id.run_number,
            ev.id.event_number,
            ev.layout()?.packed_form(),
            ev.tag.get("nTracks")?,
            nav.total()
        );
    }
    println!("common objects: {}", es.common_count());
    println!("descriptors:    {}", es.stored_descriptors().len());
    Ok(())
}
