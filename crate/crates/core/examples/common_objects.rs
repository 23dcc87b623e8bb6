//! Events of one run share a single common object holding the static id
//! fragment and the packed component layout.
//!
//! `cargo run --example common_objects`

use evstore::bench::{ingest_workload, WorkloadSpec};
use evstore::{EventStore, Format, StoreOptions};

fn main() -> evstore::Result<()> {
    let spec = WorkloadSpec { event_count: 5000, static_change_period: Some(1000), ..WorkloadSpec::default() };
    let dir = tempfile::tempdir()?;
    let es = EventStore::create(dir.path(), StoreOptions::default())?;
    ingest_workload(&es, &spec, "/prod/all", Format::V2)?;

    println!("events:         {}", spec.event_count);
    println!("common objects: {}", es.common_count());
    let coll = es.collection("/prod/all")?;
    for i in [0, 999, 1000, 4999] {
        let at = coll.entries[i].event;
        let f = es.nav_footprint(at)?;
        let ev = es.read_event(at)?;
        println!(
            "event {i:>4}: run {} event record {} B, tag {} B, shared {:.2} B",
            ev.id.run_number, f.event_record, f.tag, f.shared
        );
    }
    Ok(())
}
