//! The v1 layout next to v2: per-component headers, a full id object and
//! tags widened to the collection's union descriptor. Migration copies v1
//! events into a v2 collection.
//!
//! `cargo run --example legacy_layout`

use evstore::bench::{ingest_workload, WorkloadSpec};
use evstore::{EventStore, Format, StoreOptions};

fn main() -> evstore::Result<()> {
    let spec = WorkloadSpec { event_count: 2000, descriptor_pool: 3, ..WorkloadSpec::default() };
    let dir = tempfile::tempdir()?;
    let es = EventStore::create(dir.path(), StoreOptions::default())?;
    ingest_workload(&es, &spec, "/legacy", Format::V1)?;

    let old = es.collection("/legacy")?;
    let union = es.descriptor(old.union.expect("v1 collections carry a union"))?;
    println!("union descriptor: {} attributes", union.len());

    let report = es.migrate("/legacy", "/migrated")?;
    println!("migrated {} events", report.events);
    let new = es.collection("/migrated")?;

    let total = |c: &evstore::Collection| -> evstore::Result<f64> {
        c.entries.iter().map(|e| es.nav_footprint(e.event).map(|f| f.total())).sum()
    };
    let (v1, v2) = (total(&old)? / old.len() as f64, total(&new)? / new.len() as f64);
    println!("nav bytes per event: v1 {v1:.1}, v2 {v2:.1}");

    let f1 = es.nav_footprint(old.entries[0].event)?;
    let f2 = es.nav_footprint(new.entries[0].event)?;
    println!("first event v1: {f1:?}");
    println!("first event v2: {f2:?}");
    Ok(())
}
