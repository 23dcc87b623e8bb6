//! Hierarchical collections, globbing, tag predicates, sparse skims and
//! namespace access modes.
//!
//! `cargo run --example skims`

use evstore::bench::{ingest_workload, WorkloadSpec};
use evstore::{AccessMode, Error, EventStore, Format, StoreOptions};

fn main() -> evstore::Result<()> {
    let dir = tempfile::tempdir()?;
    let es = EventStore::create(dir.path(), StoreOptions::default())?;
    let base = WorkloadSpec { event_count: 1000, descriptor_pool: 2, ..WorkloadSpec::default() };
    ingest_workload(&es, &base, "/prod/run1", Format::V2)?;
    ingest_workload(&es, &WorkloadSpec { seed: 2, ..base.clone() }, "/prod/run2", Format::V2)?;
    ingest_workload(&es, &WorkloadSpec { seed: 3, ..base }, "/legacy/run0", Format::V1)?;

    let inputs = es.resolve("/prod/*")?;
    println!("inputs: {inputs:?}");
    let pred = "d0_i0 >= 900 or (d1_b0 == true and d1_f0 < 0.1)".parse()?;
    println!("predicate: {pred}");
    let r = es.skim(&inputs, &pred, "/skims/v2", false)?;
    println!("v2 skim: {}/{} selected, {} tags rewritten", r.selected, r.scanned, r.rewritten_tags);

    let mut with_legacy = inputs.clone();
    with_legacy.push("/legacy/run0".into());
    let r = es.skim(&with_legacy, &pred, "/skims/v1", false)?;
    println!("v1 skim: {}/{} selected, {} tags rewritten", r.selected, r.scanned, r.rewritten_tags);

    match es.skim(&inputs, &"noSuchAttr > 1".parse()?, "/skims/strict", true) {
        Err(Error::UnknownAttribute(a)) => println!("strict mode rejects {a}"),
        other => println!("unexpected: {other:?}"),
    }

    let mut tx = es.begin()?;
    tx.set_access("/prod", AccessMode::ReadOnly)?;
    tx.commit()?;
    let mut tx = es.begin()?;
    match tx.create_collection("/prod/run3", Format::V2) {
        Err(e) => println!("create under /prod: {e}"),
        Ok(()) => println!("create under /prod succeeded"),
    }
    tx.abort()?;

    for name in es.resolve("/**")? {
        let c = es.collection(&name)?;
        println!("{name:<14} {} entries={} owned={}", c.format, c.len(), c.owned_count());
    }
    Ok(())
}
