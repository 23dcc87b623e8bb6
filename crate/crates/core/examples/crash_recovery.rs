//! Simulated crashes at every commit step. After reopening, a transaction
//! is either fully visible or not at all.
//!
//! `cargo run --example crash_recovery`

use evstore::bench::{ingest_workload, verify_store, WorkloadSpec};
use evstore::{CommitStep, Error, EventStore, Fault, Format, StoreOptions};

fn main() -> evstore::Result<()> {
    let spec = WorkloadSpec { event_count: 200, ..WorkloadSpec::default() };
    let mut faults: Vec<Fault> = CommitStep::ALL.iter().map(|&s| Fault::CrashBefore(s)).collect();
    faults.push(Fault::TornFlush);
    for fault in faults {
        let dir = tempfile::tempdir()?;
        {
            let es = EventStore::create(dir.path(), StoreOptions::default())?;
            ingest_workload(&es, &spec, "/first", Format::V2)?;
            es.store().inject_fault(fault);
            match ingest_workload(&es, &spec, "/second", Format::V2) {
                Err(Error::InjectedFault(_)) => {}
                other => panic!("fault did not fire: {other:?}"),
            }
        }
        let es = EventStore::open(dir.path())?;
        let second = es.collection("/second").map(|c| c.len()).unwrap_or(0);
        let ok = verify_store(dir.path())?.passed();
        println!(
            "{:<40} first={} second={second:<4} verify={}",
            format!("{fault:?}"),
            es.collection("/first")?.len(),
            if ok { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}
