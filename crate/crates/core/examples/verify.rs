//! Scan a store for damage: flip one byte and look at the report.
//!
//! `cargo run --example verify`

use std::fs::OpenOptions;
use std::os::unix::fs::FileExt;

use evstore::bench::{ingest_workload, verify_store, WorkloadSpec};
use evstore::{EventStore, Format, StoreOptions};

fn main() -> evstore::Result<()> {
    let dir = tempfile::tempdir()?;
    let victim = {
        let es = EventStore::create(dir.path(), StoreOptions::default())?;
        ingest_workload(&es, &WorkloadSpec { event_count: 300, ..WorkloadSpec::default() }, "/a", Format::V1)?;
        es.collection("/a")?.entries[42].event
    };
    print!("{}", verify_store(dir.path())?.to_text());

    let seg = OpenOptions::new().read(true).write(true).open(dir.path().join("segments/00000000.seg"))?;
    let at = victim.offset + 6;
    let mut b = [0u8];
    seg.read_exact_at(&mut b, at)?;
    seg.write_all_at(&[!b[0]], at)?;
    println!("\nflipped a byte inside {victim}\n");

    let report = verify_store(dir.path())?;
    print!("{}", report.to_text());
    println!("damaged records: {:?}", report.corrupt.iter().map(|o| o.to_string()).collect::<Vec<_>>());
    Ok(())
}
