//! Ingest the same workload in both layouts and compare navigation bytes.
//!
//! ```text
//! cargo run --release --example footprint_bench            # reference workload W0
//! cargo run --release --example footprint_bench -- 5000    # first 5000 events only
//! ```

use std::time::Instant;

use evstore::bench::{run_comparison, WorkloadSpec};
use evstore::StoreOptions;

fn main() -> evstore::Result<()> {
    let mut spec = WorkloadSpec::w0();
    if let Some(n) = std::env::args().nth(1) {
        spec.event_count = n.parse().expect("event count");
    }
    let dir = tempfile::tempdir()?;
    let t = Instant::now();
    let cmp = run_comparison(&spec, dir.path(), StoreOptions::default())?;
    eprintln!("took {:.1}s", t.elapsed().as_secs_f64());
    assert_eq!(cmp.live, cmp.scanned, "live and scanned accounting differ");
    print!("{}", cmp.live.to_text());
    Ok(())
}
