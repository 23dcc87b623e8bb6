//! Command-line front end. The `evstore` binary calls [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::bench::{self, WorkloadSpec};
use crate::collections::{parse_predicate, AccessMode, Format};
use crate::engine::EventStore;
use crate::error::{Error, Result};
use crate::layout::ByteModel;
use crate::storage::{RecordType, StoreOptions, DEFAULT_SEGMENT_ROLL};

#[derive(Debug, Parser)]
#[command(name = "evstore", version, about = "Append-only event store with v1/v2 event layouts")]
pub struct Cli {
    /// Store directory.
    #[arg(long, env = "EVSTORE_DIR", global = true)]
    pub store: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty store.
    Init {
        #[arg(long, default_value_t = ByteModel::default().object_header)]
        object_header_bytes: u64,
        #[arg(long, default_value_t = ByteModel::default().oref)]
        oref_bytes: u64,
        #[arg(long, default_value_t = DEFAULT_SEGMENT_ROLL)]
        segment_roll_bytes: u64,
    },
    /// Generate a workload from a spec file and write it into a collection.
    Ingest {
        #[arg(long)]
        spec: PathBuf,
        /// Event layout, 1 or 2.
        #[arg(long, default_value = "2")]
        format: Format,
        #[arg(long)]
        collection: String,
    },
    /// List collections matching a glob.
    Ls {
        #[arg(default_value = "/**")]
        glob: String,
    },
    /// Show a collection, or one of its events.
    Show {
        collection: String,
        /// Position of the event within the collection.
        #[arg(long)]
        event: Option<usize>,
    },
    /// Filter events by tag predicate into a new collection.
    Skim {
        /// Input collection glob; repeatable.
        #[arg(long = "in", required = true)]
        inputs: Vec<String>,
        #[arg(long = "where")]
        predicate: String,
        #[arg(long)]
        out: String,
        /// Fail on attributes missing from a tag instead of reading them as zero.
        #[arg(long)]
        strict: bool,
    },
    /// Copy a collection's events into a new collection in the v2 layout.
    Migrate {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: String,
    },
    /// Set the access mode of a namespace subtree.
    Access {
        path: String,
        /// read-only or read-write
        mode: AccessMode,
    },
    /// Object and byte totals of the store.
    Stats,
    /// Compare both layouts on a workload, in fresh stores under --store.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Print CSV instead of key=value lines.
        #[arg(long)]
        csv: bool,
    },
    /// Scan the store and check its invariants.
    Verify,
}

fn store_dir(cli: &Cli) -> Result<&Path> {
    cli.store.as_deref().ok_or_else(|| Error::BadSpec("no store given: use --store or EVSTORE_DIR".into()))
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 1 for usage and user
/// errors, 2 for damaged or unreadable data.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "evstore: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let dir = store_dir(cli)?;
    match &cli.command {
        Command::Init { object_header_bytes, oref_bytes, segment_roll_bytes } => {
            let options = StoreOptions {
                model: ByteModel { object_header: *object_header_bytes, oref: *oref_bytes },
                segment_roll_bytes: *segment_roll_bytes,
                sync: true,
            };
            if *segment_roll_bytes == 0 {
                return Err(Error::BadSpec("segment_roll_bytes must be positive".into()));
            }
            EventStore::create(dir, options)?;
            writeln!(out, "initialized {}", dir.display())?;
        }
        Command::Ingest { spec, format, collection } => {
            let spec = WorkloadSpec::read(spec)?;
            let es = EventStore::open(dir)?;
            let t = Instant::now();
            let n = bench::ingest_workload(&es, &spec, collection, *format)?;
            writeln!(err, "ingest took {:.3}s", t.elapsed().as_secs_f64())?;
            writeln!(out, "ingested={n}\ncollection={collection}\nformat={format}")?;
        }
        Command::Ls { glob } => {
            let es = EventStore::open(dir)?;
            for name in es.resolve(glob)? {
                let c = es.collection(&name)?;
                writeln!(out, "{name}\t{}\tentries={}\towned={}", c.format, c.len(), c.owned_count())?;
            }
        }
        Command::Show { collection, event } => {
            let es = EventStore::open(dir)?;
            show(&es, collection, *event, out)?;
        }
        Command::Skim { inputs, predicate, out: output, strict } => {
            let es = EventStore::open(dir)?;
            let pred = parse_predicate(predicate)?;
            let mut names = Vec::new();
            for g in inputs {
                let found = es.resolve(g)?;
                if found.is_empty() {
                    return Err(Error::UnknownCollection(g.clone()));
                }
                names.extend(found);
            }
            let r = es.skim(&names, &pred, output, *strict)?;
            writeln!(
                out,
                "inputs={}\nscanned={}\nselected={}\noutput={}\nformat={}\nrewritten_tags={}",
                names.join(","),
                r.scanned,
                r.selected,
                r.output,
                r.format,
                r.rewritten_tags
            )?;
        }
        Command::Migrate { input, out: output } => {
            let es = EventStore::open(dir)?;
            let r = es.migrate(input, output)?;
            writeln!(out, "migrated={}\ninput={}\noutput={}", r.events, r.input, r.output)?;
        }
        Command::Access { path, mode } => {
            let es = EventStore::open(dir)?;
            let mut tx = es.begin()?;
            tx.set_access(path, *mode)?;
            tx.commit()?;
            writeln!(out, "{path}={mode}")?;
        }
        Command::Stats => {
            let es = EventStore::open(dir)?;
            stats(&es, out)?;
        }
        Command::Bench { spec, json, csv } => {
            let spec = WorkloadSpec::read(spec)?;
            let t = Instant::now();
            let cmp = bench::run_comparison(&spec, dir, StoreOptions::default())?;
            writeln!(err, "bench took {:.3}s", t.elapsed().as_secs_f64())?;
            if cmp.live != cmp.scanned {
                return Err(Error::Format("live accounting disagrees with a cold scan".into()));
            }
            if let Some(path) = json {
                std::fs::write(path, cmp.live.to_json())?;
            }
            if *csv {
                write!(out, "{}", cmp.live.to_csv())?;
            } else {
                write!(out, "{}", cmp.live.to_text())?;
            }
        }
        Command::Verify => {
            let report = bench::verify_store(dir)?;
            write!(out, "{}", report.to_text())?;
            if !report.passed() {
                return Ok(2);
            }
        }
    }
    Ok(0)
}

fn show(es: &EventStore, name: &str, event: Option<usize>, out: &mut dyn Write) -> Result<()> {
    let c = es.collection(name)?;
    let Some(i) = event else {
        writeln!(out, "collection={}\nformat={}\nentries={}\nowned={}", c.name, c.format, c.len(), c.owned_count())?;
        if let Some(u) = c.union {
            writeln!(out, "union_descriptor={u:#018x}")?;
        }
        for (i, e) in c.entries.iter().enumerate() {
            let tag = e.tag.map_or(String::new(), |t| format!(" tag={t}"));
            writeln!(out, "{i}\t{}\t{}{tag}", e.event, if e.owned { "owned" } else { "member" })?;
        }
        return Ok(());
    };
    let entry = c
        .entries
        .get(i)
        .ok_or_else(|| Error::BadSpec(format!("{name} has {} events, no event {i}", c.len())))?;
    let ev = es.read_event(entry.event)?;
    let tag = es.entry_tag(entry)?;
    let info = es.event_info(entry.event)?;
    writeln!(out, "event={i}\nref={}\nformat={}", entry.event, info.format)?;
    writeln!(out, "id.label={}", ev.id.experiment_label)?;
    writeln!(out, "id.run={}\nid.config={}", ev.id.run_number, ev.id.config_key)?;
    writeln!(out, "id.event={}\nid.timestamp_us={}", ev.id.event_number, ev.id.timestamp_us)?;
    writeln!(out, "layout={}", ev.layout()?.packed_form())?;
    for comp in &ev.components {
        writeln!(out, "component {}={} bytes={}", comp.entry.key(), comp.entry.type_name(), comp.payload.len())?;
    }
    writeln!(out, "tag.descriptor={:#018x}", tag.descriptor_id())?;
    let mut values: Vec<_> = tag.values().collect();
    values.sort_by(|a, b| a.0.cmp(b.0));
    for (n, v) in values {
        writeln!(out, "tag.{n}={v}")?;
    }
    Ok(())
}

fn stats(es: &EventStore, out: &mut dyn Write) -> Result<()> {
    let acc = es.accounting();
    let m = es.model();
    writeln!(out, "model.object_header_bytes={}\nmodel.oref_bytes={}", m.object_header, m.oref)?;
    for t in RecordType::ALL {
        writeln!(out, "{}.objects={}\n{}.bytes={}", t.name(), acc.objects(t), t.name(), acc.model_bytes(t))?;
    }
    let events = acc.events();
    let nav = acc.navigation_bytes();
    writeln!(out, "events={events}")?;
    writeln!(out, "collections={}", es.collection_names().len())?;
    writeln!(out, "descriptors={}\ncommons={}", es.stored_descriptors().len(), es.common_count())?;
    writeln!(out, "nav_bytes_total={nav}")?;
    let per = if events == 0 { 0.0 } else { nav as f64 / events as f64 };
    writeln!(out, "nav_bytes_per_event={per:.3}")?;
    for (path, mode) in es.access_rules() {
        writeln!(out, "access {path}={mode}")?;
    }
    Ok(())
}
