//! Append-only segment files with a journal-backed two-phase commit.
//!
//! A store directory holds `MANIFEST`, `journal.bin` and `segments/NNNNNNNN.seg`.
//! Records are appended past each segment's committed watermark; readers only
//! see bytes below the watermark. Commit flushes and syncs the data, publishes a
//! `prepared` journal naming the intended watermarks, publishes a `committed`
//! journal, then advances the in-memory watermarks. Recovery rolls a prepared
//! transaction forward when its data is intact and back otherwise, then
//! truncates every segment to its watermark.
//!
//! Record framing: type code u8, payload length u32 LE, payload, CRC32C of the
//! payload as u32 LE.

pub mod journal;
mod manifest;

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Read};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

pub use journal::{Journal, JournalState};
pub use manifest::{Manifest, FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::layout::ByteModel;

pub const DEFAULT_SEGMENT_ROLL: u64 = 64 << 20;
/// Framing bytes around every payload: type, length and checksum.
pub const RECORD_OVERHEAD: u64 = 9;
const FLUSH_THRESHOLD: usize = 1 << 20;
const SEGMENT_DIR: &str = "segments";

/// Location of a committed record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Oref {
    pub segment: u32,
    pub offset: u64,
}

impl Oref {
    pub const ENCODED_LEN: usize = 12;

    pub fn new(segment: u32, offset: u64) -> Self {
        Oref { segment, offset }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.segment.to_le_bytes());
        out.extend_from_slice(&self.offset.to_le_bytes());
    }

    pub fn decode(b: &[u8]) -> Option<Self> {
        let b = b.get(..Self::ENCODED_LEN)?;
        Some(Oref {
            segment: u32::from_le_bytes(b[..4].try_into().unwrap()),
            offset: u64::from_le_bytes(b[4..12].try_into().unwrap()),
        })
    }
}

impl serde::Serialize for Oref {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Oref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.segment, self.offset)
    }
}

impl std::str::FromStr for Oref {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad object reference {s:?}, expected SEGMENT:OFFSET"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        Ok(Oref { segment: a.parse().map_err(|_| bad())?, offset: b.parse().map_err(|_| bad())? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum RecordType {
    V1Event = 1,
    V2Event = 2,
    Header = 3,
    Id = 4,
    Tag = 5,
    Common = 6,
    Descriptor = 7,
    Data = 8,
    Collection = 9,
    Access = 10,
}

impl RecordType {
    pub const ALL: [RecordType; 10] = [
        RecordType::V1Event,
        RecordType::V2Event,
        RecordType::Header,
        RecordType::Id,
        RecordType::Tag,
        RecordType::Common,
        RecordType::Descriptor,
        RecordType::Data,
        RecordType::Collection,
        RecordType::Access,
    ];

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get((c as usize).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RecordType::V1Event => "v1_event",
            RecordType::V2Event => "v2_event",
            RecordType::Header => "header",
            RecordType::Id => "id",
            RecordType::Tag => "tag",
            RecordType::Common => "common",
            RecordType::Descriptor => "descriptor",
            RecordType::Data => "data",
            RecordType::Collection => "collection",
            RecordType::Access => "access",
        }
    }
}

pub fn frame_record(ty: RecordType, payload: &[u8], out: &mut Vec<u8>) {
    out.push(ty as u8);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32c::crc32c(payload).to_le_bytes());
}

/// The steps of [`Txn::commit`], in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommitStep {
    FlushData,
    SyncData,
    WritePrepared,
    PublishPrepared,
    WriteCommitted,
    PublishCommitted,
    AdvanceWatermarks,
}

impl CommitStep {
    pub const ALL: [CommitStep; 7] = [
        CommitStep::FlushData,
        CommitStep::SyncData,
        CommitStep::WritePrepared,
        CommitStep::PublishPrepared,
        CommitStep::WriteCommitted,
        CommitStep::PublishCommitted,
        CommitStep::AdvanceWatermarks,
    ];

    /// Whether a crash just before this step leaves the transaction durable.
    pub fn durable_if_crashed_before(self) -> bool {
        self > CommitStep::PublishPrepared
    }
}

/// A simulated crash for the next commit. The store stops mid-protocol and
/// refuses further use; reopening the directory runs recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    CrashBefore(CommitStep),
    /// Writes only half of the pending data, then crashes.
    TornFlush,
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    pub model: ByteModel,
    pub segment_roll_bytes: u64,
    /// fsync data, journal and directory during commit.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions { model: ByteModel::default(), segment_roll_bytes: DEFAULT_SEGMENT_ROLL, sync: true }
    }
}

struct Segments {
    files: Vec<Arc<File>>,
    committed: Vec<u64>,
}

struct Writer {
    tail: File,
    tail_id: u32,
    /// Bytes of the tail segment already written to the file.
    flushed: u64,
    buf: Vec<u8>,
}

impl Writer {
    fn tail_len(&self) -> u64 {
        self.flushed + self.buf.len() as u64
    }

    fn flush(&mut self) -> Result<()> {
        if !self.buf.is_empty() {
            self.tail.write_all_at(&self.buf, self.flushed)?;
            self.flushed += self.buf.len() as u64;
            self.buf.clear();
        }
        Ok(())
    }
}

/// Segment store with a single writer and any number of readers.
pub struct Store {
    dir: PathBuf,
    manifest: Manifest,
    sync: bool,
    segments: RwLock<Segments>,
    writer: Mutex<Writer>,
    busy: AtomicBool,
    poisoned: AtomicBool,
    fault: Mutex<Option<Fault>>,
    next_txn: AtomicU64,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn segment_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(SEGMENT_DIR).join(format!("{id:08}.seg"))
}

fn open_rw(path: &Path, create: bool) -> Result<File> {
    Ok(OpenOptions::new().read(true).write(true).create(create).truncate(false).open(path)?)
}

impl Store {
    /// Creates an empty store in `dir`, which must not already hold one.
    pub fn create(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Store> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join(SEGMENT_DIR))?;
        if dir.join(manifest::MANIFEST_FILE).exists() {
            return Err(Error::Format(format!("{} already holds a store", dir.display())));
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            model: options.model,
            segment_roll_bytes: options.segment_roll_bytes,
        };
        File::create(segment_path(dir, 0))?;
        journal::replace(dir, &Journal::idle(vec![0]), options.sync)?;
        // MANIFEST last: its presence marks a complete store
        fs::write(dir.join(manifest::MANIFEST_FILE), manifest.render())?;
        if options.sync {
            journal::sync_dir(dir)?;
        }
        Self::open_with(dir, options.sync)
    }

    /// Opens a store, recovering to the last committed state.
    pub fn open(dir: impl AsRef<Path>) -> Result<Store> {
        Self::open_with(dir.as_ref(), true)
    }

    pub fn open_with(dir: &Path, sync: bool) -> Result<Store> {
        let manifest = Manifest::read(dir)?;
        let (watermarks, txn_id) = recover(dir, sync)?;
        let mut files = Vec::with_capacity(watermarks.len());
        for id in 0..watermarks.len() {
            files.push(Arc::new(File::open(segment_path(dir, id as u32))?));
        }
        let tail_id = (watermarks.len() - 1) as u32;
        let tail = open_rw(&segment_path(dir, tail_id), false)?;
        Ok(Store {
            dir: dir.to_path_buf(),
            manifest,
            sync,
            writer: Mutex::new(Writer { tail, tail_id, flushed: watermarks[tail_id as usize], buf: Vec::new() }),
            segments: RwLock::new(Segments { files, committed: watermarks }),
            busy: AtomicBool::new(false),
            poisoned: AtomicBool::new(false),
            fault: Mutex::new(None),
            next_txn: AtomicU64::new(txn_id + 1),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn model(&self) -> ByteModel {
        self.manifest.model
    }

    /// Committed length of every segment.
    pub fn watermarks(&self) -> Vec<u64> {
        self.segments.read().unwrap().committed.clone()
    }

    pub fn inject_fault(&self, fault: Fault) {
        *self.fault.lock().unwrap() = Some(fault);
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.load(Ordering::SeqCst)
    }

    fn check_usable(&self) -> Result<()> {
        if self.is_poisoned() {
            Err(Error::Poisoned)
        } else {
            Ok(())
        }
    }

    pub fn begin(&self) -> Result<Txn<'_>> {
        self.check_usable()?;
        if self.busy.compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst).is_err() {
            return Err(Error::WriterBusy);
        }
        let seg = self.segments.read().unwrap();
        Ok(Txn {
            store: self,
            id: self.next_txn.fetch_add(1, Ordering::SeqCst),
            start: seg.committed.clone(),
            sealed: Vec::new(),
            finished: false,
        })
    }

    /// Reads the committed record at `at`.
    pub fn read(&self, at: Oref) -> Result<(RecordType, Vec<u8>)> {
        let (file, wm) = {
            let seg = self.segments.read().unwrap();
            let i = at.segment as usize;
            match (seg.files.get(i), seg.committed.get(i)) {
                (Some(f), Some(&wm)) => (f.clone(), wm),
                _ => return Err(Error::UnknownRef(at)),
            }
        };
        if at.offset.checked_add(RECORD_OVERHEAD).is_none_or(|end| end > wm) {
            return Err(Error::UnknownRef(at));
        }
        let corrupt = |reason: &str| Error::CorruptRecord { at, reason: reason.to_string() };
        let mut head = [0u8; 5];
        file.read_exact_at(&mut head, at.offset)
            .map_err(|_| corrupt("short header"))?;
        let ty = RecordType::from_code(head[0]).ok_or_else(|| corrupt("unknown type code"))?;
        let len = u32::from_le_bytes(head[1..5].try_into().unwrap()) as u64;
        if at.offset + RECORD_OVERHEAD + len > wm {
            return Err(corrupt("record extends past the committed watermark"));
        }
        let mut body = vec![0u8; len as usize + 4];
        file.read_exact_at(&mut body, at.offset + 5)
            .map_err(|_| corrupt("short payload"))?;
        let crc = u32::from_le_bytes(body[len as usize..].try_into().unwrap());
        body.truncate(len as usize);
        if crc32c::crc32c(&body) != crc {
            return Err(corrupt("checksum mismatch"));
        }
        Ok((ty, body))
    }

    /// Iterates over every committed record in segment order.
    pub fn scan(&self) -> Scanner {
        Scanner {
            dir: self.dir.clone(),
            watermarks: self.watermarks(),
            seg: 0,
            reader: None,
            pos: 0,
        }
    }

    fn fire(&self, step: CommitStep) -> Result<()> {
        let mut fault = self.fault.lock().unwrap();
        if *fault == Some(Fault::CrashBefore(step)) {
            *fault = None;
            self.poisoned.store(true, Ordering::SeqCst);
            return Err(Error::InjectedFault(step));
        }
        Ok(())
    }
}

/// Works out the committed watermarks and leaves the directory matching them.
fn recover(dir: &Path, sync: bool) -> Result<(Vec<u64>, u64)> {
    let _ = fs::remove_file(dir.join(journal::JOURNAL_TMP));
    let j = Journal::read(dir)?;
    let mut wm = match j.state {
        JournalState::Idle | JournalState::Committed => j.committed.clone(),
        JournalState::Prepared => {
            let intact = j.intended.iter().enumerate().all(|(i, &to)| {
                let from = j.committed.get(i).copied().unwrap_or(0).min(to);
                region_is_intact(&segment_path(dir, i as u32), from, to)
            });
            if intact {
                j.intended.clone()
            } else {
                j.committed.clone()
            }
        }
    };
    while wm.len() > 1 && *wm.last().unwrap() == 0 {
        wm.pop();
    }
    if wm.is_empty() {
        wm.push(0);
    }
    for (i, &w) in wm.iter().enumerate() {
        let path = segment_path(dir, i as u32);
        let f = match open_rw(&path, i == 0 && w == 0) {
            Ok(f) => f,
            Err(_) => return Err(Error::CorruptJournal(format!("segment {i} is missing"))),
        };
        let len = f.metadata()?.len();
        if len < w {
            return Err(Error::CorruptJournal(format!(
                "segment {i} holds {len} bytes, journal says {w} are committed"
            )));
        }
        if len > w {
            f.set_len(w)?;
            if sync {
                f.sync_all()?;
            }
        }
    }
    // segments past the committed tail only ever hold uncommitted bytes
    for entry in fs::read_dir(dir.join(SEGMENT_DIR))? {
        let entry = entry?;
        let name = entry.file_name();
        let id = name
            .to_str()
            .and_then(|n| n.strip_suffix(".seg"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(id) = id {
            if id >= wm.len() {
                fs::remove_file(entry.path())?;
            }
        }
    }
    if j.state == JournalState::Prepared || j.committed != wm {
        let settled = Journal { txn_id: j.txn_id, state: JournalState::Committed, committed: wm.clone(), intended: wm.clone() };
        journal::replace(dir, &settled, sync)?;
    }
    Ok((wm, j.txn_id))
}

/// True when `[from, to)` of the file is a run of well-formed records.
fn region_is_intact(path: &Path, from: u64, to: u64) -> bool {
    let Ok(file) = File::open(path) else {
        return from == to;
    };
    if file.metadata().map(|m| m.len() < to).unwrap_or(true) {
        return false;
    }
    let mut pos = from;
    while pos < to {
        let mut head = [0u8; 5];
        if file.read_exact_at(&mut head, pos).is_err() || RecordType::from_code(head[0]).is_none() {
            return false;
        }
        let len = u32::from_le_bytes(head[1..5].try_into().unwrap()) as u64;
        let end = pos + RECORD_OVERHEAD + len;
        if end > to {
            return false;
        }
        let mut body = vec![0u8; len as usize + 4];
        if file.read_exact_at(&mut body, pos + 5).is_err() {
            return false;
        }
        let crc = u32::from_le_bytes(body[len as usize..].try_into().unwrap());
        if crc32c::crc32c(&body[..len as usize]) != crc {
            return false;
        }
        pos = end;
    }
    pos == to
}

/// A write transaction. Dropping it without committing aborts it.
pub struct Txn<'a> {
    store: &'a Store,
    id: u64,
    start: Vec<u64>,
    /// Final lengths of segments this transaction filled and rolled past.
    sealed: Vec<(usize, u64)>,
    finished: bool,
}

impl fmt::Debug for Txn<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Txn").field("id", &self.id).finish_non_exhaustive()
    }
}

impl<'a> Txn<'a> {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn store(&self) -> &'a Store {
        self.store
    }

    /// Appends a record. The returned reference becomes readable at commit.
    pub fn put(&mut self, ty: RecordType, payload: &[u8]) -> Result<Oref> {
        self.store.check_usable()?;
        if payload.len() > u32::MAX as usize {
            return Err(Error::Format("payload larger than 4 GiB".into()));
        }
        let rec_len = RECORD_OVERHEAD + payload.len() as u64;
        let mut w = self.store.writer.lock().unwrap();
        if w.tail_len() > 0 && w.tail_len() + rec_len > self.store.manifest.segment_roll_bytes {
            self.roll(&mut w)?;
        }
        let at = Oref { segment: w.tail_id, offset: w.tail_len() };
        frame_record(ty, payload, &mut w.buf);
        if w.buf.len() >= FLUSH_THRESHOLD {
            w.flush()?;
        }
        Ok(at)
    }

    fn roll(&mut self, w: &mut Writer) -> Result<()> {
        w.flush()?;
        if self.store.sync {
            w.tail.sync_data()?;
        }
        self.sealed.push((w.tail_id as usize, w.flushed));
        let id = w.tail_id + 1;
        let path = segment_path(&self.store.dir, id);
        let tail = OpenOptions::new().read(true).write(true).create(true).truncate(true).open(&path)?;
        let reader = Arc::new(File::open(&path)?);
        let mut seg = self.store.segments.write().unwrap();
        seg.files.push(reader);
        seg.committed.push(0);
        w.tail = tail;
        w.tail_id = id;
        w.flushed = 0;
        Ok(())
    }

    /// Runs the two-phase commit protocol.
    pub fn commit(mut self) -> Result<()> {
        self.store.check_usable()?;
        let store = self.store;
        let mut w = store.writer.lock().unwrap();

        store.fire(CommitStep::FlushData)?;
        let torn = {
            let mut fault = store.fault.lock().unwrap();
            if *fault == Some(Fault::TornFlush) {
                *fault = None;
                true
            } else {
                false
            }
        };
        if torn {
            let half = w.buf.len() / 2;
            let (flushed, buf) = (w.flushed, w.buf[..half].to_vec());
            w.tail.write_all_at(&buf, flushed)?;
            store.poisoned.store(true, Ordering::SeqCst);
            return Err(Error::InjectedFault(CommitStep::FlushData));
        }
        w.flush()?;

        store.fire(CommitStep::SyncData)?;
        if store.sync {
            w.tail.sync_data()?;
        }

        let n_segments = w.tail_id as usize + 1;
        let mut intended = store.segments.read().unwrap().committed.clone();
        intended.resize(n_segments, 0);
        for &(id, len) in &self.sealed {
            intended[id] = len;
        }
        intended[n_segments - 1] = w.tail_len();
        let mut committed = self.start.clone();
        committed.resize(n_segments, 0);

        store.fire(CommitStep::WritePrepared)?;
        let prepared = Journal { txn_id: self.id, state: JournalState::Prepared, committed, intended: intended.clone() };
        journal::write_tmp(&store.dir, &prepared, store.sync)?;

        store.fire(CommitStep::PublishPrepared)?;
        journal::publish_tmp(&store.dir, store.sync)?;

        store.fire(CommitStep::WriteCommitted)?;
        let done = Journal {
            txn_id: self.id,
            state: JournalState::Committed,
            committed: intended.clone(),
            intended: intended.clone(),
        };
        journal::write_tmp(&store.dir, &done, store.sync)?;

        store.fire(CommitStep::PublishCommitted)?;
        journal::publish_tmp(&store.dir, store.sync)?;

        store.fire(CommitStep::AdvanceWatermarks)?;
        store.segments.write().unwrap().committed = intended;
        drop(w);
        self.finished = true;
        Ok(())
    }

    /// Discards everything written since `begin`.
    pub fn abort(mut self) -> Result<()> {
        self.finished = true;
        self.rollback()
    }

    fn rollback(&mut self) -> Result<()> {
        let store = self.store;
        let mut w = store.writer.lock().unwrap();
        w.buf.clear();
        self.sealed.clear();
        let keep = self.start.len();
        let mut seg = store.segments.write().unwrap();
        for id in keep..seg.files.len() {
            fs::remove_file(segment_path(&store.dir, id as u32))?;
        }
        seg.files.truncate(keep);
        seg.committed.truncate(keep);
        let tail_id = (keep - 1) as u32;
        let tail_len = self.start[keep - 1];
        if w.tail_id != tail_id {
            w.tail = open_rw(&segment_path(&store.dir, tail_id), false)?;
            w.tail_id = tail_id;
        }
        w.tail.set_len(tail_len)?;
        w.flushed = tail_len;
        Ok(())
    }
}

impl Drop for Txn<'_> {
    fn drop(&mut self) {
        if !self.finished && !self.store.is_poisoned() {
            let _ = self.rollback();
        }
        self.store.busy.store(false, Ordering::SeqCst);
    }
}

/// A committed record found by [`Store::scan`].
#[derive(Debug, Clone)]
pub struct ScannedRecord {
    pub at: Oref,
    pub ty: RecordType,
    pub payload: Vec<u8>,
}

/// Sequential reader over committed records. A record with a bad checksum
/// is reported and skipped; a broken frame ends the scan of its segment.
pub struct Scanner {
    dir: PathBuf,
    watermarks: Vec<u64>,
    seg: usize,
    reader: Option<BufReader<File>>,
    pos: u64,
}

impl Iterator for Scanner {
    type Item = Result<ScannedRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.seg >= self.watermarks.len() {
                return None;
            }
            let wm = self.watermarks[self.seg];
            if self.pos >= wm {
                self.seg += 1;
                self.pos = 0;
                self.reader = None;
                continue;
            }
            if self.reader.is_none() {
                match File::open(segment_path(&self.dir, self.seg as u32)) {
                    Ok(f) => self.reader = Some(BufReader::with_capacity(1 << 20, f)),
                    Err(e) => {
                        self.pos = wm;
                        return Some(Err(e.into()));
                    }
                }
            }
            let at = Oref { segment: self.seg as u32, offset: self.pos };
            let reader = self.reader.as_mut().unwrap();
            let mut head = [0u8; 5];
            let broken = |s: &mut Self, reason: &str| {
                s.pos = wm;
                Some(Err(Error::CorruptRecord { at, reason: reason.to_string() }))
            };
            if reader.read_exact(&mut head).is_err() {
                return broken(self, "short header");
            }
            let Some(ty) = RecordType::from_code(head[0]) else {
                return broken(self, "unknown type code");
            };
            let len = u32::from_le_bytes(head[1..5].try_into().unwrap()) as u64;
            let end = self.pos + RECORD_OVERHEAD + len;
            if end > wm {
                return broken(self, "record extends past the committed watermark");
            }
            let mut body = vec![0u8; len as usize + 4];
            if reader.read_exact(&mut body).is_err() {
                return broken(self, "short payload");
            }
            self.pos = end;
            let crc = u32::from_le_bytes(body[len as usize..].try_into().unwrap());
            body.truncate(len as usize);
            if crc32c::crc32c(&body) != crc {
                return Some(Err(Error::CorruptRecord { at, reason: "checksum mismatch".into() }));
            }
            return Some(Ok(ScannedRecord { at, ty, payload: body }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> StoreOptions {
        StoreOptions { sync: false, ..Default::default() }
    }

    fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        for e in fs::read_dir(dir.join(SEGMENT_DIR)).unwrap() {
            let e = e.unwrap();
            out.push((e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()));
        }
        out.push(("journal".into(), fs::read(dir.join("journal.bin")).unwrap()));
        out.sort();
        out
    }

    #[test]
    fn empty_payload_is_nine_bytes() {
        let d = tempfile::tempdir().unwrap();
        let s = Store::create(d.path(), opts()).unwrap();
        let mut t = s.begin().unwrap();
        let a = t.put(RecordType::Data, b"").unwrap();
        let b = t.put(RecordType::Data, b"x").unwrap();
        assert_eq!(b.offset - a.offset, 9);
        assert!(matches!(s.read(a), Err(Error::UnknownRef(_))));
        t.commit().unwrap();
        assert_eq!(s.read(a).unwrap(), (RecordType::Data, vec![]));
        assert_eq!(s.read(b).unwrap(), (RecordType::Data, b"x".to_vec()));
        assert_eq!(s.watermarks(), vec![19]);
    }

    #[test]
    fn second_writer_is_refused() {
        let d = tempfile::tempdir().unwrap();
        let s = Store::create(d.path(), opts()).unwrap();
        let t = s.begin().unwrap();
        assert!(matches!(s.begin(), Err(Error::WriterBusy)));
        drop(t);
        s.begin().unwrap();
    }

    #[test]
    fn abort_restores_bytes() {
        let d = tempfile::tempdir().unwrap();
        let s = Store::create(d.path(), StoreOptions { segment_roll_bytes: 64, ..opts() }).unwrap();
        let mut t = s.begin().unwrap();
        t.put(RecordType::Data, &[1; 20]).unwrap();
        t.commit().unwrap();
        let before = dir_bytes(d.path());
        let mut t = s.begin().unwrap();
        for _ in 0..10 {
            t.put(RecordType::Data, &[2; 30]).unwrap();
        }
        t.abort().unwrap();
        assert_eq!(dir_bytes(d.path()), before);
        // store still usable
        let mut t = s.begin().unwrap();
        let r = t.put(RecordType::Tag, b"abc").unwrap();
        t.commit().unwrap();
        assert_eq!(s.read(r).unwrap().1, b"abc");
    }

    #[test]
    fn segments_roll_and_reopen() {
        let d = tempfile::tempdir().unwrap();
        let s = Store::create(d.path(), StoreOptions { segment_roll_bytes: 100, ..opts() }).unwrap();
        let mut t = s.begin().unwrap();
        let refs: Vec<_> = (0..10u8).map(|i| t.put(RecordType::Data, &[i; 40]).unwrap()).collect();
        t.commit().unwrap();
        assert_eq!(refs.iter().map(|r| r.segment).max(), Some(4));
        drop(s);
        let s = Store::open(d.path()).unwrap();
        for (i, r) in refs.iter().enumerate() {
            assert_eq!(s.read(*r).unwrap().1, vec![i as u8; 40]);
        }
        let scanned: Vec<_> = s.scan().map(|r| r.unwrap().at).collect();
        assert_eq!(scanned, refs);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let d = tempfile::tempdir().unwrap();
        let s = Store::create(d.path(), opts()).unwrap();
        let mut t = s.begin().unwrap();
        let r = t.put(RecordType::Data, b"committed").unwrap();
        t.commit().unwrap();
        drop(s);
        let seg = segment_path(d.path(), 0);
        let mut bytes = fs::read(&seg).unwrap();
        let good = bytes.len();
        bytes.extend_from_slice(&[8, 50, 0, 0, 0, 1, 2]);
        fs::write(&seg, &bytes).unwrap();
        let s = Store::open(d.path()).unwrap();
        assert_eq!(fs::metadata(&seg).unwrap().len() as usize, good);
        assert_eq!(s.read(r).unwrap().1, b"committed");
    }

    #[test]
    fn every_crash_point_is_all_or_nothing() {
        for fault in CommitStep::ALL.map(Fault::CrashBefore).into_iter().chain([Fault::TornFlush]) {
            let d = tempfile::tempdir().unwrap();
            let s = Store::create(d.path(), StoreOptions { segment_roll_bytes: 128, ..opts() }).unwrap();
            let mut t = s.begin().unwrap();
            t.put(RecordType::Data, b"base").unwrap();
            t.commit().unwrap();
            let pre: Vec<_> = s.scan().map(|r| r.unwrap().payload).collect();

            s.inject_fault(fault);
            let mut t = s.begin().unwrap();
            for i in 0..8u8 {
                t.put(RecordType::Data, &[i; 50]).unwrap();
            }
            assert!(t.commit().is_err());
            assert!(matches!(s.begin(), Err(Error::Poisoned)));
            drop(s);

            let s = Store::open(d.path()).unwrap();
            let post: Vec<_> = s.scan().map(|r| r.unwrap().payload).collect();
            let durable = matches!(fault, Fault::CrashBefore(step) if step.durable_if_crashed_before());
            if durable {
                assert_eq!(post.len(), 9, "{fault:?}");
            } else {
                assert_eq!(post, pre, "{fault:?}");
            }
        }
    }

    #[test]
    fn prepared_journal_rolls_forward_or_back() {
        for damage in [false, true] {
            let d = tempfile::tempdir().unwrap();
            let s = Store::create(d.path(), opts()).unwrap();
            s.inject_fault(Fault::CrashBefore(CommitStep::WriteCommitted));
            let mut t = s.begin().unwrap();
            t.put(RecordType::Data, b"one").unwrap();
            t.put(RecordType::Data, b"two").unwrap();
            assert!(t.commit().is_err());
            drop(s);
            assert_eq!(Journal::read(d.path()).unwrap().state, JournalState::Prepared);
            if damage {
                let seg = segment_path(d.path(), 0);
                let mut b = fs::read(&seg).unwrap();
                let n = b.len();
                b[n - 6] ^= 0xff;
                fs::write(&seg, b).unwrap();
            }
            let s = Store::open(d.path()).unwrap();
            assert_eq!(s.scan().count(), if damage { 0 } else { 2 });
            assert_eq!(Journal::read(d.path()).unwrap().state, JournalState::Committed);
        }
    }

    #[test]
    fn corrupt_journal_refuses_to_open() {
        let d = tempfile::tempdir().unwrap();
        drop(Store::create(d.path(), opts()).unwrap());
        let p = d.path().join("journal.bin");
        let mut b = fs::read(&p).unwrap();
        b[5] ^= 1;
        fs::write(&p, b).unwrap();
        assert!(matches!(Store::open(d.path()), Err(Error::CorruptJournal(_))));
    }

    #[test]
    fn scan_reports_bad_checksum_and_continues() {
        let d = tempfile::tempdir().unwrap();
        let s = Store::create(d.path(), opts()).unwrap();
        let mut t = s.begin().unwrap();
        let a = t.put(RecordType::Data, b"aaaa").unwrap();
        let b = t.put(RecordType::Data, b"bbbb").unwrap();
        t.commit().unwrap();
        let seg = segment_path(d.path(), 0);
        let mut bytes = fs::read(&seg).unwrap();
        bytes[a.offset as usize + 6] ^= 0x10;
        fs::write(&seg, bytes).unwrap();
        let items: Vec<_> = s.scan().collect();
        assert!(matches!(&items[0], Err(Error::CorruptRecord { at, .. }) if *at == a));
        assert_eq!(items[1].as_ref().unwrap().at, b);
        assert!(matches!(s.read(a), Err(Error::CorruptRecord { .. })));
    }

    #[test]
    fn oref_roundtrip() {
        let r = Oref::new(3, 1 << 40);
        let mut v = Vec::new();
        r.encode_into(&mut v);
        assert_eq!(v.len(), Oref::ENCODED_LEN);
        assert_eq!(Oref::decode(&v), Some(r));
        assert_eq!("3:1099511627776".parse::<Oref>().unwrap(), r);
    }
}
