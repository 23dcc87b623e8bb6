//! Commit journal: one small file replaced atomically by rename.
//!
//! Layout (all LE): magic `EVJ1`, u64 txn id, u8 state, u32 segment count,
//! then per segment u64 committed watermark and u64 intended watermark,
//! then a u32 CRC32C of everything before it.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EVJ1";
pub(crate) const JOURNAL_FILE: &str = "journal.bin";
pub(crate) const JOURNAL_TMP: &str = "journal.tmp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JournalState {
    Idle = 0,
    Prepared = 1,
    Committed = 2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Journal {
    pub txn_id: u64,
    pub state: JournalState,
    pub committed: Vec<u64>,
    pub intended: Vec<u64>,
}

impl Journal {
    pub fn idle(committed: Vec<u64>) -> Self {
        Journal { txn_id: 0, state: JournalState::Idle, intended: committed.clone(), committed }
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.committed.len().max(self.intended.len());
        let mut out = Vec::with_capacity(4 + 8 + 1 + 4 + 16 * n + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.txn_id.to_le_bytes());
        out.push(self.state as u8);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for i in 0..n {
            out.extend_from_slice(&self.committed.get(i).copied().unwrap_or(0).to_le_bytes());
            out.extend_from_slice(&self.intended.get(i).copied().unwrap_or(0).to_le_bytes());
        }
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::CorruptJournal(m.to_string());
        if bytes.len() < 4 + 8 + 1 + 4 + 4 {
            return Err(bad("too short"));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32c::crc32c(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
            return Err(bad("checksum mismatch"));
        }
        if &body[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let txn_id = u64::from_le_bytes(body[4..12].try_into().unwrap());
        let state = match body[12] {
            0 => JournalState::Idle,
            1 => JournalState::Prepared,
            2 => JournalState::Committed,
            s => return Err(Error::CorruptJournal(format!("unknown state {s}"))),
        };
        let n = u32::from_le_bytes(body[13..17].try_into().unwrap()) as usize;
        if body.len() != 17 + 16 * n {
            return Err(bad("length does not match segment count"));
        }
        let mut committed = Vec::with_capacity(n);
        let mut intended = Vec::with_capacity(n);
        for chunk in body[17..].chunks_exact(16) {
            committed.push(u64::from_le_bytes(chunk[..8].try_into().unwrap()));
            intended.push(u64::from_le_bytes(chunk[8..].try_into().unwrap()));
        }
        // committed list may carry trailing zero entries for segments the
        // transaction created; they are meaningless once committed
        Ok(Journal { txn_id, state, committed, intended })
    }

    pub fn read(dir: &Path) -> Result<Self> {
        match fs::read(dir.join(JOURNAL_FILE)) {
            Ok(bytes) => Self::decode(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::CorruptJournal("journal.bin is missing".into()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Writes the temporary journal file and syncs it.
pub(crate) fn write_tmp(dir: &Path, journal: &Journal, sync: bool) -> Result<()> {
    let mut f = OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .open(dir.join(JOURNAL_TMP))?;
    f.write_all(&journal.encode())?;
    if sync {
        f.sync_all()?;
    }
    Ok(())
}

/// Atomically replaces the journal with the temporary file.
pub(crate) fn publish_tmp(dir: &Path, sync: bool) -> Result<()> {
    fs::rename(dir.join(JOURNAL_TMP), dir.join(JOURNAL_FILE))?;
    if sync {
        sync_dir(dir)?;
    }
    Ok(())
}

pub(crate) fn replace(dir: &Path, journal: &Journal, sync: bool) -> Result<()> {
    write_tmp(dir, journal, sync)?;
    publish_tmp(dir, sync)
}

pub(crate) fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)?.sync_all()?;
    Ok(())
}
