use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layout::ByteModel;

pub(crate) const MANIFEST_FILE: &str = "MANIFEST";
pub const FORMAT_VERSION: u32 = 1;

/// Store-wide constants, written once at creation as `key=value` lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Manifest {
    pub format_version: u32,
    pub model: ByteModel,
    pub segment_roll_bytes: u64,
}

impl Manifest {
    pub fn render(&self) -> String {
        format!(
            "format_version={}\nobject_header_bytes={}\noref_bytes={}\nsegment_roll_bytes={}\n",
            self.format_version, self.model.object_header, self.model.oref, self.segment_roll_bytes
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut header = None;
        let mut oref = None;
        let mut roll = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("MANIFEST line {line:?}")))?;
            let n: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("MANIFEST value {v:?}")))?;
            match k.trim() {
                "format_version" => version = Some(n as u32),
                "object_header_bytes" => header = Some(n),
                "oref_bytes" => oref = Some(n),
                "segment_roll_bytes" => roll = Some(n),
                other => return Err(Error::Format(format!("MANIFEST key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Format(format!("MANIFEST is missing {k}"));
        let m = Manifest {
            format_version: version.ok_or_else(|| missing("format_version"))?,
            model: ByteModel {
                object_header: header.ok_or_else(|| missing("object_header_bytes"))?,
                oref: oref.ok_or_else(|| missing("oref_bytes"))?,
            },
            segment_roll_bytes: roll.ok_or_else(|| missing("segment_roll_bytes"))?,
        };
        if m.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", m.format_version)));
        }
        if m.segment_roll_bytes == 0 {
            return Err(Error::Format("segment_roll_bytes must be positive".into()));
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Format(format!("{} is not an event store (no MANIFEST)", dir.display()))
            } else {
                e.into()
            }
        })?;
        Self::parse(&text)
    }
}
