//! Collection names, glob resolution and namespace access rules.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Checks that `name` is an absolute path of non-empty components made of
/// ASCII letters, digits, `_`, `-` and `.` (but not `.` or `..` alone).
pub fn validate_name(name: &str) -> Result<()> {
    let bad = || Error::BadName(name.to_string());
    let rest = name.strip_prefix('/').ok_or_else(bad)?;
    if rest.is_empty() || name.len() > 1024 {
        return Err(bad());
    }
    for comp in rest.split('/') {
        if comp.is_empty()
            || comp == "."
            || comp == ".."
            || !comp.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
        {
            return Err(bad());
        }
    }
    Ok(())
}

/// Drops a trailing `/` except on the root.
pub fn normalize(path: &str) -> String {
    match path.strip_suffix('/') {
        Some(p) if !p.is_empty() => p.to_string(),
        _ => path.to_string(),
    }
}

/// True if `name` equals `path` or lies below it.
pub fn is_within(name: &str, path: &str) -> bool {
    let path = normalize(path);
    if path == "/" {
        return true;
    }
    name == path || (name.starts_with(&path) && name.as_bytes()[path.len()] == b'/')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    ReadWrite = 0,
    ReadOnly = 1,
}

impl std::fmt::Display for AccessMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AccessMode::ReadWrite => "read-write",
            AccessMode::ReadOnly => "read-only",
        })
    }
}

impl std::str::FromStr for AccessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "read-write" | "rw" => Ok(AccessMode::ReadWrite),
            "read-only" | "ro" => Ok(AccessMode::ReadOnly),
            _ => Err(Error::BadName(s.to_string())),
        }
    }
}

/// Subtree access rules. The deepest rule covering a path decides; paths
/// with no covering rule are writable.
#[derive(Debug, Clone, Default)]
pub struct AccessRules {
    rules: BTreeMap<String, AccessMode>,
}

impl AccessRules {
    pub fn set(&mut self, path: &str, mode: AccessMode) {
        self.rules.insert(normalize(path), mode);
    }

    pub fn mode(&self, path: &str) -> AccessMode {
        self.rules
            .iter()
            .filter(|(p, _)| is_within(path, p))
            .max_by_key(|(p, _)| if p.as_str() == "/" { 0 } else { p.len() })
            .map_or(AccessMode::ReadWrite, |(_, m)| *m)
    }

    pub fn rules(&self) -> Vec<(String, AccessMode)> {
        self.rules.iter().map(|(p, m)| (p.clone(), *m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Seg {
    /// `**`: zero or more components.
    Any,
    /// A component pattern where `*` matches any run of characters.
    One(String),
}

/// Compiled collection-name glob.
#[derive(Debug, Clone)]
pub struct Glob {
    segs: Vec<Seg>,
}

impl Glob {
    pub fn new(pattern: &str) -> Result<Self> {
        let bad = || Error::BadPattern(pattern.to_string());
        let rest = pattern.strip_prefix('/').ok_or_else(bad)?;
        if rest.is_empty() {
            return Ok(Glob { segs: Vec::new() });
        }
        let mut segs = Vec::new();
        for comp in rest.split('/') {
            if comp.is_empty() {
                return Err(bad());
            }
            if comp == "**" {
                segs.push(Seg::Any);
            } else if comp.contains("**") {
                return Err(bad());
            } else {
                segs.push(Seg::One(comp.to_string()));
            }
        }
        Ok(Glob { segs })
    }

    pub fn matches(&self, name: &str) -> bool {
        let comps: Vec<&str> = match name.strip_prefix('/') {
            Some(r) => r.split('/').collect(),
            None => return false,
        };
        match_segs(&self.segs, &comps)
    }
}

fn match_segs(segs: &[Seg], comps: &[&str]) -> bool {
    match segs.split_first() {
        None => comps.is_empty(),
        Some((Seg::Any, rest)) => (0..=comps.len()).any(|k| match_segs(rest, &comps[k..])),
        Some((Seg::One(p), rest)) => {
            !comps.is_empty() && match_component(p.as_bytes(), comps[0].as_bytes()) && match_segs(rest, &comps[1..])
        }
    }
}

fn match_component(p: &[u8], s: &[u8]) -> bool {
    match p.split_first() {
        None => s.is_empty(),
        Some((b'*', rest)) => (0..=s.len()).any(|k| match_component(rest, &s[k..])),
        Some((c, rest)) => s.first() == Some(c) && match_component(rest, &s[1..]),
    }
}

/// Names matching `pattern`, sorted.
pub fn resolve<'n>(names: impl IntoIterator<Item = &'n str>, pattern: &str) -> Result<Vec<String>> {
    let g = Glob::new(pattern)?;
    let mut out: Vec<String> = names.into_iter().filter(|n| g.matches(n)).map(str::to_string).collect();
    out.sort();
    out.dedup();
    Ok(out)
}
