use std::io;

use crate::storage::Oref;

/// Errors produced by the event store.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate layout entry {key}={type_name}")]
    DuplicateEntry { key: String, type_name: String },

    #[error("illegal character in {0:?}: ';' and '=' are reserved")]
    IllegalCharacter(String),

    #[error("invalid name {0:?}: must be 1..=255 bytes")]
    InvalidName(String),

    #[error("malformed layout: {0}")]
    MalformedLayout(String),

    #[error("duplicate attribute name {0:?}")]
    DuplicateAttributeName(String),

    #[error("hash collision on id {0:#018x}")]
    HashCollision(u64),

    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),

    #[error("attribute {name:?} is {expected}, got {got}")]
    KindMismatch {
        name: String,
        expected: crate::tag::AttrKind,
        got: crate::tag::AttrKind,
    },

    #[error("attribute {name:?} already declared as {existing}, got {got}")]
    KindConflict {
        name: String,
        existing: crate::tag::AttrKind,
        got: crate::tag::AttrKind,
    },

    #[error("unknown tag descriptor {0:#018x}")]
    UnknownDescriptor(u64),

    #[error("unknown common object {0:#018x}")]
    UnknownCommonObject(u64),

    #[error("unknown object reference {0}")]
    UnknownRef(Oref),

    #[error("corrupt record at {at}: {reason}")]
    CorruptRecord { at: Oref, reason: String },

    #[error("corrupt journal: {0}")]
    CorruptJournal(String),

    #[error("another write transaction is open")]
    WriterBusy,

    #[error("store is unusable after an interrupted commit; reopen it to recover")]
    Poisoned,

    #[error("injected fault before {0:?}")]
    InjectedFault(crate::storage::CommitStep),

    #[error("collection {0} already exists")]
    NameExists(String),

    #[error("access denied: {0} is read-only")]
    AccessDenied(String),

    #[error("bad collection name {0:?}")]
    BadName(String),

    #[error("unknown collection {0}")]
    UnknownCollection(String),

    #[error("unknown namespace path {0}")]
    UnknownPath(String),

    #[error("bad pattern {0:?}")]
    BadPattern(String),

    #[error("event {0} is already owned by {1}")]
    AlreadyOwned(Oref, String),

    #[error("syntax error at {pos}: {msg}")]
    SyntaxError { pos: usize, msg: String },

    #[error("bad workload spec: {0}")]
    BadSpec(String),

    #[error("store format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors that indicate damaged or unreadable data rather than
    /// a caller mistake.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::CorruptRecord { .. }
                | Error::CorruptJournal(_)
                | Error::HashCollision(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Poisoned
                | Error::InjectedFault(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
