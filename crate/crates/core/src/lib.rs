//! An append-only event store with two persistent event layouts.
//!
//! Events are written either in a compact layout, where the slowly changing
//! parts of every event (identifier prefix, component keys and types, tag
//! attribute names) live in interned shared objects, or in a legacy layout
//! that repeats them per event. Both are read through one interface, so the
//! navigation bytes each layout costs can be compared on the same data.
//!
//! ```no_run
//! use evstore::{EventStore, Format, StoreOptions};
//! # fn main() -> evstore::Result<()> {
//! let es = EventStore::create("/tmp/demo-store", StoreOptions::default())?;
//! let mut tx = es.begin()?;
//! tx.create_collection("/prod/run1", Format::V2)?;
//! tx.commit()?;
//! # Ok(())
//! # }
//! ```

mod codec;

pub mod bench;
pub mod cli;
pub mod collections;
pub mod common;
pub mod engine;
pub mod error;
pub mod layout;
pub mod model;
pub mod storage;
pub mod tag;

pub use collections::{AccessMode, Collection, CollectionEntry, Format, Predicate};
pub use common::{CommonObject, CommonRegistry};
pub use engine::{Accounting, EventStore, WriteTxn};
pub use error::{Error, Result};
pub use layout::{ByteModel, NavFootprint};
pub use model::{Component, ComponentEntry, EventId, PackedLayout, TransientEvent};
pub use storage::{CommitStep, Fault, Oref, RecordType, Store, StoreOptions};
pub use tag::{AttrKind, AttributeSpec, DescriptorRegistry, Tag, TagDescriptor, TagValue};
