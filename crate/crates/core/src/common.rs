//! Common objects: the per-event constants shared by runs of events.
//!
//! A common object bundles the static id fragment with the packed component
//! layout. Events store a single reference to it instead of repeating either.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::model::{PackedLayout, StaticIdFragment};
use crate::tag::{fnv1a64, HashFn};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonObject {
    pub common_id: u64,
    pub static_fragment: StaticIdFragment,
    pub layout: PackedLayout,
}

impl CommonObject {
    pub fn new(static_fragment: StaticIdFragment, layout: PackedLayout) -> Self {
        Self::with_hash(static_fragment, layout, fnv1a64)
    }

    pub fn with_hash(static_fragment: StaticIdFragment, layout: PackedLayout, hash: HashFn) -> Self {
        let common_id = hash(&content_bytes(&static_fragment, &layout));
        CommonObject { common_id, static_fragment, layout }
    }

    fn same_content(&self, other: &CommonObject) -> bool {
        self.static_fragment == other.static_fragment && self.layout == other.layout
    }

    /// Persistent encoding: u64 id, label, u32 run, u32 config, packed layout
    /// (strings u32-length-prefixed, all LE).
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(32 + self.layout.packed_form().len());
        w.u64(self.common_id);
        w.raw(&content_bytes(&self.static_fragment, &self.layout));
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let common_id = r.u64()?;
        let experiment_label = r.string()?;
        let run_number = r.u32()?;
        let config_key = r.u32()?;
        let layout: PackedLayout = r.string()?.parse()?;
        r.end()?;
        Ok(CommonObject {
            common_id,
            static_fragment: StaticIdFragment { experiment_label, run_number, config_key },
            layout,
        })
    }
}

fn content_bytes(frag: &StaticIdFragment, layout: &PackedLayout) -> Vec<u8> {
    let mut w = Writer::with_capacity(16 + frag.experiment_label.len() + layout.packed_form().len());
    w.string(&frag.experiment_label);
    w.u32(frag.run_number);
    w.u32(frag.config_key);
    w.string(layout.packed_form());
    w.finish()
}

/// Content-interning table of common objects.
pub struct CommonRegistry {
    map: RwLock<HashMap<u64, Arc<CommonObject>>>,
    hash: HashFn,
}

impl Default for CommonRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for CommonRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommonRegistry").field("len", &self.len()).finish()
    }
}

impl CommonRegistry {
    pub fn new() -> Self {
        Self::with_hash(fnv1a64)
    }

    pub fn with_hash(hash: HashFn) -> Self {
        CommonRegistry { map: RwLock::new(HashMap::new()), hash }
    }

    /// Returns the shared object for this content and whether it was new.
    pub fn intern(&self, static_fragment: StaticIdFragment, layout: PackedLayout) -> Result<(Arc<CommonObject>, bool)> {
        self.insert(CommonObject::with_hash(static_fragment, layout, self.hash))
    }

    pub fn insert(&self, object: CommonObject) -> Result<(Arc<CommonObject>, bool)> {
        if let Some(e) = self.map.read().unwrap().get(&object.common_id) {
            return check_same(e, &object).map(|o| (o, false));
        }
        let mut map = self.map.write().unwrap();
        if let Some(e) = map.get(&object.common_id) {
            return check_same(e, &object).map(|o| (o, false));
        }
        let object = Arc::new(object);
        map.insert(object.common_id, object.clone());
        Ok((object, true))
    }

    pub fn get(&self, common_id: u64) -> Result<Arc<CommonObject>> {
        self.map
            .read()
            .unwrap()
            .get(&common_id)
            .cloned()
            .ok_or(Error::UnknownCommonObject(common_id))
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_same(e: &Arc<CommonObject>, object: &CommonObject) -> Result<Arc<CommonObject>> {
    if e.same_content(object) {
        Ok(e.clone())
    } else {
        Err(Error::HashCollision(object.common_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pack_layout, ComponentEntry};
    use std::collections::HashSet;

    fn frag(run: u32) -> StaticIdFragment {
        StaticIdFragment { experiment_label: "BaBar".into(), run_number: run, config_key: 1 }
    }

    fn layout(keys: &[&str]) -> PackedLayout {
        let e: Vec<_> = keys.iter().map(|k| ComponentEntry::new(*k, "T").unwrap()).collect();
        pack_layout(&e).unwrap()
    }

    #[test]
    fn same_content_interned_once() {
        let reg = CommonRegistry::new();
        let l = layout(&["a", "b"]);
        let (first, created) = reg.intern(frag(0), l.clone()).unwrap();
        assert!(created);
        for _ in 0..100_000 {
            let (o, created) = reg.intern(frag(0), l.clone()).unwrap();
            assert!(!created);
            assert_eq!(o.common_id, first.common_id);
        }
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn one_object_per_thousand_events() {
        let reg = CommonRegistry::new();
        let l = layout(&["aod", "esd"]);
        let mut oracle = HashSet::new();
        for ev in 0..100_000u32 {
            reg.intern(frag(ev / 1000), l.clone()).unwrap();
            oracle.insert((frag(ev / 1000), l.packed_form().to_string()));
        }
        assert_eq!(oracle.len(), 100);
        assert_eq!(reg.len(), oracle.len());
    }

    #[test]
    fn two_layouts_two_objects() {
        let reg = CommonRegistry::new();
        reg.intern(frag(0), layout(&["a", "b"])).unwrap();
        reg.intern(frag(0), layout(&["b", "a"])).unwrap();
        assert_eq!(reg.len(), 2);
    }

    #[test]
    fn get_and_unknown() {
        let reg = CommonRegistry::new();
        let (o, _) = reg.intern(frag(4), layout(&["x"])).unwrap();
        assert_eq!(*reg.get(o.common_id).unwrap(), *o);
        assert!(matches!(reg.get(o.common_id ^ 1), Err(Error::UnknownCommonObject(_))));
    }

    #[test]
    fn collision_detected() {
        let reg = CommonRegistry::with_hash(|_| 42);
        reg.intern(frag(0), layout(&["x"])).unwrap();
        assert!(matches!(reg.intern(frag(1), layout(&["x"])), Err(Error::HashCollision(42))));
    }

    #[test]
    fn encode_decode() {
        let o = CommonObject::new(frag(9), layout(&["aod", "tag"]));
        let bytes = o.encode();
        // 8 id + (4+5) label + run + config + (4+11) layout
        assert_eq!(bytes.len(), 8 + 9 + 8 + 4 + "aod=T;tag=T".len());
        assert_eq!(CommonObject::decode(&bytes).unwrap(), o);
    }
}
