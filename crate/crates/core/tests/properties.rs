mod common;

use std::collections::HashMap;
use std::sync::Arc;

use evstore::{AttrKind, AttributeSpec, DescriptorRegistry, EventId, EventStore, Format, TagDescriptor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use common::*;

#[test]
fn split_join_is_identity() {
    let mut rng = Pcg64::seed_from_u64(1);
    for _ in 0..100_000 {
        let id = EventId {
            experiment_label: ["BaBar", "", "x-y_z"][rng.gen_range(0..3)].to_string(),
            run_number: rng.gen(),
            config_key: rng.gen(),
            event_number: rng.gen(),
            timestamp_us: rng.gen(),
        };
        let (s, d) = id.split();
        assert_eq!(EventId::join(&s, d), id);
    }
}

fn spec_list() -> impl Strategy<Value = Vec<AttributeSpec>> {
    prop::collection::btree_map("[a-z][a-zA-Z0-9]{0,8}", 0u8..3, 0..16).prop_map(|m| {
        m.into_iter()
            .map(|(n, k)| AttributeSpec::new(n, [AttrKind::Bool, AttrKind::Int, AttrKind::Float][k as usize]))
            .collect()
    })
}

proptest! {
    #[test]
    fn interning_is_idempotent(specs in spec_list(), k in 1usize..20) {
        let reg = DescriptorRegistry::new();
        let ids: Vec<u64> = (0..k).map(|_| reg.intern(&specs).unwrap().id()).collect();
        prop_assert_eq!(reg.len(), 1);
        prop_assert!(ids.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn persisted_tag_ignores_its_neighbours(own in spec_list(), others in prop::collection::vec(spec_list(), 0..6), seed in any::<u64>()) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let d = Arc::new(TagDescriptor::new(&own).unwrap());
        let mut ev = event(0, &[], &d);
        ev.tag = random_tag(&mut rng, &d);

        let dir = tempfile::tempdir().unwrap();
        let es = EventStore::create(dir.path(), opts()).unwrap();
        let mut tx = es.begin().unwrap();
        tx.create_collection("/alone", Format::V2).unwrap();
        tx.create_collection("/crowd", Format::V2).unwrap();
        let alone = tx.ingest(&ev, "/alone").unwrap();
        for (i, specs) in others.iter().enumerate() {
            let od = Arc::new(TagDescriptor::new(specs).unwrap());
            tx.ingest(&event(i as u64 + 1, &[], &od), "/crowd").unwrap();
        }
        let crowded = tx.ingest(&ev, "/crowd").unwrap();
        tx.commit().unwrap();
        let bytes = |at| es.store().read(es.event_info(at).unwrap().tag).unwrap().1;
        prop_assert_eq!(bytes(alone), bytes(crowded));
        prop_assert_eq!(bytes(alone).len(), d.tag_encoded_len());
    }
}

fn segment_bytes(dir: &std::path::Path) -> HashMap<String, Vec<u8>> {
    std::fs::read_dir(dir.join("segments"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn committed_bytes_are_never_rewritten() {
    let dir = tempfile::tempdir().unwrap();
    let es = EventStore::create(dir.path(), evstore::StoreOptions { segment_roll_bytes: 4096, ..opts() }).unwrap();
    let mut rng = Pcg64::seed_from_u64(8);
    let mut before = segment_bytes(dir.path());
    for round in 0..30 {
        let mut tx = es.begin().unwrap();
        let name = format!("/r/{round}");
        tx.create_collection(&name, if rng.gen() { Format::V1 } else { Format::V2 }).unwrap();
        for _ in 0..rng.gen_range(1..10) {
            tx.ingest(&random_event(&mut rng), &name).unwrap();
        }
        if round % 4 == 3 {
            tx.abort().unwrap();
        } else {
            tx.commit().unwrap();
        }
        let after = segment_bytes(dir.path());
        for (seg, old) in &before {
            let new = &after[seg];
            assert!(new.len() >= old.len() && new[..old.len()] == old[..], "segment {seg} changed in round {round}");
        }
        before = after;
    }
    assert!(before.len() > 1, "expected segment rolls");
}

#[test]
fn payloads_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Pcg64::seed_from_u64(9);
    let records: Vec<_> = {
        let es = EventStore::create(dir.path(), evstore::StoreOptions { segment_roll_bytes: 8192, ..opts() }).unwrap();
        let mut tx = es.begin().unwrap();
        tx.create_collection("/c", Format::V2).unwrap();
        for _ in 0..200 {
            tx.ingest(&random_event(&mut rng), "/c").unwrap();
        }
        tx.commit().unwrap();
        es.store().scan().map(|r| r.unwrap()).collect()
    };
    let es = EventStore::open(dir.path()).unwrap();
    for r in &records {
        let (ty, payload) = es.store().read(r.at).unwrap();
        assert_eq!(ty, r.ty);
        assert_eq!(payload, r.payload);
    }
}
