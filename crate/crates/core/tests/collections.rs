mod common;

use evstore::{AccessMode, AttrKind, EventStore, Error, Format, Oref, Predicate, TagValue};
use tempfile::TempDir;

use common::*;

fn store() -> (TempDir, EventStore) {
    let dir = tempfile::tempdir().unwrap();
    let es = EventStore::create(dir.path(), opts()).unwrap();
    (dir, es)
}

/// `n` v2 events owned by `name`, tagged `nTracks = i`, `isMuon = i % 2 == 1`.
fn fill(es: &EventStore, name: &str, n: u64) -> Vec<Oref> {
    let d = desc(&[("nTracks", AttrKind::Int), ("isMuon", AttrKind::Bool)]);
    let mut tx = es.begin().unwrap();
    tx.create_collection(name, Format::V2).unwrap();
    let refs = (0..n).map(|i| tx.ingest(&event(i, &[("aod", "TrkList")], &d), name).unwrap()).collect();
    tx.commit().unwrap();
    refs
}

fn pred(text: &str) -> Predicate {
    text.parse().unwrap()
}

#[test]
fn create_and_reject_duplicates() {
    let (_d, es) = store();
    let mut tx = es.begin().unwrap();
    tx.create_collection("/a/b", Format::V2).unwrap();
    assert!(matches!(tx.create_collection("/a/b", Format::V1), Err(Error::NameExists(_))));
    tx.commit().unwrap();
    let mut tx = es.begin().unwrap();
    assert!(matches!(tx.create_collection("/a/b", Format::V2), Err(Error::NameExists(_))));
    for bad in ["a/b", "/a//b", "/a/../b", "/", "/a b"] {
        assert!(matches!(tx.create_collection(bad, Format::V2), Err(Error::BadName(_))), "{bad}");
    }
}

#[test]
fn read_only_subtrees() {
    let (_d, es) = store();
    fill(&es, "/prod/run1", 1);
    fill(&es, "/prod/tmp/scratch", 1);
    assert_eq!(es.access_mode("/prod/x"), AccessMode::ReadWrite);

    let mut tx = es.begin().unwrap();
    tx.set_access("/prod", AccessMode::ReadOnly).unwrap();
    tx.set_access("/prod/tmp", AccessMode::ReadWrite).unwrap();
    assert!(matches!(tx.set_access("/nowhere", AccessMode::ReadOnly), Err(Error::UnknownPath(_))));
    tx.commit().unwrap();

    let mut tx = es.begin().unwrap();
    assert!(matches!(tx.create_collection("/prod/x", Format::V2), Err(Error::AccessDenied(_))));
    let ev = es.collection("/prod/run1").unwrap().entries[0].event;
    assert!(matches!(tx.append_event("/prod/run1", ev, false), Err(Error::AccessDenied(_))));
    tx.create_collection("/prod/tmp/x", Format::V2).unwrap();
    tx.append_event("/prod/tmp/x", ev, false).unwrap();
    tx.commit().unwrap();
}

#[test]
fn single_owner_many_members() {
    let (_d, es) = store();
    let refs = fill(&es, "/prod/a", 3);
    let mut tx = es.begin().unwrap();
    for name in ["/m/1", "/m/2", "/m/3"] {
        tx.create_collection(name, Format::V2).unwrap();
        tx.append_event(name, refs[0], false).unwrap();
    }
    tx.create_collection("/thief", Format::V2).unwrap();
    assert!(matches!(tx.append_event("/thief", refs[0], true), Err(Error::AlreadyOwned(r, o)) if r == refs[0] && o == "/prod/a"));
    tx.commit().unwrap();

    let members = es
        .collection_names()
        .iter()
        .filter(|n| es.collection(n).unwrap().entries.iter().any(|e| e.event == refs[0] && !e.owned))
        .count();
    assert_eq!(members, 3);
    assert_eq!(es.owner_of(refs[0]).as_deref(), Some("/prod/a"));
}

#[test]
fn owning_twice_in_one_transaction_fails() {
    let (_d, es) = store();
    let d = int_desc("n", 1);
    let mut tx = es.begin().unwrap();
    tx.create_collection("/a", Format::V2).unwrap();
    tx.create_collection("/b", Format::V2).unwrap();
    let at = tx.assemble_v2(&event(0, &[], &d)).unwrap();
    tx.append_event("/a", at, true).unwrap();
    assert!(matches!(tx.append_event("/b", at, true), Err(Error::AlreadyOwned(..))));
}

#[test]
fn order_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let order: Vec<Oref> = {
        let es = EventStore::create(dir.path(), opts()).unwrap();
        let mut refs = fill(&es, "/src", 40);
        refs.reverse();
        refs.rotate_left(7);
        let mut tx = es.begin().unwrap();
        tx.create_collection("/shuffled", Format::V2).unwrap();
        for r in &refs[..20] {
            tx.append_event("/shuffled", *r, false).unwrap();
        }
        tx.commit().unwrap();
        // second transaction appends to the same collection
        let mut tx = es.begin().unwrap();
        for r in &refs[20..] {
            tx.append_event("/shuffled", *r, false).unwrap();
        }
        tx.commit().unwrap();
        refs
    };
    let es = EventStore::open(dir.path()).unwrap();
    let got: Vec<Oref> = es.collection("/shuffled").unwrap().entries.iter().map(|e| e.event).collect();
    assert_eq!(got, order);
}

#[test]
fn glob_resolution() {
    let (_d, es) = store();
    for n in ["/a/b", "/a/c", "/a/b/c", "/z"] {
        fill(&es, n, 0);
    }
    assert_eq!(es.resolve("/a/*").unwrap(), ["/a/b", "/a/c"]);
    assert_eq!(es.resolve("/**").unwrap(), ["/a/b", "/a/b/c", "/a/c", "/z"]);
    assert_eq!(es.resolve("/a/**").unwrap(), ["/a/b", "/a/b/c", "/a/c"]);
    assert!(es.resolve("/q/*").unwrap().is_empty());
    assert!(matches!(es.resolve("a/*"), Err(Error::BadPattern(_))));
}

#[test]
fn identity_skim_keeps_membership() {
    let (_d, es) = store();
    let refs = fill(&es, "/in", 25);
    let r = es.skim(&["/in".into()], &pred("true == true"), "/out", false).unwrap();
    assert_eq!((r.scanned, r.selected, r.rewritten_tags), (25, 25, 0));
    let out = es.collection("/out").unwrap();
    assert_eq!(out.entries.iter().map(|e| e.event).collect::<Vec<_>>(), refs);
    assert!(out.entries.iter().all(|e| !e.owned));
    assert_eq!(out.format, Format::V2);
}

#[test]
fn skim_dedups_and_keeps_first_occurrence() {
    let (_d, es) = store();
    let a = fill(&es, "/a", 10);
    let mut tx = es.begin().unwrap();
    tx.create_collection("/b", Format::V2).unwrap();
    for r in a.iter().rev() {
        tx.append_event("/b", *r, false).unwrap();
    }
    tx.commit().unwrap();
    let r = es.skim(&["/b".into(), "/a".into()], &pred("nTracks >= 3 and isMuon == true"), "/out", false).unwrap();
    assert_eq!(r.scanned, 10);
    let got: Vec<Oref> = es.collection("/out").unwrap().entries.iter().map(|e| e.event).collect();
    assert_eq!(got, [a[9], a[7], a[5], a[3]]);
}

#[test]
fn skim_errors() {
    let (_d, es) = store();
    fill(&es, "/in", 3);
    let p = pred("missing > 0");
    assert!(matches!(es.skim(&["/nope".into()], &p, "/out", false), Err(Error::UnknownCollection(_))));
    assert!(matches!(es.skim(&["/in".into()], &p, "/in", false), Err(Error::NameExists(_))));
    assert!(matches!(es.skim(&["/in".into()], &p, "/strict", true), Err(Error::UnknownAttribute(a)) if a == "missing"));
    assert!(es.collection("/strict").is_err());
    // lenient mode reads the absent attribute as zero
    let r = es.skim(&["/in".into()], &pred("missing == 0"), "/lenient", false).unwrap();
    assert_eq!(r.selected, 3);
}

#[test]
fn v1_skim_rewrites_into_a_union() {
    let (_d, es) = store();
    let a = desc(&[("x", AttrKind::Int)]);
    let b = desc(&[("y", AttrKind::Float), ("z", AttrKind::Bool)]);
    let mut tx = es.begin().unwrap();
    tx.create_collection("/a", Format::V1).unwrap();
    tx.create_collection("/b", Format::V2).unwrap();
    for i in 0..6 {
        tx.ingest(&event(i, &[], &a), "/a").unwrap();
        tx.ingest(&event(i, &[], &b), "/b").unwrap();
    }
    tx.commit().unwrap();

    let r = es.skim(&["/a".into(), "/b".into()], &pred("x >= 4 or y >= 2.5"), "/out", false).unwrap();
    assert_eq!(r.format, Format::V1);
    assert_eq!((r.selected, r.rewritten_tags), (2 + 1, 3));
    let out = es.collection("/out").unwrap();
    let union = es.descriptor(out.union.unwrap()).unwrap();
    assert_eq!(union.len(), 3);
    for e in &out.entries {
        let t = es.entry_tag(e).unwrap();
        assert_eq!(t.descriptor_id(), union.id());
        // the stored event keeps its own tag
        assert_ne!(es.read_tag(e.event).unwrap().descriptor_id(), union.id());
    }
    let last = es.entry_tag(&out.entries[2]).unwrap();
    assert!(last.get("y").unwrap().same_bits(&TagValue::Float(2.5)));
    assert!(last.get("x").unwrap().same_bits(&TagValue::Int(0)));
}

#[test]
fn migrate_copies_into_v2() {
    let (_d, es) = store();
    let d = int_desc("n", 4);
    let mut tx = es.begin().unwrap();
    tx.create_collection("/old", Format::V1).unwrap();
    tx.create_collection("/empty", Format::V1).unwrap();
    let originals: Vec<_> = (0..50).map(|i| event(i, &[("aod", "TrkList"), ("esd", "EsdList")], &d)).collect();
    let refs: Vec<_> = originals.iter().map(|e| tx.ingest(e, "/old").unwrap()).collect();
    tx.commit().unwrap();
    let before = es.accounting();

    let m = es.migrate("/old", "/new").unwrap();
    assert_eq!(m.events, 50);
    let new = es.collection("/new").unwrap();
    assert_eq!(new.format, Format::V2);
    assert_eq!(new.owned_count(), 50);
    for ((orig, old), e) in originals.iter().zip(&refs).zip(&new.entries) {
        same_event(orig, &es.read_event(e.event).unwrap()).unwrap();
        same_event(orig, &es.read_event(*old).unwrap()).unwrap();
        assert!(es.nav_footprint(e.event).unwrap().total() < es.nav_footprint(*old).unwrap().total());
    }
    // nothing of the source was rewritten
    assert_eq!(es.collection("/old").unwrap().entries.iter().map(|e| e.event).collect::<Vec<_>>(), refs);
    assert!(es.accounting().objects(evstore::RecordType::V1Event) == before.objects(evstore::RecordType::V1Event));

    assert_eq!(es.migrate("/empty", "/empty2").unwrap().events, 0);
    assert!(es.collection("/empty2").unwrap().is_empty());
}

#[test]
fn ownership_is_unique_across_the_store() {
    let (dir, es) = store();
    fill(&es, "/a", 5);
    fill(&es, "/b", 5);
    es.skim(&["/a".into(), "/b".into()], &pred("nTracks < 3"), "/s", false).unwrap();
    let mut owners = std::collections::HashMap::new();
    for n in es.collection_names() {
        for e in es.collection(&n).unwrap().entries.iter().filter(|e| e.owned) {
            *owners.entry(e.event).or_insert(0) += 1;
        }
    }
    assert_eq!(owners.len(), 10);
    assert!(owners.values().all(|&n| n == 1));
    drop(es);
    assert!(evstore::bench::verify_store(dir.path()).unwrap().passed());
}
