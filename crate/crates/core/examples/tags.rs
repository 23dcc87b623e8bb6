//! Tag descriptors: interning, typed values, transient attributes and the
//! persistent encoding size.
//!
//! `cargo run --example tags`

use evstore::{AttrKind, AttributeSpec, DescriptorRegistry, Error, Tag, TagValue};

fn main() -> evstore::Result<()> {
    let registry = DescriptorRegistry::new();
    let specs = [
        AttributeSpec::new("nTracks", AttrKind::Int),
        AttributeSpec::new("isMuon", AttrKind::Bool),
        AttributeSpec::new("missingEt", AttrKind::Float),
    ];
    let d = registry.intern(&specs)?;
    for _ in 0..1000 {
        assert_eq!(registry.intern(&specs)?.id(), d.id());
    }
    println!("descriptor {:#018x}, registry holds {}", d.id(), registry.len());

    let mut tag = Tag::with_transient(d.clone(), &[AttributeSpec::transient("calibPass", AttrKind::Int)])?;
    tag.set("nTracks", TagValue::Int(4))?;
    tag.set("isMuon", TagValue::Bool(true))?;
    tag.set("missingEt", TagValue::Float(3.5))?;
    tag.set("calibPass", TagValue::Int(3))?;
    match tag.set("nTracks", TagValue::Float(1.0)) {
        Err(Error::KindMismatch { name, expected, got }) => println!("{name}: expected {expected}, got {got}"),
        other => panic!("unexpected {other:?}"),
    }

    let bytes = registry.persist_tag(&tag)?;
    println!("persisted tag: {} bytes (+16 object header)", bytes.len());
    let back = registry.decode_tag(&bytes)?;
    for (name, value) in back.values() {
        println!("  {name} = {value}");
    }
    println!("calibPass after reload: {:?}", back.get("calibPass").err());

    let wide: Vec<_> = (0..500).map(|i| AttributeSpec::new(format!("a{i}"), AttrKind::Int)).collect();
    let wide = registry.intern(&wide)?;
    println!("500 int attributes: {} bytes with header", 16 + wide.tag_encoded_len());
    Ok(())
}
