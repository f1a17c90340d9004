use std::io::Cursor;
use threadcast::eval::{synthetic_forest, SyntheticPrior};
use threadcast::ingest::{
    from_bytes, ingest, load, persist, to_bytes, write_canonical, IngestOptions, InputFormat,
};

const REDDIT: &str = r#"{"id":"p1","created_utc":1400000000,"title":"x"}
{"id":"a","link_id":"t3_p1","parent_id":"t3_p1","created_utc":1400000060}
{"id":"b","link_id":"t3_p1","parent_id":"t1_a","created_utc":"1400000120"}
{"id":"c","link_id":"t3_p1","parent_id":"t3_p1","created_utc":1400003600}
{"id":"p2","created_utc":1400100000}
{"id":"d","link_id":"t3_p2","parent_id":"t3_p2","created_utc":1400100030}
{"id":"e","link_id":"t3_p2","parent_id":"t1_d","created_utc":1400100040}
{"id":"f","link_id":"t3_p2","parent_id":"t1_e","created_utc":1400107200}
"#;

#[test]
fn reddit_dump_with_two_threads() {
    let got = ingest(
        Cursor::new(REDDIT),
        InputFormat::Reddit,
        IngestOptions::default(),
        "fixture",
    )
    .unwrap();
    assert_eq!(got.records, 8);
    assert_eq!(got.skips.total(), 0);
    let f = &got.forest;
    assert_eq!(f.len(), 2);
    assert_eq!(
        (f.threads[0].id.as_str(), f.threads[0].tree.len()),
        ("p1", 4)
    );
    assert_eq!(
        (f.threads[1].id.as_str(), f.threads[1].tree.len()),
        ("p2", 4)
    );
    let t = &f.threads[0].tree;
    // breadth-first: both replies to the post come before the nested one
    assert_eq!(t.times(), &[0.0, 1.0 / 60.0, 1.0, 2.0 / 60.0]);
    assert_eq!(t.root_degree(), 2);
    assert_eq!(f.threads[1].tree.depth(), 3);
}

const DIRTY: &str = r#"{"thread":"t1","id":"r","parent":null,"ts":100}
{"thread":"t1","id":"a","parent":"r","ts":160}
{"thread":"t1","id":"b","parent":"x","ts":170}
not json at all
{"thread":"t1","id":"c","parent":"a","ts":200}
{"thread":"t2","id":"r2","parent":null,"ts":500}
{"thread":"t2","id":"d","parent":"r2","ts":400}
{"thread":"t3","id":"q","parent":"nobody","ts":10}
{"thread":"t4","id":"r4","parent":null,"ts":0}
{"thread":"t4","id":"r4","parent":null,"ts":5}
{"thread":"t5","id":"r5","ts":0}

{"thread":"t5","id":"e","parent":"r5","ts":"soon"}
{"thread":"t6","id":"r6","parent":null,"ts":0}
{"thread":"t6","id":"r6b","parent":null,"ts":9}
{"thread":"t6","id":"g","parent":"r6b","ts":12}
"#;

#[test]
fn records_are_conserved_on_dirty_input() {
    let got = ingest(
        Cursor::new(DIRTY),
        InputFormat::Canonical,
        IngestOptions::default(),
        "dirty",
    )
    .unwrap();
    assert_eq!(got.records, 15);
    assert_eq!(
        got.kept() + got.skips.total(),
        got.records,
        "{:?}",
        got.skips
    );
    assert!(got.skips.orphan >= 1);
    assert!(got.skips.malformed >= 2);
    let strict = ingest(
        Cursor::new(DIRTY),
        InputFormat::Canonical,
        IngestOptions { strict: true },
        "dirty",
    );
    assert!(strict.is_err());
}

#[test]
fn record_order_does_not_matter() {
    let mut lines: Vec<&str> = REDDIT.lines().collect();
    let forward = ingest(
        Cursor::new(lines.join("\n")),
        InputFormat::Reddit,
        IngestOptions::default(),
        "m",
    )
    .unwrap();
    lines.reverse();
    let backward = ingest(
        Cursor::new(lines.join("\n")),
        InputFormat::Reddit,
        IngestOptions::default(),
        "m",
    )
    .unwrap();
    assert_eq!(forward.forest, backward.forest);
}

#[test]
fn large_synthetic_forest_round_trips_bit_exactly() {
    let (forest, _) = synthetic_forest(
        &SyntheticPrior {
            a: (1.0, 30.0),
            ..Default::default()
        },
        10_000,
        3,
    )
    .unwrap();
    let bytes = to_bytes(&forest);
    let back = from_bytes(&bytes).unwrap();
    assert_eq!(back, forest);
    assert_eq!(to_bytes(&back), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("forest.bin");
    persist(&forest, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(load(&path).unwrap(), forest);
}

#[test]
fn canonical_export_reingests_to_the_same_shapes() {
    let (forest, _) = synthetic_forest(&SyntheticPrior::default(), 50, 9).unwrap();
    let mut buf = Vec::new();
    write_canonical(&forest, 1_300_000_000, &mut buf).unwrap();
    let got = ingest(
        Cursor::new(buf),
        InputFormat::Canonical,
        IngestOptions { strict: true },
        "m",
    )
    .unwrap();
    assert_eq!(got.kept(), forest.node_count());
    // threads come back ordered by id string
    let by_id: std::collections::HashMap<_, _> = got
        .forest
        .threads
        .iter()
        .map(|t| (t.id.clone(), t))
        .collect();
    for a in &forest.threads {
        let b = by_id[&a.id];
        assert_eq!(a.tree.len(), b.tree.len());
        assert_eq!(a.tree.depth_profile(), b.tree.depth_profile());
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        for (x, y) in sorted(a.tree.times()).iter().zip(sorted(b.tree.times())) {
            // whole seconds on the wire
            assert!((x - y).abs() <= 0.5 / 3600.0 + 1e-12);
        }
    }
}
