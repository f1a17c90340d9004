//! Regenerates the bundled 100-tree canonical fixture.
//!
//! `cargo run -p threadcast-cli --example make_fixture -- <out.jsonl>`

use std::fs::File;
use std::io::BufWriter;
use threadcast::eval::{synthetic_forest, SyntheticPrior};
use threadcast::ingest::write_canonical;

const BASE_EPOCH: i64 = 1_400_000_000;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/cli/tests/fixtures/forest100.jsonl".into());
    let (forest, _) = synthetic_forest(&SyntheticPrior::default(), 100, 42)?;
    write_canonical(&forest, BASE_EPOCH, BufWriter::new(File::create(&out)?))?;
    eprintln!(
        "{} trees, {} nodes -> {out}",
        forest.len(),
        forest.node_count()
    );
    Ok(())
}
