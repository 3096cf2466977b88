//! Scans an image tree and prints the per-class, per-split count table.
//!
//! ```text
//! cargo run --example ingest_dataset [-- <root> [split-first|class-first]]
//! ```
//!
//! Without arguments a small synthetic tree is generated first.

use std::path::PathBuf;

use foodbench::dataset::{merge_train_validation, scan_dataset, Layout, Split};
use foodbench::synth::{generate_dataset, SynthConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = match args.next() {
        Some(r) => PathBuf::from(r),
        None => {
            let cfg = SynthConfig {
                per_class: 20,
                side: 32,
                ..Default::default()
            };
            generate_dataset(tmp.path(), &cfg).expect("generate images");
            tmp.path().to_path_buf()
        }
    };
    let layout: Layout = args.next().as_deref().unwrap_or("split-first").parse().expect("layout");

    let outcome = scan_dataset(&root, layout).expect("scan");
    for w in &outcome.warnings {
        eprintln!("skipped {}: {}", w.path.display(), w.reason);
    }
    print!("{}", outcome.manifest.summary_table());

    let merged = merge_train_validation(&outcome.manifest);
    println!(
        "\nafter merging validation into train: {} train, {} test",
        merged.counts().split_total(Split::Train),
        merged.counts().split_total(Split::Test)
    );
}
