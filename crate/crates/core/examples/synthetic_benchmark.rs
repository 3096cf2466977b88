//! Full pipeline on a generated six-class image set:
//! ingest → train-svm → predict → evaluate, all through the CLI entry point.
//!
//! ```text
//! cargo run --release --example synthetic_benchmark [-- <work-dir>]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use foodbench::cli::run_from;
use foodbench::synth::{generate_dataset, SynthConfig};

fn run(args: &[&str]) {
    let mut full = vec!["foodbench", "--no-timestamp", "--seed", "7"];
    full.extend_from_slice(args);
    let code = run_from(full);
    assert_eq!(code, 0, "foodbench {args:?} exited with {code}");
}

fn main() {
    let keep = std::env::args().nth(1).map(PathBuf::from);
    let tmp = tempfile::tempdir().expect("temp dir");
    let work = keep.unwrap_or_else(|| tmp.path().to_path_buf());
    let images = work.join("images");
    let t0 = Instant::now();

    let generated = generate_dataset(&images, &SynthConfig::default()).expect("generate images");
    println!("generated {} images in {:.1?}", generated.len(), t0.elapsed());

    let s = |p: PathBuf| p.to_string_lossy().into_owned();
    let manifest = s(work.join("manifest.json"));
    let model = s(work.join("model.fbsvm"));
    let preds = s(work.join("test.predjsonl"));
    let report_dir = s(work.join("report"));

    run(&["ingest", "--root", &s(images), "--out", &manifest]);
    run(&["train-svm", "--manifest", &manifest, "--out", &model]);
    run(&["predict", "--model", &model, "--manifest", &manifest, "--split", "test", "--out", &preds]);
    run(&["evaluate", "--predictions", &preds, "--out-dir", &report_dir, "--svg"]);
    println!("total {:.1?}; outputs in {}", t0.elapsed(), work.display());
}
