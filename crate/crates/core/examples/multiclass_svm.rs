//! One-vs-one RBF SVM on synthetic images, with gamma resolved by `scale`.

use foodbench::dataset::ClassLabel;
use foodbench::features::extract_features;
use foodbench::synth::{render_image, SynthConfig};
use foodbench::svm::{save_model, train_multiclass, KernelConfig, SolverConfig};
use foodbench::RasterImage;
use ndarray::Array2;

fn features(cfg: &SynthConfig, class: usize, index: usize) -> Vec<f64> {
    let img = render_image(cfg, class, index);
    let raster = RasterImage::new(img.width(), img.height(), img.into_raw()).unwrap();
    extract_features(&raster, 16, 1.0 / 255.0)
        .values
        .into_iter()
        .map(f64::from)
        .collect()
}

fn matrix(cfg: &SynthConfig, range: std::ops::Range<usize>) -> (Array2<f64>, Vec<usize>) {
    let k = cfg.class_names.len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..k {
        for i in range.clone() {
            rows.extend(features(cfg, c, i));
            labels.push(c);
        }
    }
    let d = rows.len() / labels.len();
    (Array2::from_shape_vec((labels.len(), d), rows).unwrap(), labels)
}

fn main() {
    let cfg = SynthConfig::default();
    let classes = ClassLabel::from_names(cfg.class_names.iter().cloned());
    let (train_x, train_y) = matrix(&cfg, 0..40);
    let (test_x, test_y) = matrix(&cfg, 40..60);

    let model = train_multiclass(
        train_x.view(),
        &train_y,
        &classes,
        &KernelConfig::default(),
        &SolverConfig::default(),
    )
    .expect("train");
    println!(
        "{} machines, {} pooled support vectors, gamma {:.3e}, converged {}",
        model.binaries().len(),
        model.n_support(),
        model.gamma_resolved(),
        model.converged()
    );

    let preds = model.predict_batch(test_x.view()).expect("predict");
    let correct = preds.iter().zip(&test_y).filter(|(p, &y)| p.class == y).count();
    println!("test accuracy {}/{}", correct, test_y.len());
    let p = &preds[0];
    println!("first sample: votes {:?}, scores {:.3?}", p.votes, p.scores);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.fbsvm");
    save_model(&model, &path).expect("save");
    println!("model file {} bytes", std::fs::metadata(&path).unwrap().len());
}
