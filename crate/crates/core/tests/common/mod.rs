#![allow(dead_code)]

use foodbench::interchange::{PredictionFile, PredictionHeader, PredictionRecord};
use indexmap::IndexMap;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// Dense dual QP `min ½αᵀQα − 1ᵀα` over `0 ≤ α ≤ C`, `yᵀα = 0`, solved by
/// accelerated projected gradient with adaptive restart.
pub mod qp_oracle {
    pub fn gram_q(k: &[Vec<f64>], y: &[f64]) -> Vec<Vec<f64>> {
        let n = y.len();
        (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect())
            .collect()
    }

    fn matvec(q: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        q.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn largest_eigenvalue(q: &[Vec<f64>]) -> f64 {
        let n = q.len();
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = matvec(q, &v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        lambda
    }

    /// Euclidean projection onto the box ∩ hyperplane, by bisection on the
    /// hyperplane multiplier.
    pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
        let clip = |lam: f64| -> Vec<f64> {
            v.iter()
                .zip(y)
                .map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, c))
                .collect()
        };
        let h = |lam: f64| -> f64 { clip(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
        let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
        let (mut lo, mut hi) = (-span, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clip(0.5 * (lo + hi))
    }

    pub fn objective(q: &[Vec<f64>], alpha: &[f64]) -> f64 {
        let qa = matvec(q, alpha);
        alpha.iter().sum::<f64>() - 0.5 * alpha.iter().zip(&qa).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Returns the multipliers maximizing `W(α) = 1ᵀα − ½αᵀQα`.
    pub fn solve(q: &[Vec<f64>], y: &[f64], c: f64) -> Vec<f64> {
        let n = y.len();
        let l = largest_eigenvalue(q) * 1.01 + 1e-12;
        let step = 1.0 / l;
        let mut x = vec![0.0; n];
        let mut z = x.clone();
        let mut t = 1.0f64;
        let mut quiet = 0;
        for _ in 0..400_000 {
            let g: Vec<f64> = matvec(q, &z).into_iter().map(|v| v - 1.0).collect();
            let moved: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let x_new = project(&moved, y, c);
            let restart = z
                .iter()
                .zip(&x_new)
                .zip(&x)
                .map(|((zi, xn), xo)| (zi - xn) * (xn - xo))
                .sum::<f64>()
                > 0.0;
            let delta = x_new
                .iter()
                .zip(&x)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if restart {
                t = 1.0;
                z = x_new.clone();
            } else {
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_new;
                z = x_new
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| a + beta * (a - b))
                    .collect();
                t = t_new;
            }
            x = x_new;
            quiet = if delta < 1e-15 * c.max(1.0) { quiet + 1 } else { 0 };
            if quiet >= 20 {
                break;
            }
        }
        x
    }

    /// Bias from the decision-function form of the KKT conditions: the
    /// mean of `yᵢ − sᵢ` over free multipliers, else the midpoint of the
    /// feasible interval.
    pub fn bias(k: &[Vec<f64>], y: &[f64], alpha: &[f64], c: f64) -> f64 {
        let n = y.len();
        let s: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| alpha[j] * y[j] * k[i][j]).sum())
            .collect();
        let eps = 1e-7 * c;
        let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > eps && alpha[i] < c - eps).collect();
        if !free.is_empty() {
            return free.iter().map(|&i| y[i] - s[i]).sum::<f64>() / free.len() as f64;
        }
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..n {
            let at_upper = alpha[i] >= c - eps;
            let bound = y[i] - s[i];
            // y·(s + b) ≥ 1 at zero, ≤ 1 at C
            if (y[i] > 0.0) != at_upper {
                lower = lower.max(bound);
            } else {
                upper = upper.min(bound);
            }
        }
        0.5 * (lower + upper)
    }

    pub fn decision(kx: &[f64], y: &[f64], alpha: &[f64], b: f64) -> f64 {
        kx.iter()
            .zip(y)
            .zip(alpha)
            .map(|((k, yi), a)| a * yi * k)
            .sum::<f64>()
            + b
    }
}

pub mod reference {
    use super::*;

    pub const CLASSES: [&str; 6] = ["ekwang", "eru", "jollof-ghana", "ndole", "palm-nut-soup", "waakye"];
    pub const SUPPORT: [u64; 6] = [31, 31, 52, 31, 59, 47];

    /// Per-class precision, recall, F1 in hundredths.
    pub const SVM: [[u64; 3]; 6] = [
        [89, 77, 83],
        [85, 90, 88],
        [82, 71, 76],
        [84, 84, 84],
        [68, 80, 73],
        [89, 87, 88],
    ];
    pub const RESNET: [[u64; 3]; 6] = [
        [86, 61, 72],
        [83, 77, 80],
        [83, 73, 78],
        [100, 84, 91],
        [75, 90, 82],
        [77, 94, 85],
    ];
    /// Macro and weighted rows, precision/recall/F1 in hundredths.
    pub const SVM_MACRO: [u64; 3] = [83, 82, 82];
    pub const SVM_WEIGHTED: [u64; 3] = [82, 81, 81];
    pub const RESNET_MACRO: [u64; 3] = [84, 80, 81];
    pub const RESNET_WEIGHTED: [u64; 3] = [82, 81, 81];

    /// Confusion matrices (rows actual) whose per-class metrics round to
    /// the table values; the SVM one has 203 correct, ResNet 204.
    pub const SVM_CM: [[u64; 6]; 6] = [
        [24, 0, 0, 0, 7, 0],
        [3, 28, 0, 0, 0, 0],
        [0, 0, 37, 0, 15, 0],
        [0, 0, 0, 26, 0, 5],
        [0, 0, 8, 4, 47, 0],
        [0, 5, 0, 1, 0, 41],
    ];
    pub const RESNET_CM: [[u64; 6]; 6] = [
        [19, 0, 0, 0, 0, 12],
        [0, 24, 7, 0, 0, 0],
        [0, 0, 38, 0, 14, 0],
        [0, 0, 1, 26, 4, 0],
        [0, 5, 0, 0, 53, 1],
        [3, 0, 0, 0, 0, 44],
    ];

    pub fn sample_id(class: usize, j: usize) -> String {
        format!("test/{}/{:03}", CLASSES[class], j)
    }

    /// One record per confusion-matrix count. With `scores`, each record
    /// carries a probability-like vector peaked at the prediction.
    pub fn prediction_file(producer: &str, cm: &[[u64; 6]; 6], scores: bool) -> PredictionFile {
        let header = PredictionHeader::new(producer, CLASSES.iter().map(|s| s.to_string()).collect());
        let mut records = Vec::new();
        for (a, row) in cm.iter().enumerate() {
            let mut j = 0;
            for (p, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    let mut r = PredictionRecord::new(sample_id(a, j), CLASSES[a], CLASSES[p]);
                    if scores {
                        r.scores = Some(
                            CLASSES
                                .iter()
                                .enumerate()
                                .map(|(c, n)| (n.to_string(), if c == p { 0.9 } else { 0.02 }))
                                .collect::<IndexMap<_, _>>(),
                        );
                    }
                    records.push(r);
                    j += 1;
                }
            }
        }
        PredictionFile::new(header, records).expect("fixture is valid")
    }

    pub fn svm_file() -> PredictionFile {
        prediction_file("svm-core", &SVM_CM, false)
    }

    pub fn resnet_file() -> PredictionFile {
        prediction_file("resnet50", &RESNET_CM, true)
    }
}

/// Gaussian blobs around well-separated centers.
pub fn blobs(k: usize, per_class: usize, d: usize, spread: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            (0..d)
                .map(|j| {
                    let angle = std::f64::consts::TAU * c as f64 / k as f64 + j as f64;
                    4.0 * angle.cos()
                })
                .collect()
        })
        .collect();
    let mut x = Array2::zeros((k * per_class, d));
    let mut labels = Vec::with_capacity(k * per_class);
    for c in 0..k {
        for i in 0..per_class {
            let row = c * per_class + i;
            for j in 0..d {
                let noise: f64 = rng.random_range(-1.0..1.0);
                x[[row, j]] = centers[c][j] + spread * noise;
            }
            labels.push(c);
        }
    }
    (x, labels)
}

/// Writes a small split-first PNG tree: `per_split[s]` images per class
/// in split `s` (train, validation, test), each a flat color per class.
pub fn write_color_tree(root: &std::path::Path, classes: &[&str], per_split: [usize; 3]) {
    let splits = ["train", "validation", "test"];
    for (ci, class) in classes.iter().enumerate() {
        for (si, split) in splits.iter().enumerate() {
            let dir = root.join(split).join(class);
            std::fs::create_dir_all(&dir).unwrap();
            for i in 0..per_split[si] {
                let shade = (40 * ci as u32 + 3 * i as u32).min(255) as u8;
                let img = image::RgbImage::from_fn(8, 8, |x, y| {
                    image::Rgb([shade, 255 - shade, ((x + y) * 8) as u8])
                });
                img.save(dir.join(format!("{class}_{i}.png"))).unwrap();
            }
        }
    }
}
