//! Stratified k-fold cross-validation of a linear SVM on Gaussian blobs.

use foodbench::cv::{plan_folds, run_cv, select_best, TrainOutcome};
use foodbench::dataset::ClassLabel;
use foodbench::metrics::evaluate;
use foodbench::svm::{train_multiclass, KernelConfig, SolverConfig, SvmError, SvmModel};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let k = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let labels: Vec<usize> = (0..90).map(|i| i % k).collect();
    let x = Array2::from_shape_fn((labels.len(), 2), |(i, j)| {
        let center = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]][labels[i]][j];
        center + rng.random_range(-1.5..1.5)
    });
    let classes = ClassLabel::indexed(k);

    let plan = plan_folds(&labels, 5, 42).expect("plan");
    println!("fold sizes {:?}", plan.fold_sizes());

    let trainer = |idx: &[usize]| -> Result<TrainOutcome<SvmModel>, SvmError> {
        let xs = x.select(Axis(0), idx);
        let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let m = train_multiclass(xs.view(), &ys, &classes, &KernelConfig::linear(), &SolverConfig::default())?;
        Ok(TrainOutcome::new(m))
    };
    let evaluator = |m: &SvmModel, idx: &[usize]| {
        let preds = m.predict_batch(x.select(Axis(0), idx).view())?;
        let pairs: Vec<(usize, usize)> = idx.iter().zip(&preds).map(|(&i, p)| (labels[i], p.class)).collect();
        evaluate(&pairs, &classes).map_err(|e| SvmError::InvalidConfig(e.to_string()))
    };

    let results = run_cv(&plan, trainer, evaluator).expect("cv");
    for r in &results {
        println!(
            "fold {}: train accuracy {:.3}, validation accuracy {:.3}",
            r.fold, r.train_metrics.accuracy, r.val_metrics.accuracy
        );
    }
    let best = select_best(&results).unwrap();
    println!("best fold {}", best.fold);
}
