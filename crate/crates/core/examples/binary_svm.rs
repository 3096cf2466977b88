//! Two-class soft-margin SVM trained by SMO on two Gaussian clouds.

use foodbench::svm::{binary_decision, smo_train, ResolvedKernel, SolverConfig};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use gauss::normal;

mod gauss {
    use rand::Rng;

    pub fn normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200;
    let mut x = Array2::zeros((n, 2));
    let mut y = vec![0.0; n];
    for i in 0..n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        y[i] = sign;
        x[[i, 0]] = sign * 1.2 + normal(&mut rng);
        x[[i, 1]] = sign * 0.8 + normal(&mut rng);
    }

    for c in [0.1, 1.0, 10.0] {
        let solver = SolverConfig { c, ..Default::default() };
        let m = smo_train(x.view(), &y, ResolvedKernel::rbf(0.5), &solver).expect("train");
        let correct = (0..n)
            .filter(|&i| binary_decision(&m, x.row(i).as_slice().unwrap()).unwrap().signum() == y[i])
            .count();
        println!(
            "C={c:<5} support vectors {:>3}  iterations {:>5}  dual objective {:>9.4}  train accuracy {:.3}",
            m.n_support(),
            m.diagnostics.iterations,
            m.diagnostics.dual_objective,
            correct as f64 / n as f64
        );
    }
}
