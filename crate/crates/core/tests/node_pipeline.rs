use hybrid_swap::experiments::node_cm_at;
use hybrid_swap::gaussian::{log_negativity, Bipartition, Tier};
use hybrid_swap::linalg::eigenvalues;
use hybrid_swap::node::{lyapunov_cm, LinearModel, NodeParams};
use hybrid_swap::random::random_physical_cm;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integrates dV/dt = AV + VAᵀ + D with classical RK4 until V stops moving.
fn moment_ode(a: &DMatrix<f64>, d: &DMatrix<f64>, dt: f64, t_end: f64) -> DMatrix<f64> {
    let rhs = |v: &DMatrix<f64>| a * v + v * a.transpose() + d;
    let mut v = DMatrix::zeros(a.nrows(), a.ncols());
    let steps = (t_end / dt).ceil() as usize;
    for _ in 0..steps {
        let k1 = rhs(&v);
        let k2 = rhs(&(&v + &k1 * (dt / 2.0)));
        let k3 = rhs(&(&v + &k2 * (dt / 2.0)));
        let k4 = rhs(&(&v + &k3 * dt));
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    v
}

fn scaled_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / (b[(i, i)] * b[(j, j)]).sqrt());
        }
    }
    worst
}

#[test]
fn lyapunov_matches_long_time_moment_evolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    // random 3-mode drift, shifted to be stable with margin
    let raw = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
    let shift = eigenvalues(&raw)
        .unwrap()
        .iter()
        .map(|z| z.re)
        .fold(f64::MIN, f64::max)
        + 0.3;
    let a = raw - DMatrix::identity(6, 6) * shift;
    let d = random_physical_cm(&mut rng, &["a", "b", "c"], 0.5, 1.0)
        .entries()
        .clone();
    let m = LinearModel::from_matrices(a.clone(), d.clone(), 1.0).unwrap();
    let v = lyapunov_cm(&m).unwrap();
    // slowest decay of V is 2·0.3; integrate to e^{-0.6 t} ≈ 1e-13
    let ode = moment_ode(&a, &d, 2e-3, 50.0);
    let dev = scaled_dev(&ode, v.entries());
    assert!(dev < 1e-6, "deviation {dev:e}");
}

#[test]
fn decoupled_damped_oscillator_is_thermal() {
    // A = [[0, ω], [−ω, −γ]], D = diag(0, γ(2n̄+1)) with γ ≪ ω
    let (w, g, n) = (1.0, 1e-3, 4.0);
    let mut a = DMatrix::<f64>::zeros(6, 6);
    let mut d = DMatrix::<f64>::zeros(6, 6);
    a[(0, 1)] = w;
    a[(1, 0)] = -w;
    a[(1, 1)] = -g;
    d[(1, 1)] = g * (2.0 * n + 1.0);
    for i in 2..6 {
        a[(i, i)] = -1.0;
        d[(i, i)] = 1.0;
    }
    let v = lyapunov_cm(&LinearModel::from_matrices(a, d, 1.0).unwrap()).unwrap();
    let e = v.entries();
    assert!((e[(0, 0)] - (n + 0.5)).abs() < 1e-12 * n);
    assert!((e[(1, 1)] - (n + 0.5)).abs() < 1e-12 * n);
    assert!(e[(0, 1)].abs() < 1e-9);
}

#[test]
fn paper_node_from_inputs_to_filtered_state() {
    let p = NodeParams::paper();
    let m = LinearModel::from_params(&p).unwrap();
    let steady = m.steady.as_ref().unwrap();
    assert!(steady.residual < 1e-10);
    assert_eq!(steady.multiplicity, 1);
    let intra = lyapunov_cm(&m).unwrap();
    assert!(intra.validate(Tier::Strict).unwrap().physical);

    let wm = p.mirror_frequency;
    let f = node_cm_at(&m, -wm, 10.0, 1e-6).unwrap();
    assert!(f.cm.validate(Tier::Loose).unwrap().physical);
    assert!(f.max_imaginary < 1e-8);
    assert!(log_negativity(&f.cm, &Bipartition::pair(0, 2)).unwrap() > 0.0);
    // the filter leaves the matter blocks untouched
    let dev =
        (f.cm.reduce(&[0, 1]).unwrap().entries() - intra.reduce(&[0, 1]).unwrap().entries()).amax();
    assert!(
        dev < 1e-6 * intra.entries()[(0, 0)],
        "matter block changed by {dev:e}"
    );
}
