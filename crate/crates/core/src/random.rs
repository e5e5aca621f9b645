//! Random symplectic maps and random physical Gaussian states.

use nalgebra::DMatrix;
use rand::Rng;

use crate::gaussian::{CovarianceMatrix, VACUUM_VARIANCE};

/// Single-mode symplectic: rotation · squeeze · rotation.
pub fn random_single_mode_symplectic<R: Rng + ?Sized>(
    rng: &mut R,
    max_squeeze: f64,
) -> DMatrix<f64> {
    let rot = |t: f64| DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
    let r = rng.random_range(-max_squeeze..=max_squeeze);
    let sq = DMatrix::from_row_slice(2, 2, &[r.exp(), 0.0, 0.0, (-r).exp()]);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let b = rng.random_range(0.0..std::f64::consts::TAU);
    rot(a) * sq * rot(b)
}

/// Direct sum of 2×2 blocks into a `2n × 2n` matrix.
pub fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}

/// Beam splitter of angle `theta` acting on modes `i` and `j` of `n`.
pub fn beam_splitter(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    let (c, sn) = (theta.cos(), theta.sin());
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = c;
        s[(a, b)] = -sn;
        s[(b, a)] = sn;
        s[(b, b)] = c;
    }
    s
}

/// A random `n`-mode symplectic matrix built from layers of local symplectics
/// and beam splitters.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, max_squeeze: f64) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for _ in 0..3 {
        let local: Vec<_> = (0..n)
            .map(|_| random_single_mode_symplectic(rng, max_squeeze))
            .collect();
        s = block_diagonal(&local) * s;
        for i in 0..n {
            for j in (i + 1)..n {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                s = beam_splitter(n, i, j, theta) * s;
            }
        }
    }
    s
}

/// `S · ⊕ diag(ν_k, ν_k) · Sᵀ` with ν_k drawn from `[1/2, 1/2 + max_thermal]`.
pub fn random_physical_cm<R: Rng + ?Sized>(
    rng: &mut R,
    labels: &[&str],
    max_squeeze: f64,
    max_thermal: f64,
) -> CovarianceMatrix {
    let n = labels.len();
    let occ: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0.0..=max_thermal))
        .collect();
    let thermal =
        CovarianceMatrix::thermal(&occ, labels.iter().copied()).expect("labels are distinct");
    let s = random_symplectic(rng, n, max_squeeze);
    let v = thermal.transformed(&s).expect("sizes agree").symmetrized();
    debug_assert!(v.symplectic_spectrum().unwrap().last().unwrap() >= &(VACUUM_VARIANCE - 1e-9));
    v
}
