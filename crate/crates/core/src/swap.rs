//! Entanglement swapping: a Bell-like measurement on the two output modes
//! conditions the matter modes of both nodes.
//!
//! Two-node ordering is `(mirror_A, bec_A, mirror_B, bec_B, output_A, output_B)`.
//! The measurement mixes the outputs on a beam splitter of transmissivity `T`
//! and homodynes `x` on one port and `p` on the other.

use nalgebra::{DMatrix, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{numeric, structural, Error, Result};
use crate::gaussian::{log_negativity, Bipartition, CovarianceMatrix};
use crate::node::{BEC, MIRROR};
use crate::spectral::OUTPUT;

pub const DEFAULT_TRANSMISSIVITY: f64 = 0.5;

/// Relative size of `det Γ` below which the measurement counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-14;

pub const MATTER_LABELS: [&str; 4] = ["mirror_A", "bec_A", "mirror_B", "bec_B"];

/// The two-node CM split into matter (`a`), matter–optics (`c1`, `c2`),
/// optics (`b1`, `b2`) and cross-optics (`dx`) blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapBlocks {
    pub a: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub b1: Matrix2<f64>,
    pub b2: Matrix2<f64>,
    /// `cov(output_A, output_B)`; rows are node A's quadratures.
    pub dx: Matrix2<f64>,
    pub transmissivity: f64,
}

impl SwapBlocks {
    /// Splits a 12×12 CM given in two-node order.
    pub fn from_full(v: &DMatrix<f64>, transmissivity: f64) -> Result<Self> {
        if v.shape() != (12, 12) {
            return Err(structural(format!(
                "two-node CM must be 12×12, got {:?}",
                v.shape()
            )));
        }
        let b = Self {
            a: v.view((0, 0), (8, 8)).into_owned(),
            c1: v.view((0, 8), (8, 2)).into_owned(),
            c2: v.view((0, 10), (8, 2)).into_owned(),
            b1: v.fixed_view::<2, 2>(8, 8).into_owned(),
            b2: v.fixed_view::<2, 2>(10, 10).into_owned(),
            dx: v.fixed_view::<2, 2>(8, 10).into_owned(),
            transmissivity: DEFAULT_TRANSMISSIVITY,
        };
        b.with_transmissivity(transmissivity)
    }

    pub fn with_transmissivity(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(structural(format!(
                "transmissivity must lie in (0, 1), got {t}"
            )));
        }
        self.transmissivity = t;
        Ok(self)
    }

    /// Reassembles the 12×12 CM.
    pub fn to_full(&self) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(12, 12);
        v.view_mut((0, 0), (8, 8)).copy_from(&self.a);
        v.view_mut((0, 8), (8, 2)).copy_from(&self.c1);
        v.view_mut((0, 10), (8, 2)).copy_from(&self.c2);
        v.view_mut((8, 0), (2, 8)).copy_from(&self.c1.transpose());
        v.view_mut((10, 0), (2, 8)).copy_from(&self.c2.transpose());
        v.fixed_view_mut::<2, 2>(8, 8).copy_from(&self.b1);
        v.fixed_view_mut::<2, 2>(10, 10).copy_from(&self.b2);
        v.fixed_view_mut::<2, 2>(8, 10).copy_from(&self.dx);
        v.fixed_view_mut::<2, 2>(10, 8)
            .copy_from(&self.dx.transpose());
        v
    }

    /// The 12×12 CM as a labeled state.
    pub fn to_cm(&self) -> Result<CovarianceMatrix> {
        CovarianceMatrix::new(
            self.to_full(),
            [
                "mirror_A", "bec_A", "mirror_B", "bec_B", "output_A", "output_B",
            ],
        )
    }
}

/// Combines two independent filtered node CMs (labels mirror, bec, output).
pub fn assemble_two_node_blocks(
    va: &CovarianceMatrix,
    vb: &CovarianceMatrix,
) -> Result<SwapBlocks> {
    for v in [va, vb] {
        if v.labels() != [MIRROR, BEC, OUTPUT] {
            return Err(structural(format!(
                "expected a node CM labeled (mirror, bec, output), got {:?}",
                v.labels()
            )));
        }
    }
    // direct sum order (mA, bA, oA, mB, bB, oB) → (mA, bA, mB, bB, oA, oB)
    let order = [0usize, 1, 3, 4, 2, 5];
    let sum = va
        .relabeled(["mirror_A", "bec_A", "output_A"])?
        .direct_sum(&vb.relabeled(["mirror_B", "bec_B", "output_B"])?)?;
    let e = sum.entries();
    let full = DMatrix::from_fn(12, 12, |i, j| {
        e[(2 * order[i / 2] + i % 2, 2 * order[j / 2] + j % 2)]
    });
    SwapBlocks::from_full(&full, DEFAULT_TRANSMISSIVITY)
}

/// The measured-quadrature combinations `γ₁, γ₂, γ₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gammas {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl Gammas {
    pub fn of(b: &SwapBlocks) -> Self {
        let t = b.transmissivity;
        let s = (t * (1.0 - t)).sqrt();
        let (a1, a2, a3) = (b.b1[(0, 0)], b.b1[(1, 1)], b.b1[(0, 1)]);
        let (a1p, a2p, a3p) = (b.b2[(0, 0)], b.b2[(1, 1)], b.b2[(0, 1)]);
        let (b1, b2) = (b.dx[(0, 0)], b.dx[(1, 1)]);
        let (b3, b4) = (b.dx[(0, 1)], b.dx[(1, 0)]);
        Self {
            g1: (1.0 - t) * a1 + t * a1p - 2.0 * s * b1,
            g2: t * a2 + (1.0 - t) * a2p + 2.0 * s * b2,
            g3: s * (a3p - a3) - (1.0 - t) * b3 + t * b4,
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.g1, self.g3, self.g3, self.g2)
    }

    pub fn det(&self) -> f64 {
        self.g1 * self.g2 - self.g3 * self.g3
    }
}

/// Outcome of the Bell measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapResult {
    /// Conditioned CM of `(mirror_A, bec_A, mirror_B, bec_B)`.
    pub conditioned: CovarianceMatrix,
    pub gamma: Matrix2<f64>,
    /// `E_N` for every pair of matter modes, in label order.
    pub pair_negativities: Vec<(String, String, f64)>,
}

impl SwapResult {
    pub fn negativity(&self, a: &str, b: &str) -> Option<f64> {
        self.pair_negativities
            .iter()
            .find(|(x, y, _)| (x == a && y == b) || (x == b && y == a))
            .map(|(_, _, e)| *e)
    }
}

/// Tolerance on the asymmetry of the conditioned CM before symmetrization.
pub const ASYMMETRY_TOL: f64 = 1e-10;

/// Conditioned matter CM, `𝓥 = A − Σ_ij C_i K_ij C_jᵀ / det Γ`.
pub fn bell_condition(b: &SwapBlocks) -> Result<SwapResult> {
    let t = b.transmissivity;
    let s = (t * (1.0 - t)).sqrt();
    let g = Gammas::of(b);
    let det = g.det();
    let scale = (g.g1 * g.g2).abs() + g.g3 * g.g3;
    if !(det > DEGENERACY_TOL * scale) {
        return Err(Error::MeasurementDegenerate { det, scale });
    }
    let (g1, g2, g3) = (g.g1, g.g2, g.g3);
    let k11 = Matrix2::new((1.0 - t) * g2, s * g3, s * g3, t * g1);
    let k22 = Matrix2::new(t * g2, -s * g3, -s * g3, (1.0 - t) * g1);
    let k12 = Matrix2::new(-s * g2, (1.0 - t) * g3, -t * g3, s * g1);
    let dyn2 = |m: &Matrix2<f64>| DMatrix::from_column_slice(2, 2, m.as_slice());
    let (c1, c2) = (&b.c1, &b.c2);
    let term = c1 * dyn2(&k11) * c1.transpose()
        + c1 * dyn2(&k12) * c2.transpose()
        + c2 * dyn2(&k12.transpose()) * c1.transpose()
        + c2 * dyn2(&k22) * c2.transpose();
    let v = &b.a - term / det;
    finish(v, g.matrix())
}

fn finish(v: DMatrix<f64>, gamma: Matrix2<f64>) -> Result<SwapResult> {
    let asym = (&v - v.transpose()).amax() / v.amax().max(f64::MIN_POSITIVE);
    if !(asym < ASYMMETRY_TOL) {
        return Err(numeric(format!("conditioned CM asymmetric: {asym:e}")));
    }
    let conditioned = CovarianceMatrix::new((&v + v.transpose()) * 0.5, MATTER_LABELS)?;
    let mut pair_negativities = Vec::new();
    for (i, a) in MATTER_LABELS.iter().enumerate() {
        for (j, b) in MATTER_LABELS.iter().enumerate().skip(i + 1) {
            let e = log_negativity(&conditioned, &Bipartition::pair(i, j))?;
            pair_negativities.push((a.to_string(), b.to_string(), e));
        }
    }
    Ok(SwapResult {
        conditioned,
        gamma,
        pair_negativities,
    })
}

/// Beam splitter on the two output modes followed by the measured-quadrature
/// projection: rows give `(x_1', p_2')` as combinations of the 12 quadratures.
fn measurement_map(t: f64) -> DMatrix<f64> {
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
    let mut bs = DMatrix::<f64>::identity(12, 12);
    // output_A at 8..10, output_B at 10..12; same rotation on x and on p
    for q in 0..2 {
        let (a, c) = (8 + q, 10 + q);
        bs[(a, a)] = sr;
        bs[(a, c)] = -st;
        bs[(c, a)] = st;
        bs[(c, c)] = sr;
    }
    bs
}

/// Independent route: apply the beam-splitter symplectic to the full state,
/// then condition on `x` of port 1 and `p` of port 2 with the pseudo-inverse
/// of the projected optical covariance.
pub fn general_dyne_oracle(b: &SwapBlocks) -> Result<CovarianceMatrix> {
    let bs = measurement_map(b.transmissivity);
    let v = &bs * b.to_full() * bs.transpose();
    let sigma = v.view((8, 8), (4, 4)).into_owned();
    let cross = v.view((0, 8), (8, 4)).into_owned();
    let mut proj = DMatrix::<f64>::zeros(4, 4);
    proj[(0, 0)] = 1.0;
    proj[(3, 3)] = 1.0;
    let measured = &proj * &sigma * &proj;
    let det = measured[(0, 0)] * measured[(3, 3)] - measured[(0, 3)] * measured[(3, 0)];
    let scale = (measured[(0, 0)] * measured[(3, 3)]).abs() + measured[(0, 3)].powi(2);
    if !(det > DEGENERACY_TOL * scale) {
        return Err(Error::MeasurementDegenerate { det, scale });
    }
    let pinv = measured
        .clone()
        .pseudo_inverse(1e-14 * measured.amax())
        .map_err(|e| numeric(format!("pseudo-inverse failed: {e}")))?;
    let out = v.view((0, 0), (8, 8)).into_owned() - &cross * pinv * cross.transpose();
    CovarianceMatrix::new((&out + out.transpose()) * 0.5, MATTER_LABELS)
}

/// Sampled estimate of the conditioned CM with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub estimate: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub samples: usize,
}

/// Monte-Carlo route: draw quadrature vectors from the 12-mode Gaussian,
/// pass them through the beam splitter, regress the matter quadratures on the
/// two recorded outcomes and take the covariance of the residuals.
///
/// Deterministic for a given `(samples, seed)`.
pub fn mc_homodyne_oracle(b: &SwapBlocks, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples < 2 {
        return Err(structural("at least two samples are required"));
    }
    let full = b.to_full();
    let chol = nalgebra::Cholesky::new(full.clone())
        .ok_or_else(|| numeric("two-node CM is not positive definite"))?;
    let l = chol.l();
    let bs = measurement_map(b.transmissivity);
    let map = &bs * &l;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // u: 8 matter quadratures, m: (x_1', p_2')
    let mut us = Vec::with_capacity(samples);
    let mut ms = Vec::with_capacity(samples);
    let mut z = nalgebra::DVector::<f64>::zeros(12);
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let y = &map * &z;
        let mut u = [0.0; 8];
        u.copy_from_slice(&y.as_slice()[..8]);
        us.push(u);
        ms.push([y[8], y[11]]);
    }
    let n = samples as f64;
    // zero-mean sample moments
    let mut smm = Matrix2::<f64>::zeros();
    let mut sum = DMatrix::<f64>::zeros(8, 2);
    for (u, m) in us.iter().zip(&ms) {
        for r in 0..2 {
            for c in 0..2 {
                smm[(r, c)] += m[r] * m[c] / n;
            }
            for i in 0..8 {
                sum[(i, r)] += u[i] * m[r] / n;
            }
        }
    }
    let inv = smm.try_inverse().ok_or(Error::MeasurementDegenerate {
        det: smm.determinant(),
        scale: smm.amax(),
    })?;
    let beta = &sum * DMatrix::from_column_slice(2, 2, inv.as_slice());

    let mut mean = DMatrix::<f64>::zeros(8, 8);
    let mut sq = DMatrix::<f64>::zeros(8, 8);
    let mut r = [0.0; 8];
    for (u, m) in us.iter().zip(&ms) {
        for i in 0..8 {
            r[i] = u[i] - beta[(i, 0)] * m[0] - beta[(i, 1)] * m[1];
        }
        for j in 0..8 {
            for i in 0..8 {
                let p = r[i] * r[j];
                mean[(i, j)] += p;
                sq[(i, j)] += p * p;
            }
        }
    }
    mean /= n;
    sq /= n;
    let stderr = DMatrix::from_fn(8, 8, |i, j| {
        ((sq[(i, j)] - mean[(i, j)].powi(2)).max(0.0) / (n - 1.0)).sqrt()
    });
    Ok(McEstimate {
        estimate: mean,
        stderr,
        samples,
    })
}

/// `E_N` of a pair of conditioned matter modes, by label.
pub fn remote_log_negativity(r: &SwapResult, pair: (&str, &str)) -> Result<f64> {
    if pair.0 == pair.1 {
        return Err(structural(format!(
            "pair must name two distinct modes, got {}",
            pair.0
        )));
    }
    let i = r.conditioned.index_of(pair.0)?;
    let j = r.conditioned.index_of(pair.1)?;
    log_negativity(&r.conditioned, &Bipartition::pair(i, j))
}
