//! Sweeps behind the figure-level experiments.
//!
//! Every sweep point is independent. Points run on the rayon pool and are
//! collected in grid order; a failing point is kept as an error so that the
//! rest of a sweep survives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{numeric, structural, Error, Result};
use crate::gaussian::{log_negativity, Bipartition, Tier};
use crate::node::{check_stability, LinearModel};
use crate::spectral::{filtered_node_cm, FilterSpec, QuadratureSpec, SpectralCm};
use crate::swap::{
    assemble_two_node_blocks, bell_condition, remote_log_negativity, SwapResult, MATTER_LABELS,
};

/// Default grids. Frequencies are in units of `ω_m`.
pub mod defaults {
    pub const OMEGA_MIN: f64 = -1.4;
    pub const OMEGA_MAX: f64 = -0.2;
    pub const OMEGA_POINTS: usize = 40;
    pub const SPECTRUM_MIN: f64 = -1.5;
    pub const SPECTRUM_MAX: f64 = 1.5;
    pub const SPECTRUM_POINTS: usize = 61;
    pub const EPSILON: f64 = 10.0;
    pub const EPSILON_MIN: f64 = 1.0;
    pub const EPSILON_MAX: f64 = 50.0;
    pub const EPSILON_POINTS: usize = 30;
    /// `ω_sw / ω_R` values compared by the collision experiment.
    pub const COLLISION_RATIOS: [f64; 2] = [0.0, 0.5];
}

/// Mirror frequency of a model built from physical parameters.
pub fn mirror_frequency(m: &LinearModel) -> Result<f64> {
    m.derived
        .as_ref()
        .map(|d| d.mirror_frequency)
        .ok_or_else(|| structural("model carries no physical parameters"))
}

pub fn bogoliubov_frequency(m: &LinearModel) -> Result<f64> {
    m.derived
        .as_ref()
        .map(|d| d.bogoliubov_frequency)
        .ok_or_else(|| structural("model carries no physical parameters"))
}

/// Filtered node CM at filter center `omega` and `ε = ω_m τ`.
pub fn node_cm_at(m: &LinearModel, omega: f64, epsilon: f64, tolerance: f64) -> Result<SpectralCm> {
    let wm = mirror_frequency(m)?;
    let f = FilterSpec::from_epsilon(omega, epsilon, wm)?;
    let q = QuadratureSpec::for_node(m, Some(&f), tolerance)?;
    filtered_node_cm(m, &f, &q)
}

/// Filtered node CMs over a list of filter centers, in order.
pub fn node_cm_table(
    m: &LinearModel,
    omegas: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> Vec<Result<SpectralCm>> {
    omegas
        .par_iter()
        .map(|&w| node_cm_at(m, w, epsilon, tolerance))
        .collect()
}

/// Largest quadrature error estimate relative to `√(V_ii V_jj)`.
pub fn relative_error(s: &SpectralCm) -> f64 {
    let v = s.cm.entries();
    let mut worst = 0.0f64;
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            worst = worst.max(s.error[(i, j)] / (v[(i, i)] * v[(j, j)]).sqrt());
        }
    }
    worst
}

/// Short machine-readable reason for a failed sweep point.
pub fn flag_of(e: &Error) -> &'static str {
    match e {
        Error::Quadrature { .. } => "quadrature",
        Error::Unstable { .. } => "unstable",
        Error::MeasurementDegenerate { .. } => "degenerate",
        Error::NonConvergence { .. } => "steady_state",
        Error::Configuration { .. } => "configuration",
        Error::Structural(_) => "structural",
        Error::Numeric(_) => "numeric",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePoint {
    pub omega: f64,
    pub mirror_output: f64,
    pub bec_output: f64,
    pub mirror_bec: f64,
    pub quadrature_error: f64,
}

/// Single-node negativities versus the filter center.
pub fn node_entanglement(
    m: &LinearModel,
    omegas: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> Vec<Result<NodePoint>> {
    node_cm_table(m, omegas, epsilon, tolerance)
        .into_iter()
        .zip(omegas)
        .map(|(r, &omega)| {
            let s = r?;
            let en = |a, b| log_negativity(&s.cm, &Bipartition::pair(a, b));
            Ok(NodePoint {
                omega,
                mirror_output: en(0, 2)?,
                bec_output: en(1, 2)?,
                mirror_bec: en(0, 1)?,
                quadrature_error: relative_error(&s),
            })
        })
        .collect()
}

/// Labeled pair of conditioned matter modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair(pub String, pub String);

impl Pair {
    pub fn new(a: &str, b: &str) -> Result<Self> {
        for l in [a, b] {
            if !MATTER_LABELS.contains(&l) {
                return Err(structural(format!(
                    "unknown mode {l:?}; expected one of {}",
                    MATTER_LABELS.join(", ")
                )));
            }
        }
        if a == b {
            return Err(structural(format!(
                "pair must name two distinct modes, got {a}"
            )));
        }
        Ok(Self(a.to_string(), b.to_string()))
    }

    /// Parses `label,label`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| structural(format!("pair {s:?} is not of the form label,label")))?;
        Self::new(a.trim(), b.trim())
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.0, self.1)
    }

    pub fn bec_bec() -> Self {
        Self::new("bec_A", "bec_B").unwrap()
    }

    pub fn mirror_mirror() -> Self {
        Self::new("mirror_A", "mirror_B").unwrap()
    }

    pub fn mirror_bec() -> Self {
        Self::new("mirror_A", "bec_B").unwrap()
    }

    pub fn bec_mirror() -> Self {
        Self::new("bec_A", "mirror_B").unwrap()
    }
}

/// Swap of two filtered node CMs; the conditioned CM is checked at the loose tier.
pub fn swap_nodes(a: &SpectralCm, b: &SpectralCm, transmissivity: f64) -> Result<SwapResult> {
    let blocks = assemble_two_node_blocks(&a.cm, &b.cm)?.with_transmissivity(transmissivity)?;
    let r = bell_condition(&blocks)?;
    let v = r.conditioned.validate(Tier::Loose)?;
    if !v.physical {
        return Err(numeric(format!(
            "conditioned CM is not physical: min symplectic eigenvalue {:.9}",
            v.min_symplectic_eigenvalue
        )));
    }
    Ok(r)
}

pub fn pair_values(r: &SwapResult, pairs: &[Pair]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|p| remote_log_negativity(r, (&p.0, &p.1)))
        .collect()
}

/// Remote negativities on a grid of filter centers `(Ω_A, Ω_B)`.
#[derive(Debug, Clone)]
pub struct SwapMap {
    pub omegas_a: Vec<f64>,
    pub omegas_b: Vec<f64>,
    pub pairs: Vec<Pair>,
    /// Row-major over `(Ω_A, Ω_B)`; one value per pair.
    pub values: Vec<Result<Vec<f64>>>,
    /// Largest relative quadrature error over all node CMs used.
    pub quadrature_error: f64,
}

impl SwapMap {
    pub fn at(&self, ia: usize, ib: usize) -> &Result<Vec<f64>> {
        &self.values[ia * self.omegas_b.len() + ib]
    }

    /// Grid indices and value of the largest finite value for pair `k`.
    pub fn argmax(&self, k: usize) -> Option<(usize, usize, f64)> {
        let nb = self.omegas_b.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for (idx, v) in self.values.iter().enumerate() {
            if let Ok(v) = v {
                if best.is_none_or(|b| v[k] > b.2) {
                    best = Some((idx / nb, idx % nb, v[k]));
                }
            }
        }
        best
    }

    pub fn failures(&self) -> usize {
        self.values.iter().filter(|v| v.is_err()).count()
    }
}

/// `E_N` of each pair after swapping node A filtered at `Ω_A` with node B at `Ω_B`.
/// Node CMs are computed once per filter center and reused across the grid.
#[allow(clippy::too_many_arguments)]
pub fn swap_map(
    node_a: &LinearModel,
    node_b: &LinearModel,
    omegas_a: &[f64],
    omegas_b: &[f64],
    epsilon: f64,
    transmissivity: f64,
    pairs: &[Pair],
    tolerance: f64,
) -> SwapMap {
    let ta = node_cm_table(node_a, omegas_a, epsilon, tolerance);
    let tb = node_cm_table(node_b, omegas_b, epsilon, tolerance);
    let quadrature_error = ta
        .iter()
        .chain(&tb)
        .filter_map(|r| r.as_ref().ok())
        .map(relative_error)
        .fold(0.0, f64::max);
    let nb = omegas_b.len();
    let values = (0..omegas_a.len() * nb)
        .into_par_iter()
        .map(|idx| {
            let a = ta[idx / nb].as_ref().map_err(Clone::clone)?;
            let b = tb[idx % nb].as_ref().map_err(Clone::clone)?;
            pair_values(&swap_nodes(a, b, transmissivity)?, pairs)
        })
        .collect();
    SwapMap {
        omegas_a: omegas_a.to_vec(),
        omegas_b: omegas_b.to_vec(),
        pairs: pairs.to_vec(),
        values,
        quadrature_error,
    }
}

/// One remote pair evaluated at fixed filter centers while `ε` varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub pair: Pair,
    pub omega_a: f64,
    pub omega_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub epsilon: f64,
    pub remote: f64,
    /// `E_N(mirror_A, bec_A)` and `E_N(mirror_B, bec_B)` after the swap.
    pub local_a: f64,
    pub local_b: f64,
    pub quadrature_error: f64,
}

/// Remote and same-node negativities versus `ε` at one operating point.
pub fn bandwidth_sweep(
    node_a: &LinearModel,
    node_b: &LinearModel,
    point: &OperatingPoint,
    epsilons: &[f64],
    transmissivity: f64,
    tolerance: f64,
) -> Vec<Result<BandwidthPoint>> {
    epsilons
        .par_iter()
        .map(|&eps| {
            let a = node_cm_at(node_a, point.omega_a, eps, tolerance)?;
            let b = node_cm_at(node_b, point.omega_b, eps, tolerance)?;
            let r = swap_nodes(&a, &b, transmissivity)?;
            Ok(BandwidthPoint {
                epsilon: eps,
                remote: remote_log_negativity(&r, (&point.pair.0, &point.pair.1))?,
                local_a: remote_log_negativity(&r, ("mirror_A", "bec_A"))?,
                local_b: remote_log_negativity(&r, ("mirror_B", "bec_B"))?,
                quadrature_error: relative_error(&a).max(relative_error(&b)),
            })
        })
        .collect()
}

/// Summary of the linear stability of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub max_real_part: f64,
    /// Drift eigenvalues as `(re, im)`, sorted by imaginary then real part.
    pub eigenvalues: Vec<(f64, f64)>,
}

pub fn stability_report(m: &LinearModel) -> Result<StabilityReport> {
    let st = check_stability(m)?;
    let mut eigenvalues: Vec<(f64, f64)> = crate::linalg::eigenvalues(&m.drift)?
        .into_iter()
        .map(|z| (z.re, z.im))
        .collect();
    eigenvalues.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    Ok(StabilityReport {
        stable: st.stable,
        max_real_part: st.max_real_part,
        eigenvalues,
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Index of the largest value among the successful points.
pub fn argmax_ok<T>(points: &[Result<T>], value: impl Fn(&T) -> f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let Ok(p) = p {
            let v = value(p);
            if best.is_none_or(|b| v > b.1) {
                best = Some((i, v));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::node::NodeParams;

    #[test]
    fn grids() {
        assert_eq!(linspace(-1.0, 1.0, 3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(2.0, 5.0, 1), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
        let l = logspace(1.0, 100.0, 3);
        assert!((l[1] - 10.0).abs() < 1e-12 && (l[2] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(Pair::parse("bec_A, bec_B").unwrap(), Pair::bec_bec());
        assert!(Pair::parse("bec_A").is_err());
        assert!(Pair::parse("bec_A,bec_A").is_err());
        assert!(Pair::parse("bec_A,cavity").is_err());
        assert_eq!(Pair::mirror_bec().name(), "mirror_A-bec_B");
    }

    #[test]
    fn failed_points_are_kept_in_place() {
        let m = LinearModel::from_params(&NodeParams::paper()).unwrap();
        let wm = mirror_frequency(&m).unwrap();
        // ε ≤ 0 is an invalid filter: that point fails, the others survive
        let pts = bandwidth_sweep(
            &m,
            &m,
            &OperatingPoint {
                pair: Pair::mirror_mirror(),
                omega_a: -wm,
                omega_b: -wm,
            },
            &[10.0, -1.0, 5.0],
            0.5,
            1e-6,
        );
        assert!(pts[0].is_ok() && pts[2].is_ok());
        assert_eq!(flag_of(pts[1].as_ref().unwrap_err()), "structural");
    }

    #[test]
    fn swap_map_reuses_node_tables() {
        let m = LinearModel::from_params(&NodeParams::paper()).unwrap();
        let wm = mirror_frequency(&m).unwrap();
        let om = [-wm, -0.6 * wm];
        let map = swap_map(
            &m,
            &m,
            &om,
            &om,
            10.0,
            0.5,
            &[Pair::bec_bec(), Pair::mirror_mirror()],
            1e-6,
        );
        assert_eq!(map.values.len(), 4);
        assert_eq!(map.failures(), 0);
        // identical nodes: the map is symmetric under exchanging the axes
        for k in 0..2 {
            let a = map.at(0, 1).as_ref().unwrap()[k];
            let b = map.at(1, 0).as_ref().unwrap()[k];
            assert!((a - b).abs() < 1e-9);
        }
        assert!(map.quadrature_error <= 1e-6);
    }
}
