//! Frequency-domain view of one node: transfer matrix, causal filter,
//! cavity output spectrum and the stationary CM of (mirror, BEC, filtered
//! output mode).
//!
//! Fourier convention `x(ω) = ∫ x(t) e^{iωt} dt`; covariance integrals carry
//! the measure `dω / 2π`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{numeric, structural, Error, Result};
use crate::gaussian::{CovarianceMatrix, Tier};
use crate::linalg;
use crate::node::{check_stability, LinearModel, BEC, CAVITY, MIRROR};
use crate::quadrature::{self, Settings};

pub use crate::swap::assemble_two_node_blocks;

pub const OUTPUT: &str = "output";

/// Causal filter `F(t) = √(2/τ) e^{−(1/τ + iΩ)t} Θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub center: f64,
    pub tau: f64,
}

impl FilterSpec {
    pub fn new(center: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) || !center.is_finite() {
            return Err(structural(format!(
                "invalid filter: center {center}, tau {tau}"
            )));
        }
        Ok(Self { center, tau })
    }

    /// Filter with inverse bandwidth given as `ε = ω_m τ`.
    pub fn from_epsilon(center: f64, epsilon: f64, omega_m: f64) -> Result<Self> {
        Self::new(center, epsilon / omega_m)
    }

    pub fn epsilon(&self, omega_m: f64) -> f64 {
        self.tau * omega_m
    }
}

/// `F̃(ω) = √(2/τ) / (1/τ − i(ω − Ω))`.
pub fn filter_response(f: &FilterSpec, omega: f64) -> Complex64 {
    Complex64::new((2.0 / f.tau).sqrt(), 0.0) / Complex64::new(1.0 / f.tau, -(omega - f.center))
}

/// Where and how finely to integrate over ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub half_width: f64,
    pub tolerance: f64,
    pub breakpoints: Vec<f64>,
    pub max_panels: usize,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_PANELS: usize = 200_000;

impl QuadratureSpec {
    /// Window and breakpoints for a node, optionally with a filter.
    ///
    /// `W = |Δ| + ω_m + ω_B + 20 max(κ, 1/τ)`, widened if a drift resonance
    /// lies further out. Breakpoints sit on every resonance the integrand has.
    pub fn for_node(m: &LinearModel, filter: Option<&FilterSpec>, tolerance: f64) -> Result<Self> {
        let ev = linalg::eigenvalues(&m.drift)?;
        let mut bp = vec![0.0];
        for z in &ev {
            bp.extend([z.im, -z.im]);
        }
        let mut w = 0.0f64;
        if let (Some(d), Some(s)) = (&m.derived, &m.steady) {
            bp.extend([
                d.mirror_frequency,
                -d.mirror_frequency,
                d.bogoliubov_frequency,
                -d.bogoliubov_frequency,
                s.detuning,
                -s.detuning,
            ]);
            w = s.detuning.abs() + d.mirror_frequency + d.bogoliubov_frequency;
        }
        let mut width = m.kappa;
        if let Some(f) = filter {
            let c = f.center;
            let b = 1.0 / f.tau;
            bp.extend([c, c - b, c + b, -c, -c - b, -c + b]);
            width = width.max(b);
        }
        let reach = bp.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        w = w.max(reach) + 20.0 * width;
        let spec = Self {
            half_width: w,
            tolerance,
            breakpoints: bp,
            max_panels: DEFAULT_MAX_PANELS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(structural(format!(
                "quadrature tolerance must lie in (0, 1e-3], got {}",
                self.tolerance
            )));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(structural("quadrature window must be finite and > 0"));
        }
        if self
            .breakpoints
            .iter()
            .any(|b| !(b.abs() <= self.half_width))
        {
            return Err(structural(
                "quadrature window does not cover every breakpoint",
            ));
        }
        Ok(())
    }
}

fn complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `M̃(ω) = (iωI + A)⁻¹`.
pub fn transfer_at(m: &LinearModel, omega: f64) -> Result<DMatrix<Complex64>> {
    let n = m.drift.nrows();
    let mut op = complex(&m.drift);
    for i in 0..n {
        op[(i, i)] += Complex64::new(0.0, omega);
    }
    let inv = op
        .clone()
        .try_inverse()
        .ok_or_else(|| numeric(format!("iωI + A is singular at ω = {omega:e}")))?;
    let resid = (&op * &inv - DMatrix::<Complex64>::identity(n, n))
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if !(resid
        < 1e-12
            * (1.0
                + op.iter().fold(0.0f64, |a, z| a.max(z.norm()))
                    * inv.iter().fold(0.0f64, |a, z| a.max(z.norm()))))
    {
        return Err(numeric(format!(
            "transfer matrix inverse residual {resid:e} at ω = {omega:e}"
        )));
    }
    Ok(inv)
}

/// How the optical rows are mapped before forming the covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
enum OpticalMap {
    /// Filtered output mode: `Υ` with the filter block and `P = 1/(2κ)`.
    Filtered(FilterSpec),
    /// Identity `Υ` and `P = 0`: reproduces the intracavity Lyapunov CM.
    Intracavity,
}

/// `Υ (M̃ + P)` at one frequency; rows ordered mirror, BEC, optical.
fn kernel(m: &LinearModel, map: &OpticalMap, omega: f64) -> Result<DMatrix<Complex64>> {
    let mut k = transfer_at(m, omega)?;
    if let OpticalMap::Filtered(f) = map {
        let p = 0.5 / m.kappa;
        k[(4, 4)] += p;
        k[(5, 5)] += p;
        let fw = filter_response(f, omega);
        let fm = filter_response(f, -omega).conj();
        let fr = (fw + fm) * 0.5;
        let fi = (fw - fm) / Complex64::new(0.0, 2.0);
        let s = Complex64::new((2.0 * m.kappa).sqrt(), 0.0);
        let x = k.row(4).clone_owned();
        let y = k.row(5).clone_owned();
        k.set_row(4, &((&x * fr - &y * fi) * s));
        k.set_row(5, &((&x * fi + &y * fr) * s));
    }
    Ok(k)
}

/// Stationary CM obtained by frequency integration, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCm {
    pub cm: CovarianceMatrix,
    /// Quadrature error estimate for every entry.
    pub error: DMatrix<f64>,
    /// Largest imaginary part of the raw integral, relative to the largest entry.
    pub max_imaginary: f64,
    pub panels: usize,
}

pub const HERMITICITY_TOL: f64 = 1e-8;

fn integrate_cm(
    m: &LinearModel,
    map: OpticalMap,
    q: &QuadratureSpec,
    labels: [&str; 3],
) -> Result<SpectralCm> {
    q.validate()?;
    let st = check_stability(m)?;
    if !st.stable {
        return Err(Error::Unstable {
            max_real_part: st.max_real_part,
        });
    }
    let n = 6;
    let d = complex(&m.diffusion);
    let integrand = |omega: f64| -> Vec<f64> {
        let mut out = vec![0.0; 2 * n * n];
        match kernel(m, &map, omega) {
            Ok(k) => {
                let t = &k * &d * k.adjoint();
                let norm = 0.5 / std::f64::consts::PI;
                for j in 0..n {
                    for i in 0..n {
                        out[i + n * j] = t[(i, j)].re * norm;
                        out[n * n + i + n * j] = t[(i, j)].im * norm;
                    }
                }
            }
            Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
        }
        out
    };
    // Every entry, real or imaginary, is judged against √(V_ii V_jj).
    let scale = |v: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; 2 * n * n];
        for j in 0..n {
            for i in 0..n {
                let r = (v[i * (n + 1)].abs() * v[j * (n + 1)].abs()).sqrt();
                s[i + n * j] = r;
                s[n * n + i + n * j] = r;
            }
        }
        s
    };
    let ranges = quadrature::real_line(&q.breakpoints, q.half_width)?;
    let settings = Settings {
        tolerance: q.tolerance,
        max_panels: q.max_panels,
        ..Settings::default()
    };
    let r = quadrature::integrate(&integrand, &ranges, 2 * n * n, scale, &settings)?;
    let re = DMatrix::from_column_slice(n, n, &r.value[..n * n]);
    let im = DMatrix::from_column_slice(n, n, &r.value[n * n..]);
    let err = DMatrix::from_column_slice(n, n, &r.error[..n * n]);
    let dominant = re.amax();
    let max_imaginary = im.amax() / dominant;
    if !(max_imaginary < HERMITICITY_TOL) {
        return Err(numeric(format!(
            "frequency integral not Hermitian: imaginary part {max_imaginary:e} of the dominant entry"
        )));
    }
    let asym = (&re - re.transpose()).amax() / dominant;
    if !(asym < HERMITICITY_TOL) {
        return Err(numeric(format!(
            "frequency integral not symmetric: {asym:e}"
        )));
    }
    let cm = CovarianceMatrix::new((&re + re.transpose()) * 0.5, labels)?;
    Ok(SpectralCm {
        cm,
        error: err,
        max_imaginary,
        panels: r.panels,
    })
}

/// CM of (mirror, BEC, filtered output mode) for one node.
///
/// The result is checked for physicality at the loose tier.
pub fn filtered_node_cm(m: &LinearModel, f: &FilterSpec, q: &QuadratureSpec) -> Result<SpectralCm> {
    let out = integrate_cm(m, OpticalMap::Filtered(*f), q, [MIRROR, BEC, OUTPUT])?;
    let v = out.cm.validate(Tier::Loose)?;
    if !v.physical {
        return Err(numeric(format!(
            "filtered CM is not physical: min symplectic eigenvalue {:.9}",
            v.min_symplectic_eigenvalue
        )));
    }
    Ok(out)
}

/// The intracavity CM by the same frequency integral, with identity filter
/// and no input-field term. Agrees with the Lyapunov solution.
pub fn intracavity_cm_by_quadrature(m: &LinearModel, q: &QuadratureSpec) -> Result<SpectralCm> {
    integrate_cm(m, OpticalMap::Intracavity, q, [MIRROR, BEC, CAVITY])
}

/// `∫ |F̃(ω)|² dω`, which should be `2π`.
pub fn filter_norm(f: &FilterSpec, tolerance: f64) -> Result<f64> {
    let b = 1.0 / f.tau;
    let ranges = quadrature::real_line(
        &[f.center, f.center - b, f.center + b],
        f.center.abs() + 20.0 * b,
    )?;
    let g = |w: f64| vec![filter_response(f, w).norm_sqr()];
    let r = quadrature::integrate(
        &g,
        &ranges,
        1,
        |v: &[f64]| v.to_vec(),
        &Settings {
            tolerance,
            ..Settings::default()
        },
    )?;
    Ok(r.value[0])
}

/// Cavity output spectrum on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpectrum {
    pub frequencies: Vec<f64>,
    /// Normalized to unit maximum.
    pub values: Vec<f64>,
    /// The maximum before normalization.
    pub peak: f64,
}

impl OutputSpectrum {
    /// Indices of strict interior local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
            .collect()
    }
}

/// Photon flux per unit bandwidth below which the output counts as dark.
pub const DARK_SPECTRUM: f64 = 1e-12;

/// Normally ordered photon-flux spectrum of the output field,
/// `⟨δa_out†(ω) δa_out(ω)⟩`, from the same `M̃, D` as the CM integrand.
pub fn output_spectrum(m: &LinearModel, grid: &[f64]) -> Result<OutputSpectrum> {
    if grid.is_empty() {
        return Err(structural("empty frequency grid"));
    }
    let st = check_stability(m)?;
    if !st.stable {
        return Err(Error::Unstable {
            max_real_part: st.max_real_part,
        });
    }
    let d = complex(&m.diffusion);
    let raw = grid
        .iter()
        .map(|&w| {
            let mut k = transfer_at(m, w)?;
            let p = 0.5 / m.kappa;
            k[(4, 4)] += p;
            k[(5, 5)] += p;
            let t = (&k * &d * k.adjoint()) * Complex64::new(2.0 * m.kappa, 0.0);
            let (xx, yy, xy, yx) = (t[(4, 4)], t[(5, 5)], t[(4, 5)], t[(5, 4)]);
            let s = 0.5 * (xx + yy + Complex64::i() * (yx - xy)).re - 0.5;
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    let peak = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = raw.iter().copied().fold(f64::INFINITY, f64::min);
    if !peak.is_finite() || floor < -DARK_SPECTRUM.max(1e-9 * peak) {
        return Err(numeric(format!(
            "output spectrum negative: {floor:e} (peak {peak:e})"
        )));
    }
    // Vacuum in, vacuum out: nothing to normalize.
    if peak <= DARK_SPECTRUM {
        return Ok(OutputSpectrum {
            frequencies: grid.to_vec(),
            values: vec![0.0; grid.len()],
            peak: 0.0,
        });
    }
    Ok(OutputSpectrum {
        frequencies: grid.to_vec(),
        values: raw.iter().map(|s| s.max(0.0) / peak).collect(),
        peak,
    })
}

/// The 2×2 real-linear action of the filter on `(X, Y)` at one frequency,
/// split into real and imaginary parts.
pub fn filter_block(f: &FilterSpec, omega: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    let fw = filter_response(f, omega);
    let fm = filter_response(f, -omega).conj();
    let fr = (fw + fm) * 0.5;
    let fi = (fw - fm) / Complex64::new(0.0, 2.0);
    let re = Matrix2::new(fr.re, -fi.re, fi.re, fr.re);
    let im = Matrix2::new(fr.im, -fi.im, fi.im, fr.im);
    (re, im)
}
