//! One cavity node: mirror, Bogoliubov mode and intracavity field.
//!
//! The chain is `NodeParams → DerivedParams → SteadyState → LinearModel`.
//! Fluctuations are ordered `[q, p, Q, P, X, Y]` (mirror, BEC, cavity) and obey
//! `δu̇ = A δu + n` with diffusion `D`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};
use crate::gaussian::CovarianceMatrix;
use crate::linalg;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const MIRROR: &str = "mirror";
pub const BEC: &str = "bec";
pub const CAVITY: &str = "cavity";

/// Recoil frequency quoted for the condensate, `2π × 3.57 kHz`.
pub const QUOTED_RECOIL: f64 = 2.0 * std::f64::consts::PI * 3.57e3;

/// Default mechanical quality factor used when no damping is given.
pub const DEFAULT_MIRROR_Q: f64 = 1e5;

/// Cavity detuning, either the effective `Δ` that enters the drift matrix or
/// the bare (Stark-shifted) `δ_c` from which `Δ` is solved self-consistently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detuning {
    Effective(f64),
    Bare(f64),
}

/// Direct values for the radiation-pressure couplings. Set values win over
/// the microscopic formulas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingOverrides {
    pub mirror: Option<f64>,
    pub bec: Option<f64>,
}

/// Condensate inputs that only the optional microscopic derivation of `G` needs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Microscopic {
    pub atom_number: Option<f64>,
    pub lattice_depth_per_photon: Option<f64>,
    pub potential_waist: Option<f64>,
    pub atomic_detuning: Option<f64>,
    pub vacuum_rabi: Option<f64>,
    pub s_wave_length: Option<f64>,
}

/// Physical inputs of one node, SI units (frequencies and rates in rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    pub pump_power: f64,
    pub cavity_length: f64,
    pub wavelength: f64,
    pub finesse: f64,
    pub mirror_mass: f64,
    pub mirror_frequency: f64,
    pub mirror_damping: f64,
    pub mirror_temperature: f64,
    pub bec_recoil: f64,
    pub bec_collision: f64,
    pub bec_damping: f64,
    pub bec_temperature: f64,
    pub detuning: Detuning,
    pub couplings: CouplingOverrides,
    pub microscopic: Microscopic,
    /// Phase of the drive amplitude. Must be zero: the steady state is solved
    /// for a real intracavity amplitude.
    pub drive_phase: f64,
}

impl NodeParams {
    /// The calibrated reference node.
    ///
    /// 50 mW pump, L = 1 mm, λ = 1080 nm, 𝓕 = 3×10⁴, 50 ng mirror at
    /// ω_m = 2π×10 MHz and 40 mK, γ_c = 10⁻³κ, T_c = 1 µK. Three values are
    /// calibrated rather than quoted: the recoil is set to 0.15 ω_m so that
    /// ω_B = 0.6 ω_m, the BEC coupling is G = 0.7 g, and the cavity sits at
    /// Δ = +ω_m in the sign convention of the drift matrix.
    pub fn paper() -> Self {
        let cavity_length = 1e-3;
        let wavelength = 1080e-9;
        let finesse = 3e4;
        let mirror_mass = 50e-12;
        let mirror_frequency = 2.0 * std::f64::consts::PI * 1e7;
        let kappa = cavity_linewidth(cavity_length, finesse);
        let omega_l = laser_frequency(wavelength);
        let g = mirror_coupling(omega_l, cavity_length, mirror_mass, mirror_frequency);
        Self {
            pump_power: 0.05,
            cavity_length,
            wavelength,
            finesse,
            mirror_mass,
            mirror_frequency,
            mirror_damping: mirror_frequency / DEFAULT_MIRROR_Q,
            mirror_temperature: 0.04,
            bec_recoil: 0.15 * mirror_frequency,
            bec_collision: 0.0,
            bec_damping: 1e-3 * kappa,
            bec_temperature: 1e-6,
            detuning: Detuning::Effective(mirror_frequency),
            couplings: CouplingOverrides {
                mirror: None,
                bec: Some(0.7 * g),
            },
            microscopic: Microscopic::default(),
            drive_phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cavity_length", self.cavity_length),
            ("wavelength", self.wavelength),
            ("finesse", self.finesse),
            ("mirror_mass", self.mirror_mass),
            ("mirror_frequency", self.mirror_frequency),
            ("mirror_damping", self.mirror_damping),
            ("bec_recoil", self.bec_recoil),
            ("bec_damping", self.bec_damping),
        ];
        let non_negative = [
            ("pump_power", self.pump_power),
            ("mirror_temperature", self.mirror_temperature),
            ("bec_temperature", self.bec_temperature),
            ("bec_collision", self.bec_collision),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(structural(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(structural(format!(
                    "{name} must be finite and ≥ 0, got {v}"
                )));
            }
        }
        let det = match self.detuning {
            Detuning::Effective(d) | Detuning::Bare(d) => d,
        };
        if !det.is_finite() {
            return Err(structural("detuning must be finite"));
        }
        for (name, v) in [
            ("mirror", self.couplings.mirror),
            ("bec", self.couplings.bec),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(structural(format!("{name} coupling override must be ≥ 0")));
                }
            }
        }
        Ok(())
    }
}

/// `κ = πc / (L𝓕)`.
pub fn cavity_linewidth(length: f64, finesse: f64) -> f64 {
    std::f64::consts::PI * SPEED_OF_LIGHT / (length * finesse)
}

pub fn laser_frequency(wavelength: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength
}

/// `g = (ω_c / L) √(ħ / (M ω_m))`.
pub fn mirror_coupling(omega_c: f64, length: f64, mass: f64, omega_m: f64) -> f64 {
    omega_c / length * (HBAR / (mass * omega_m)).sqrt()
}

/// Bose occupation `1 / (e^{ħω/k_BT} − 1)`; zero at zero temperature.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (BOLTZMANN * temperature)).exp_m1()
}

/// Effective BEC detuning `Ω_c = 4ω_R + ω_sw/2`.
pub fn bec_detuning(recoil: f64, collision: f64) -> f64 {
    4.0 * recoil + 0.5 * collision
}

/// Bogoliubov frequency `ω_B = √(Ω_c (Ω_c + ω_sw))`.
pub fn bogoliubov_frequency(recoil: f64, collision: f64) -> f64 {
    let oc = bec_detuning(recoil, collision);
    (oc * (oc + collision)).sqrt()
}

/// Quantities computed from [`NodeParams`], plus the inputs the dynamics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub kappa: f64,
    pub omega_c: f64,
    pub omega_l: f64,
    pub drive: f64,
    pub mirror_coupling: f64,
    pub bec_coupling: f64,
    /// Effective mass of the Bogoliubov mode; only known on the microscopic path.
    pub bec_mass: Option<f64>,
    pub bec_detuning: f64,
    pub bogoliubov_frequency: f64,
    pub mirror_occupation: f64,
    pub bec_occupation: f64,
    pub mirror_frequency: f64,
    pub mirror_damping: f64,
    pub bec_damping: f64,
    pub bec_collision: f64,
    pub detuning: Detuning,
    pub drive_phase: f64,
}

pub fn derive_params(p: &NodeParams) -> Result<DerivedParams> {
    p.validate()?;
    let kappa = cavity_linewidth(p.cavity_length, p.finesse);
    let omega_l = laser_frequency(p.wavelength);
    let omega_c = omega_l;
    let drive = (2.0 * kappa * p.pump_power / (HBAR * omega_l)).sqrt();
    let g = p.couplings.mirror.unwrap_or_else(|| {
        mirror_coupling(omega_c, p.cavity_length, p.mirror_mass, p.mirror_frequency)
    });
    let (bec_coupling, bec_mass) = match p.couplings.bec {
        Some(g_bec) => (g_bec, None),
        None => {
            let (g_bec, m_s) = microscopic_bec_coupling(p, omega_c)?;
            (g_bec, Some(m_s))
        }
    };
    let omega_b = bogoliubov_frequency(p.bec_recoil, p.bec_collision);
    Ok(DerivedParams {
        kappa,
        omega_c,
        omega_l,
        drive,
        mirror_coupling: g,
        bec_coupling,
        bec_mass,
        bec_detuning: bec_detuning(p.bec_recoil, p.bec_collision),
        bogoliubov_frequency: omega_b,
        mirror_occupation: thermal_occupation(p.mirror_frequency, p.mirror_temperature),
        bec_occupation: thermal_occupation(omega_b, p.bec_temperature),
        mirror_frequency: p.mirror_frequency,
        mirror_damping: p.mirror_damping,
        bec_damping: p.bec_damping,
        bec_collision: p.bec_collision,
        detuning: p.detuning,
        drive_phase: p.drive_phase,
    })
}

/// `m_s = ħω_c² / (L² N U₀² ω_R)` and `G = (ω_c/L) √(ħ / (4 ω_R m_s))`.
fn microscopic_bec_coupling(p: &NodeParams, omega_c: f64) -> Result<(f64, f64)> {
    let m = &p.microscopic;
    let u0 = m
        .lattice_depth_per_photon
        .or(match (m.vacuum_rabi, m.atomic_detuning) {
            (Some(g0), Some(da)) if da != 0.0 => Some(g0 * g0 / da),
            _ => None,
        });
    let mut missing = Vec::new();
    if m.atom_number.is_none() {
        missing.push("atom_number".to_string());
    }
    if u0.is_none() {
        missing.push("lattice_depth_per_photon (or vacuum_rabi + atomic_detuning)".to_string());
    }
    if !missing.is_empty() {
        missing.push("or a direct bec coupling override".to_string());
        return Err(Error::Configuration { missing });
    }
    let (n, u0) = (m.atom_number.unwrap(), u0.unwrap());
    let l = p.cavity_length;
    let m_s = HBAR * omega_c * omega_c / (l * l * n * u0 * u0 * p.bec_recoil);
    let g_bec = omega_c / l * (HBAR / (4.0 * p.bec_recoil * m_s)).sqrt();
    Ok((g_bec, m_s))
}

/// Mean values of the linearization point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub alpha: f64,
    pub q: f64,
    pub p: f64,
    pub bec_q: f64,
    pub bec_p: f64,
    /// Effective detuning `Δ = δ_c − g q_s + G Q_s`.
    pub detuning: f64,
    pub bare_detuning: f64,
    /// Number of fixed points at this drive (3 inside the bistable window).
    pub multiplicity: usize,
    pub residual: f64,
}

/// Tolerance on the relative residual of the fixed-point relations.
pub const STEADY_STATE_TOL: f64 = 1e-10;

pub fn solve_steady_state(d: &DerivedParams) -> Result<SteadyState> {
    if d.drive_phase != 0.0 {
        return Err(structural(
            "complex drive amplitude requested; the steady state assumes real α",
        ));
    }
    let g = d.mirror_coupling;
    let gb = d.bec_coupling;
    let oc = d.bec_detuning;
    // Q_s = −G α² / w
    let w = oc + d.bec_collision + d.bec_damping * d.bec_damping / oc;
    let shift_per_photon = g * g / d.mirror_frequency + gb * gb / w;

    let (n, bare, multiplicity) = match d.detuning {
        Detuning::Effective(delta) => {
            let n = d.drive * d.drive / (delta * delta + d.kappa * d.kappa);
            (n, delta + shift_per_photon * n, 1)
        }
        Detuning::Bare(bare) => {
            let roots = photon_number_roots(d.drive, d.kappa, bare, shift_per_photon);
            let n = *roots
                .first()
                .ok_or(Error::NonConvergence { residual: f64::NAN })?;
            (n, bare, roots.len())
        }
    };
    let alpha = n.sqrt();
    let q = g / d.mirror_frequency * n;
    let bec_q = -gb * n / w;
    let bec_p = d.bec_damping / oc * bec_q;
    let detuning = bare - g * q + gb * bec_q;
    let mut s = SteadyState {
        alpha,
        q,
        p: 0.0,
        bec_q,
        bec_p,
        detuning,
        bare_detuning: bare,
        multiplicity,
        residual: 0.0,
    };
    s.residual = steady_state_residual(d, &s);
    if !(s.residual <= STEADY_STATE_TOL) {
        return Err(Error::NonConvergence {
            residual: s.residual,
        });
    }
    Ok(s)
}

/// Largest relative violation among the five fixed-point relations.
pub fn steady_state_residual(d: &DerivedParams, s: &SteadyState) -> f64 {
    let rel = |lhs: f64, rhs: f64| {
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    };
    let n = s.alpha * s.alpha;
    let oc = d.bec_detuning;
    let w = oc + d.bec_collision + d.bec_damping * d.bec_damping / oc;
    let delta = s.bare_detuning - d.mirror_coupling * s.q + d.bec_coupling * s.bec_q;
    [
        rel(s.q, d.mirror_coupling / d.mirror_frequency * n),
        s.p.abs(),
        rel(s.bec_q, -d.bec_coupling * n / w),
        rel(s.bec_p, d.bec_damping / oc * s.bec_q),
        rel(
            s.alpha,
            d.drive / (delta * delta + d.kappa * d.kappa).sqrt(),
        ),
        rel(s.detuning, delta),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Positive roots of `n[(δ − c n)² + κ²] = E²`, ascending. The first root is
/// the branch reached by ramping the drive up from zero.
pub fn photon_number_roots(drive: f64, kappa: f64, bare: f64, c: f64) -> Vec<f64> {
    let e2 = drive * drive;
    if e2 == 0.0 {
        return vec![0.0];
    }
    let f = |n: f64| n * ((bare - c * n).powi(2) + kappa * kappa) - e2;
    // Turning points of the cubic: 3c²n² − 4cδ n + δ² + κ² = 0.
    let mut edges = vec![0.0];
    if c > 0.0 {
        let disc = bare * bare - 3.0 * kappa * kappa;
        if disc > 0.0 {
            for t in [
                (2.0 * bare - disc.sqrt()) / (3.0 * c),
                (2.0 * bare + disc.sqrt()) / (3.0 * c),
            ] {
                if t > 0.0 {
                    edges.push(t);
                }
            }
        }
    }
    let upper =
        (e2 / (kappa * kappa)).max(*edges.last().unwrap()) * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    edges.push(upper);

    let mut roots = Vec::new();
    for w in edges.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            if roots.last() != Some(&lo) {
                roots.push(lo);
            }
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        let rising = flo < 0.0;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
        roots.push(root);
    }
    roots
}

/// Drift matrix of the linearized Langevin equations, ordering `[q, p, Q, P, X, Y]`.
pub fn build_drift(d: &DerivedParams, s: &SteadyState) -> DMatrix<f64> {
    let sq2 = std::f64::consts::SQRT_2;
    let gm = sq2 * d.mirror_coupling * s.alpha;
    let gb = sq2 * d.bec_coupling * s.alpha;
    let wm = d.mirror_frequency;
    let oc = d.bec_detuning;
    let gc = d.bec_damping;
    let k = d.kappa;
    let dl = s.detuning;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(6, 6, &[
        0.0, wm,                 0.0,                      0.0,  0.0,  0.0,
        -wm, -d.mirror_damping,  0.0,                      0.0,  gm,   0.0,
        0.0, 0.0,                -gc,                      oc,   0.0,  0.0,
        0.0, 0.0,                -(oc + d.bec_collision),  -gc,  -gb,  0.0,
        0.0, 0.0,                0.0,                      0.0,  -k,   dl,
        gm,  0.0,                -gb,                      0.0,  -dl,  -k,
    ]);
    a
}

/// `D = diag[0, γ_m(2n̄_m+1), γ_c(2n_c+1), γ_c(2n_c+1), κ, κ]`.
pub fn build_diffusion(d: &DerivedParams) -> Result<DMatrix<f64>> {
    if d.mirror_occupation < 0.0 || d.bec_occupation < 0.0 {
        return Err(structural("thermal occupations must be non-negative"));
    }
    let m = d.mirror_damping * (2.0 * d.mirror_occupation + 1.0);
    let b = d.bec_damping * (2.0 * d.bec_occupation + 1.0);
    let diag = nalgebra::DVector::from_row_slice(&[0.0, m, b, b, d.kappa, d.kappa]);
    Ok(DMatrix::from_diagonal(&diag))
}

/// Drift and diffusion of one node with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub kappa: f64,
    pub derived: Option<DerivedParams>,
    pub steady: Option<SteadyState>,
}

impl LinearModel {
    /// Full pipeline from physical inputs.
    pub fn from_params(p: &NodeParams) -> Result<Self> {
        let d = derive_params(p)?;
        let s = solve_steady_state(&d)?;
        Self::new(d, s)
    }

    pub fn new(d: DerivedParams, s: SteadyState) -> Result<Self> {
        Ok(Self {
            drift: build_drift(&d, &s),
            diffusion: build_diffusion(&d)?,
            kappa: d.kappa,
            derived: Some(d),
            steady: Some(s),
        })
    }

    /// A bare 6×6 model; the cavity occupies the last two quadratures.
    pub fn from_matrices(drift: DMatrix<f64>, diffusion: DMatrix<f64>, kappa: f64) -> Result<Self> {
        if drift.shape() != (6, 6) || diffusion.shape() != (6, 6) {
            return Err(structural("node model matrices must be 6×6"));
        }
        if !(kappa > 0.0) {
            return Err(structural("cavity linewidth must be > 0"));
        }
        Ok(Self {
            drift,
            diffusion,
            kappa,
            derived: None,
            steady: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    pub max_real_part: f64,
}

/// Stable iff every drift eigenvalue has negative real part.
pub fn check_stability(m: &LinearModel) -> Result<Stability> {
    let ev = linalg::eigenvalues(&m.drift)?;
    let max_real_part = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(Stability {
        stable: max_real_part < 0.0,
        max_real_part,
    })
}

/// Tolerance on the relative residual of `AV + VAᵀ + D`.
pub const LYAPUNOV_TOL: f64 = 1e-10;

/// Stationary intracavity covariance matrix, `A V + V Aᵀ = −D`.
pub fn lyapunov_cm(m: &LinearModel) -> Result<CovarianceMatrix> {
    let st = check_stability(m)?;
    if !st.stable {
        return Err(Error::Unstable {
            max_real_part: st.max_real_part,
        });
    }
    let v = linalg::solve_lyapunov(&m.drift, &m.diffusion)?;
    let r = linalg::lyapunov_residual(&m.drift, &v, &m.diffusion);
    if !(r < LYAPUNOV_TOL) {
        return Err(crate::error::numeric(format!(
            "Lyapunov residual {r:e} above {LYAPUNOV_TOL:e}"
        )));
    }
    CovarianceMatrix::new(v, [MIRROR, BEC, CAVITY])
}
