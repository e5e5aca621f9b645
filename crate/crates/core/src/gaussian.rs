//! Covariance-matrix algebra for zero-mean Gaussian states.
//!
//! Quadratures are ordered `(x₁, p₁, x₂, p₂, …)` with `x = (a + a†)/√2`, so the
//! vacuum has variance 1/2 and the symplectic form is block-diagonal in
//! `[[0, 1], [-1, 0]]`. A state is physical iff `V > 0` and every symplectic
//! eigenvalue is at least 1/2.
//!
//! ```
//! use hybrid_swap::gaussian::{CovarianceMatrix, Bipartition, log_negativity};
//!
//! let tmsv = CovarianceMatrix::two_mode_squeezed(0.5, ["a", "b"]).unwrap();
//! let en = log_negativity(&tmsv, &Bipartition::pair(0, 1)).unwrap();
//! assert!((en - 1.0).abs() < 1e-12);
//! ```

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{numeric, structural, Result};

/// Variance of either vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Relative tolerance on `V − Vᵀ`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Physicality tolerance tier.
///
/// Analytic constructions are held to `Strict`; matrices that come out of the
/// frequency integral carry quadrature error and are checked at `Loose`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Strict,
    Loose,
}

impl Tier {
    pub fn tolerance(self) -> f64 {
        match self {
            Tier::Strict => 1e-9,
            Tier::Loose => 1e-6,
        }
    }
}

/// Outcome of [`CovarianceMatrix::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub symmetric: bool,
    pub positive_definite: bool,
    pub min_symplectic_eigenvalue: f64,
    pub physical: bool,
    pub tier: Tier,
}

/// Two disjoint sets of mode indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(side_a: Vec<usize>, side_b: Vec<usize>) -> Result<Self> {
        if side_a.is_empty() || side_b.is_empty() {
            return Err(structural("bipartition sides must be non-empty"));
        }
        let mut seen = HashSet::new();
        for &i in side_a.iter().chain(&side_b) {
            if !seen.insert(i) {
                return Err(structural(format!("mode {i} appears twice in bipartition")));
            }
        }
        Ok(Self { side_a, side_b })
    }

    /// One mode against one mode.
    pub fn pair(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "a pair needs two distinct modes");
        Self {
            side_a: vec![a],
            side_b: vec![b],
        }
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.side_b
    }

    fn check(&self, n_modes: usize) -> Result<()> {
        match self
            .side_a
            .iter()
            .chain(&self.side_b)
            .find(|&&i| i >= n_modes)
        {
            Some(i) => Err(structural(format!(
                "mode index {i} out of range for {n_modes} modes"
            ))),
            None => Ok(()),
        }
    }
}

/// Symmetric `2n × 2n` second-moment matrix with one label per mode.
#[derive(Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    labels: Vec<String>,
}

impl fmt::Debug for CovarianceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovarianceMatrix")
            .field("labels", &self.labels)
            .field("entries", &self.entries)
            .finish()
    }
}

impl CovarianceMatrix {
    /// Wraps `entries`. Only structure is checked here; use
    /// [`validate`](Self::validate) for symmetry and physicality.
    pub fn new<S: Into<String>>(
        entries: DMatrix<f64>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let (r, c) = entries.shape();
        if r != c || r % 2 != 0 || r == 0 {
            return Err(structural(format!(
                "covariance matrix must be square with even nonzero size, got {r}×{c}"
            )));
        }
        if labels.len() != r / 2 {
            return Err(structural(format!(
                "{} labels for a {}-mode matrix",
                labels.len(),
                r / 2
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(structural(format!("duplicate mode label {dup:?}")));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(numeric("covariance matrix has non-finite entries"));
        }
        Ok(Self { entries, labels })
    }

    pub fn vacuum<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let dim = 2 * labels.len();
        Self::new(DMatrix::identity(dim, dim) * VACUUM_VARIANCE, labels)
            .expect("vacuum labels must be distinct and non-empty")
    }

    /// Product of thermal states, `diag(n + 1/2, n + 1/2)` per mode.
    pub fn thermal<S: Into<String>>(
        occupations: &[f64],
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let diag = occupations
            .iter()
            .flat_map(|&n| [n + VACUUM_VARIANCE, n + VACUUM_VARIANCE]);
        let d = nalgebra::DVector::from_iterator(2 * occupations.len(), diag);
        Self::new(DMatrix::from_diagonal(&d), labels)
    }

    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    pub fn two_mode_squeezed<S: Into<String>>(
        r: f64,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let c = (2.0 * r).cosh() / 2.0;
        let s = (2.0 * r).sinh() / 2.0;
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            c, 0.0, s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, -s, 0.0, c,
        ]);
        Self::new(m, labels)
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| structural(format!("unknown mode label {label:?}")))
    }

    /// The 2×2 block coupling mode `i` to mode `j`.
    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.entries.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    /// Replaces the entries by `(V + Vᵀ)/2`.
    pub fn symmetrized(mut self) -> Self {
        let t = self.entries.transpose();
        self.entries = (&self.entries + t) * 0.5;
        self
    }

    pub fn asymmetry(&self) -> f64 {
        let scale = self.entries.amax().max(f64::MIN_POSITIVE);
        (&self.entries - self.entries.transpose()).amax() / scale
    }

    /// Symmetry, positivity and the uncertainty relation, at the given tier.
    pub fn validate(&self, tier: Tier) -> Result<Validity> {
        let symmetric = self.asymmetry() <= SYMMETRY_TOL;
        let sym = self.clone().symmetrized();
        let positive_definite = sym.entries.clone().cholesky().is_some();
        let spectrum = sym.symplectic_spectrum()?;
        let min = spectrum.last().copied().unwrap_or(f64::NAN);
        let physical = symmetric && positive_definite && min >= VACUUM_VARIANCE - tier.tolerance();
        Ok(Validity {
            symmetric,
            positive_definite,
            min_symplectic_eigenvalue: min,
            physical,
            tier,
        })
    }

    /// Symplectic eigenvalues, one per mode, in descending order.
    pub fn symplectic_spectrum(&self) -> Result<Vec<f64>> {
        if self.entries.iter().any(|x| !x.is_finite()) {
            return Err(numeric("non-finite covariance entries"));
        }
        let n = self.n_modes();
        let omega = symplectic_form(n);
        // For V > 0 the spectrum of iΩV equals that of the Hermitian iLᵀΩL
        // (V = LLᵀ). LᵀΩL is antisymmetric, so its singular values are the
        // moduli ν_k, each twice. Squaring it first would cost half the digits.
        let mut moduli: Vec<f64> = match self.entries.clone().cholesky() {
            Some(chol) => {
                let l = chol.l();
                let k = l.transpose() * &omega * &l;
                let k = (&k - k.transpose()) * 0.5;
                k.singular_values().iter().copied().collect()
            }
            None => {
                let schur = (&omega * &self.entries)
                    .try_schur(f64::EPSILON, 100_000)
                    .ok_or_else(|| numeric("Schur decomposition did not converge"))?;
                schur
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| z.norm())
                    .collect()
            }
        };
        moduli.sort_by(|a, b| b.total_cmp(a));
        Ok(moduli.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
    }

    /// Flips the momentum quadrature of every mode on side B.
    pub fn partial_transpose(&self, part: &Bipartition) -> Result<Self> {
        part.check(self.n_modes())?;
        let mut out = self.entries.clone();
        for &m in part.side_b() {
            let p = 2 * m + 1;
            out.row_mut(p).neg_mut();
            out.column_mut(p).neg_mut();
        }
        Ok(Self {
            entries: out,
            labels: self.labels.clone(),
        })
    }

    /// Sub-matrix on `keep`, in the order given.
    pub fn reduce(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(structural("cannot reduce to zero modes"));
        }
        let mut seen = HashSet::new();
        for &k in keep {
            if k >= self.n_modes() {
                return Err(structural(format!(
                    "mode index {k} out of range for {} modes",
                    self.n_modes()
                )));
            }
            if !seen.insert(k) {
                return Err(structural(format!("mode index {k} repeated")));
            }
        }
        let idx: Vec<usize> = keep.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let entries = self.entries.select_rows(&idx).select_columns(&idx);
        let labels = keep.iter().map(|&k| self.labels[k].clone()).collect();
        Ok(Self { entries, labels })
    }

    pub fn reduce_labels(&self, keep: &[&str]) -> Result<Self> {
        let idx = keep
            .iter()
            .map(|l| self.index_of(l))
            .collect::<Result<Vec<_>>>()?;
        self.reduce(&idx)
    }

    /// Block-diagonal composition of independent systems.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if let Some(l) = self.labels.iter().find(|l| other.labels.contains(l)) {
            return Err(structural(format!("label {l:?} present on both sides")));
        }
        let (d1, d2) = (self.entries.nrows(), other.entries.nrows());
        let mut out = DMatrix::zeros(d1 + d2, d1 + d2);
        out.view_mut((0, 0), (d1, d1)).copy_from(&self.entries);
        out.view_mut((d1, d1), (d2, d2)).copy_from(&other.entries);
        let labels = self.labels.iter().chain(&other.labels).cloned().collect();
        Ok(Self {
            entries: out,
            labels,
        })
    }

    /// `S V Sᵀ` with labels kept.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.shape() != self.entries.shape() {
            return Err(structural("transformation size mismatch"));
        }
        Ok(Self {
            entries: s * &self.entries * s.transpose(),
            labels: self.labels.clone(),
        })
    }

    pub fn relabeled<S: Into<String>>(&self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(self.entries.clone(), labels)
    }
}

/// `⊕ [[0, 1], [-1, 0]]` over `n` modes.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Least symplectic eigenvalue of the partial transpose of a two-mode CM,
/// from the `σ = det M + det M′ − 2 det N` invariant.
pub fn two_mode_eta_minus(v: &CovarianceMatrix) -> Result<f64> {
    if v.n_modes() != 2 {
        return Err(structural("closed-form η₋ needs exactly two modes"));
    }
    let m = v.block(0, 0);
    let mp = v.block(1, 1);
    let n = v.block(0, 1);
    let sigma = m.determinant() + mp.determinant() - 2.0 * n.determinant();
    let det = v.entries().determinant();
    let disc = sigma * sigma - 4.0 * det;
    let scale = sigma * sigma;
    let disc = if disc < 0.0 {
        if disc < -1e-10 * scale {
            return Err(numeric(format!(
                "σ² − 4 det V = {disc:e} < 0: not a valid covariance matrix"
            )));
        }
        0.0
    } else {
        disc
    };
    // (σ − √disc)/2 rewritten to avoid cancellation when η₋ is small.
    let denom = sigma + disc.sqrt();
    if denom <= 0.0 || det < 0.0 {
        return Err(numeric("two-mode invariants out of physical range"));
    }
    Ok((2.0 * det / denom).sqrt())
}

/// Logarithmic negativity between one mode on each side, via the two-mode
/// closed form. Larger matrices are reduced to the named pair first.
pub fn log_negativity(v: &CovarianceMatrix, part: &Bipartition) -> Result<f64> {
    part.check(v.n_modes())?;
    if part.side_a().len() != 1 || part.side_b().len() != 1 {
        return Err(structural(
            "closed-form negativity needs one mode on each side",
        ));
    }
    let pair = v.reduce(&[part.side_a()[0], part.side_b()[0]])?;
    let eta = two_mode_eta_minus(&pair)?;
    Ok((-(2.0 * eta).ln()).max(0.0))
}

/// Logarithmic negativity from the full symplectic spectrum of the partial
/// transpose. Works for any bipartition of the modes it names.
pub fn log_negativity_spectral(v: &CovarianceMatrix, part: &Bipartition) -> Result<f64> {
    part.check(v.n_modes())?;
    let keep: Vec<usize> = part.side_a().iter().chain(part.side_b()).copied().collect();
    let sub = v.reduce(&keep)?;
    let na = part.side_a().len();
    let local = Bipartition::new((0..na).collect(), (na..keep.len()).collect())?;
    let spectrum = sub.partial_transpose(&local)?.symplectic_spectrum()?;
    Ok(spectrum.iter().map(|&nu| (-(2.0 * nu).ln()).max(0.0)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn vacuum_is_pure_and_physical() {
        let v = CovarianceMatrix::vacuum(["a"]);
        let r = v.validate(Tier::Strict).unwrap();
        assert!(r.physical);
        assert_abs_diff_eq!(r.min_symplectic_eigenvalue, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn sub_vacuum_noise_is_unphysical() {
        let v = CovarianceMatrix::new(diag(&[0.25, 0.25]), ["a"]).unwrap();
        let r = v.validate(Tier::Strict).unwrap();
        assert!(!r.physical);
        assert_abs_diff_eq!(r.min_symplectic_eigenvalue, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn label_count_must_match() {
        assert!(matches!(
            CovarianceMatrix::new(diag(&[0.5, 0.5, 0.5, 0.5]), ["a"]),
            Err(crate::Error::Structural(_))
        ));
        assert!(CovarianceMatrix::new(DMatrix::zeros(3, 3), ["a"]).is_err());
    }

    #[test]
    fn spectra_of_simple_states() {
        let v = CovarianceMatrix::vacuum(["a", "b"]);
        assert_eq!(v.symplectic_spectrum().unwrap().len(), 2);
        for nu in v.symplectic_spectrum().unwrap() {
            assert_abs_diff_eq!(nu, 0.5, epsilon = 1e-15);
        }
        let sq = CovarianceMatrix::new(diag(&[2.0, 1.0 / 8.0]), ["a"]).unwrap();
        assert_abs_diff_eq!(sq.symplectic_spectrum().unwrap()[0], 0.5, epsilon = 1e-14);
        let th = CovarianceMatrix::new(diag(&[1.5, 1.5]), ["a"]).unwrap();
        assert_abs_diff_eq!(th.symplectic_spectrum().unwrap()[0], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn spectrum_of_indefinite_matrix_uses_schur_path() {
        let v = CovarianceMatrix::new(diag(&[-1.0, -2.0]), ["a"]).unwrap();
        assert_abs_diff_eq!(
            v.symplectic_spectrum().unwrap()[0],
            2f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(!v.validate(Tier::Loose).unwrap().physical);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(
            CovarianceMatrix::new(m, ["a"]),
            Err(crate::Error::Numeric(_))
        ));
    }

    #[test]
    fn partial_transpose_flips_cross_momentum() {
        let mut m = diag(&[1.0, 1.0, 1.0, 1.0]);
        m[(0, 2)] = 0.3;
        m[(2, 0)] = 0.3;
        m[(1, 3)] = 0.2;
        m[(3, 1)] = 0.2;
        let v = CovarianceMatrix::new(m, ["a", "b"]).unwrap();
        let pt = v.partial_transpose(&Bipartition::pair(0, 1)).unwrap();
        assert_eq!(pt.block(0, 1), Matrix2::new(0.3, 0.0, 0.0, -0.2));
        assert_eq!(pt.block(0, 0), v.block(0, 0));
        let back = pt.partial_transpose(&Bipartition::pair(0, 1)).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn overlapping_bipartition_rejected() {
        assert!(Bipartition::new(vec![0, 1], vec![1]).is_err());
        let v = CovarianceMatrix::vacuum(["a", "b"]);
        let p = Bipartition::new(vec![0], vec![5]).unwrap();
        assert!(v.partial_transpose(&p).is_err());
    }

    #[test]
    fn tmsv_negativity_closed_form() {
        let r: f64 = 0.5;
        let v = CovarianceMatrix::two_mode_squeezed(r, ["a", "b"]).unwrap();
        let eta = two_mode_eta_minus(&v).unwrap();
        assert_abs_diff_eq!(eta, (-2.0 * r).exp() / 2.0, epsilon = 1e-14);
        let p = Bipartition::pair(0, 1);
        assert_abs_diff_eq!(log_negativity(&v, &p).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            log_negativity_spectral(&v, &p).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn separable_states_have_zero_negativity() {
        let p = Bipartition::pair(0, 1);
        let vac = CovarianceMatrix::vacuum(["a", "b"]);
        assert_eq!(log_negativity(&vac, &p).unwrap(), 0.0);
        let th = CovarianceMatrix::thermal(&[0.7, 3.0], ["a", "b"]).unwrap();
        assert_eq!(log_negativity(&th, &p).unwrap(), 0.0);
        assert_eq!(log_negativity_spectral(&th, &p).unwrap(), 0.0);
    }

    #[test]
    fn negativity_needs_single_mode_sides() {
        let v = CovarianceMatrix::vacuum(["a", "b", "c"]);
        let p = Bipartition::new(vec![0, 1], vec![2]).unwrap();
        assert!(log_negativity(&v, &p).is_err());
        assert_eq!(log_negativity_spectral(&v, &p).unwrap(), 0.0);
    }

    #[test]
    fn negativity_reduces_inside_larger_state() {
        let tmsv = CovarianceMatrix::two_mode_squeezed(0.5, ["a", "b"]).unwrap();
        let v = CovarianceMatrix::vacuum(["x"]).direct_sum(&tmsv).unwrap();
        let en = log_negativity(&v, &Bipartition::pair(1, 2)).unwrap();
        assert_abs_diff_eq!(en, 1.0, epsilon = 1e-12);
        assert_eq!(log_negativity(&v, &Bipartition::pair(0, 2)).unwrap(), 0.0);
    }

    #[test]
    fn reduce_and_direct_sum() {
        let a = CovarianceMatrix::thermal(&[1.0], ["a"]).unwrap();
        let b = CovarianceMatrix::two_mode_squeezed(0.3, ["b", "c"]).unwrap();
        let s = a.direct_sum(&b).unwrap();
        assert_eq!(s.labels(), ["a", "b", "c"]);
        assert_eq!(s.reduce(&[0]).unwrap(), a);
        assert_eq!(s.reduce(&[1, 2]).unwrap(), b);
        assert_eq!(s.reduce(&[0, 1, 2]).unwrap(), s);
        assert_abs_diff_eq!(
            s.entries().determinant(),
            a.entries().determinant() * b.entries().determinant(),
            epsilon = 1e-12
        );
        let swapped = s.reduce_labels(&["c", "a"]).unwrap();
        assert_eq!(swapped.labels(), ["c", "a"]);
        assert_eq!(swapped.block(0, 0), s.block(2, 2));
        assert!(s.reduce(&[]).is_err());
        assert!(s.reduce(&[1, 1]).is_err());
        assert!(a.direct_sum(&a).is_err());
    }

    #[test]
    fn direct_sum_spectrum_is_union() {
        let a = CovarianceMatrix::thermal(&[2.0], ["a"]).unwrap();
        let b = CovarianceMatrix::thermal(&[0.25], ["b"]).unwrap();
        let s = a.direct_sum(&b).unwrap().symplectic_spectrum().unwrap();
        assert_abs_diff_eq!(s[0], 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], 0.75, epsilon = 1e-14);
    }
}
