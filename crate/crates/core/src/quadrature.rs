//! Adaptive Gauss–Kronrod (7/15) integration of vector-valued functions on
//! the real line.
//!
//! Panels are refined in rounds. Each round evaluates its new panels in
//! parallel, but panels are kept in a fixed left-to-right order and summed
//! sequentially, so the result does not depend on the number of threads.

use rayon::prelude::*;

use crate::error::{numeric, structural, Error, Result};

// Published 7/15-point Gauss-Kronrod nodes and weights, kept at full length.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// A piece of the integration domain. Semi-infinite pieces are mapped to
/// `t ∈ (0, 1]` by `ω = c / t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Finite(f64, f64),
    /// `[a, ∞)` with `a > 0`.
    Above(f64),
    /// `(−∞, b]` with `b < 0`.
    Below(f64),
}

impl Range {
    fn check(&self) -> Result<()> {
        match *self {
            Range::Finite(a, b) if a.is_finite() && b.is_finite() && a < b => Ok(()),
            Range::Above(a) if a.is_finite() && a > 0.0 => Ok(()),
            Range::Below(b) if b.is_finite() && b < 0.0 => Ok(()),
            r => Err(structural(format!("invalid integration range {r:?}"))),
        }
    }

    fn initial(&self) -> (f64, f64) {
        match *self {
            Range::Finite(a, b) => (a, b),
            _ => (0.0, 1.0),
        }
    }

    /// Point in ω and Jacobian for the panel variable `s`.
    fn map(&self, s: f64) -> (f64, f64) {
        match *self {
            Range::Finite(..) => (s, 1.0),
            Range::Above(c) | Range::Below(c) => (c / s, c.abs() / (s * s)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    /// Relative tolerance applied to every component against its scale.
    pub tolerance: f64,
    /// Components whose scale is below this are judged absolutely.
    pub absolute_floor: f64,
    pub max_panels: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            absolute_floor: 1e-300,
            max_panels: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: Vec<f64>,
    /// Summed per-panel error estimates, one per component.
    pub error: Vec<f64>,
    pub panels: usize,
}

#[derive(Debug, Clone)]
struct Panel {
    range: usize,
    lo: f64,
    hi: f64,
    value: Vec<f64>,
    error: Vec<f64>,
}

fn gk15<F>(f: &F, range: &Range, lo: f64, hi: f64, dim: usize) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> Vec<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let eval = |x: f64| -> Result<Vec<f64>> {
        let (w, jac) = range.map(x);
        let mut y = f(w);
        if y.len() != dim {
            return Err(structural("integrand changed dimension"));
        }
        for v in y.iter_mut() {
            *v *= jac;
            if !v.is_finite() {
                return Err(numeric(format!("integrand not finite at ω = {w:e}")));
            }
        }
        Ok(y)
    };
    for (k, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let points: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &xi in points {
            let y = eval(center + half * xi)?;
            for d in 0..dim {
                kronrod[d] += wk * y[d];
                if k % 2 == 1 {
                    gauss[d] += WG[k / 2] * y[d];
                }
            }
        }
    }
    let value: Vec<f64> = kronrod.iter().map(|k| k * half).collect();
    let error = kronrod
        .iter()
        .zip(&gauss)
        .map(|(k, g)| ((k - g) * half).abs())
        .collect();
    Ok((value, error))
}

/// Integrates `f` over the union of `ranges`.
///
/// Convergence is reached when, for every component `k`, the summed error
/// estimate is at most `tolerance · max(scale(value)[k], absolute_floor)`.
pub fn integrate<F, S>(
    f: &F,
    ranges: &[Range],
    dim: usize,
    scale: S,
    settings: &Settings,
) -> Result<Integral>
where
    F: Fn(f64) -> Vec<f64> + Sync,
    S: Fn(&[f64]) -> Vec<f64>,
{
    if ranges.is_empty() || dim == 0 {
        return Err(structural("nothing to integrate"));
    }
    if !(settings.tolerance > 0.0) {
        return Err(structural("quadrature tolerance must be > 0"));
    }
    for r in ranges {
        r.check()?;
    }
    let evaluate = |jobs: Vec<(usize, f64, f64)>| -> Result<Vec<Panel>> {
        jobs.into_par_iter()
            .map(|(range, lo, hi)| {
                let (value, error) = gk15(f, &ranges[range], lo, hi, dim)?;
                Ok(Panel {
                    range,
                    lo,
                    hi,
                    value,
                    error,
                })
            })
            .collect()
    };
    let mut panels = evaluate(
        ranges
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (lo, hi) = r.initial();
                (i, lo, hi)
            })
            .collect(),
    )?;

    loop {
        let mut value = vec![0.0; dim];
        let mut error = vec![0.0; dim];
        for p in &panels {
            for d in 0..dim {
                value[d] += p.value[d];
                error[d] += p.error[d];
            }
        }
        let target: Vec<f64> = scale(&value)
            .iter()
            .map(|s| settings.tolerance * s.abs().max(settings.absolute_floor))
            .collect();
        let worst_total = error
            .iter()
            .zip(&target)
            .map(|(e, t)| e / t)
            .fold(0.0, f64::max);
        if worst_total <= 1.0 {
            return Ok(Integral {
                value,
                error,
                panels: panels.len(),
            });
        }
        if panels.len() >= settings.max_panels {
            let achieved = settings.tolerance * worst_total;
            return Err(Error::Quadrature {
                requested: settings.tolerance,
                achieved,
                panels: panels.len(),
            });
        }

        let badness: Vec<f64> = panels
            .iter()
            .map(|p| {
                p.error
                    .iter()
                    .zip(&target)
                    .map(|(e, t)| e / t)
                    .fold(0.0, f64::max)
            })
            .collect();
        let worst = badness.iter().copied().fold(0.0, f64::max);
        let cut = 0.25 * worst;
        let budget = settings.max_panels - panels.len();
        let mut jobs = Vec::new();
        let mut split = vec![false; panels.len()];
        for (i, p) in panels.iter().enumerate() {
            if badness[i] >= cut && jobs.len() / 2 < budget {
                let mid = 0.5 * (p.lo + p.hi);
                if !(mid > p.lo && mid < p.hi) {
                    continue;
                }
                split[i] = true;
                jobs.push((p.range, p.lo, mid));
                jobs.push((p.range, mid, p.hi));
            }
        }
        if jobs.is_empty() {
            return Err(Error::Quadrature {
                requested: settings.tolerance,
                achieved: settings.tolerance * worst_total,
                panels: panels.len(),
            });
        }
        let mut children = evaluate(jobs)?.into_iter();
        let mut next = Vec::with_capacity(panels.len() + split.iter().filter(|s| **s).count());
        for (p, s) in panels.into_iter().zip(split) {
            if s {
                next.push(children.next().unwrap());
                next.push(children.next().unwrap());
            } else {
                next.push(p);
            }
        }
        panels = next;
    }
}

/// Splits the real line at the sorted, de-duplicated `breakpoints` inside
/// `[−w, w]`, plus the two tails beyond `±w`.
pub fn real_line(breakpoints: &[f64], w: f64) -> Result<Vec<Range>> {
    if !(w.is_finite() && w > 0.0) {
        return Err(structural("window half-width must be finite and > 0"));
    }
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && x.abs() < w)
        .chain([-w, w])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * w);
    let mut ranges = vec![Range::Below(-w)];
    ranges.extend(pts.windows(2).map(|p| Range::Finite(p[0], p[1])));
    ranges.push(Range::Above(w));
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn abs_scale(v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| x.abs()).collect()
    }

    #[test]
    fn polynomial_is_exact() {
        let f = |x: f64| vec![x.powi(6), 1.0];
        let r = integrate(
            &f,
            &[Range::Finite(-1.0, 2.0)],
            2,
            abs_scale,
            &Settings::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value[0], (128.0 + 1.0) / 7.0, max_relative = 1e-14);
        assert_relative_eq!(r.value[1], 3.0, max_relative = 1e-14);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn narrow_lorentzian_over_real_line() {
        // ∫ γ / (x² + γ²) dx = π, with the peak placed on a breakpoint.
        for gamma in [1e-4, 1.0, 1e3] {
            let f = move |x: f64| vec![gamma / ((x - 5.0).powi(2) + gamma * gamma)];
            let ranges = real_line(&[5.0], 50.0).unwrap();
            let r = integrate(
                &f,
                &ranges,
                1,
                abs_scale,
                &Settings {
                    tolerance: 1e-10,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_relative_eq!(r.value[0], PI, max_relative = 1e-9);
            assert!(r.error[0] <= 1e-10 * PI);
        }
    }

    #[test]
    fn semi_infinite_tails() {
        let f = |x: f64| vec![1.0 / (1.0 + x * x)];
        let up = integrate(&f, &[Range::Above(1.0)], 1, abs_scale, &Settings::default()).unwrap();
        let down = integrate(
            &f,
            &[Range::Below(-1.0)],
            1,
            abs_scale,
            &Settings::default(),
        )
        .unwrap();
        assert_relative_eq!(up.value[0], PI / 4.0, max_relative = 1e-9);
        assert_relative_eq!(down.value[0], PI / 4.0, max_relative = 1e-9);
    }

    #[test]
    fn budget_exhaustion_reports_achieved_tolerance() {
        let f = |x: f64| vec![x.sqrt().recip()];
        let s = Settings {
            tolerance: 1e-14,
            max_panels: 8,
            ..Default::default()
        };
        match integrate(&f, &[Range::Finite(0.0, 1.0)], 1, abs_scale, &s) {
            Err(Error::Quadrature {
                requested,
                achieved,
                panels,
            }) => {
                assert_eq!(requested, 1e-14);
                assert!(achieved > requested);
                assert!(panels >= 8);
            }
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let f = |x: f64| vec![(3.0 * x).sin() / (1.0 + (x - 0.3).powi(2) * 1e4), x.cos()];
        let ranges = real_line(&[0.3], 10.0).unwrap();
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| {
                    integrate(
                        &f,
                        &ranges[1..ranges.len() - 1],
                        2,
                        abs_scale,
                        &Settings::default(),
                    )
                    .unwrap()
                })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
    }

    #[test]
    fn real_line_partition() {
        let r = real_line(&[0.0, 2.0, -2.0, 2.0, 100.0], 10.0).unwrap();
        assert_eq!(
            r,
            vec![
                Range::Below(-10.0),
                Range::Finite(-10.0, -2.0),
                Range::Finite(-2.0, 0.0),
                Range::Finite(0.0, 2.0),
                Range::Finite(2.0, 10.0),
                Range::Above(10.0),
            ]
        );
        assert!(real_line(&[], 0.0).is_err());
    }
}
