//! Adaptive Gauss–Legendre quadrature against radial measures.
//!
//! Densities are integrated over a box `[−U, U]` split at the origin; `U` is
//! chosen from the exact tail masses of the density so that
//! `sup|f| · mass(|u| > U) ≤ tol/2`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::lattice::CompensatedSum;
use crate::measure::{CurvatureDensity, RadialMeasure};

const PANEL_ORDER: usize = 20;
const INITIAL_PANELS_PER_SIDE: usize = 64;
const MAX_DEPTH: u32 = 40;
const MAX_PANELS: usize = 400_000;
const MAX_BOX: f64 = 5_000.0;
const ROUNDING_FLOOR: f64 = 1e3 * f64::EPSILON;

fn panel_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("at least one node"));
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs
}

/// Nodes and weights of the `n`-point rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    panel_with_magnitude(f, a, b).0
}

/// The panel value together with `∫|f|` by the same rule.
fn panel_with_magnitude<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let (mut v, mut m) = (0.0, 0.0);
    for &(x, w) in panel_rule() {
        let y = f(mid + half * x);
        v += w * y;
        m += w * y.abs();
    }
    (half * v, half * m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(eps: f64) -> Self {
        Tolerance { abs: eps, rel: 0.0 }
    }

    pub fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_bound: f64,
}

/// Adaptive quadrature of `f` over `[a, b]`: a panel is accepted when its
/// 20-point value and the sum over its two halves agree within its share of `tol`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, tol: f64) -> Result<Integral> {
    if !(b > a) {
        return Ok(Integral { value: 0.0, error_bound: 0.0 });
    }
    let width = b - a;
    let mut sum = CompensatedSum::default();
    let mut err = 0.0;
    let mut count = 0usize;
    let h = width / panels as f64;
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { lo + h };
        let mut stack = vec![(lo, hi, panel(f, lo, hi), 0u32)];
        while let Some((lo, hi, whole, depth)) = stack.pop() {
            count += 1;
            if count > MAX_PANELS {
                return Err(Error::QuadratureFailed("panel budget exhausted".into()));
            }
            let mid = 0.5 * (lo + hi);
            let (left, left_mag) = panel_with_magnitude(f, lo, mid);
            let (right, right_mag) = panel_with_magnitude(f, mid, hi);
            let diff = (left + right - whole).abs();
            if !diff.is_finite() {
                return Err(Error::QuadratureFailed(format!("non-finite integrand near {mid}")));
            }
            let share = tol * (hi - lo) / width;
            // integrands like e^{2(mu − kψ)} carry relative rounding noise that no refinement removes
            let noise = ROUNDING_FLOOR * (left_mag + right_mag);
            if diff <= share.max(noise) || (hi - lo) < 1e-12 * width.max(1.0) {
                sum.add(left);
                sum.add(right);
                err += diff;
            } else if depth >= MAX_DEPTH {
                return Err(Error::QuadratureFailed(format!("no convergence near {mid}")));
            } else {
                // right half pushed first so the left half is summed first
                stack.push((mid, hi, right, depth + 1));
                stack.push((lo, mid, left, depth + 1));
            }
        }
    }
    Ok(Integral { value: sum.value(), error_bound: err })
}

/// `∫ f dμ` with absolute error at most `eps` (plus rounding).
///
/// `sup_bound` must bound `|f|` outside any compact box; it certifies the
/// truncation of the density part.
pub fn integrate<F: Fn(&[f64]) -> f64>(f: F, sup_bound: f64, mu: &RadialMeasure, eps: f64) -> Result<f64> {
    integrate_with(f, sup_bound, mu, Tolerance::absolute(eps)).map(|i| i.value)
}

/// Like [`integrate`], with tolerance `max(tol.abs, tol.rel·|∫ f dμ|)`.
pub fn integrate_with<F: Fn(&[f64]) -> f64>(f: F, sup_bound: f64, mu: &RadialMeasure, tol: Tolerance) -> Result<Integral> {
    let mut atoms = CompensatedSum::default();
    for a in &mu.atoms {
        atoms.add(a.mass * f(&a.location));
    }
    let Some(density) = &mu.density else {
        return Ok(Integral {
            value: atoms.value(),
            error_bound: 0.0,
        });
    };
    if !sup_bound.is_finite() {
        return Err(Error::TailNotDominated("integrand has no finite bound".into()));
    }
    let g = |u: f64| {
        let d = density.eval(u);
        if d == 0.0 {
            0.0
        } else {
            f(&[u]) * d
        }
    };

    // coarse pass to fix the target accuracy
    let coarse_box = 24.0;
    let h = 2.0 * coarse_box / (2 * INITIAL_PANELS_PER_SIDE) as f64;
    let coarse: f64 = (0..2 * INITIAL_PANELS_PER_SIDE)
        .map(|i| {
            let lo = -coarse_box + h * i as f64;
            panel(&g, lo, lo + h)
        })
        .sum();
    let target = tol.abs.max(tol.rel * (atoms.value() + coarse).abs());
    if !(target > 0.0) {
        return Err(Error::InvalidArgument("quadrature tolerance must be positive".into()));
    }

    let r = choose_box(density, sup_bound, 0.5 * target)?;
    check_envelope(density, r)?;
    let (tl, tr) = density.tail_masses(r);
    let tail_err = sup_bound * (tl + tr);
    let left = integrate_interval(&g, -r, 0.0, INITIAL_PANELS_PER_SIDE, 0.25 * target)?;
    let right = integrate_interval(&g, 0.0, r, INITIAL_PANELS_PER_SIDE, 0.25 * target)?;
    let mut total = atoms;
    total.add(left.value);
    total.add(right.value);
    Ok(Integral {
        value: total.value(),
        error_bound: left.error_bound + right.error_bound + tail_err,
    })
}

fn choose_box(density: &CurvatureDensity, sup_bound: f64, budget: f64) -> Result<f64> {
    let mut r = 8.0;
    while r <= MAX_BOX {
        let (tl, tr) = density.tail_masses(r);
        if sup_bound * (tl + tr) <= budget {
            return Ok(r);
        }
        r += if r < 64.0 { 2.0 } else { r * 0.25 };
    }
    Err(Error::TailNotDominated(format!(
        "density tail does not fall below {budget:e} within |u| ≤ {MAX_BOX}"
    )))
}

fn check_envelope(density: &CurvatureDensity, r: f64) -> Result<()> {
    for i in 0..32 {
        let x = r + 0.75 * i as f64;
        for u in [x, -x] {
            let d = density.eval(u);
            let env = density.envelope(u);
            if d > env * (1.0 + 1e-9) + f64::MIN_POSITIVE {
                return Err(Error::TailNotDominated(format!(
                    "density {d:e} exceeds its envelope {env:e} at u = {u}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ma_measure;
    use crate::toric::LatticePolytope;
    use crate::weights::ToricWeight;

    fn fs_measure() -> (ToricWeight, RadialMeasure) {
        let fs = ToricWeight::fubini_study(LatticePolytope::segment(0, 1).unwrap());
        let m = ma_measure(&fs).unwrap();
        (fs, m)
    }

    #[test]
    fn probability_mass() {
        let (_, m) = fs_measure();
        assert!((integrate(|_| 1.0, 1.0, &m, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(integrate(|_| 1.0, 1.0, &RadialMeasure::haar(1), 1e-12).unwrap(), 1.0);
        assert_eq!(integrate(|u| u[0], 0.0, &RadialMeasure::haar(1), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn substitution_oracle() {
        // ∫ e^{2u − 2ψ} dMA = ∫₀¹ s ds with s = ψ'(u)
        let (fs, m) = fs_measure();
        let v = integrate(|u| (2.0 * u[0] - 2.0 * fs.eval(u)).exp(), 1.0, &m, 1e-13).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn relative_tolerance_on_tiny_integrals() {
        // ∫ e^{60u − 120ψ} dMA_FS = B(31, 31)
        let (fs, m) = fs_measure();
        let v = integrate_with(|u| (60.0 * u[0] - 120.0 * fs.eval(u)).exp(), 1.0, &m, Tolerance::relative(1e-12)).unwrap();
        let mut beta = 1.0f64;
        for j in 1..=30 {
            beta *= j as f64 / (30 + j) as f64;
        }
        beta /= 61.0;
        assert!((v.value / beta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unbounded_integrand_is_rejected() {
        let (_, m) = fs_measure();
        let err = integrate(|u| u[0].exp(), f64::INFINITY, &m, 1e-6).unwrap_err();
        assert!(matches!(err, Error::TailNotDominated(_)));
    }

    #[test]
    fn rule_is_exact_for_polynomials() {
        let v: f64 = gauss_legendre_on(16, 0.0, 2.0).iter().map(|(x, w)| w * x.powi(31)).sum();
        assert!((v / (2f64.powi(32) / 32.0) - 1.0).abs() < 1e-13);
    }
}
