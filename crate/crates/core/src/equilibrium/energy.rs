//! Monge–Ampère energy differences and arithmetic degrees of toric weights on
//! curves, anchored at `deĝ(canonical) = 0`.

use serde::{Deserialize, Serialize};

use super::{default_u_nodes, envelope, equilibrium_as_weight, GridFunction};
use crate::bergman::{volume_estimate, ToricModel, VolumeEstimate};
use crate::error::{Error, Result};
use crate::measure::{CurvatureDensity, RadialMeasure};
use crate::quadrature::{integrate, integrate_interval};
use crate::toric::support_function;
use crate::weights::ToricWeight;

const ENERGY_EPS: f64 = 1e-13;

fn interval(w: &ToricWeight) -> Result<(f64, f64)> {
    w.polytope()
        .interval()
        .map(|(a, b)| (a as f64, b as f64))
        .ok_or(Error::DimensionUnsupported(w.dim()))
}

/// `∫ f dMA(ψ)` for the unnormalized measure `MA(ψ) = ψ''` of total mass `vol(L)`.
///
/// `sup_bound` bounds `|f|` on the whole line.
pub fn ma_integral<F: Fn(f64) -> f64>(w: &ToricWeight, f: F, sup_bound: f64) -> Result<f64> {
    let (a, b) = interval(w)?;
    let vol = b - a;
    let parts = w.curvature_parts()?;
    let mut total: f64 = parts.atoms.iter().map(|&(u, m)| m * f(u)).sum();
    for (coef, kind) in parts.densities {
        let piece = ToricWeight::new(w.polytope().clone(), kind)?;
        let mu = RadialMeasure::new(1, Vec::new(), Some(CurvatureDensity { weight: piece, mass: 1.0 }))?;
        total += coef * vol * integrate(|u: &[f64]| f(u[0]), sup_bound, &mu, ENERGY_EPS / (coef.abs() * vol))?;
    }
    Ok(total)
}

fn same_polytope(w1: &ToricWeight, w0: &ToricWeight) -> Result<()> {
    if w1.polytope() != w0.polytope() {
        return Err(Error::InvalidArgument("weights live on different polytopes".into()));
    }
    if w1.dim() != 1 {
        return Err(Error::DimensionUnsupported(w1.dim()));
    }
    Ok(())
}

fn difference_bound(w1: &ToricWeight, w0: &ToricWeight) -> f64 {
    let (l1, h1) = w1.offset_bounds();
    let (l0, h0) = w0.offset_bounds();
    (h1 - l0).abs().max((l1 - h0).abs())
}

/// `∫ (ψ₁−ψ₀) dMA(ψ₀) + ∫ (ψ₁−ψ₀) dMA(ψ₁)`: the sum of the mixed terms in the
/// variation of the degree from `w0` to `w1`.
pub fn variation_pairing(w1: &ToricWeight, w0: &ToricWeight) -> Result<f64> {
    same_polytope(w1, w0)?;
    let g = |u: f64| w1.eval1(u) - w0.eval1(u);
    let bound = difference_bound(w1, w0);
    Ok(ma_integral(w0, g, bound)? + ma_integral(w1, g, bound)?)
}

/// `E(w1) − E(w0)` with unnormalized mixed Monge–Ampère masses.
pub fn energy_difference(w1: &ToricWeight, w0: &ToricWeight) -> Result<f64> {
    Ok(0.5 * variation_pairing(w1, w0)?)
}

/// `deĝ(ĉ₁(L, w)²) = 2·(E(w) − E(canonical))`.
pub fn arithmetic_degree(w: &ToricWeight) -> Result<f64> {
    variation_pairing(w, &ToricWeight::canonical(w.polytope().clone()))
}

/// The same degree, with `∫ g dMA(ψ)` rewritten as `∫_Δ g((ψ')⁻¹(p)) dp`.
/// Needs a weight whose curvature is a density (no kinks).
pub fn arithmetic_degree_by_slopes(w: &ToricWeight) -> Result<f64> {
    let (a, b) = interval(w)?;
    if !w.is_smooth() {
        return Err(Error::WeightNotSmooth);
    }
    let p = w.polytope();
    let g = |u: f64| w.eval1(u) - support_function(p, &[u]);
    let (beta_lo, beta_hi) = w.asymptotic_offsets()?;
    let integrand = |q: f64| match inverse_slope(w, q) {
        Some(u) => g(u),
        None if q - a < b - q => beta_lo,
        None => beta_hi,
    };
    // the integrand has a kink where the slope of ψ crosses the kink of Ψ
    let p0 = w.slope1(0.0);
    let left = integrate_interval(&integrand, a, p0, 8, ENERGY_EPS)?;
    let right = integrate_interval(&integrand, p0, b, 8, ENERGY_EPS)?;
    Ok((b - a) * g(0.0) + left.value + right.value)
}

/// `u` with `ψ'(u) = p`, or `None` when `p` is closer to an end of Δ than the
/// slope can resolve.
fn inverse_slope(w: &ToricWeight, p: f64) -> Option<f64> {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while w.slope1(lo) >= p {
        lo *= 2.0;
        if lo < -1e4 {
            return None;
        }
    }
    while w.slope1(hi) <= p {
        hi *= 2.0;
        if hi > 1e4 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if w.slope1(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `deĝ` of the equilibrium weight `P_Xψ`. When the envelope reproduces the
/// sampled weight the smooth weight itself is used, otherwise the sampled
/// envelope.
pub fn degree_of_equilibrium(w: &ToricWeight) -> Result<f64> {
    let (a, b) = interval(w)?;
    let samples = GridFunction::sample(w, &default_u_nodes())?;
    let env = envelope(&samples, a, b)?;
    let gap = samples
        .values
        .iter()
        .zip(&env.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if gap <= 1e-12 {
        arithmetic_degree(w)
    } else {
        arithmetic_degree(&equilibrium_as_weight(w)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub weight: ToricWeight,
    pub degree: f64,
    pub energy: f64,
    pub anchor: String,
}

pub fn degree_report(w: &ToricWeight) -> Result<DegreeReport> {
    let degree = arithmetic_degree(w)?;
    Ok(DegreeReport {
        weight: w.clone(),
        degree,
        energy: 0.5 * degree,
        anchor: "canonical=0".into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeReport {
    /// Extrapolated `v_∞` of the theta volume scan.
    pub vol_estimate: f64,
    /// `deĝ(w)`.
    pub degree: f64,
    /// `deĝ(P_X w)`.
    pub degree_equilibrium: f64,
    /// `vol_estimate − deĝ(P_X w)`.
    pub gap: f64,
    /// `vol_estimate − deĝ(w)`.
    pub excess: f64,
    /// `deĝ(P_X w) − deĝ(w)`.
    pub predicted_excess: f64,
    pub scan: VolumeEstimate,
}

pub fn hodge_gap(w: &ToricWeight, mu: &RadialMeasure, k_list: &[u32]) -> Result<HodgeReport> {
    let model = ToricModel::new(w.clone(), mu.clone())?;
    let scan = volume_estimate(&model, k_list)?;
    let degree = arithmetic_degree(w)?;
    let degree_equilibrium = degree_of_equilibrium(w)?;
    let vol = scan.fit.limit;
    Ok(HodgeReport {
        vol_estimate: vol,
        degree,
        degree_equilibrium,
        gap: vol - degree_equilibrium,
        excess: vol - degree,
        predicted_excess: degree_equilibrium - degree,
        scan,
    })
}
