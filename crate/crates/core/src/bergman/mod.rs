//! Section lattices of toric models: Gram matrices of monomial bases, the
//! Bergman distortion `ρ`, the theta distortion `Θ`, and the volume estimators
//! built from them.

mod dense;
pub mod sup;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, jacobi::sigma2, log_theta1, EuclideanLattice};
use crate::measure::RadialMeasure;
use crate::quadrature::{gauss_legendre_on, integrate_with, Tolerance};
use crate::toric::{lattice_points, LatticePolytope, SectionSpace};
use crate::weights::{ToricWeight, WeightKind};

pub use dense::{theta_distortion_dense, theta_identity, theta_identity_check, ThetaIdentity};

/// Default relative tolerance for Gram entries.
pub const DEFAULT_GRAM_RTOL: f64 = 1e-12;

/// A weight together with the measure defining the L² norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToricModel {
    pub weight: ToricWeight,
    pub measure: RadialMeasure,
}

impl ToricModel {
    pub fn new(weight: ToricWeight, measure: RadialMeasure) -> Result<Self> {
        if weight.dim() != measure.dim {
            return Err(Error::InvalidMeasure(format!(
                "measure dimension {} does not match the weight dimension {}",
                measure.dim,
                weight.dim()
            )));
        }
        measure.validate()?;
        Ok(ToricModel { weight, measure })
    }

    pub fn polytope(&self) -> &LatticePolytope {
        self.weight.polytope()
    }

    pub fn section_space(&self, k: u32) -> Result<SectionSpace> {
        lattice_points(self.polytope(), k)
    }

    pub fn gram(&self, k: u32) -> Result<GramData> {
        gram_matrix(&self.section_space(k)?, &self.measure, &self.weight, DEFAULT_GRAM_RTOL)
    }
}

/// The (diagonal) Gram matrix of the monomial basis of `H⁰(X, kL)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramData {
    pub space: SectionSpace,
    pub weight: ToricWeight,
    pub measure: RadialMeasure,
    /// `M_mm`, in the order of `space.exponents`.
    pub diag: Vec<f64>,
    /// Quadrature error bound per entry.
    pub errors: Vec<f64>,
}

/// `‖χ^m(x)‖²_{kψ} = e^{2⟨m,u⟩ − 2kψ(u)}` for every basis monomial.
pub fn eval_data(space: &SectionSpace, w: &ToricWeight, u: &[f64]) -> Vec<f64> {
    let kpsi = space.k as f64 * w.eval(u);
    space
        .exponents
        .iter()
        .map(|m| (2.0 * (dot(m, u) - kpsi)).exp())
        .collect()
}

fn dot(m: &[i64], u: &[f64]) -> f64 {
    m.iter().zip(u).map(|(&a, &b)| a as f64 * b).sum()
}

/// Peels off outer constant shifts: `ψ = base + c`.
fn split_shift(w: &ToricWeight) -> (ToricWeight, f64) {
    let mut kind = w.kind().clone();
    let mut c = 0.0;
    while let WeightKind::Shifted { base, c: dc } = kind {
        c += dc;
        kind = *base;
    }
    (
        ToricWeight::new(w.polytope().clone(), kind).expect("base of a valid weight"),
        c,
    )
}

/// `M_mm = ∫ e^{2⟨m,u⟩ − 2kψ(u)} dμ`; off-diagonal entries vanish by torus invariance.
pub fn gram_matrix(space: &SectionSpace, mu: &RadialMeasure, w: &ToricWeight, rtol: f64) -> Result<GramData> {
    if space.polytope != *w.polytope() {
        return Err(Error::InvalidArgument("section space and weight use different polytopes".into()));
    }
    if mu.dim != space.dim() {
        return Err(Error::InvalidMeasure("measure dimension mismatch".into()));
    }
    let (base, shift) = split_shift(w);
    let k = space.k as f64;
    let (lo, _) = base.offset_bounds();
    let sup_bound = (-2.0 * k * lo).exp();
    let entries: Vec<(f64, f64)> = space
        .exponents
        .par_iter()
        .map(|m| {
            let f = |u: &[f64]| (2.0 * (dot(m, u) - k * base.eval(u))).exp();
            integrate_with(f, sup_bound, mu, Tolerance::relative(rtol)).map(|i| (i.value, i.error_bound))
        })
        .collect::<Result<_>>()?;
    let scale = (-2.0 * k * shift).exp();
    let diag: Vec<f64> = entries.iter().map(|e| e.0 * scale).collect();
    if diag.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::QuadratureFailed("Gram entry is not a positive finite number".into()));
    }
    Ok(GramData {
        space: space.clone(),
        weight: w.clone(),
        measure: mu.clone(),
        diag,
        errors: entries.iter().map(|e| e.1 * scale).collect(),
    })
}

impl GramData {
    pub fn k(&self) -> u32 {
        self.space.k
    }

    pub fn rank(&self) -> usize {
        self.diag.len()
    }

    pub fn lattice(&self) -> EuclideanLattice {
        EuclideanLattice::diagonal(self.diag.clone()).expect("positive Gram entries")
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag))
    }

    pub fn log_det(&self) -> f64 {
        self.diag.iter().map(|d| d.ln()).sum()
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        eval_data(&self.space, &self.weight, u)
    }

    /// Upper bound on `Θ(t; u)` over all `u`.
    fn theta_sup_bound(&self, t: f64) -> f64 {
        let (lo, _) = self.weight.offset_bounds();
        let e = (-2.0 * self.k() as f64 * lo).exp();
        2.0 * PI * self.diag.iter().map(|&m| e * sigma2(t * m)).sum::<f64>()
    }
}

/// `ρ(u) = Σ_m ‖χ^m(u)‖² / M_mm`.
pub fn rho(g: &GramData, u: &[f64]) -> f64 {
    g.eval(u).iter().zip(&g.diag).map(|(c, m)| c / m).sum()
}

/// `Θ(t; u) = 2π Σ_m ‖χ^m(u)‖² σ²(t M_mm)`; for a diagonal Gram matrix the
/// cross terms of the lattice average cancel by symmetry.
pub fn theta_distortion(g: &GramData, u: &[f64], t: f64) -> f64 {
    2.0 * PI * g.eval(u).iter().zip(&g.diag).map(|(c, &m)| c * sigma2(t * m)).sum::<f64>()
}

/// `h⁰_θ` of the section lattice.
pub fn section_h0_theta(g: &GramData) -> f64 {
    g.diag.iter().map(|&m| log_theta1(m)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UIntegral {
    /// `∫ Θ(t; u) dμ` by quadrature.
    pub lhs: f64,
    /// `U(t)` of the section lattice.
    pub rhs: f64,
    /// `N_k / t`.
    pub bound: f64,
}

impl UIntegral {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn u_integral_check(g: &GramData, t: f64) -> Result<UIntegral> {
    let lhs = integrate_with(
        |u| theta_distortion(g, u, t),
        g.theta_sup_bound(t),
        &g.measure,
        Tolerance::relative(1e-11),
    )?
    .value;
    let rhs = lattice::u_function(&g.lattice(), t)?;
    Ok(UIntegral {
        lhs,
        rhs,
        bound: g.rank() as f64 / t,
    })
}

/// One row of a section-lattice scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub k: u32,
    pub n_k: usize,
    pub h0_theta: f64,
    /// `−½ log det M`, the Arakelov degree of the section lattice.
    pub chi_hat: f64,
    pub v_k: f64,
    pub chi_k: f64,
    pub sup_rho: f64,
    pub theta_over_rho_max: f64,
}

/// Least-squares fit of `v_∞ + a/k + b/k²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub a: f64,
    pub b: f64,
    pub ks: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub rows: Vec<ScanRow>,
    pub fit: Extrapolation,
}

/// Number of trailing points used by the extrapolation.
pub const FIT_POINTS: usize = 5;

/// Fits `y = limit + a/k + b/k²` on the last [`FIT_POINTS`] samples.
pub fn extrapolate(ks: &[u32], ys: &[f64]) -> Result<Extrapolation> {
    if ks.len() != ys.len() || ks.is_empty() {
        return Err(Error::InvalidArgument("extrapolation needs matching nonempty data".into()));
    }
    let start = ks.len().saturating_sub(FIT_POINTS);
    let (ks, ys) = (&ks[start..], &ys[start..]);
    let cols = ks.len().min(3);
    let a = DMatrix::from_fn(ks.len(), cols, |i, j| (ks[i] as f64).powi(-(j as i32)));
    let y = DVector::from_column_slice(ys);
    let coef = a
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::InvalidArgument(format!("extrapolation fit failed: {e}")))?;
    let get = |j: usize| if j < cols { coef[j] } else { 0.0 };
    Ok(Extrapolation {
        limit: get(0),
        a: get(1),
        b: get(2),
        ks: ks.to_vec(),
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// The default evaluation grid: 41 points in `[−4, 4]` (n = 1) or 9×9 (n = 2).
pub fn default_u_grid(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => (0..41).map(|i| vec![-4.0 + 0.2 * i as f64]).collect(),
        _ => {
            let axis: Vec<f64> = (0..9).map(|i| -4.0 + i as f64).collect();
            axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y])).collect()
        }
    }
}

/// Section-lattice invariants for every `k` in `k_list`.
pub fn scan(model: &ToricModel, k_list: &[u32], u_grid: &[Vec<f64>]) -> Result<Vec<ScanRow>> {
    if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) || k_list[0] == 0 {
        return Err(Error::InvalidArgument("k_list must be positive and strictly increasing".into()));
    }
    let n = model.polytope().dim();
    let norm = factorial(n + 1);
    k_list
        .par_iter()
        .map(|&k| {
            let g = model.gram(k)?;
            let h0 = section_h0_theta(&g);
            let chi = -0.5 * g.log_det();
            let scale = norm / (k as f64).powi(n as i32 + 1);
            let mut sup_rho = 0.0f64;
            let mut ratio = 0.0f64;
            for u in u_grid {
                let r = rho(&g, u);
                sup_rho = sup_rho.max(r);
                ratio = ratio.max(theta_distortion(&g, u, 1.0) / r);
            }
            Ok(ScanRow {
                k,
                n_k: g.rank(),
                h0_theta: h0,
                chi_hat: chi,
                v_k: h0 * scale,
                chi_k: chi * scale,
                sup_rho,
                theta_over_rho_max: ratio,
            })
        })
        .collect()
}

/// `v_k = h⁰_θ · (n+1)!/k^{n+1}` with its extrapolated limit.
pub fn volume_estimate(model: &ToricModel, k_list: &[u32]) -> Result<VolumeEstimate> {
    let rows = scan(model, k_list, &default_u_grid(model.polytope().dim()))?;
    let fit = extrapolate(k_list, &rows.iter().map(|r| r.v_k).collect::<Vec<_>>())?;
    Ok(VolumeEstimate { rows, fit })
}

/// `χ_k = −½ log det M · (n+1)!/k^{n+1}` with its extrapolated limit.
pub fn chi_volume_estimate(model: &ToricModel, k_list: &[u32]) -> Result<VolumeEstimate> {
    let rows = scan(model, k_list, &default_u_grid(model.polytope().dim()))?;
    let fit = extrapolate(k_list, &rows.iter().map(|r| r.chi_k).collect::<Vec<_>>())?;
    Ok(VolumeEstimate { rows, fit })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationCheck {
    /// `h⁰_θ(kφ₁) − h⁰_θ(kφ₀)`.
    pub lhs: f64,
    /// `k ∫₀¹ ∫ (φ₁ − φ₀) Θ(μ, kφ_s) dμ ds`.
    pub rhs: f64,
    pub residual: f64,
}

/// Compares the change of `h⁰_θ` between two weights with the integral of
/// `Θ` along the segment `φ_s = φ₀ + s(φ₁ − φ₀)`, using `s_nodes` Gauss nodes.
pub fn variation_identity_check(
    w0: &ToricWeight,
    w1: &ToricWeight,
    mu: &RadialMeasure,
    k: u32,
    s_nodes: usize,
) -> Result<VariationCheck> {
    if w0.polytope() != w1.polytope() {
        return Err(Error::InvalidArgument("weights must share the polytope".into()));
    }
    let space = lattice_points(w0.polytope(), k)?;
    let g0 = gram_matrix(&space, mu, w0, DEFAULT_GRAM_RTOL)?;
    let g1 = gram_matrix(&space, mu, w1, DEFAULT_GRAM_RTOL)?;
    let lhs = section_h0_theta(&g1) - section_h0_theta(&g0);
    let (lo0, hi0) = w0.offset_bounds();
    let (lo1, hi1) = w1.offset_bounds();
    let diff_bound = (hi1 - lo0).abs().max((lo1 - hi0).abs());
    let inner: Vec<f64> = gauss_legendre_on(s_nodes, 0.0, 1.0)
        .par_iter()
        .map(|&(s, wt)| {
            let ws = w0.interpolate(w1, s)?;
            let gs = gram_matrix(&space, mu, &ws, DEFAULT_GRAM_RTOL)?;
            let f = |u: &[f64]| (w1.eval(u) - w0.eval(u)) * theta_distortion(&gs, u, 1.0);
            let v = integrate_with(f, diff_bound * gs.theta_sup_bound(1.0), mu, Tolerance {
                abs: 1e-300,
                rel: 1e-11,
            })?;
            Ok(wt * v.value)
        })
        .collect::<Result<_>>()?;
    let rhs = k as f64 * inner.iter().sum::<f64>();
    let scale = lhs.abs().max(rhs.abs());
    let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(VariationCheck { lhs, rhs, residual })
}
