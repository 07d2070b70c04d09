//! Enumeration-based evaluation of the theta distortion, used to validate the
//! diagonal formulas on small ranks.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::GramData;
use crate::error::{Error, Result};
use crate::lattice::{dual_lattice, enumerate_sums, log_covolume, EuclideanLattice, MomentWeight, DEFAULT_ENUMERATION_BUDGET};

/// Largest rank accepted by the enumeration paths.
pub const DENSE_MAX_RANK: usize = 12;

const DENSE_EPS: f64 = 1e-15;

fn check_rank(n: usize) -> Result<()> {
    if n > DENSE_MAX_RANK {
        return Err(Error::InvalidArgument(format!(
            "dense path supports rank ≤ {DENSE_MAX_RANK}, got {n}"
        )));
    }
    Ok(())
}

fn quad_form(m: &DMatrix<f64>, a: &[i64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        if a[i] == 0 {
            continue;
        }
        for j in 0..n {
            s += m[(i, j)] * (a[i] * a[j]) as f64;
        }
    }
    s
}

/// `Θ(t; u)` by summing `2π Σ_a (cᵀa)² e^{-πt aᵀMa} / Σ_a e^{-πt aᵀMa}` over
/// the enumerated lattice, with `c_m = e^{⟨m,u⟩ − kψ(u)}`.
pub fn theta_distortion_dense(g: &GramData, u: &[f64], t: f64) -> Result<f64> {
    check_rank(g.rank())?;
    let c: Vec<f64> = g.eval(u).iter().map(|x| x.sqrt()).collect();
    let kappa: f64 = c.iter().zip(&g.diag).map(|(c, m)| c * c / m).sum();
    let eval = |a: &[i64], _q: f64| {
        let s: f64 = a.iter().zip(&c).map(|(&x, c)| x as f64 * c).sum();
        s * s
    };
    let weight = MomentWeight { eval: &eval, kappa };
    let sums = enumerate_sums(&g.lattice(), t, DENSE_EPS, DEFAULT_ENUMERATION_BUDGET, 1, Some(&weight))?;
    Ok(2.0 * PI * sums.moment / sums.theta)
}

/// Both sides of the Poisson identity for the second moment
/// `Σ_a aᵀCa e^{-π aᵀMa} = Tr(M⁻¹C)/(2π) · θ_M − det(M)^{-1/2} Σ_b bᵀM⁻¹CM⁻¹b e^{-π bᵀM⁻¹b}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluates both sides by enumeration for a positive definite `M` and a
/// positive semidefinite symmetric `C`.
pub fn theta_identity(m: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<ThetaIdentity> {
    let n = m.nrows();
    check_rank(n)?;
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::InvalidArgument("C must have the shape of M".into()));
    }
    let lat = EuclideanLattice::new(m.clone())?;
    let dual = dual_lattice(&lat)?;
    let m_inv = dual.gram_matrix();
    let trace = (&m_inv * c).trace();
    let kappa = trace.max(0.0);
    let direct = |a: &[i64], _q: f64| quad_form(c, a);
    let twisted = &m_inv * c * &m_inv;
    let dual_form = |b: &[i64], _q: f64| quad_form(&twisted, b);

    let lhs_sums = enumerate_sums(
        &lat,
        1.0,
        DENSE_EPS,
        DEFAULT_ENUMERATION_BUDGET,
        1,
        Some(&MomentWeight { eval: &direct, kappa }),
    )?;
    let dual_sums = enumerate_sums(
        &dual,
        1.0,
        DENSE_EPS,
        DEFAULT_ENUMERATION_BUDGET,
        1,
        Some(&MomentWeight { eval: &dual_form, kappa }),
    )?;
    let lhs = lhs_sums.moment;
    let rhs = trace / (2.0 * PI) * lhs_sums.theta - (-log_covolume(&lat)?).exp() * dual_sums.moment;
    let scale = lhs.abs().max(rhs.abs());
    let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(ThetaIdentity { lhs, rhs, residual })
}

/// The identity for the section lattice of `g` and the rank-one evaluation
/// matrix `C = ccᵀ` at `u`.
pub fn theta_identity_check(g: &GramData, u: &[f64]) -> Result<ThetaIdentity> {
    let c: Vec<f64> = g.eval(u).iter().map(|x| x.sqrt()).collect();
    let n = c.len();
    let cmat = DMatrix::from_fn(n, n, |i, j| c[i] * c[j]);
    theta_identity(&g.matrix(), &cmat)
}
