//! Euclidean lattices `(Z^N, G)` and their theta invariants.
//!
//! All theta series here are `Σ_{v∈Z^N} exp(-π t vᵀGv)`. Diagonal Gram matrices
//! factor into one-dimensional theta functions; everything else goes through
//! Fincke–Pohst enumeration with a certified tail.

mod enumerate;
pub mod jacobi;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use enumerate::Ellipsoid;
pub use jacobi::{log_theta1, sigma2, theta1_direct};

/// Default cap on the number of enumerated vectors.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 10_000_000;

/// Default tolerance for theta evaluations (relative, i.e. absolute on the log scale).
pub const DEFAULT_THETA_EPS: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
enum Gram {
    Dense(DMatrix<f64>),
    Diagonal(Vec<f64>),
}

/// A free Z-module `Z^N` with the inner product given by a Gram matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeJson", into = "LatticeJson")]
pub struct EuclideanLattice {
    gram: Gram,
}

#[derive(Serialize, Deserialize)]
struct LatticeJson {
    rank: usize,
    gram: Vec<Vec<f64>>,
}

impl TryFrom<LatticeJson> for EuclideanLattice {
    type Error = Error;

    fn try_from(raw: LatticeJson) -> Result<Self> {
        if raw.gram.len() != raw.rank || raw.gram.iter().any(|row| row.len() != raw.rank) {
            return Err(Error::InvalidArgument(format!(
                "gram must be {0}x{0}",
                raw.rank
            )));
        }
        EuclideanLattice::from_rows(&raw.gram)
    }
}

impl From<EuclideanLattice> for LatticeJson {
    fn from(lat: EuclideanLattice) -> Self {
        let g = lat.gram_matrix();
        LatticeJson {
            rank: lat.rank(),
            gram: (0..g.nrows())
                .map(|i| g.row(i).iter().copied().collect())
                .collect(),
        }
    }
}

impl EuclideanLattice {
    /// Validates symmetry (exact) and positive definiteness. An exactly
    /// diagonal matrix is stored in diagonal form.
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n {
            return Err(Error::InvalidArgument("gram must be square".into()));
        }
        if gram.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("gram has non-finite entries".into()));
        }
        let mut asym = 0.0f64;
        let mut diagonal = true;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((gram[(i, j)] - gram[(j, i)]).abs());
                if i != j && gram[(i, j)] != 0.0 {
                    diagonal = false;
                }
            }
        }
        if asym > 0.0 {
            return Err(Error::NotSymmetric(asym));
        }
        if diagonal {
            return Self::diagonal(gram.diagonal().iter().copied().collect());
        }
        if gram.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(EuclideanLattice {
            gram: Gram::Dense(gram),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("gram must be square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|&x| !x.is_finite()) {
            return Err(Error::InvalidArgument("gram has non-finite entries".into()));
        }
        if entries.iter().any(|&x| x <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(EuclideanLattice {
            gram: Gram::Diagonal(entries),
        })
    }

    pub fn identity(rank: usize) -> Self {
        EuclideanLattice {
            gram: Gram::Diagonal(vec![1.0; rank]),
        }
    }

    /// A seeded random lattice `G = AᵀA + δI` with `A` uniform in `[-1, 1]`.
    pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, rank: usize, delta: f64) -> Self {
        let a = DMatrix::from_fn(rank, rank, |_, _| rng.random_range(-1.0..=1.0));
        let mut g = a.transpose() * &a;
        for i in 0..rank {
            g[(i, i)] += delta;
        }
        // enforce exact symmetry against rounding in the product
        for i in 0..rank {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        Self::new(g).expect("AᵀA + δI is positive definite")
    }

    pub fn rank(&self) -> usize {
        match &self.gram {
            Gram::Dense(g) => g.nrows(),
            Gram::Diagonal(d) => d.len(),
        }
    }

    /// True when the Gram matrix is exactly diagonal.
    pub fn diagonal_hint(&self) -> bool {
        matches!(self.gram, Gram::Diagonal(_))
    }

    pub fn diagonal_entries(&self) -> Option<&[f64]> {
        match &self.gram {
            Gram::Diagonal(d) => Some(d),
            Gram::Dense(_) => None,
        }
    }

    pub fn gram_matrix(&self) -> DMatrix<f64> {
        match &self.gram {
            Gram::Dense(g) => g.clone(),
            Gram::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    /// `vᵀGv` for an integer vector.
    pub fn norm_sq(&self, v: &[i64]) -> f64 {
        assert_eq!(v.len(), self.rank());
        match &self.gram {
            Gram::Diagonal(d) => d.iter().zip(v).map(|(g, &x)| g * (x * x) as f64).sum(),
            Gram::Dense(g) => {
                let n = v.len();
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += g[(i, j)] * (v[i] * v[j]) as f64;
                    }
                }
                s
            }
        }
    }

    /// The lattice with Gram matrix `t·G`.
    pub fn scaled(&self, t: f64) -> Self {
        match &self.gram {
            Gram::Dense(g) => EuclideanLattice {
                gram: Gram::Dense(g * t),
            },
            Gram::Diagonal(d) => EuclideanLattice {
                gram: Gram::Diagonal(d.iter().map(|x| x * t).collect()),
            },
        }
    }

    fn lower_factor(&self) -> Result<DMatrix<f64>> {
        self.gram_matrix()
            .cholesky()
            .map(|c| c.l())
            .ok_or(Error::NotPositiveDefinite)
    }

    /// A lower bound on the smallest eigenvalue of `G`.
    fn min_eigenvalue_lower(&self) -> Result<f64> {
        let lam = match &self.gram {
            Gram::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            Gram::Dense(g) => {
                let eig = SymmetricEigen::new(g.clone());
                let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
                min - 1e-12 * scale * g.nrows() as f64
            }
        };
        if lam > 0.0 {
            Ok(lam)
        } else {
            Err(Error::NotPositiveDefinite)
        }
    }
}

/// `log covol = ½ log det G`.
pub fn log_covolume(lat: &EuclideanLattice) -> Result<f64> {
    match &lat.gram {
        Gram::Diagonal(d) => Ok(0.5 * d.iter().map(|x| x.ln()).sum::<f64>()),
        Gram::Dense(_) => {
            let l = lat.lower_factor()?;
            Ok(l.diagonal().iter().map(|x| x.ln()).sum())
        }
    }
}

pub fn covolume(lat: &EuclideanLattice) -> Result<f64> {
    log_covolume(lat).map(f64::exp)
}

/// The dual lattice, with Gram matrix `G⁻¹`.
pub fn dual_lattice(lat: &EuclideanLattice) -> Result<EuclideanLattice> {
    match &lat.gram {
        Gram::Diagonal(d) => EuclideanLattice::diagonal(d.iter().map(|x| 1.0 / x).collect()),
        Gram::Dense(g) => {
            let chol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
            let mut inv = chol.inverse();
            let n = inv.nrows();
            for i in 0..n {
                for j in 0..i {
                    let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                    inv[(i, j)] = avg;
                    inv[(j, i)] = avg;
                }
            }
            EuclideanLattice::new(inv)
        }
    }
}

/// A certified theta evaluation.
///
/// `abs_error_bound` bounds `|log_value − log θ|`, which is the relative error
/// of the underlying sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaValue {
    pub log_value: f64,
    pub abs_error_bound: f64,
    /// `R²` of the enumerated region `{t·vᵀGv ≤ R²}`; 0 on the factored path.
    pub truncation_radius_sq: f64,
    pub terms_enumerated: usize,
}

impl ThetaValue {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaPath {
    /// Factored product for diagonal Gram matrices, enumeration otherwise.
    Auto,
    /// Always enumerate.
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaConfig {
    /// Tolerance on the log value (relative error of the sum).
    pub eps: f64,
    pub budget: usize,
    pub path: ThetaPath,
    /// Recursion depth for the certified bound on `θ(t/2)` used in the tail.
    pub tail_depth: u32,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig {
            eps: DEFAULT_THETA_EPS,
            budget: DEFAULT_ENUMERATION_BUDGET,
            path: ThetaPath::Auto,
            tail_depth: 1,
        }
    }
}

impl ThetaConfig {
    pub fn with_eps(eps: f64) -> Self {
        ThetaConfig {
            eps,
            ..Default::default()
        }
    }

    pub fn dense(mut self) -> Self {
        self.path = ThetaPath::Dense;
        self
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Result of enumerating `Σ e^{-πt q(v)}` and optionally `Σ w(v) e^{-πt q(v)}`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianSums {
    pub theta: f64,
    pub theta_tail: f64,
    pub moment: f64,
    pub moment_tail: f64,
    pub radius_sq: f64,
    pub terms: usize,
}

/// A weight `w(v)` with `0 ≤ w(v) ≤ kappa · vᵀGv`, used for moment sums.
pub struct MomentWeight<'a> {
    pub eval: &'a dyn Fn(&[i64], f64) -> f64,
    pub kappa: f64,
}

/// `log` of a certified upper bound on `θ(s)`.
fn log_theta_upper(lat: &EuclideanLattice, s: f64, depth: u32, budget: usize) -> Result<f64> {
    if depth == 0 {
        let lam = lat.min_eigenvalue_lower()?;
        return Ok(lat.rank() as f64 * log_theta1(s * lam) + 1e-12);
    }
    let sums = enumerate_sums(lat, s, 1e-3, budget, depth - 1, None)?;
    Ok((sums.theta + sums.theta_tail).ln() + 1e-12)
}

/// Enumerates `{v : t·vᵀGv ≤ R²}` with `R` chosen so that both tails, bounded
/// through `e^{-x} = e^{-x/2}e^{-x/2}` by `e^{-πR²/2}·θ(t/2)` and
/// `κ(R²/t)e^{-πR²/2}·θ(t/2)`, are at most `eps` (the partial theta sum is ≥ 1).
pub(crate) fn enumerate_sums(
    lat: &EuclideanLattice,
    t: f64,
    eps: f64,
    budget: usize,
    depth: u32,
    weight: Option<&MomentWeight<'_>>,
) -> Result<GaussianSums> {
    if !(t > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("t and eps must be positive".into()));
    }
    let log_upper = log_theta_upper(lat, 0.5 * t, depth, budget)?;
    let kappa = weight.map_or(0.0, |w| w.kappa);
    let log_tail = |r2: f64| {
        let base = log_upper - PI * r2 / 2.0;
        let moment = if kappa > 0.0 {
            base + (kappa * r2 / t).ln()
        } else {
            f64::NEG_INFINITY
        };
        (base, moment)
    };
    let log_eps = eps.ln();
    let mut r2 = ((2.0 / PI) * (log_upper - log_eps)).max(2.0 / PI);
    for _ in 0..200 {
        let (a, b) = log_tail(r2);
        if a <= log_eps && b <= log_eps {
            break;
        }
        r2 *= 1.05;
    }
    let (log_theta_tail, log_moment_tail) = log_tail(r2);

    // rough size check before committing to the enumeration
    let n = lat.rank();
    let log_covol = log_covolume(lat)?;
    let log_ball = (n as f64 / 2.0) * (PI * r2 / t).ln() - ln_gamma(n as f64 / 2.0 + 1.0);
    if log_ball - log_covol > (budget as f64).ln() + 2.0 {
        return Err(Error::TailBoundFailure { budget });
    }

    let ell = Ellipsoid::from_lower_factor(&lat.lower_factor()?);
    let mut theta = CompensatedSum::default();
    let mut moment = CompensatedSum::default();
    let terms = ell.for_each(r2 / t, budget, |v, q| {
        let e = (-PI * t * q).exp();
        theta.add(e);
        if let Some(w) = weight {
            moment.add((w.eval)(v, q) * e);
        }
    })?;
    Ok(GaussianSums {
        theta: theta.value(),
        theta_tail: log_theta_tail.exp(),
        moment: moment.value(),
        moment_tail: log_moment_tail.exp(),
        radius_sq: r2,
        terms,
    })
}

/// Visits every `v` with `vᵀGv ≤ R²`, for `R` chosen so that
/// `Σ_{vᵀGv > R²} e^{-π vᵀGv} ≤ eps`. Returns that tail bound and the number
/// of visited vectors.
pub fn enumerate_with_tail<F: FnMut(&[i64], f64)>(
    lat: &EuclideanLattice,
    eps: f64,
    budget: usize,
    mut visit: F,
) -> Result<(f64, usize)> {
    let log_upper = log_theta_upper(lat, 0.5, 1, budget)?;
    let r2 = ((2.0 / PI) * (log_upper - eps.ln())).max(2.0 / PI);
    let ell = Ellipsoid::from_lower_factor(&lat.lower_factor()?);
    let count = ell.for_each(r2, budget, |v, q| visit(v, q))?;
    Ok(((log_upper - PI * r2 / 2.0).exp(), count))
}

fn ln_gamma(x: f64) -> f64 {
    // Stirling with a few correction terms; only used for a size estimate.
    if x < 7.0 {
        let mut acc = 0.0;
        let mut y = x;
        while y < 7.0 {
            acc -= y.ln();
            y += 1.0;
        }
        return acc + ln_gamma(y);
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
}

/// Rounding allowance for enumerated sums, relative to the sum.
fn rounding_allowance(lat: &EuclideanLattice, r2: f64) -> f64 {
    (4.0 + PI * r2 * lat.rank() as f64) * f64::EPSILON
}

pub fn log_theta(lat: &EuclideanLattice, t: f64, eps: f64) -> Result<ThetaValue> {
    log_theta_with(lat, t, &ThetaConfig::with_eps(eps))
}

pub fn log_theta_with(lat: &EuclideanLattice, t: f64, cfg: &ThetaConfig) -> Result<ThetaValue> {
    if !(t > 0.0) || !(cfg.eps > 0.0) {
        return Err(Error::InvalidArgument("t and eps must be positive".into()));
    }
    if let (ThetaPath::Auto, Some(d)) = (cfg.path, lat.diagonal_entries()) {
        let mut log_value = 0.0;
        let mut err = 0.0;
        for &g in d {
            let (v, e) = jacobi::log_theta1_with_error(t * g);
            log_value += v;
            err += e;
        }
        return Ok(ThetaValue {
            log_value,
            abs_error_bound: err,
            truncation_radius_sq: 0.0,
            terms_enumerated: 0,
        });
    }
    let sums = enumerate_sums(lat, t, cfg.eps, cfg.budget, cfg.tail_depth, None)?;
    Ok(ThetaValue {
        log_value: sums.theta.ln(),
        abs_error_bound: (sums.theta_tail / sums.theta).ln_1p()
            + rounding_allowance(lat, sums.radius_sq),
        truncation_radius_sq: sums.radius_sq,
        terms_enumerated: sums.terms,
    })
}

/// `h⁰_θ = log θ(1)`.
pub fn h0_theta(lat: &EuclideanLattice) -> Result<f64> {
    Ok(log_theta(lat, 1.0, DEFAULT_THETA_EPS)?.log_value)
}

/// `h¹_θ`, the theta invariant of the dual lattice.
pub fn h1_theta(lat: &EuclideanLattice) -> Result<f64> {
    h0_theta(&dual_lattice(lat)?)
}

/// Arakelov degree `−log covol`.
pub fn degree(lat: &EuclideanLattice) -> Result<f64> {
    Ok(-log_covolume(lat)?)
}

/// `h⁰_θ − h¹_θ − deg`, which vanishes by Poisson summation.
pub fn poisson_residual(lat: &EuclideanLattice) -> Result<f64> {
    Ok(h0_theta(lat)? - h1_theta(lat)? - degree(lat)?)
}

/// Relative tolerance used when deciding `vᵀGv ≤ 1` in floating point.
pub const AR_BOUNDARY_TOL: f64 = 1e-12;

/// Number of lattice vectors of norm at most one.
pub fn count_small_vectors(lat: &EuclideanLattice) -> Result<usize> {
    let ell = Ellipsoid::from_lower_factor(&lat.lower_factor()?);
    let mut count = 0usize;
    ell.for_each(1.0, DEFAULT_ENUMERATION_BUDGET, |v, _| {
        if lat.norm_sq(v) <= 1.0 + AR_BOUNDARY_TOL {
            count += 1;
        }
    })?;
    Ok(count)
}

/// `h⁰_Ar = log #{v : ‖v‖ ≤ 1}`.
pub fn h0_ar(lat: &EuclideanLattice) -> Result<f64> {
    Ok((count_small_vectors(lat)? as f64).ln())
}

/// `Σ_v (vᵀGv)·e^{-πt vᵀGv}`.
pub fn second_moment(lat: &EuclideanLattice, t: f64) -> Result<f64> {
    let theta = log_theta(lat, t, DEFAULT_THETA_EPS)?;
    Ok(u_function(lat, t)? * theta.value() / (2.0 * PI))
}

/// `U(t) = 2π · Σ_v ‖v‖² e^{-πt‖v‖²} / θ(t)`, bounded above by `N/t`.
pub fn u_function(lat: &EuclideanLattice, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("t must be positive".into()));
    }
    if let Some(d) = lat.diagonal_entries() {
        return Ok(2.0 * PI * d.iter().map(|&g| g * sigma2(t * g)).sum::<f64>());
    }
    u_function_dense(lat, t, DEFAULT_THETA_EPS)
}

pub(crate) fn u_function_dense(lat: &EuclideanLattice, t: f64, eps: f64) -> Result<f64> {
    let w = |_: &[i64], q: f64| q;
    let weight = MomentWeight {
        eval: &w,
        kappa: 1.0,
    };
    let sums = enumerate_sums(lat, t, eps, DEFAULT_ENUMERATION_BUDGET, 1, Some(&weight))?;
    Ok(2.0 * PI * sums.moment / sums.theta)
}

/// Outcome of checking the monotonicity statements on a grid of `t` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Largest violation beyond the certified error bounds (≤ 0 means none).
    pub max_violation: f64,
    pub max_error_bound: f64,
    pub checks: usize,
}

/// Checks that `log θ(t)` is nonincreasing, that `log θ(t) + (N/2) log t` is
/// nondecreasing, and that `|log θ(t) − log θ(1)| ≤ (N/2)|log t|` on the grid.
pub fn lemma_monotonicity_check(lat: &EuclideanLattice, t_grid: &[f64]) -> Result<MonotonicityReport> {
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument(
            "t grid must be strictly increasing and positive".into(),
        ));
    }
    let half_rank = 0.5 * lat.rank() as f64;
    let values = t_grid
        .iter()
        .map(|&t| log_theta(lat, t, DEFAULT_THETA_EPS))
        .collect::<Result<Vec<_>>>()?;
    let at_one = log_theta(lat, 1.0, DEFAULT_THETA_EPS)?;
    let mut worst = f64::NEG_INFINITY;
    let mut max_err = at_one.abs_error_bound;
    let mut checks = 0;
    for (i, (&t, v)) in t_grid.iter().zip(&values).enumerate() {
        max_err = max_err.max(v.abs_error_bound);
        let gap = (v.log_value - at_one.log_value).abs() - half_rank * t.ln().abs();
        worst = worst.max(gap - v.abs_error_bound - at_one.abs_error_bound);
        checks += 1;
        if i + 1 < t_grid.len() {
            let (t2, v2) = (t_grid[i + 1], &values[i + 1]);
            let err = v.abs_error_bound + v2.abs_error_bound;
            worst = worst.max(v2.log_value - v.log_value - err);
            let lhs = v.log_value + half_rank * t.ln();
            let rhs = v2.log_value + half_rank * t2.ln();
            worst = worst.max(lhs - rhs - err);
            checks += 2;
        }
    }
    Ok(MonotonicityReport {
        max_violation: worst,
        max_error_bound: max_err,
        checks,
    })
}
