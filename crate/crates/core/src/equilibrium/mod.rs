//! One-dimensional convex analysis for toric weights: discrete Legendre
//! transforms, the equilibrium weight `P_Xψ` and the equilibrium measure.
//!
//! `P_Xψ` is the largest convex function below ψ with slopes in `Δ = [a, b]`.
//! On samples it is the lower convex hull of the points `(u_j, ψ(u_j))`,
//! continued with slope `a` left of the vertex supporting slope `a` and with
//! slope `b` right of the vertex supporting slope `b`. This is the exact
//! biconjugate of the piecewise-linear interpolant through the conjugate
//! restricted to Δ, so applying it twice changes nothing.

pub mod energy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::ToricWeight;

/// Half-width of the default u-box.
pub const DEFAULT_U_BOX: f64 = 30.0;
/// Nodes of the default u-grid; an odd count keeps 0 on the grid.
pub const DEFAULT_U_NODES: usize = 8193;
/// Nodes of the default p-grid.
pub const DEFAULT_P_NODES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    U,
    P,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub side: Side,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| {
            // symmetric construction so that mirrored nodes are exact negatives
            let t = i as f64 / last;
            if i * 2 < n {
                lo + (hi - lo) * t
            } else {
                hi - (hi - lo) * (1.0 - t)
            }
        })
        .collect()
}

/// `[−30, 30]` with 8193 nodes.
pub fn default_u_nodes() -> Vec<f64> {
    linspace(-DEFAULT_U_BOX, DEFAULT_U_BOX, DEFAULT_U_NODES)
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, side: Side) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidArgument("grid needs at least two nodes and matching values".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(GridFunction { nodes, values, side })
    }

    /// Samples a weight on the given u-nodes.
    pub fn sample(w: &ToricWeight, nodes: &[f64]) -> Result<Self> {
        if w.dim() != 1 {
            return Err(Error::DimensionUnsupported(w.dim()));
        }
        Self::new(nodes.to_vec(), nodes.iter().map(|&u| w.eval1(u)).collect(), Side::U)
    }

    /// Piecewise-linear interpolation, constant continuation outside the nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let lam = (x - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
        self.values[i] + lam * (self.values[i + 1] - self.values[i])
    }

    /// Smallest normalized second difference; nonnegative up to rounding
    /// exactly when the interpolant is convex.
    pub fn min_second_difference(&self) -> f64 {
        (1..self.nodes.len() - 1)
            .map(|i| self.slope(i) - self.slope(i - 1))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        self.min_second_difference() >= -tol
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.nodes[i + 1] - self.nodes[i])
    }
}

/// Indices of the lower convex hull of `(x_j, y_j)` (monotone chain).
fn lower_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        while hull.len() >= 2 {
            let (i0, i1) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop i1 if it lies on or above the segment i0 → j
            let cross = (x[i1] - x[i0]) * (y[j] - y[i0]) - (y[i1] - y[i0]) * (x[j] - x[i0]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(j);
    }
    hull
}

/// Lower hull of a grid function with the slope of each hull edge.
struct Hull {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl Hull {
    fn of(f: &GridFunction) -> Self {
        let idx = lower_hull(&f.nodes, &f.values);
        let x: Vec<f64> = idx.iter().map(|&i| f.nodes[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| f.values[i]).collect();
        let slopes = x.windows(2).zip(y.windows(2)).map(|(xs, ys)| (ys[1] - ys[0]) / (xs[1] - xs[0])).collect();
        Hull { x, y, slopes }
    }

    /// Index of the hull vertex maximizing `p·x − y`.
    fn support(&self, p: f64) -> usize {
        self.slopes.partition_point(|&s| s < p)
    }

    fn conjugate(&self, p: f64) -> f64 {
        let i = self.support(p);
        p * self.x[i] - self.y[i]
    }

    fn check_slopes(&self, a: f64, b: f64) -> Result<()> {
        let tol = 1e-6 * (b - a);
        let lo = self.slopes.first().copied().unwrap_or(f64::INFINITY);
        let hi = self.slopes.last().copied().unwrap_or(f64::NEG_INFINITY);
        if lo > a + tol || hi < b - tol {
            return Err(Error::SlopeRangeTooNarrow { lo, hi });
        }
        Ok(())
    }
}

/// `p ↦ sup_u (p·u − f(u))` on `p_nodes` equally spaced points of `[a, b]`.
pub fn legendre_with(f: &GridFunction, a: f64, b: f64, p_nodes: usize) -> Result<GridFunction> {
    if f.side != Side::U {
        return Err(Error::InvalidArgument("legendre expects a u-side grid".into()));
    }
    if !(a < b) || p_nodes < 2 {
        return Err(Error::InvalidArgument("need a < b and at least two p-nodes".into()));
    }
    let hull = Hull::of(f);
    hull.check_slopes(a, b)?;
    let ps = linspace(a, b, p_nodes);
    let values = ps.iter().map(|&p| hull.conjugate(p)).collect();
    GridFunction::new(ps, values, Side::P)
}

/// [`legendre_with`] on the default p-grid.
pub fn legendre(f: &GridFunction, a: f64, b: f64) -> Result<GridFunction> {
    legendre_with(f, a, b, DEFAULT_P_NODES)
}

/// `u ↦ sup_p (p·u − g(p))` for a p-side grid function, on the given u-nodes.
pub fn legendre_inverse(g: &GridFunction, u_nodes: &[f64]) -> Result<GridFunction> {
    if g.side != Side::P {
        return Err(Error::InvalidArgument("inverse transform expects a p-side grid".into()));
    }
    let hull = Hull::of(&GridFunction {
        nodes: g.nodes.clone(),
        values: g.values.clone(),
        side: Side::U,
    });
    let values = u_nodes.iter().map(|&u| hull.conjugate(u)).collect();
    GridFunction::new(u_nodes.to_vec(), values, Side::U)
}

/// Biconjugate with slopes restricted to `[a, b]`, evaluated on the nodes of `f`.
pub fn envelope(f: &GridFunction, a: f64, b: f64) -> Result<GridFunction> {
    let hull = Hull::of(f);
    hull.check_slopes(a, b)?;
    let ia = hull.support(a);
    let ib = hull.support(b).max(ia);
    let values = f
        .nodes
        .iter()
        .map(|&u| {
            if u <= hull.x[ia] {
                hull.y[ia] + a * (u - hull.x[ia])
            } else if u >= hull.x[ib] {
                hull.y[ib] + b * (u - hull.x[ib])
            } else {
                let j = hull.x.partition_point(|&x| x <= u) - 1;
                if hull.x[j] == u {
                    hull.y[j]
                } else {
                    hull.y[j] + hull.slopes[j] * (u - hull.x[j])
                }
            }
        })
        .collect();
    GridFunction::new(f.nodes.clone(), values, Side::U)
}

fn interval(w: &ToricWeight) -> Result<(f64, f64)> {
    w.polytope()
        .interval()
        .map(|(a, b)| (a as f64, b as f64))
        .ok_or(Error::DimensionUnsupported(w.dim()))
}

/// `P_Xψ` sampled on the default u-grid.
pub fn equilibrium_weight(w: &ToricWeight) -> Result<GridFunction> {
    equilibrium_weight_on(w, &default_u_nodes())
}

pub fn equilibrium_weight_on(w: &ToricWeight, nodes: &[f64]) -> Result<GridFunction> {
    let (a, b) = interval(w)?;
    envelope(&GridFunction::sample(w, nodes)?, a, b)
}

/// `P_Xψ` as a grid weight (continued by `Ψ_Δ` plus a constant outside the box).
pub fn equilibrium_as_weight(w: &ToricWeight) -> Result<ToricWeight> {
    let env = equilibrium_weight(w)?;
    ToricWeight::grid(w.polytope().clone(), env.nodes, env.values)
}

/// Point masses `(u, mass)` of `MA(P_Xψ)/vol(L)`: the slope jumps of the envelope.
pub fn equilibrium_measure(w: &ToricWeight) -> Result<Vec<(f64, f64)>> {
    let (a, b) = interval(w)?;
    let env = equilibrium_weight(w)?;
    let n = env.nodes.len();
    let vol = b - a;
    let mut atoms = Vec::new();
    let mut prev = a;
    for i in 0..n {
        let next = if i + 1 < n { env.slope(i) } else { b };
        let next = next.clamp(a, b);
        let jump = next - prev;
        if jump > 0.0 {
            atoms.push((env.nodes[i], jump / vol));
        }
        prev = prev.max(next);
    }
    Ok(atoms)
}

/// `∫ f dμ_eq`, with `μ_eq = MA(P_Xψ)/vol(L)`.
pub fn equilibrium_measure_integral<F: Fn(f64) -> f64>(w: &ToricWeight, f: F) -> Result<f64> {
    Ok(equilibrium_measure(w)?.iter().map(|&(u, m)| m * f(u)).sum())
}

/// `Ψ_Δ + h·(1 − x²)²` with `x = (u − center)/radius` on `|x| < 1`, sampled on
/// the default grid. Nonconvex for any `h > 0`.
pub fn bump_weight(base: &ToricWeight, height: f64, center: f64, radius: f64) -> Result<ToricWeight> {
    let nodes = default_u_nodes();
    let values = nodes
        .iter()
        .map(|&u| {
            let x = (u - center) / radius;
            let bump = if x.abs() < 1.0 { height * (1.0 - x * x).powi(2) } else { 0.0 };
            base.eval1(u) + bump
        })
        .collect();
    ToricWeight::grid(base.polytope().clone(), nodes, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toric::LatticePolytope;

    fn p1() -> LatticePolytope {
        LatticePolytope::segment(0, 1).unwrap()
    }

    fn fs_conjugate(p: f64) -> f64 {
        let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
        0.5 * (xlogx(p) + xlogx(1.0 - p))
    }

    #[test]
    fn default_grid_contains_zero() {
        let u = default_u_nodes();
        assert_eq!(u[DEFAULT_U_NODES / 2], 0.0);
        assert_eq!(u[0], -30.0);
        assert_eq!(u[DEFAULT_U_NODES - 1], 30.0);
        for i in 0..DEFAULT_U_NODES {
            assert_eq!(u[i], -u[DEFAULT_U_NODES - 1 - i]);
        }
    }

    #[test]
    fn canonical_conjugate_vanishes() {
        let f = GridFunction::sample(&ToricWeight::canonical(p1()), &default_u_nodes()).unwrap();
        let g = legendre(&f, 0.0, 1.0).unwrap();
        assert!(g.values.iter().all(|&v| v.abs() < 1e-15));
        assert_eq!(g.nodes.len(), DEFAULT_P_NODES);
    }

    #[test]
    fn fs_conjugate_closed_form() {
        let f = GridFunction::sample(&ToricWeight::fubini_study(p1()), &default_u_nodes()).unwrap();
        let g = legendre(&f, 0.0, 1.0).unwrap();
        for p in [0.25, 0.5, 0.75] {
            assert!((g.eval(p) - fs_conjugate(p)).abs() < 1e-6, "p={p}");
        }
        assert!(g.is_convex(1e-10));
    }

    #[test]
    fn narrow_box_is_rejected() {
        let f = GridFunction::sample(&ToricWeight::fubini_study(p1()), &linspace(-2.0, 2.0, 101)).unwrap();
        assert!(matches!(legendre(&f, 0.0, 1.0), Err(Error::SlopeRangeTooNarrow { .. })));
    }

    #[test]
    fn envelope_fixes_convex_weights() {
        for w in [ToricWeight::canonical(p1()), ToricWeight::fubini_study(p1())] {
            let f = GridFunction::sample(&w, &default_u_nodes()).unwrap();
            let env = envelope(&f, 0.0, 1.0).unwrap();
            let gap = f.values.iter().zip(&env.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn bump_is_flattened() {
        let can = ToricWeight::canonical(p1());
        let bump = bump_weight(&can, 0.3, 1.0, 0.75).unwrap();
        let env = equilibrium_weight(&bump).unwrap();
        let base = GridFunction::sample(&can, &default_u_nodes()).unwrap();
        let dev = env.values.iter().zip(&base.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-12);
        let again = envelope(&env, 0.0, 1.0).unwrap();
        assert_eq!(again.values, env.values);
    }

    #[test]
    fn equilibrium_measures() {
        let can = ToricWeight::canonical(p1());
        assert_eq!(equilibrium_measure(&can).unwrap(), vec![(0.0, 1.0)]);
        let fs = ToricWeight::fubini_study(p1());
        let mass = equilibrium_measure_integral(&fs, |_| 1.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
        let mean = equilibrium_measure_integral(&fs, |u| u).unwrap();
        assert!(mean.abs() < 1e-8);
    }
}
