//! Torus-invariant weights in logarithmic coordinates.
//!
//! A weight `ψ: Rⁿ → R` stands for the metric `‖s‖ = |s|·e^{-ψ}` on the open
//! orbit. Every weight in the catalog differs from the support function `Ψ_Δ`
//! by a bounded amount.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toric::{support_function, LatticePolytope};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub exponent: Vec<i64>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `ψ = Ψ_Δ`.
    Canonical,
    /// `ψ = ½ log Σ c_m e^{2⟨m,u⟩}`.
    MonomialExp { terms: Vec<MonomialTerm> },
    /// `ψ = base + c`.
    Shifted { base: Box<WeightKind>, c: f64 },
    /// Piecewise-linear interpolation of samples (n = 1), continued as
    /// `Ψ_Δ + offset` outside the sample box.
    Grid { nodes: Vec<f64>, values: Vec<f64> },
    /// `ψ = (1 − s)·from + s·to`.
    Interpolated {
        from: Box<WeightKind>,
        to: Box<WeightKind>,
        s: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightJson", into = "WeightJson")]
pub struct ToricWeight {
    polytope: LatticePolytope,
    kind: WeightKind,
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    polytope: LatticePolytope,
    #[serde(flatten)]
    kind: WeightKind,
}

impl TryFrom<WeightJson> for ToricWeight {
    type Error = Error;
    fn try_from(raw: WeightJson) -> Result<Self> {
        ToricWeight::new(raw.polytope, raw.kind)
    }
}

impl From<ToricWeight> for WeightJson {
    fn from(w: ToricWeight) -> Self {
        WeightJson {
            polytope: w.polytope,
            kind: w.kind,
        }
    }
}

/// The second-derivative measure of a one-dimensional weight, split into
/// point masses and smooth pieces `coefficient · ψ_piece''(u) du`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureParts {
    pub atoms: Vec<(f64, f64)>,
    pub densities: Vec<(f64, WeightKind)>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidWeight(msg.into())
}

fn validate(p: &LatticePolytope, kind: &WeightKind) -> Result<()> {
    match kind {
        WeightKind::Canonical => Ok(()),
        WeightKind::MonomialExp { terms } => {
            if terms.is_empty() {
                return Err(invalid("monomial weight needs terms"));
            }
            for (i, t) in terms.iter().enumerate() {
                if t.exponent.len() != p.dim() {
                    return Err(invalid("exponent dimension mismatch"));
                }
                if !(t.coefficient > 0.0 && t.coefficient.is_finite()) {
                    return Err(invalid("coefficients must be positive and finite"));
                }
                if !p.contains_scaled(1, &t.exponent) {
                    return Err(invalid(format!("exponent {:?} lies outside the polytope", t.exponent)));
                }
                if terms[..i].iter().any(|o| o.exponent == t.exponent) {
                    return Err(invalid("duplicate exponent"));
                }
            }
            for v in p.vertices() {
                if !terms.iter().any(|t| &t.exponent == v) {
                    return Err(invalid(format!("vertex {v:?} is missing from the terms")));
                }
            }
            Ok(())
        }
        WeightKind::Shifted { base, c } => {
            if !c.is_finite() {
                return Err(invalid("shift must be finite"));
            }
            validate(p, base)
        }
        WeightKind::Grid { nodes, values } => {
            if p.dim() != 1 {
                return Err(Error::DimensionUnsupported(p.dim()));
            }
            if nodes.len() < 2 || nodes.len() != values.len() {
                return Err(invalid("grid needs at least two nodes and matching values"));
            }
            if nodes.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(invalid("grid nodes must be strictly increasing"));
            }
            if nodes.iter().chain(values).any(|x| !x.is_finite()) {
                return Err(invalid("grid entries must be finite"));
            }
            Ok(())
        }
        WeightKind::Interpolated { from, to, s } => {
            if !(0.0..=1.0).contains(s) {
                return Err(invalid("interpolation parameter must lie in [0, 1]"));
            }
            validate(p, from)?;
            validate(p, to)
        }
    }
}

/// Log-weights `log c_m + 2⟨m,u⟩`, their maximum and `ψ`.
fn monomial_logs(terms: &[MonomialTerm], u: &[f64]) -> (Vec<f64>, f64, f64) {
    let logs: Vec<f64> = terms
        .iter()
        .map(|t| {
            t.coefficient.ln()
                + 2.0 * t.exponent.iter().zip(u).map(|(&m, &x)| m as f64 * x).sum::<f64>()
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    let psi = 0.5 * (max + s.ln());
    (logs, max, psi)
}

/// Mean and variance of the exponent under the weights `c_m e^{2mu}` (n = 1).
fn monomial_moments(terms: &[MonomialTerm], u: f64) -> (f64, f64) {
    let (logs, max, _) = monomial_logs(terms, &[u]);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mean = terms.iter().zip(&w).map(|(t, w)| w * t.exponent[0] as f64).sum::<f64>() / total;
    let var = terms
        .iter()
        .zip(&w)
        .map(|(t, w)| {
            let d = t.exponent[0] as f64 - mean;
            w * d * d
        })
        .sum::<f64>()
        / total;
    (mean, var.max(0.0))
}

fn grid_locate(nodes: &[f64], u: f64) -> usize {
    // index i with nodes[i] <= u < nodes[i+1], clamped to the interior segments
    match nodes.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
        Ok(i) => i.min(nodes.len() - 2),
        Err(i) => i.saturating_sub(1).min(nodes.len() - 2),
    }
}

impl ToricWeight {
    pub fn new(polytope: LatticePolytope, kind: WeightKind) -> Result<Self> {
        validate(&polytope, &kind)?;
        Ok(ToricWeight { polytope, kind })
    }

    pub fn canonical(polytope: LatticePolytope) -> Self {
        ToricWeight {
            polytope,
            kind: WeightKind::Canonical,
        }
    }

    /// `½ log Σ_{m ∈ Δ∩Zⁿ} e^{2⟨m,u⟩}`, the Fubini–Study-type weight of Δ.
    pub fn fubini_study(polytope: LatticePolytope) -> Self {
        let pts = crate::toric::lattice_points(&polytope, 1).expect("valid polytope");
        let terms = pts
            .exponents
            .into_iter()
            .map(|exponent| MonomialTerm {
                exponent,
                coefficient: 1.0,
            })
            .collect();
        ToricWeight::new(polytope, WeightKind::MonomialExp { terms }).expect("valid terms")
    }

    pub fn monomial_exp(polytope: LatticePolytope, terms: Vec<MonomialTerm>) -> Result<Self> {
        Self::new(polytope, WeightKind::MonomialExp { terms })
    }

    pub fn grid(polytope: LatticePolytope, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(polytope, WeightKind::Grid { nodes, values })
    }

    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(
            self.polytope.clone(),
            WeightKind::Shifted {
                base: Box::new(self.kind.clone()),
                c,
            },
        )
    }

    /// `(1 − s)·self + s·other`.
    pub fn interpolate(&self, other: &ToricWeight, s: f64) -> Result<Self> {
        if self.polytope != other.polytope {
            return Err(invalid("interpolated weights must share the polytope"));
        }
        Self::new(
            self.polytope.clone(),
            WeightKind::Interpolated {
                from: Box::new(self.kind.clone()),
                to: Box::new(other.kind.clone()),
                s,
            },
        )
    }

    pub fn polytope(&self) -> &LatticePolytope {
        &self.polytope
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    fn with_kind(&self, kind: &WeightKind) -> ToricWeight {
        ToricWeight {
            polytope: self.polytope.clone(),
            kind: kind.clone(),
        }
    }

    fn interval(&self) -> Result<(f64, f64)> {
        self.polytope
            .interval()
            .map(|(a, b)| (a as f64, b as f64))
            .ok_or(Error::DimensionUnsupported(self.dim()))
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match &self.kind {
            WeightKind::Canonical => support_function(&self.polytope, u),
            WeightKind::MonomialExp { terms } => monomial_logs(terms, u).2,
            WeightKind::Shifted { base, c } => self.with_kind(base).eval(u) + c,
            WeightKind::Grid { nodes, values } => {
                let x = u[0];
                let last = nodes.len() - 1;
                if x < nodes[0] || x > nodes[last] {
                    let end = if x < nodes[0] { 0 } else { last };
                    let offset = values[end] - support_function(&self.polytope, &[nodes[end]]);
                    return support_function(&self.polytope, u) + offset;
                }
                let i = grid_locate(nodes, x);
                let h = nodes[i + 1] - nodes[i];
                let lam = (x - nodes[i]) / h;
                values[i] + lam * (values[i + 1] - values[i])
            }
            WeightKind::Interpolated { from, to, s } => {
                (1.0 - s) * self.with_kind(from).eval(u) + s * self.with_kind(to).eval(u)
            }
        }
    }

    pub fn eval1(&self, u: f64) -> f64 {
        self.eval(&[u])
    }

    /// Right derivative `ψ'(u+)` for n = 1.
    pub fn slope1(&self, u: f64) -> f64 {
        match &self.kind {
            WeightKind::Canonical => {
                let (a, b) = self.interval().expect("dimension one");
                if u < 0.0 {
                    a
                } else {
                    b
                }
            }
            WeightKind::MonomialExp { terms } => monomial_moments(terms, u).0,
            WeightKind::Shifted { base, .. } => self.with_kind(base).slope1(u),
            WeightKind::Grid { nodes, values } => {
                let (a, b) = self.interval().expect("dimension one");
                let last = nodes.len() - 1;
                if u < nodes[0] {
                    return if u < 0.0 { a } else { b };
                }
                if u >= nodes[last] {
                    return if u < 0.0 { a } else { b };
                }
                let i = grid_locate(nodes, u);
                (values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i])
            }
            WeightKind::Interpolated { from, to, s } => {
                (1.0 - s) * self.with_kind(from).slope1(u) + s * self.with_kind(to).slope1(u)
            }
        }
    }

    /// True when ψ is C² (no piecewise-linear component).
    pub fn is_smooth(&self) -> bool {
        fn smooth(kind: &WeightKind) -> bool {
            match kind {
                WeightKind::Canonical | WeightKind::Grid { .. } => false,
                WeightKind::MonomialExp { .. } => true,
                WeightKind::Shifted { base, .. } => smooth(base),
                WeightKind::Interpolated { from, to, s } => {
                    (smooth(from) || *s == 1.0) && (smooth(to) || *s == 0.0)
                }
            }
        }
        smooth(&self.kind)
    }

    /// `ψ''(u)` for n = 1, or `None` when the weight is not smooth.
    pub fn curvature1(&self, u: f64) -> Option<f64> {
        if !self.is_smooth() || self.dim() != 1 {
            return None;
        }
        Some(self.density_curvature1(u))
    }

    /// The smooth part of `ψ''(u)` (n = 1): equal to `ψ''` away from kinks.
    pub(crate) fn density_curvature1(&self, u: f64) -> f64 {
        let Ok(parts) = self.curvature_parts() else {
            return 0.0;
        };
        parts
            .densities
            .iter()
            .map(|(coef, kind)| match kind {
                WeightKind::MonomialExp { terms } => coef * 2.0 * monomial_moments(terms, u).1,
                _ => unreachable!("densities only carry monomial pieces"),
            })
            .sum()
    }

    /// Splits `ψ''` (n = 1) into point masses and smooth monomial pieces.
    pub fn curvature_parts(&self) -> Result<CurvatureParts> {
        let (a, b) = self.interval()?;
        let mut parts = CurvatureParts {
            atoms: Vec::new(),
            densities: Vec::new(),
        };
        self.collect_parts(&self.kind, 1.0, (a, b), &mut parts);
        parts.atoms.retain(|&(_, m)| m != 0.0);
        parts.densities.retain(|&(c, _)| c != 0.0);
        Ok(parts)
    }

    fn collect_parts(&self, kind: &WeightKind, coef: f64, (a, b): (f64, f64), out: &mut CurvatureParts) {
        match kind {
            WeightKind::Canonical => out.atoms.push((0.0, coef * (b - a))),
            WeightKind::MonomialExp { .. } => out.densities.push((coef, kind.clone())),
            WeightKind::Shifted { base, .. } => self.collect_parts(base, coef, (a, b), out),
            WeightKind::Interpolated { from, to, s } => {
                self.collect_parts(from, coef * (1.0 - s), (a, b), out);
                self.collect_parts(to, coef * s, (a, b), out);
            }
            WeightKind::Grid { nodes, values } => {
                let last = nodes.len() - 1;
                let slopes: Vec<f64> = (0..last)
                    .map(|i| (values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i]))
                    .collect();
                // kink of Ψ itself when 0 lies outside the sample box
                if 0.0 < nodes[0] || 0.0 > nodes[last] {
                    out.atoms.push((0.0, coef * (b - a)));
                }
                let left = if nodes[0] > 0.0 { b } else { a };
                out.atoms.push((nodes[0], coef * (slopes[0] - left)));
                for i in 1..last {
                    out.atoms.push((nodes[i], coef * (slopes[i] - slopes[i - 1])));
                }
                let right = if nodes[last] < 0.0 { a } else { b };
                out.atoms.push((nodes[last], coef * (right - slopes[last - 1])));
            }
        }
    }

    /// Bounds `(lo, hi)` with `lo ≤ ψ − Ψ_Δ ≤ hi` everywhere.
    pub fn offset_bounds(&self) -> (f64, f64) {
        fn bounds(p: &LatticePolytope, kind: &WeightKind) -> (f64, f64) {
            match kind {
                WeightKind::Canonical => (0.0, 0.0),
                WeightKind::MonomialExp { terms } => {
                    let lo = p
                        .vertices()
                        .iter()
                        .map(|v| {
                            let c = terms.iter().find(|t| &t.exponent == v).expect("vertex term").coefficient;
                            0.5 * c.ln()
                        })
                        .fold(f64::INFINITY, f64::min);
                    let hi = 0.5 * terms.iter().map(|t| t.coefficient).sum::<f64>().ln();
                    (lo, hi)
                }
                WeightKind::Shifted { base, c } => {
                    let (lo, hi) = bounds(p, base);
                    (lo + c, hi + c)
                }
                WeightKind::Grid { nodes, values } => {
                    // ψ − Ψ is concave on each segment, so its extremes on the box are
                    // bracketed by the node values and the segment-wise maximum of −Ψ.
                    let offsets: Vec<f64> = nodes
                        .iter()
                        .zip(values)
                        .map(|(&u, &v)| v - support_function(p, &[u]))
                        .collect();
                    let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
                    let mut hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if let Some(i) = nodes.windows(2).position(|w| w[0] < 0.0 && 0.0 < w[1]) {
                        let lam = -nodes[i] / (nodes[i + 1] - nodes[i]);
                        hi = hi.max(values[i] + lam * (values[i + 1] - values[i]));
                    }
                    (lo, hi)
                }
                WeightKind::Interpolated { from, to, s } => {
                    let (l0, h0) = bounds(p, from);
                    let (l1, h1) = bounds(p, to);
                    ((1.0 - s) * l0 + s * l1, (1.0 - s) * h0 + s * h1)
                }
            }
        }
        bounds(&self.polytope, &self.kind)
    }

    /// Limits `(β₋, β₊)` of `ψ(u) − a·u` as `u → −∞` and `ψ(u) − b·u` as `u → +∞` (n = 1).
    pub fn asymptotic_offsets(&self) -> Result<(f64, f64)> {
        let (a, b) = self.interval()?;
        fn limits(kind: &WeightKind, a: f64, b: f64) -> (f64, f64) {
            match kind {
                WeightKind::Canonical => (0.0, 0.0),
                WeightKind::MonomialExp { terms } => {
                    let c = |e: f64| {
                        terms.iter().find(|t| t.exponent[0] as f64 == e).expect("endpoint term").coefficient
                    };
                    (0.5 * c(a).ln(), 0.5 * c(b).ln())
                }
                WeightKind::Shifted { base, c } => {
                    let (l, r) = limits(base, a, b);
                    (l + c, r + c)
                }
                WeightKind::Grid { nodes, values } => {
                    let last = nodes.len() - 1;
                    let psi = |u: f64| if u < 0.0 { a * u } else { b * u };
                    (values[0] - psi(nodes[0]), values[last] - psi(nodes[last]))
                }
                WeightKind::Interpolated { from, to, s } => {
                    let (l0, r0) = limits(from, a, b);
                    let (l1, r1) = limits(to, a, b);
                    ((1.0 - s) * l0 + s * l1, (1.0 - s) * r0 + s * r1)
                }
            }
        }
        Ok(limits(&self.kind, a, b))
    }

    /// `(u₋, u₊)` such that `ψ(u) ≥ a·u + β₋` for `u ≤ u₋` and
    /// `ψ(u) ≥ b·u + β₊` for `u ≥ u₊` (n = 1), with β from [`Self::asymptotic_offsets`].
    pub fn asymptotic_region(&self) -> (f64, f64) {
        fn region(kind: &WeightKind) -> (f64, f64) {
            match kind {
                WeightKind::Canonical | WeightKind::MonomialExp { .. } => (0.0, 0.0),
                WeightKind::Shifted { base, .. } => region(base),
                WeightKind::Grid { nodes, .. } => (nodes[0].min(0.0), nodes[nodes.len() - 1].max(0.0)),
                WeightKind::Interpolated { from, to, .. } => {
                    let (l0, r0) = region(from);
                    let (l1, r1) = region(to);
                    (l0.min(l1), r0.max(r1))
                }
            }
        }
        region(&self.kind)
    }

    /// A global upper bound on `ψ''` for smooth weights (n = 1).
    pub fn curvature_bound(&self) -> Option<f64> {
        let (a, b) = self.interval().ok()?;
        if !self.is_smooth() {
            return None;
        }
        let parts = self.curvature_parts().ok()?;
        let total: f64 = parts.densities.iter().map(|(c, _)| c).sum();
        Some(total * 0.5 * (b - a) * (b - a))
    }

    /// Decaying upper bound on `ψ''(u)` for smooth weights (n = 1).
    ///
    /// On `u ≥ 0`, `ψ'' = 2 Var ≤ 2(b−a)² Σ_{m≠b} (c_m/c_b) e^{-2(b−m)u}`, and
    /// symmetrically on `u ≤ 0`.
    pub fn curvature_envelope(&self, u: f64) -> Option<f64> {
        let (a, b) = self.interval().ok()?;
        if !self.is_smooth() {
            return None;
        }
        let parts = self.curvature_parts().ok()?;
        let width = b - a;
        let mut total = 0.0;
        for (coef, kind) in &parts.densities {
            let WeightKind::MonomialExp { terms } = kind else {
                unreachable!("densities only carry monomial pieces")
            };
            let end = if u >= 0.0 { b } else { a };
            let c_end = terms.iter().find(|t| t.exponent[0] as f64 == end)?.coefficient;
            let tail: f64 = terms
                .iter()
                .filter(|t| t.exponent[0] as f64 != end)
                .map(|t| (t.coefficient / c_end) * (-2.0 * (end - t.exponent[0] as f64).abs() * u.abs()).exp())
                .sum();
            total += coef * (2.0 * width * width * tail).min(0.5 * width * width);
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> LatticePolytope {
        LatticePolytope::segment(0, 1).unwrap()
    }

    #[test]
    fn canonical_and_fs_values() {
        assert_eq!(ToricWeight::canonical(p1()).eval1(0.7), 0.7);
        let fs = ToricWeight::fubini_study(p1());
        assert!((fs.eval1(0.0) - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((fs.eval1(0.0) - 0.346574).abs() < 1e-6);
        // large arguments stay finite through log-sum-exp
        assert!((fs.eval1(500.0) - 500.0).abs() < 1e-12);
        assert!(fs.eval1(-500.0).abs() < 1e-12);
    }

    #[test]
    fn fs_derivatives_closed_form() {
        let fs = ToricWeight::fubini_study(p1());
        for u in [-3.0, -0.4, 0.0, 1.1, 5.0] {
            let e = (2.0 * u as f64).exp();
            assert!((fs.slope1(u) - e / (1.0 + e)).abs() < 1e-14);
            let expect = 2.0 * e / ((1.0 + e) * (1.0 + e));
            assert!((fs.curvature1(u).unwrap() - expect).abs() < 1e-14);
            assert!(fs.curvature_envelope(u).unwrap() >= expect);
        }
    }

    #[test]
    fn shift_is_exact() {
        let fs = ToricWeight::fubini_study(p1());
        let sh = fs.shifted(0.3).unwrap();
        for u in [-2.0, 0.0, 0.25, 4.0] {
            assert_eq!(sh.eval1(u) - fs.eval1(u), (fs.eval1(u) + 0.3) - fs.eval1(u));
        }
        assert_eq!(sh.curvature1(0.2), fs.curvature1(0.2));
    }

    #[test]
    fn grid_extends_canonically() {
        let w = ToricWeight::grid(p1(), vec![-1.0, 0.0, 1.0], vec![0.5, 0.5, 1.5]).unwrap();
        assert_eq!(w.eval1(-0.5), 0.5);
        assert_eq!(w.eval1(3.0), 3.5);
        assert_eq!(w.eval1(-3.0), 0.5);
        assert_eq!(w.slope1(0.5), 1.0);
        let parts = w.curvature_parts().unwrap();
        let mass: f64 = parts.atoms.iter().map(|a| a.1).sum();
        assert!((mass - 1.0).abs() < 1e-15);
        assert!(!w.is_smooth());
        assert_eq!(w.curvature1(0.0), None);
    }

    #[test]
    fn validation() {
        let missing_vertex = ToricWeight::monomial_exp(
            p1(),
            vec![MonomialTerm { exponent: vec![0], coefficient: 1.0 }],
        );
        assert!(matches!(missing_vertex, Err(Error::InvalidWeight(_))));
        let outside = ToricWeight::monomial_exp(
            p1(),
            vec![
                MonomialTerm { exponent: vec![0], coefficient: 1.0 },
                MonomialTerm { exponent: vec![1], coefficient: 1.0 },
                MonomialTerm { exponent: vec![2], coefficient: 1.0 },
            ],
        );
        assert!(matches!(outside, Err(Error::InvalidWeight(_))));
        assert!(ToricWeight::grid(p1(), vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let w = ToricWeight::fubini_study(p1()).shifted(0.25).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains(r#""kind":"shifted""#));
        assert_eq!(serde_json::from_str::<ToricWeight>(&s).unwrap(), w);
        let c: ToricWeight =
            serde_json::from_str(r#"{"polytope":{"dim":1,"vertices":[[0],[2]]},"kind":"canonical"}"#).unwrap();
        assert_eq!(c, ToricWeight::canonical(LatticePolytope::segment(0, 2).unwrap()));
    }
}
