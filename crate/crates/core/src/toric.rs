//! Lattice polytopes in dimension one and two, their dilations and the monomial
//! bases `(kΔ) ∩ Zⁿ` of section spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A full-dimensional lattice polytope of dimension 1 or 2.
///
/// Vertices are stored increasing (n = 1) or counterclockwise starting from
/// the lexicographically smallest vertex (n = 2).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeJson", into = "PolytopeJson")]
pub struct LatticePolytope {
    dim: usize,
    vertices: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    dim: usize,
    vertices: Vec<Vec<i64>>,
}

impl TryFrom<PolytopeJson> for LatticePolytope {
    type Error = Error;
    fn try_from(raw: PolytopeJson) -> Result<Self> {
        LatticePolytope::new(raw.dim, raw.vertices)
    }
}

impl From<LatticePolytope> for PolytopeJson {
    fn from(p: LatticePolytope) -> Self {
        PolytopeJson {
            dim: p.dim,
            vertices: p.vertices,
        }
    }
}

fn cross(o: &[i64], a: &[i64], b: &[i64]) -> i64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl LatticePolytope {
    /// Builds the convex hull of the given points; points that are not
    /// vertices of the hull are dropped.
    pub fn new(dim: usize, points: Vec<Vec<i64>>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::DimensionUnsupported(dim));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidPolytope(format!(
                "every vertex must have {dim} coordinates"
            )));
        }
        match dim {
            1 => {
                let lo = points.iter().map(|p| p[0]).min();
                let hi = points.iter().map(|p| p[0]).max();
                match (lo, hi) {
                    (Some(a), Some(b)) if a < b => Ok(LatticePolytope {
                        dim,
                        vertices: vec![vec![a], vec![b]],
                    }),
                    _ => Err(Error::InvalidPolytope(
                        "a segment needs two distinct endpoints".into(),
                    )),
                }
            }
            _ => {
                let mut pts = points;
                pts.sort();
                pts.dedup();
                if pts.len() < 3 {
                    return Err(Error::InvalidPolytope("polygon has zero area".into()));
                }
                // Andrew's monotone chain, keeping only strict turns.
                let mut lower: Vec<Vec<i64>> = Vec::new();
                for p in &pts {
                    while lower.len() >= 2
                        && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0
                    {
                        lower.pop();
                    }
                    lower.push(p.clone());
                }
                let mut upper: Vec<Vec<i64>> = Vec::new();
                for p in pts.iter().rev() {
                    while upper.len() >= 2
                        && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0
                    {
                        upper.pop();
                    }
                    upper.push(p.clone());
                }
                lower.pop();
                upper.pop();
                lower.extend(upper);
                if lower.len() < 3 {
                    return Err(Error::InvalidPolytope("polygon has zero area".into()));
                }
                Ok(LatticePolytope {
                    dim,
                    vertices: lower,
                })
            }
        }
    }

    /// The segment `[a, b]`.
    pub fn segment(a: i64, b: i64) -> Result<Self> {
        Self::new(1, vec![vec![a], vec![b]])
    }

    /// `[0, d]`, the polytope of `O(d)` on the projective line.
    pub fn projective_line(d: i64) -> Result<Self> {
        Self::segment(0, d)
    }

    /// The standard simplex scaled by `d`, the polytope of `O(d)` on the projective plane.
    pub fn projective_plane(d: i64) -> Result<Self> {
        Self::new(2, vec![vec![0, 0], vec![d, 0], vec![0, d]])
    }

    pub fn unit_square() -> Self {
        Self::new(2, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]])
            .expect("unit square is a valid polygon")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.vertices
    }

    /// Endpoints `(a, b)` of a segment.
    pub fn interval(&self) -> Option<(i64, i64)> {
        (self.dim == 1).then(|| (self.vertices[0][0], self.vertices[1][0]))
    }

    /// Whether `m ∈ kΔ`, decided in integer arithmetic.
    pub fn contains_scaled(&self, k: i64, m: &[i64]) -> bool {
        match self.dim {
            1 => {
                let (a, b) = self.interval().expect("dimension one");
                k * a <= m[0] && m[0] <= k * b
            }
            _ => {
                let n = self.vertices.len();
                (0..n).all(|i| {
                    let p: Vec<i64> = self.vertices[i].iter().map(|x| k * x).collect();
                    let q: Vec<i64> = self.vertices[(i + 1) % n].iter().map(|x| k * x).collect();
                    cross(&p, &q, m) >= 0
                })
            }
        }
    }

    fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let lo = (0..self.dim)
            .map(|j| self.vertices.iter().map(|v| v[j]).min().unwrap())
            .collect();
        let hi = (0..self.dim)
            .map(|j| self.vertices.iter().map(|v| v[j]).max().unwrap())
            .collect();
        (lo, hi)
    }

    pub fn scaled(&self, k: i64) -> Result<Self> {
        Self::new(
            self.dim,
            self.vertices
                .iter()
                .map(|v| v.iter().map(|x| k * x).collect())
                .collect(),
        )
    }
}

/// The monomial basis `{χ^m : m ∈ (kΔ) ∩ Zⁿ}` of `H⁰(X, kL)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionSpace {
    pub polytope: LatticePolytope,
    pub k: u32,
    /// Exponents in lexicographic order.
    pub exponents: Vec<Vec<i64>>,
}

impl SectionSpace {
    pub fn n_k(&self) -> usize {
        self.exponents.len()
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }
}

/// Enumerates `(kΔ) ∩ Zⁿ` over the bounding box of `k·vertices`.
pub fn lattice_points(p: &LatticePolytope, k: u32) -> Result<SectionSpace> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if p.dim() > 2 {
        return Err(Error::DimensionUnsupported(p.dim()));
    }
    let kk = k as i64;
    let (lo, hi) = p.bounding_box();
    let mut exponents = Vec::new();
    match p.dim() {
        1 => {
            for x in kk * lo[0]..=kk * hi[0] {
                exponents.push(vec![x]);
            }
        }
        _ => {
            for x in kk * lo[0]..=kk * hi[0] {
                for y in kk * lo[1]..=kk * hi[1] {
                    let m = vec![x, y];
                    if p.contains_scaled(kk, &m) {
                        exponents.push(m);
                    }
                }
            }
        }
    }
    Ok(SectionSpace {
        polytope: p.clone(),
        k,
        exponents,
    })
}

/// `Ψ_Δ(u) = max_{m ∈ vertices} ⟨m, u⟩`.
pub fn support_function(p: &LatticePolytope, u: &[f64]) -> f64 {
    assert_eq!(u.len(), p.dim(), "point dimension mismatch");
    p.vertices()
        .iter()
        .map(|m| m.iter().zip(u).map(|(&a, &b)| a as f64 * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `n!` times the Euclidean volume of Δ.
pub fn geometric_volume(p: &LatticePolytope) -> f64 {
    match p.dim() {
        1 => {
            let (a, b) = p.interval().expect("dimension one");
            (b - a) as f64
        }
        _ => {
            let v = p.vertices();
            let n = v.len();
            let twice_area: i64 = (0..n)
                .map(|i| {
                    let (p0, p1) = (&v[i], &v[(i + 1) % n]);
                    p0[0] * p1[1] - p1[0] * p0[1]
                })
                .sum();
            twice_area.abs() as f64
        }
    }
}
