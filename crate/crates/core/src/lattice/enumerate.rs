//! Fincke–Pohst enumeration of integer points inside an ellipsoid
//! `{v ∈ Z^N : vᵀGv ≤ R²}`, driven by the upper-triangular factor `G = RᵀR`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative slack on the radius so that boundary points are never lost to rounding.
const RADIUS_SLACK: f64 = 1e-10;

pub(crate) struct Ellipsoid {
    n: usize,
    /// diag[i] = R_ii²
    diag: Vec<f64>,
    /// mu[i][j] = R_ij / R_ii for j > i
    mu: Vec<Vec<f64>>,
}

impl Ellipsoid {
    /// Builds the enumeration data from a lower Cholesky factor `L` with `G = LLᵀ`.
    pub(crate) fn from_lower_factor(l: &DMatrix<f64>) -> Self {
        let n = l.nrows();
        let mut diag = vec![0.0; n];
        let mut mu = vec![vec![0.0; n]; n];
        for i in 0..n {
            let rii = l[(i, i)];
            diag[i] = rii * rii;
            for j in (i + 1)..n {
                // R = Lᵀ, so R_ij = L_ji
                mu[i][j] = l[(j, i)] / rii;
            }
        }
        Ellipsoid { n, diag, mu }
    }

    /// Calls `visit(v, q)` for every integer vector with `q = vᵀGv ≤ radius_sq`
    /// (up to a tiny relative slack). Returns the number of vectors visited.
    ///
    /// The traversal order is deterministic.
    pub(crate) fn for_each<F>(&self, radius_sq: f64, budget: usize, mut visit: F) -> Result<usize>
    where
        F: FnMut(&[i64], f64),
    {
        if self.n == 0 {
            visit(&[], 0.0);
            return Ok(1);
        }
        let bound = radius_sq * (1.0 + RADIUS_SLACK) + f64::MIN_POSITIVE;
        let mut v = vec![0i64; self.n];
        let mut count = 0usize;
        self.descend(self.n - 1, 0.0, bound, budget, &mut v, &mut count, &mut visit)?;
        Ok(count)
    }

    #[allow(clippy::too_many_arguments)]
    fn descend<F>(
        &self,
        level: usize,
        partial: f64,
        bound: f64,
        budget: usize,
        v: &mut [i64],
        count: &mut usize,
        visit: &mut F,
    ) -> Result<()>
    where
        F: FnMut(&[i64], f64),
    {
        let center: f64 = -((level + 1)..self.n)
            .map(|j| self.mu[level][j] * v[j] as f64)
            .sum::<f64>();
        let slack = (bound - partial).max(0.0);
        let half_width = (slack / self.diag[level]).sqrt();
        let lo = (center - half_width).ceil() as i64;
        let hi = (center + half_width).floor() as i64;
        for x in lo..=hi {
            let d = x as f64 - center;
            let q = partial + self.diag[level] * d * d;
            if q > bound {
                continue;
            }
            v[level] = x;
            if level == 0 {
                *count += 1;
                if *count > budget {
                    return Err(Error::EnumerationBudget { budget });
                }
                visit(v, q);
            } else {
                self.descend(level - 1, q, bound, budget, v, count, visit)?;
            }
        }
        v[level] = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipsoid(g: &DMatrix<f64>) -> Ellipsoid {
        let l = g.clone().cholesky().unwrap().l();
        Ellipsoid::from_lower_factor(&l)
    }

    #[test]
    fn counts_unit_ball_in_z2() {
        let e = ellipsoid(&DMatrix::identity(2, 2));
        let mut pts = Vec::new();
        e.for_each(1.0, 100, |v, _| pts.push(v.to_vec())).unwrap();
        assert_eq!(pts.len(), 5);
    }

    #[test]
    fn matches_box_scan_on_skewed_form() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.7, -0.3, 0.7, 1.5, 0.2, -0.3, 0.2, 0.9]);
        let e = ellipsoid(&g);
        let r2 = 6.5;
        let mut got = 0;
        e.for_each(r2, 1_000_000, |v, q| {
            let x = nalgebra::DVector::from_iterator(3, v.iter().map(|&a| a as f64));
            assert!(((x.transpose() * &g * &x)[0] - q).abs() < 1e-9);
            got += 1;
        })
        .unwrap();
        let mut expected = 0;
        for a in -10i64..=10 {
            for b in -10i64..=10 {
                for c in -10i64..=10 {
                    let x = nalgebra::DVector::from_vec(vec![a as f64, b as f64, c as f64]);
                    if (x.transpose() * &g * &x)[0] <= r2 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn budget_is_a_hard_error() {
        let e = ellipsoid(&DMatrix::identity(3, 3));
        let err = e.for_each(100.0, 10, |_, _| {}).unwrap_err();
        assert_eq!(err, Error::EnumerationBudget { budget: 10 });
    }
}
