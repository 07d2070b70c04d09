//! The one-dimensional theta function `θ₁(c) = Σ_{n∈Z} exp(-π c n²)` and its
//! normalized second moment.
//!
//! Both are evaluated by direct summation for `c ≥ 1` and through the Jacobi
//! functional equation `θ₁(c) = c^{-1/2} θ₁(1/c)` below that, so the number of
//! terms stays small even for arguments as tiny as `1e-30`.

use std::f64::consts::PI;

/// Crossover between direct summation and the functional equation.
pub const FUNCTIONAL_EQUATION_CROSSOVER: f64 = 1.0;

const MAX_TERMS: usize = 4096;

/// Sums `Σ_{n≥1} n^power exp(-π c n²)` until the remaining tail is below
/// `rel * (1 + partial)`, returning `(partial, tail_bound)`.
fn half_series(c: f64, power: i32, rel: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut n = 1usize;
    loop {
        let nf = n as f64;
        let term = nf.powi(power) * (-PI * c * nf * nf).exp();
        sum += term;
        // For n past the mode of x^p e^{-πcx²}, the ratio of consecutive terms is
        // at most q = ((n+1)/n)^p e^{-πc(2n+1)} < 1, so a geometric bound applies.
        let next = nf + 1.0;
        let ratio = (next / nf).powi(power) * (-PI * c * (2.0 * nf + 1.0)).exp();
        let past_mode = 2.0 * PI * c * nf * nf >= power as f64;
        if past_mode && ratio < 1.0 {
            let tail = term * ratio / (1.0 - ratio);
            if tail <= rel * (1.0 + sum) || n >= MAX_TERMS {
                return (sum, tail);
            }
        }
        if n >= MAX_TERMS {
            return (sum, f64::INFINITY);
        }
        n += 1;
    }
}

/// `θ₁(c)` by plain summation with no functional-equation shortcut.
///
/// Used as an independent oracle; accurate for `c ≳ 1e-3`.
pub fn theta1_direct(c: f64) -> f64 {
    assert!(c > 0.0, "theta1 needs a positive argument");
    let (half, _) = half_series(c, 0, 1e-18);
    1.0 + 2.0 * half
}

/// `Σ_{n∈Z} n² exp(-π c n²)` by plain summation.
pub fn second_moment1_direct(c: f64) -> f64 {
    assert!(c > 0.0, "theta1 needs a positive argument");
    let (half, _) = half_series(c, 2, 1e-18);
    2.0 * half
}

/// `log θ₁(c)` for any `c > 0`.
pub fn log_theta1(c: f64) -> f64 {
    log_theta1_with_error(c).0
}

/// `log θ₁(c)` together with a bound on its absolute error.
pub fn log_theta1_with_error(c: f64) -> (f64, f64) {
    debug_assert!(c > 0.0 && c.is_finite());
    if c < FUNCTIONAL_EQUATION_CROSSOVER {
        let (inner, err) = log_theta1_with_error(1.0 / c);
        return (-0.5 * c.ln() + inner, err + f64::EPSILON * c.ln().abs());
    }
    let (half, tail) = half_series(c, 0, 1e-17);
    let value = (2.0 * half).ln_1p();
    (value, 2.0 * tail + 4.0 * f64::EPSILON * value.abs().max(f64::MIN_POSITIVE))
}

/// The variance `σ²(c) = Σ n² e^{-πcn²} / θ₁(c)` of the discrete Gaussian on Z.
///
/// Below the crossover it uses `σ²(c) = 1/(2πc) − σ²(1/c)/c²`, obtained by
/// differentiating the functional equation.
pub fn sigma2(c: f64) -> f64 {
    debug_assert!(c > 0.0 && c.is_finite());
    if c < FUNCTIONAL_EQUATION_CROSSOVER {
        let inv = 1.0 / c;
        return 0.5 * inv / PI - sigma2(inv) * inv * inv;
    }
    let (moment, _) = half_series(c, 2, 1e-17);
    let (theta, _) = half_series(c, 0, 1e-17);
    2.0 * moment / (1.0 + 2.0 * theta)
}
