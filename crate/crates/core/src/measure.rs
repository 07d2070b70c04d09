//! Torus-invariant probability measures pushed forward to log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toric::geometric_volume;
use crate::weights::ToricWeight;

/// Mass tolerance for the probability normalization.
pub const MASS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

/// `mass · ψ''(u) / vol(L)` for a smooth weight ψ in dimension one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureDensity {
    pub weight: ToricWeight,
    pub mass: f64,
}

impl CurvatureDensity {
    fn volume(&self) -> f64 {
        geometric_volume(self.weight.polytope())
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.mass * self.weight.curvature1(u).expect("smooth weight") / self.volume()
    }

    /// Declared decay envelope dominating the density.
    pub fn envelope(&self, u: f64) -> f64 {
        self.mass * self.weight.curvature_envelope(u).expect("smooth weight") / self.volume()
    }

    /// Exact masses of `(−∞, −r]` and `[r, ∞)`, from the slope of ψ.
    pub fn tail_masses(&self, r: f64) -> (f64, f64) {
        let (a, b) = self.weight.polytope().interval().expect("dimension one");
        let vol = self.volume();
        let left = (self.weight.slope1(-r) - a as f64).max(0.0) / vol;
        let right = (b as f64 - self.weight.slope1(r)).max(0.0) / vol;
        (self.mass * left, self.mass * right)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialMeasure {
    pub dim: usize,
    pub atoms: Vec<Atom>,
    pub density: Option<CurvatureDensity>,
}

impl RadialMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>, density: Option<CurvatureDensity>) -> Result<Self> {
        let m = RadialMeasure { dim, atoms, density };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidMeasure(msg.into()));
        if self.atoms.iter().any(|a| a.location.len() != self.dim || a.location.iter().any(|x| !x.is_finite())) {
            return bad("atom location has the wrong dimension");
        }
        if self.atoms.iter().any(|a| !(a.mass > 0.0)) {
            return bad("atom masses must be positive");
        }
        if let Some(d) = &self.density {
            if self.dim != 1 || d.weight.dim() != 1 {
                return bad("densities are only supported in dimension one");
            }
            if !d.weight.is_smooth() {
                return Err(Error::WeightNotSmooth);
            }
            if !(d.mass > 0.0) {
                return bad("density mass must be positive");
            }
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not 1")));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.density.as_ref().map_or(0.0, |d| d.mass)
    }

    /// Push-forward of the Haar measure of the compact torus: the atom at 0.
    pub fn haar(dim: usize) -> Self {
        RadialMeasure {
            dim,
            atoms: vec![Atom {
                location: vec![0.0; dim],
                mass: 1.0,
            }],
            density: None,
        }
    }
}

/// The normalized Monge–Ampère measure `MA(ψ)/vol(L)` (n = 1).
pub fn ma_measure(w: &ToricWeight) -> Result<RadialMeasure> {
    if w.dim() != 1 {
        return Err(Error::DimensionUnsupported(w.dim()));
    }
    let parts = w.curvature_parts()?;
    if !parts.atoms.is_empty() && !parts.densities.is_empty() {
        return Err(Error::WeightNotSmooth);
    }
    if parts.densities.is_empty() {
        // Canonical, possibly shifted: the kink at the origin carries all the mass.
        if parts.atoms.len() == 1 && parts.atoms[0].0 == 0.0 {
            return Ok(RadialMeasure::haar(1));
        }
        return Err(Error::WeightNotSmooth);
    }
    RadialMeasure::new(
        1,
        Vec::new(),
        Some(CurvatureDensity {
            weight: w.clone(),
            mass: 1.0,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toric::LatticePolytope;

    #[test]
    fn canonical_gives_origin_atom() {
        let w = ToricWeight::canonical(LatticePolytope::segment(0, 1).unwrap());
        assert_eq!(ma_measure(&w).unwrap(), RadialMeasure::haar(1));
        let shifted = w.shifted(0.4).unwrap();
        assert_eq!(ma_measure(&shifted).unwrap(), RadialMeasure::haar(1));
    }

    #[test]
    fn fs_density_closed_form() {
        let fs = ToricWeight::fubini_study(LatticePolytope::segment(0, 1).unwrap());
        let m = ma_measure(&fs).unwrap();
        let d = m.density.as_ref().unwrap();
        for u in [-2.0f64, 0.0, 0.3, 3.0] {
            let e = (2.0 * u).exp();
            assert!((d.eval(u) - 2.0 * e / ((1.0 + e) * (1.0 + e))).abs() < 1e-15);
        }
        let (l, r) = d.tail_masses(1.0);
        let expect = 1.0 - (2.0f64).exp() / (1.0 + (2.0f64).exp());
        assert!((l - expect).abs() < 1e-15 && (r - expect).abs() < 1e-15);
        let sh = ma_measure(&fs.shifted(0.3).unwrap()).unwrap();
        assert_eq!(sh.density.unwrap().eval(0.2), d.eval(0.2));
    }

    #[test]
    fn grid_weight_is_rejected() {
        let w = ToricWeight::grid(LatticePolytope::segment(0, 1).unwrap(), vec![-1.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(ma_measure(&w), Err(Error::WeightNotSmooth));
    }

    #[test]
    fn mass_must_be_one() {
        let atoms = vec![Atom { location: vec![0.0], mass: 0.5 }];
        assert!(matches!(RadialMeasure::new(1, atoms, None), Err(Error::InvalidMeasure(_))));
    }
}
