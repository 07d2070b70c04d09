//! Experiment configuration, read from one JSON file per experiment.

use serde::{Deserialize, Serialize};

use crate::bergman::ToricModel;
use crate::equilibrium::bump_weight;
use crate::error::{Error, Result};
use crate::lattice::EuclideanLattice;
use crate::measure::{ma_measure, RadialMeasure};
use crate::toric::LatticePolytope;
use crate::weights::{ToricWeight, WeightKind};

/// A weight on the model polytope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Canonical,
    FubiniStudy,
    /// `Ψ_Δ + height·(1 − x²)²` with `x = (u − center)/radius`, sampled on the default grid.
    Bump {
        height: f64,
        center: f64,
        radius: f64,
    },
    /// Any weight kind, spelled out.
    Explicit { weight: WeightKind },
}

impl WeightSpec {
    pub fn build(&self, p: &LatticePolytope) -> Result<ToricWeight> {
        match self {
            WeightSpec::Canonical => Ok(ToricWeight::canonical(p.clone())),
            WeightSpec::FubiniStudy => Ok(ToricWeight::fubini_study(p.clone())),
            WeightSpec::Bump { height, center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::ConfigInvalid("bump radius must be positive".into()));
                }
                bump_weight(&ToricWeight::canonical(p.clone()), *height, *center, *radius)
            }
            WeightSpec::Explicit { weight } => ToricWeight::new(p.clone(), weight.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Haar measure of the compact torus (the atom at the origin).
    Haar,
    /// Normalized Monge–Ampère measure of a smooth weight; the model weight
    /// when `weight` is absent.
    MongeAmpere {
        #[serde(default)]
        weight: Option<WeightSpec>,
        /// Must equal the model polytope when given.
        #[serde(default)]
        polytope: Option<LatticePolytope>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub polytope: LatticePolytope,
    pub weight: WeightSpec,
    pub measure: MeasureSpec,
    /// Constant added to the weight so that it is generated by small sections.
    #[serde(default)]
    pub shift: f64,
}

fn default_k_list() -> Vec<u32> {
    vec![10, 20, 30, 40, 50, 60]
}

fn default_t_list() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_k_list")]
    pub k_list: Vec<u32>,
    #[serde(default = "default_t_list")]
    pub t_list: Vec<f64>,
    /// Evaluation points; the default grid of the dimension when absent.
    #[serde(default)]
    pub u_grid: Option<Vec<Vec<f64>>>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            k_list: default_k_list(),
            t_list: default_t_list(),
            u_grid: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of Gram entries.
    pub gram_rtol: f64,
    /// Log-scale tolerance of lattice theta sums.
    pub theta_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gram_rtol: crate::bergman::DEFAULT_GRAM_RTOL,
            theta_eps: crate::lattice::DEFAULT_THETA_EPS,
        }
    }
}

/// Lattices for the `lattice` subcommand: explicit Gram matrices and/or a
/// number of seeded random ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default)]
    pub gram: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub random: usize,
    #[serde(default = "default_max_rank")]
    pub max_rank: usize,
}

fn default_max_rank() -> usize {
    6
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            gram: Vec::new(),
            random: 0,
            max_rank: default_max_rank(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub lattices: LatticeConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// The Fubini–Study model on `O(1)` over the projective line.
    pub fn fubini_study_line() -> Self {
        ExperimentConfig {
            model: ModelConfig {
                polytope: LatticePolytope::segment(0, 1).expect("segment"),
                weight: WeightSpec::FubiniStudy,
                measure: MeasureSpec::MongeAmpere {
                    weight: None,
                    polytope: None,
                },
                shift: 0.0,
            },
            scan: ScanConfig::default(),
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
            lattices: LatticeConfig::default(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.into()));
        let ks = &self.scan.k_list;
        if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_list must be nonempty, positive and strictly increasing");
        }
        if self.scan.t_list.is_empty() || self.scan.t_list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("t_list must be nonempty and positive");
        }
        if !(self.tolerances.gram_rtol > 0.0 && self.tolerances.theta_eps > 0.0) {
            return bad("tolerances must be positive");
        }
        if !self.model.shift.is_finite() {
            return bad("shift must be finite");
        }
        let dim = self.model.polytope.dim();
        if let Some(grid) = &self.scan.u_grid {
            if grid.is_empty() || grid.iter().any(|u| u.len() != dim) {
                return bad("u_grid points must match the polytope dimension");
            }
        }
        if let MeasureSpec::MongeAmpere { polytope: Some(p), .. } = &self.model.measure {
            if p != &self.model.polytope {
                return bad("measure and weight polytopes disagree");
            }
        }
        if self.lattices.max_rank == 0 {
            return bad("max_rank must be positive");
        }
        Ok(())
    }

    pub fn weight(&self) -> Result<ToricWeight> {
        let w = self.model.weight.build(&self.model.polytope)?;
        if self.model.shift != 0.0 {
            w.shifted(self.model.shift)
        } else {
            Ok(w)
        }
    }

    pub fn measure(&self) -> Result<RadialMeasure> {
        match &self.model.measure {
            MeasureSpec::Haar => Ok(RadialMeasure::haar(self.model.polytope.dim())),
            MeasureSpec::MongeAmpere { weight, .. } => match weight {
                Some(spec) => ma_measure(&spec.build(&self.model.polytope)?),
                None => ma_measure(&self.weight()?),
            },
        }
    }

    pub fn model(&self) -> Result<ToricModel> {
        ToricModel::new(self.weight()?, self.measure()?)
    }

    pub fn u_grid(&self) -> Vec<Vec<f64>> {
        self.scan
            .u_grid
            .clone()
            .unwrap_or_else(|| crate::bergman::default_u_grid(self.model.polytope.dim()))
    }

    /// Explicit lattices followed by the seeded random ones.
    pub fn lattices(&self) -> Result<Vec<EuclideanLattice>> {
        let mut out = self
            .lattices
            .gram
            .iter()
            .map(|rows| EuclideanLattice::from_rows(rows))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        out.extend(random_lattices(self.seed, self.lattices.random, self.lattices.max_rank));
        Ok(out)
    }
}

/// Shift parameter of the random Gram matrices `AᵀA + δI`.
pub const RANDOM_LATTICE_DELTA: f64 = 0.1;

/// `count` seeded random lattices with ranks cycling through `1..=max_rank`.
pub fn random_lattices(seed: u64, count: usize, max_rank: usize) -> Vec<EuclideanLattice> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| EuclideanLattice::random_spd(&mut rng, 1 + i % max_rank, RANDOM_LATTICE_DELTA))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default() {
        let cfg = ExperimentConfig::fubini_study_line();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_json() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":{"polytope":{"dim":1,"vertices":[[0],[2]]},"weight":{"kind":"canonical"},"measure":{"kind":"haar"}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.scan.k_list, default_k_list());
        let g = cfg.model().unwrap().gram(3).unwrap();
        assert_eq!(g.rank(), 7);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig::fubini_study_line();
        cfg.scan.k_list = vec![3, 2];
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));
        let mut cfg = ExperimentConfig::fubini_study_line();
        cfg.model.measure = MeasureSpec::MongeAmpere {
            weight: None,
            polytope: Some(LatticePolytope::segment(0, 2).unwrap()),
        };
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));
        assert!(ExperimentConfig::from_json("{").is_err());
    }

    #[test]
    fn random_lattices_are_seeded() {
        let a = random_lattices(7, 5, 6);
        let b = random_lattices(7, 5, 6);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|l| l.rank()).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }
}
