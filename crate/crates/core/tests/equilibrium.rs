mod common;

use proptest::prelude::*;
use toric_theta::equilibrium::energy::*;
use toric_theta::equilibrium::*;
use toric_theta::toric::{support_function, LatticePolytope};
use toric_theta::weights::{MonomialTerm, ToricWeight};

fn line(d: i64) -> LatticePolytope {
    LatticePolytope::projective_line(d).unwrap()
}

fn monomial(d: i64, coefs: &[f64]) -> ToricWeight {
    let terms = (0..=d)
        .map(|m| MonomialTerm {
            exponent: vec![m],
            coefficient: coefs[m as usize],
        })
        .collect();
    ToricWeight::monomial_exp(line(d), terms).unwrap()
}

fn nodes() -> Vec<f64> {
    linspace(-30.0, 30.0, 2001)
}

/// FS weight on `[0, 1]` plus bumps `h·(1 − x²)²` at the given centers.
fn bumpy(bumps: &[(f64, f64)]) -> GridFunction {
    let fs = ToricWeight::fubini_study(line(1));
    let values = nodes()
        .iter()
        .map(|&u| {
            let extra: f64 = bumps
                .iter()
                .map(|&(c, h)| {
                    let x = u - c;
                    if x.abs() < 1.0 { h * (1.0 - x * x).powi(2) } else { 0.0 }
                })
                .sum();
            fs.eval1(u) + extra
        })
        .collect();
    GridFunction::new(nodes(), values, Side::U).unwrap()
}

fn arb_bumps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, -0.3f64..0.6), 0..4)
}

#[test]
fn fs_is_its_own_envelope() {
    let fs = ToricWeight::fubini_study(line(1));
    let env = equilibrium_weight(&fs).unwrap();
    let samples = GridFunction::sample(&fs, &env.nodes).unwrap();
    let gap = env.values.iter().zip(&samples.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-8);
}

#[test]
fn bump_is_flattened_below_its_height() {
    let can = ToricWeight::canonical(line(1));
    let bump = bump_weight(&can, 0.3, 1.0, 0.75).unwrap();
    let env = equilibrium_weight(&bump).unwrap();
    let lift = env
        .nodes
        .iter()
        .zip(&env.values)
        .map(|(&u, &v)| v - support_function(can.polytope(), &[u]))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(lift < 0.3);
    assert!(lift.abs() < 1e-12);
    let below = env.nodes.iter().zip(&env.values).filter(|&(&u, &v)| v < bump.eval1(u) - 1e-3).count();
    assert!(below > 0);
}

#[test]
fn equilibrium_measure_examples() {
    let can = ToricWeight::canonical(line(2));
    assert_eq!(equilibrium_measure_integral(&can, |u| (u + 2.0).cos()).unwrap(), 2f64.cos());
    let fs = ToricWeight::fubini_study(line(1));
    assert!((equilibrium_measure_integral(&fs, |_| 1.0).unwrap() - 1.0).abs() < 1e-14);
    assert!(equilibrium_measure_integral(&fs, |u| u).unwrap().abs() < 1e-8);
}

#[test]
fn energy_examples() {
    let fs = ToricWeight::fubini_study(line(1));
    let can = ToricWeight::canonical(line(1));
    assert_eq!(energy_difference(&fs, &fs).unwrap(), 0.0);
    assert!((energy_difference(&fs, &can).unwrap() - 0.25).abs() < 1e-12);
    let g = |u: f64| fs.eval1(u) - u.max(0.0);
    assert!((ma_integral(&can, g, 1.0).unwrap() - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
    let d3 = ToricWeight::fubini_study(line(3));
    let e = energy_difference(&d3.shifted(0.4).unwrap(), &d3).unwrap();
    assert!((e - 0.4 * 3.0).abs() < 1e-10);
}

#[test]
fn degree_reports() {
    let fs = ToricWeight::fubini_study(line(1));
    let r = degree_report(&fs).unwrap();
    assert!((r.degree - 0.5).abs() < 1e-6 && (r.energy - 0.25).abs() < 1e-6);
    let h = hodge_gap(&ToricWeight::canonical(line(1)), &toric_theta::measure::RadialMeasure::haar(1), &[10, 20, 30, 40, 50, 60])
        .unwrap();
    assert!(h.gap.abs() < 1e-3 && h.degree == 0.0);
}

proptest! {
    #![proptest_config(common::seeded(24))]

    #[test]
    fn legendre_reverses_order(bumps in arb_bumps(), extra in 0.0f64..0.5) {
        let f = bumpy(&bumps);
        let mut more = bumps.clone();
        more.push((0.0, extra));
        let g = bumpy(&more);
        let fs = legendre(&f, 0.0, 1.0).unwrap();
        let gs = legendre(&g, 0.0, 1.0).unwrap();
        prop_assert!(fs.values.iter().zip(&gs.values).all(|(a, b)| a + 1e-12 >= *b));
    }

    #[test]
    fn biconjugate_is_below_and_idempotent(bumps in arb_bumps()) {
        let f = bumpy(&bumps);
        let env = envelope(&f, 0.0, 1.0).unwrap();
        prop_assert!(env.values.iter().zip(&f.values).all(|(e, v)| e <= &(v + 1e-12)));
        prop_assert!(env.is_convex(1e-12));
        let again = envelope(&env, 0.0, 1.0).unwrap();
        let drift = again.values.iter().zip(&env.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(drift <= 1e-8);
        // on the contact set the inverse conjugate of the p-grid reproduces the
        // samples wherever the slopes stay away from the ends of Δ
        let inv = legendre_inverse(&legendre(&f, 0.0, 1.0).unwrap(), &f.nodes).unwrap();
        for (((u, e), v), i) in f.nodes.iter().zip(&env.values).zip(&f.values).zip(&inv.values) {
            if u.abs() <= 2.0 && (e - v).abs() <= 1e-12 {
                prop_assert!((i - v).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn envelope_is_monotone(bumps in arb_bumps(), extra in 0.0f64..0.5, at in -5.0f64..5.0) {
        let f = bumpy(&bumps);
        let mut more = bumps.clone();
        more.push((at, extra));
        let g = bumpy(&more);
        let pf = envelope(&f, 0.0, 1.0).unwrap();
        let pg = envelope(&g, 0.0, 1.0).unwrap();
        prop_assert!(pf.values.iter().zip(&pg.values).all(|(a, b)| a <= &(b + 1e-12)));
    }

    #[test]
    fn degree_cocycle(d in 1i64..=3, c0 in prop::collection::vec(0.2f64..4.0, 4), c1 in prop::collection::vec(0.2f64..4.0, 4), s in -0.5f64..0.5) {
        let w0 = monomial(d, &c0);
        let w1 = monomial(d, &c1).shifted(s).unwrap();
        let lhs = arithmetic_degree(&w1).unwrap() - arithmetic_degree(&w0).unwrap();
        let rhs = variation_pairing(&w1, &w0).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-6, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn energy_is_antisymmetric(d in 1i64..=3, c0 in prop::collection::vec(0.2f64..4.0, 4), c1 in prop::collection::vec(0.2f64..4.0, 4)) {
        let w0 = monomial(d, &c0);
        let w1 = monomial(d, &c1);
        let a = energy_difference(&w1, &w0).unwrap();
        let b = energy_difference(&w0, &w1).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn mixed_masses_equal_the_volume(d in 1i64..=3, c in prop::collection::vec(0.2f64..4.0, 4), s in -1.0f64..1.0) {
        let w = monomial(d, &c).shifted(s).unwrap();
        for weight in [w, ToricWeight::canonical(line(d))] {
            let m = ma_integral(&weight, |_| 1.0, 1.0).unwrap();
            prop_assert!((m - d as f64).abs() <= 1e-8);
        }
    }
}
