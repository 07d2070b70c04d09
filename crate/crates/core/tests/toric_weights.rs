mod common;

use proptest::prelude::*;
use toric_theta::measure::{ma_measure, RadialMeasure};
use toric_theta::quadrature::integrate;
use toric_theta::toric::*;
use toric_theta::weights::{MonomialTerm, ToricWeight};

fn box_scan(p: &LatticePolytope, k: u32) -> usize {
    let r = 3 * k as i64;
    let mut n = 0;
    for x in -r..=r {
        for y in -r..=r {
            if p.contains_scaled(k as i64, &[x, y]) {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn unit_square_counts() {
    let sq = LatticePolytope::unit_square();
    for k in 1..=5u32 {
        let n = lattice_points(&sq, k).unwrap().n_k();
        assert_eq!(n, ((k + 1) * (k + 1)) as usize);
        assert_eq!(n, box_scan(&sq, k));
    }
}

#[test]
fn counts_are_monotone_for_polytopes_with_origin() {
    let catalog = [
        LatticePolytope::projective_line(1).unwrap(),
        LatticePolytope::projective_line(3).unwrap(),
        LatticePolytope::segment(-2, 1).unwrap(),
        LatticePolytope::projective_plane(1).unwrap(),
        LatticePolytope::projective_plane(2).unwrap(),
        LatticePolytope::unit_square(),
    ];
    for p in &catalog {
        let ns: Vec<usize> = (1..=12).map(|k| lattice_points(p, k).unwrap().n_k()).collect();
        assert!(ns.windows(2).all(|w| w[0] <= w[1]), "{ns:?}");
    }
}

#[test]
fn ehrhart_leading_term() {
    for (p, vol) in [
        (LatticePolytope::unit_square(), 2.0),
        (LatticePolytope::projective_plane(1).unwrap(), 1.0),
        (LatticePolytope::projective_line(3).unwrap(), 3.0),
    ] {
        assert_eq!(geometric_volume(&p), vol);
        let n = p.dim() as i32;
        let fact = if n == 2 { 2.0 } else { 1.0 };
        let c = (10..=40u32)
            .map(|k| {
                let nk = lattice_points(&p, k).unwrap().n_k() as f64;
                (nk * fact / (k as f64).powi(n) - vol).abs() * k as f64
            })
            .fold(0.0, f64::max);
        // a bounded product k·|error| is the 1/k rate
        assert!(c < 10.0, "C = {c}");
        let nk = lattice_points(&p, 30).unwrap().n_k() as f64;
        assert!((nk * fact / 30f64.powi(n) - vol).abs() <= c / 30.0 + 1e-12);
    }
}

#[test]
fn fs_minus_canonical_on_grid() {
    let p = LatticePolytope::projective_line(1).unwrap();
    let fs = ToricWeight::fubini_study(p.clone());
    let half_ln2 = 0.5 * std::f64::consts::LN_2;
    for i in 0..=4000 {
        let u = -20.0 + i as f64 * 0.01;
        let g = fs.eval1(u) - support_function(&p, &[u]);
        assert!((-1e-15..=half_ln2 + 1e-15).contains(&g), "u={u}: {g}");
    }
    assert!((fs.eval1(0.0) - 0.346_573_590_279_972_6).abs() < 1e-15);
}

#[test]
fn fs_density_integrates_by_substitution() {
    let p = LatticePolytope::projective_line(1).unwrap();
    let fs = ToricWeight::fubini_study(p);
    let mu = ma_measure(&fs).unwrap();
    // e^{2u − 2ψ} = ψ'(u), so the integral is ∫₀¹ s ds
    let v = integrate(|u: &[f64]| (2.0 * u[0] - 2.0 * fs.eval1(u[0])).exp(), 1.0, &mu, 1e-12).unwrap();
    assert!((v - 0.5).abs() < 1e-10);
    let shifted = ma_measure(&fs.shifted(0.3).unwrap()).unwrap();
    for u in [-3.0, -0.2, 0.0, 1.4] {
        let a = integrate(|x: &[f64]| f64::from(x[0] < u), 1.0, &mu, 1e-12).unwrap();
        let b = integrate(|x: &[f64]| f64::from(x[0] < u), 1.0, &shifted, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn haar_integrals() {
    let haar = RadialMeasure::haar(1);
    assert_eq!(integrate(|u: &[f64]| u[0], 1.0, &haar, 1e-12).unwrap(), 0.0);
    assert_eq!(integrate(|_: &[f64]| 1.0, 1.0, &haar, 1e-12).unwrap(), 1.0);
}

fn arb_monomial_weight() -> impl Strategy<Value = ToricWeight> {
    (1i64..=3, prop::collection::vec(0.1f64..5.0, 4)).prop_map(|(d, cs)| {
        let p = LatticePolytope::projective_line(d).unwrap();
        let terms = (0..=d)
            .map(|m| MonomialTerm {
                exponent: vec![m],
                coefficient: cs[m as usize],
            })
            .collect();
        ToricWeight::monomial_exp(p, terms).unwrap()
    })
}

proptest! {
    #![proptest_config(common::seeded(32))]

    #[test]
    fn support_function_is_convex_and_homogeneous(
        u in prop::collection::vec(-5.0f64..5.0, 2),
        v in prop::collection::vec(-5.0f64..5.0, 2),
        k in 1i64..5,
    ) {
        for p in [LatticePolytope::unit_square(), LatticePolytope::projective_plane(2).unwrap()] {
            let mid = [0.5 * (u[0] + v[0]), 0.5 * (u[1] + v[1])];
            let lhs = support_function(&p, &mid);
            let rhs = 0.5 * support_function(&p, &u) + 0.5 * support_function(&p, &v);
            prop_assert!(lhs <= rhs + 1e-12);
            let pk = p.scaled(k).unwrap();
            prop_assert!((support_function(&pk, &u) - k as f64 * support_function(&p, &u)).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_is_exact(w in arb_monomial_weight(), c in -2.0f64..2.0, u in -30.0f64..30.0) {
        let s = w.shifted(c).unwrap();
        prop_assert_eq!(s.eval1(u), w.eval1(u) + c);
    }

    #[test]
    fn monomial_weights_are_convex(w in arb_monomial_weight(), u in -20.0f64..20.0) {
        let h = 1e-2;
        let d2 = (w.eval1(u + h) - 2.0 * w.eval1(u) + w.eval1(u - h)) / (h * h);
        prop_assert!(d2 >= -1e-8);
    }

    #[test]
    fn ma_measures_have_unit_mass(w in arb_monomial_weight()) {
        let mu = ma_measure(&w).unwrap();
        let m = integrate(|_: &[f64]| 1.0, 1.0, &mu, 1e-12).unwrap();
        prop_assert!((m - 1.0).abs() <= 1e-8);
    }
}
