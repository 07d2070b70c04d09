mod common;

use proptest::prelude::*;
use toric_theta::lattice::*;

fn gram_from(a: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = (0..n).map(|r| a[r * n + i] * a[r * n + j]).sum::<f64>();
        }
        g[i][i] += 0.1;
    }
    g
}

fn arb_lattice(max_rank: usize) -> impl Strategy<Value = EuclideanLattice> {
    (1..=max_rank).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * n)
            .prop_map(move |a| EuclideanLattice::from_rows(&gram_from(&a, n)).unwrap())
    })
}

fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    if m.len() == 1 {
        return m[0][0];
    }
    (0..m.len())
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &x)| x).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * cofactor_det(&minor)
        })
        .sum()
}

#[test]
fn covolume_against_cofactor_expansion() {
    let a = [0.3, -0.7, 0.2, 0.9, -0.4, 0.5, 0.1, -0.6, 0.8, 0.05, -0.2, 0.35, -0.9, 0.45, 0.6, -0.15];
    let rows = gram_from(&a, 4);
    let lat = EuclideanLattice::from_rows(&rows).unwrap();
    let oracle = cofactor_det(&rows).sqrt();
    assert!((covolume(&lat).unwrap() / oracle - 1.0).abs() < 1e-12);
}

#[test]
fn dual_covolumes_multiply_to_one() {
    let a = [0.5, 0.1, -0.3, 0.7, 0.2, 0.4, -0.8, 0.6, 0.9];
    let lat = EuclideanLattice::from_rows(&gram_from(&a, 3)).unwrap();
    let d = dual_lattice(&lat).unwrap();
    assert!((covolume(&lat).unwrap() * covolume(&d).unwrap() - 1.0).abs() < 1e-12);
    let back = dual_lattice(&d).unwrap().gram_matrix();
    assert!((back - lat.gram_matrix()).amax() < 1e-12);
}

fn brute_force_ball(rows: &[Vec<f64>]) -> usize {
    let lat = EuclideanLattice::from_rows(rows).unwrap();
    let lambda_min = lat.gram_matrix().symmetric_eigenvalues().min();
    let r = (1.0 / lambda_min.sqrt()).ceil() as i64;
    let mut count = 0;
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                if lat.norm_sq(&[x, y, z]) <= 1.0 {
                    count += 1;
                }
            }
        }
    }
    count
}

#[test]
fn small_vector_count_against_box_scan() {
    let rows = vec![vec![0.3, 0.1, 0.0], vec![0.1, 0.25, -0.05], vec![0.0, -0.05, 0.4]];
    let lat = EuclideanLattice::from_rows(&rows).unwrap();
    assert_eq!(count_small_vectors(&lat).unwrap(), brute_force_ball(&rows));
    assert!((h0_ar(&lat).unwrap() - (brute_force_ball(&rows) as f64).ln()).abs() < 1e-15);
}

#[test]
fn theta_examples() {
    let z = EuclideanLattice::identity(1);
    let direct: f64 = (-8i32..=8).map(|n| (-std::f64::consts::PI * (n * n) as f64).exp()).sum();
    assert!((log_theta(&z, 1.0, 1e-15).unwrap().log_value - direct.ln()).abs() < 1e-14);
    let z5 = EuclideanLattice::identity(5);
    assert!((h0_theta(&z5).unwrap() - 5.0 * direct.ln()).abs() < 1e-13);
    assert!(degree(&z5).unwrap().abs() < 1e-15);
    // θ(4) on Z equals ½θ(¼)
    let quarter: f64 = (-40i32..=40).map(|n| (-std::f64::consts::PI * 0.25 * (n * n) as f64).exp()).sum();
    let at4 = log_theta(&z, 4.0, 1e-15).unwrap().log_value;
    assert!((at4 - (0.5 * quarter).ln()).abs() < 1e-12);
    let g4 = EuclideanLattice::diagonal(vec![4.0]).unwrap();
    assert!((degree(&g4).unwrap() + 2f64.ln()).abs() < 1e-15);
    assert!(poisson_residual(&g4).unwrap().abs() < 1e-10);
    let r = lemma_monotonicity_check(&g4, &[1.0, std::f64::consts::E]).unwrap();
    assert!(r.max_violation <= 1e-12);
}

#[test]
fn dense_and_diagonal_paths_agree() {
    let lat = EuclideanLattice::diagonal(vec![0.3, 1.7, 0.05]).unwrap();
    for t in [0.5, 1.0, 3.0] {
        let fast = log_theta(&lat, t, 1e-13).unwrap().log_value;
        let dense = log_theta_with(&lat, t, &ThetaConfig::with_eps(1e-13).dense()).unwrap().log_value;
        assert!((fast - dense).abs() < 1e-10, "t={t}: {fast} vs {dense}");
    }
}

proptest! {
    #![proptest_config(common::seeded(24))]

    #[test]
    fn poisson_duality(lat in arb_lattice(5)) {
        prop_assert!(poisson_residual(&lat).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn sandwich(lat in arb_lattice(5)) {
        let n = lat.rank() as f64;
        let h0 = h0_theta(&lat).unwrap();
        let ar = h0_ar(&lat).unwrap();
        let lower = h0 - 0.5 * n * n.ln() + (1.0 - 1.0 / (2.0 * std::f64::consts::PI)).ln();
        prop_assert!(lower <= ar && ar <= h0 + std::f64::consts::PI);
    }

    #[test]
    fn theta_is_at_least_one_and_decreasing(lat in arb_lattice(4), t in 0.3f64..3.0) {
        let a = log_theta(&lat, t, 1e-12).unwrap();
        let b = log_theta(&lat, 1.1 * t, 1e-12).unwrap();
        prop_assert!(a.log_value >= -1e-12);
        prop_assert!(b.log_value <= a.log_value + 1e-11);
        let n = lat.rank() as f64;
        prop_assert!(b.log_value + 0.5 * n * (1.1 * t).ln() >= a.log_value + 0.5 * n * t.ln() - 1e-11);
    }

    #[test]
    fn second_moment_bound(lat in arb_lattice(4), t in 0.3f64..4.0) {
        prop_assert!(u_function(&lat, t).unwrap() <= lat.rank() as f64 / t + 1e-10);
    }

    #[test]
    fn diagonal_fast_path_matches_dense(d in prop::collection::vec(0.1f64..3.0, 1..4)) {
        let lat = EuclideanLattice::diagonal(d).unwrap();
        let fast = log_theta(&lat, 1.0, 1e-13).unwrap().log_value;
        let dense = log_theta_with(&lat, 1.0, &ThetaConfig::with_eps(1e-13).dense()).unwrap().log_value;
        prop_assert!((fast - dense).abs() <= 1e-10);
    }
}
