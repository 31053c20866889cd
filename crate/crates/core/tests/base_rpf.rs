mod common;

use common::z;
use ergodykit_core::base_rpf::{check_hypotheses, combined_bound, random_test_vectors, spectral_radius_on_kernel, verify_lasota_yorke};
use ergodykit_core::systems::{geometric_potential, linear_expanding, manneville_pomeau};
use ergodykit_core::{build_rpf, twisted_operator, Potential, RPFDiscretization};

fn max_dev(v: &[f64], c: f64) -> f64 {
    v.iter().map(|x| (x - c).abs()).fold(0.0, f64::max)
}

/// Leading eigenvalue of a dense nonnegative matrix by plain power iteration.
fn dense_leading_eigenvalue(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w: Vec<f64> = a.iter().map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        let norm = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let done = next.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-15);
        v = next;
        lambda = norm;
        if done {
            break;
        }
    }
    lambda
}

fn eigen_residuals(rpf: &RPFDiscretization) -> (f64, f64) {
    let mh = rpf.matrix.apply(&rpf.h);
    let right = mh.iter().zip(&rpf.h).map(|(a, b)| (a - rpf.lambda * b).abs()).fold(0.0, f64::max) / rpf.lambda;
    let nm = rpf.matrix.apply_left(&rpf.nu);
    let left = nm.iter().zip(&rpf.nu).map(|(a, b)| (a - rpf.lambda * b).abs()).sum::<f64>() / rpf.lambda;
    (right, left)
}

#[test]
fn doubling_eigentriple() {
    let rpf = build_rpf(&linear_expanding(2).unwrap(), &Potential::zero(), 64).unwrap();
    assert!((rpf.lambda - 2.0).abs() < 1e-8);
    assert!(max_dev(&rpf.h, rpf.h[0]) < 1e-8);
    assert!(max_dev(&rpf.nu, 1.0 / 64.0) < 1e-8);
}

#[test]
fn tripling_averaging_operator() {
    let rpf = build_rpf(&linear_expanding(3).unwrap(), &Potential::constant(-(3f64.ln())), 64).unwrap();
    assert!((rpf.lambda - 1.0).abs() < 1e-8);
    assert!(max_dev(&rpf.nu, 1.0 / 64.0) < 1e-8);
    assert!(max_dev(&rpf.m, 1.0 / 64.0) < 1e-8);
}

#[test]
fn manneville_pomeau_zero_potential() {
    let rpf = build_rpf(&manneville_pomeau(0.5).unwrap(), &Potential::zero(), 512).unwrap();
    assert!((rpf.lambda - 2.0).abs() < 1e-6);
    let mean_h = rpf.h.iter().sum::<f64>() / rpf.n as f64;
    assert!(max_dev(&rpf.h, mean_h) / mean_h < 1e-6);
    assert!(rpf.nu.iter().all(|&v| v >= 0.0));
    assert!((rpf.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn perron_structure_and_residuals() {
    let maps = [linear_expanding(2).unwrap(), linear_expanding(5).unwrap(), manneville_pomeau(0.3).unwrap(), manneville_pomeau(0.8).unwrap()];
    for map in &maps {
        for pot in [Potential::zero(), geometric_potential(map, 0.2), Potential::new("wave", |x| 0.1 * (6.0 * x).sin())] {
            let rpf = build_rpf(map, &pot, 128).unwrap();
            let (right, left) = eigen_residuals(&rpf);
            assert!(right <= 1e-8 && left <= 1e-8, "{}: residuals {right:e} {left:e}", map.name);
            assert!(rpf.lambda > 0.0 && rpf.h.iter().all(|&v| v > 0.0) && rpf.nu.iter().all(|&v| v >= 0.0));
            assert!((rpf.nu.iter().sum::<f64>() - 1.0).abs() < 1e-12 && (rpf.m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let hn: f64 = rpf.h.iter().zip(&rpf.nu).map(|(a, b)| a * b).sum();
            assert!((hn - 1.0).abs() < 1e-10);
            for g in random_test_vectors(&rpf.midpoints, z(1.0), 10, 5) {
                let lg = rpf.apply_normalized(&g);
                let lhs: f64 = rpf.nu.iter().zip(&lg).map(|(a, b)| a * b).sum();
                let rhs: f64 = rpf.nu.iter().zip(&g).map(|(a, b)| a * b).sum();
                assert!((lhs - rhs).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn too_few_cells_rejected() {
    assert!(build_rpf(&linear_expanding(2).unwrap(), &Potential::zero(), 4).is_err());
}

#[test]
fn twisted_doubling_matches_original() {
    let rpf = build_rpf(&linear_expanding(2).unwrap(), &Potential::zero(), 64).unwrap();
    let tw = twisted_operator(&rpf).unwrap();
    let (a, b) = (rpf.matrix.to_dense(), tw.matrix.to_dense());
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn twisted_rows_are_stochastic_and_conformal_measure_is_m() {
    let map = manneville_pomeau(0.5).unwrap();
    for pot in [Potential::zero(), geometric_potential(&map, 0.1)] {
        let rpf = build_rpf(&map, &pot, 256).unwrap();
        let tw = twisted_operator(&rpf).unwrap();
        let ones = tw.apply_normalized(&vec![1.0; tw.n]);
        assert!(max_dev(&ones, 1.0) < 1e-8);
        let image = tw.apply_normalized_left(&rpf.m);
        assert!(image.iter().zip(&rpf.m).map(|(a, b)| (a - b).abs()).sum::<f64>() < 1e-8);
    }
}

#[test]
fn conjugation_preserves_leading_eigenvalue() {
    let map = manneville_pomeau(0.5).unwrap();
    let rpf = build_rpf(&map, &geometric_potential(&map, 0.1), 256).unwrap();
    let tw = twisted_operator(&rpf).unwrap();
    assert!((tw.lambda - rpf.lambda).abs() < 1e-8);
    assert!((dense_leading_eigenvalue(&tw.matrix.to_dense()) - rpf.lambda).abs() < 1e-8);
}

#[test]
fn lasota_yorke_fits() {
    let doubling = build_rpf(&linear_expanding(2).unwrap(), &Potential::zero(), 128).unwrap();
    let fit = verify_lasota_yorke(&doubling, z(1.0), 16).unwrap();
    assert!(fit.contracting && fit.beta <= 0.5 + 0.05, "beta {}", fit.beta);
    assert!(fit.c >= 1.0 - 1e-9, "C {}", fit.c);
    let tripling = build_rpf(&linear_expanding(3).unwrap(), &Potential::zero(), 129).unwrap();
    let fit = verify_lasota_yorke(&tripling, z(1.0), 16).unwrap();
    assert!(fit.contracting && fit.beta <= 1.0 / 3.0 + 0.05, "beta {}", fit.beta);
}

#[test]
fn kernel_decay_rates() {
    let mut rpf = build_rpf(&linear_expanding(2).unwrap(), &Potential::zero(), 128).unwrap();
    let plain = spectral_radius_on_kernel(&mut rpf, z(1.0)).unwrap();
    assert!(plain.r_hat <= 0.5 + 0.05, "r {}", plain.r_hat);
    assert_eq!(rpf.kernel_decay.unwrap().r_hat, plain.r_hat);

    let map = manneville_pomeau(0.5).unwrap();
    let mut rpf = build_rpf(&map, &geometric_potential(&map, 0.1), 128).unwrap();
    let mut tw = twisted_operator(&rpf).unwrap();
    let a = spectral_radius_on_kernel(&mut rpf, z(0.5)).unwrap();
    let b = spectral_radius_on_kernel(&mut tw, z(0.5)).unwrap();
    assert!(a.r_hat < 1.0 && (a.r_hat - b.r_hat).abs() < 0.05, "{} vs {}", a.r_hat, b.r_hat);
}

#[test]
fn manneville_pomeau_potential_is_small() {
    let map = manneville_pomeau(0.5).unwrap();
    let report = check_hypotheses(&map, &geometric_potential(&map, 0.05), z(1.0), 5000);
    assert!(report.oscillation <= 0.05 * 2.5f64.ln() + 1e-12, "oscillation {}", report.oscillation);
}

#[test]
fn combined_bound_values() {
    let eps = 0.01;
    let v = combined_bound(2, 1, 2.0, 1.0, z(1.0), eps);
    assert!((v - 0.75 * eps.exp()).abs() < 1e-15);
    assert!(combined_bound(2, 1, 2.0, 1.0, z(1.0), (4.0f64 / 3.0).ln() - 1e-9) < 1.0);
    assert!(combined_bound(2, 1, 2.0, 1.0, z(1.0), (4.0f64 / 3.0).ln() + 1e-9) > 1.0);
    for zeta in [0.1, 0.5, 0.77, 1.0] {
        let expected = (2.0 * 3f64.powf(-zeta) + 1.0) / 3.0;
        assert!((combined_bound(3, 1, 3.0, 1.0, z(zeta), 0.0) - expected).abs() < 1e-12);
    }
}

#[test]
fn hypotheses_are_monotone_in_the_potential() {
    let map = manneville_pomeau(0.5).unwrap();
    let small = check_hypotheses(&map, &Potential::new("s", |x| 0.01 * x), z(1.0), 1000);
    let large = check_hypotheses(&map, &Potential::new("l", |x| 2.0 * x), z(1.0), 1000);
    assert!(small.pass() && small.f1_pass && small.f2_pass);
    assert!(!large.f3_pass && large.epsilon > small.epsilon);
}
