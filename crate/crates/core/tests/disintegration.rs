mod common;

use common::z;
use ergodykit_core::disintegration::{
    disintegration_holder, holder_constant, integrate, l1_norm, linf_norm, multiply_observable, product_measure, s1_norm, sinf_norm,
};
use ergodykit_core::holder_norm::norm;
use ergodykit_core::signed_measure::{canonicalize, total_mass};
use ergodykit_core::systems::{geometric_potential, linear_expanding, manneville_pomeau};
use ergodykit_core::{build_rpf, AtomicSignedMeasure, CellGrid, DisintegratedMeasure, Observable, Potential, Reference};
use proptest::prelude::*;
use std::sync::Arc;

fn dirac(y: f64) -> AtomicSignedMeasure {
    AtomicSignedMeasure::dirac(y).unwrap()
}

fn zero_measure(grid: Arc<CellGrid>, reference: Reference) -> DisintegratedMeasure {
    DisintegratedMeasure { reference, restrictions: vec![AtomicSignedMeasure::zero(); grid.n()], grid }
}

fn mp_grid(n: usize) -> Arc<CellGrid> {
    let map = manneville_pomeau(0.5).unwrap();
    CellGrid::from_rpf(&build_rpf(&map, &geometric_potential(&map, 0.1), n).unwrap())
}

#[test]
fn weak_norm_examples() {
    let grid = mp_grid(64);
    let n = grid.n();
    let m1 = product_measure(grid.clone(), Reference::Nu, &vec![1.0; n], &dirac(0.5)).unwrap();
    assert!((l1_norm(&m1, z(1.0)).unwrap() - 1.0).abs() < 1e-12);
    let doubled = product_measure(grid.clone(), Reference::Nu, &vec![2.0; n], &dirac(0.5)).unwrap();
    assert!((l1_norm(&doubled, z(1.0)).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(l1_norm(&zero_measure(grid.clone(), Reference::Nu), z(1.0)).unwrap(), 0.0);

    let m_prod = product_measure(grid.clone(), Reference::M, &vec![1.0; n], &dirac(0.5)).unwrap();
    assert!((linf_norm(&m_prod, z(0.5)).unwrap() - 1.0).abs() < 1e-12);
    let mut heavy = m_prod.clone();
    heavy.restrictions[17] = dirac(0.2).scaled(3.0);
    assert!((linf_norm(&heavy, z(0.5)).unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(linf_norm(&zero_measure(grid, Reference::M), z(1.0)).unwrap(), 0.0);
}

#[test]
fn strong_norm_examples() {
    let grid = CellGrid::lebesgue(64);
    let n = grid.n();
    let flat = product_measure(grid.clone(), Reference::M, &vec![1.0; n], &dirac(0.0)).unwrap();
    assert!((sinf_norm(&flat, z(1.0)).unwrap() - 2.0).abs() < 1e-12);
    let linear = product_measure(grid.clone(), Reference::M, &grid.midpoints, &dirac(0.0)).unwrap();
    let s = sinf_norm(&linear, z(1.0)).unwrap();
    assert!((s - 3.0).abs() < 2.0 / n as f64, "S_inf {s}");
    let zero = zero_measure(grid, Reference::M);
    assert_eq!((s1_norm(&zero, z(1.0)).unwrap(), sinf_norm(&zero, z(1.0)).unwrap()), (0.0, 0.0));
}

#[test]
fn holder_constant_examples() {
    let grid = CellGrid::lebesgue(64);
    let x = &grid.midpoints;
    assert_eq!(holder_constant(&vec![0.3; 64], x, z(0.5)), 0.0);
    assert!((holder_constant(x, x, z(1.0)) - 1.0).abs() < 1e-12);
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut brute = 0.0f64;
    for i in 0..64 {
        for j in 0..64 {
            if i != j {
                brute = brute.max((sq[i] - sq[j]).abs() / (x[i] - x[j]).abs());
            }
        }
    }
    let h = holder_constant(&sq, x, z(1.0));
    // Largest quotient is x_i + x_j for the two rightmost midpoints, 2 - 2/n.
    assert!((h - brute).abs() < 1e-12 && (h - (2.0 - 2.0 / 64.0)).abs() < 1e-12, "{h}");
}

#[test]
fn disintegration_holder_examples() {
    let grid = mp_grid(64);
    let n = grid.n();
    let product = product_measure(grid.clone(), Reference::M, &vec![1.0; n], &AtomicSignedMeasure::new(vec![(0.1, 0.4), (0.8, 0.6)]).unwrap()).unwrap();
    assert_eq!(disintegration_holder(&product, z(0.5)).unwrap(), 0.0);

    let lebesgue = CellGrid::lebesgue(64);
    let path = DisintegratedMeasure {
        reference: Reference::M,
        restrictions: lebesgue.midpoints.iter().map(|&x| dirac(x)).collect(),
        grid: lebesgue.clone(),
    };
    assert!((disintegration_holder(&path, z(1.0)).unwrap() - 1.0).abs() < 1e-9);

    let mut signed = product;
    signed.restrictions[3] = signed.restrictions[3].scaled(-1.0);
    assert!(disintegration_holder(&signed, z(1.0)).is_err());
}

#[test]
fn integrate_examples() {
    let grid = mp_grid(64);
    let n = grid.n();
    let one = Observable::new("1", |_, _| 1.0, z(1.0));
    let y = Observable::new("y", |_, y| y, z(1.0));
    let m03 = product_measure(grid.clone(), Reference::M, &vec![1.0; n], &dirac(0.3)).unwrap();
    assert!((integrate(&m03, &one) - 1.0).abs() < 1e-12);
    assert!((integrate(&m03, &y) - 0.3).abs() < 1e-12);

    let n = 128;
    let doubling = CellGrid::from_rpf(&build_rpf(&linear_expanding(2).unwrap(), &Potential::zero(), n).unwrap());
    let nu0 = product_measure(doubling, Reference::Nu, &vec![1.0; n], &dirac(0.0)).unwrap();
    let x = Observable::new("x", |x, _| x, z(1.0));
    assert!((integrate(&nu0, &x) - 0.5).abs() <= 1.0 / n as f64);
}

#[test]
fn product_measure_mass_and_norm() {
    let grid = mp_grid(32);
    let density: Vec<f64> = (0..32).map(|k| 0.5 + (k as f64 * 0.37).sin().abs()).collect();
    let fiber = AtomicSignedMeasure::new(vec![(0.2, 0.25), (0.9, 0.75)]).unwrap();
    let mu = product_measure(grid.clone(), Reference::Nu, &density, &fiber).unwrap();
    let expected: f64 = density.iter().zip(&grid.nu).map(|(a, b)| a * b).sum();
    assert!((integrate(&mu, &Observable::new("1", |_, _| 1.0, z(1.0))) - expected).abs() < 1e-12);
    assert!((l1_norm(&mu, z(0.5)).unwrap() - expected).abs() < 1e-12);
    assert!(product_measure(grid, Reference::Nu, &[1.0], &fiber).is_err());
}

#[test]
fn multiply_observable_examples() {
    let grid = mp_grid(32);
    let fibers: Vec<AtomicSignedMeasure> =
        (0..32).map(|k| AtomicSignedMeasure::new(vec![(k as f64 / 40.0, 0.5), (0.9, 0.5)]).unwrap()).collect();
    let mu0 = DisintegratedMeasure { reference: Reference::M, restrictions: fibers, grid: grid.clone() };
    let same = multiply_observable(&mu0, &Observable::new("1", |_, _| 1.0, z(1.0)));
    assert!(same.restrictions.iter().zip(&mu0.restrictions).all(|(a, b)| a == b));

    let psi = |x: f64| 1.0 + x * x;
    let scaled = multiply_observable(&mu0, &Observable::new("psi", move |x, _| psi(x), z(1.0)));
    for (k, (a, b)) in scaled.restrictions.iter().zip(&mu0.restrictions).enumerate() {
        let c = psi(grid.midpoints[k]);
        assert!((total_mass(a) - c).abs() < 1e-12);
        assert!(a.atoms().iter().zip(b.atoms()).all(|(p, q)| p.0 == q.0 && (p.1 - c * q.1).abs() < 1e-15));
    }
}

fn cell_fibers(max_atoms: usize, n: usize) -> impl Strategy<Value = Vec<AtomicSignedMeasure>> {
    prop::collection::vec(
        prop::collection::vec((0.0..=1.0f64, 1e-3..1.0f64), 1..=max_atoms).prop_map(|mut a| {
            let t: f64 = a.iter().map(|p| p.1).sum();
            a.iter_mut().for_each(|p| p.1 /= t);
            canonicalize(a).unwrap()
        }),
        n,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_ordering_on_probabilities(fibers in cell_fibers(6, 32), density in prop::collection::vec(0.0..3.0f64, 32)) {
        let grid = mp_grid(32);
        let restrictions: Vec<_> = fibers.iter().zip(&density).map(|(f, d)| f.scaled(*d)).collect();
        let mass: f64 = density.iter().zip(&grid.m).map(|(a, b)| a * b).sum();
        let mu = DisintegratedMeasure { reference: Reference::M, restrictions, grid };
        let mu = DisintegratedMeasure { restrictions: mu.restrictions.iter().map(|r| r.scaled(1.0 / mass.max(1e-9))).collect(), ..mu };
        let l1 = l1_norm(&mu, z(0.5)).unwrap();
        prop_assert!(l1 <= linf_norm(&mu, z(0.5)).unwrap() + 1e-12);
        prop_assert!(mu.total_mass().abs() <= l1 + 1e-12);
        prop_assert!(s1_norm(&mu, z(0.5)).unwrap() >= l1 - 1e-12);
        prop_assert!(sinf_norm(&mu, z(0.5)).unwrap() >= linf_norm(&mu, z(0.5)).unwrap() - 1e-12);
    }

    #[test]
    fn cell_density_dominated_by_restriction_norm(
        cells in prop::collection::vec(prop::collection::vec((0.0..=1.0f64, -1.0..1.0f64), 1..8), 16),
    ) {
        let grid = mp_grid(16);
        let restrictions: Vec<_> = cells.into_iter().map(|c| canonicalize(c).unwrap()).collect();
        let mu = DisintegratedMeasure { reference: Reference::Nu, restrictions, grid };
        for (phi, r) in mu.phi1().iter().zip(&mu.restrictions) {
            prop_assert!(phi.abs() <= norm(r, z(0.7)).unwrap() + 1e-12);
        }
        prop_assert!(mu.total_mass().abs() <= l1_norm(&mu, z(0.7)).unwrap() + 1e-12);
    }

    #[test]
    fn multiply_then_integrate_matches_double_sum(
        fibers in cell_fibers(5, 24), a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64, k in 1.0..4.0f64,
    ) {
        let grid = mp_grid(24);
        let mu0 = DisintegratedMeasure { reference: Reference::M, restrictions: fibers, grid: grid.clone() };
        let sf = move |x: f64, y: f64| a + b * (k * x).cos() + c * x * y;
        let gf = move |x: f64, y: f64| (k * y).sin() + b * x;
        let s = Observable::new("s", sf, z(1.0));
        let g = Observable::new("g", gf, z(1.0));
        let kappa = multiply_observable(&mu0, &s);
        let one = Observable::new("1", |_, _| 1.0, z(1.0));
        let direct: f64 = (0..24)
            .map(|i| {
                let x = grid.midpoints[i];
                grid.m[i] * mu0.restrictions[i].atoms().iter().map(|&(y, w)| w * s.eval(x, y)).sum::<f64>()
            })
            .sum();
        prop_assert!((integrate(&kappa, &one) - direct).abs() <= 1e-10);
        let sg = Observable::new("sg", move |x, y| sf(x, y) * gf(x, y), z(1.0));
        prop_assert!((integrate(&kappa, &g) - integrate(&mu0, &sg)).abs() <= 1e-8);
    }

    #[test]
    fn product_measures_have_zero_regularity(fiber in cell_fibers(8, 1), zeta in 0.1..=1.0f64) {
        let grid = mp_grid(32);
        let mu = product_measure(grid, Reference::M, &vec![1.0; 32], &fiber[0]).unwrap();
        prop_assert_eq!(disintegration_holder(&mu, z(zeta)).unwrap(), 0.0);
    }
}
