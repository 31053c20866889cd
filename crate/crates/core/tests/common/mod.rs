#![allow(dead_code)]

use ergodykit_core::signed_measure::canonicalize;
use ergodykit_core::{AtomicSignedMeasure, HolderExponent};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;

pub fn z(v: f64) -> HolderExponent {
    HolderExponent::new(v).unwrap()
}

/// Dual norm from a dense simplex solve over `positions`, which must contain the support.
pub fn lp_norm_on(mu: &AtomicSignedMeasure, positions: &[f64], zeta: HolderExponent) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = positions
        .iter()
        .map(|&x| {
            let w: f64 = mu.atoms().iter().filter(|a| a.0 == x).map(|a| a.1).sum();
            lp.add_var(w, (-1.0, 1.0))
        })
        .collect();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = zeta.pow((positions[i] - positions[j]).abs());
            lp.add_constraint([(vars[i], 1.0), (vars[j], -1.0)], ComparisonOp::Le, d);
            lp.add_constraint([(vars[j], 1.0), (vars[i], -1.0)], ComparisonOp::Le, d);
        }
    }
    lp.solve().unwrap().objective()
}

/// Dual norm with test functions restricted to the atoms.
pub fn lp_norm(mu: &AtomicSignedMeasure, zeta: HolderExponent) -> f64 {
    let xs: Vec<f64> = mu.positions().collect();
    lp_norm_on(mu, &xs, zeta)
}

pub fn signed_measure(max_atoms: usize) -> impl Strategy<Value = AtomicSignedMeasure> {
    prop::collection::vec((0.0..=1.0f64, -1.0..1.0f64), 1..=max_atoms).prop_map(|a| canonicalize(a).unwrap())
}

pub fn zero_mass_measure(max_atoms: usize) -> impl Strategy<Value = AtomicSignedMeasure> {
    prop::collection::vec((0.0..=1.0f64, -1.0..1.0f64), 2..=max_atoms).prop_map(|mut a| {
        let mean = a.iter().map(|p| p.1).sum::<f64>() / a.len() as f64;
        a.iter_mut().for_each(|p| p.1 -= mean);
        canonicalize(a).unwrap()
    })
}

pub fn probability(max_atoms: usize) -> impl Strategy<Value = AtomicSignedMeasure> {
    prop::collection::vec((0.0..=1.0f64, 1e-3..1.0f64), 1..=max_atoms).prop_map(|mut a| {
        let total: f64 = a.iter().map(|p| p.1).sum();
        a.iter_mut().for_each(|p| p.1 /= total);
        canonicalize(a).unwrap()
    })
}

pub fn exponent() -> impl Strategy<Value = HolderExponent> {
    prop_oneof![Just(z(1.0)), Just(z(0.5)), (0.05..=1.0f64).prop_map(z)]
}
