//! Fixtures shared by the benchmarks.

use ergodykit_core::signed_measure::canonicalize;
use ergodykit_core::AtomicSignedMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random signed measure with `atoms` atoms and zero total mass.
pub fn zero_mass_measure(atoms: usize, seed: u64) -> AtomicSignedMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<(f64, f64)> = (0..atoms).map(|_| (rng.random::<f64>(), rng.random_range(-1.0..1.0))).collect();
    let mean = raw.iter().map(|a| a.1).sum::<f64>() / atoms as f64;
    raw.iter_mut().for_each(|a| a.1 -= mean);
    canonicalize(raw).expect("positions lie in [0, 1]")
}
