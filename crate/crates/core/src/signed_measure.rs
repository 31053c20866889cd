//! Finitely supported signed measures on the fiber `K = [0, 1]`.

use crate::error::{Error, Result};
use crate::holder_norm::HolderExponent;

/// Positions closer than this after sorting are treated as the same atom.
/// Tolerance for images that land a rounding error outside `K`.
const DOMAIN_SLOP: f64 = 1e-12;

/// Sorted, merged list of `(position, weight)` atoms with non-zero weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicSignedMeasure {
    atoms: Vec<(f64, f64)>,
}

/// Jordan decomposition `mu = plus - minus` of an atomic measure.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanPair {
    pub plus: AtomicSignedMeasure,
    pub minus: AtomicSignedMeasure,
}

impl AtomicSignedMeasure {
    pub fn zero() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn dirac(pos: f64) -> Result<Self> {
        canonicalize(vec![(pos, 1.0)])
    }

    /// Builds a measure from raw atoms, sorting and merging them.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        canonicalize(atoms)
    }

    /// Uniform probability on `count` equally spaced atoms at the centres of a partition of `K`.
    pub fn uniform(count: usize) -> Self {
        let w = 1.0 / count as f64;
        let atoms = (0..count).map(|i| ((i as f64 + 0.5) / count as f64, w)).collect();
        Self { atoms }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self { atoms: self.atoms.iter().map(|&(x, w)| (x, w * c)).collect() }
    }

    /// Integral of `g` against the measure.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * g(x)).sum()
    }

    /// Linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mut raw = Vec::with_capacity(self.len() + other.len());
        raw.extend(self.atoms.iter().map(|&(x, w)| (x, a * w)));
        raw.extend(other.atoms.iter().map(|&(x, w)| (x, b * w)));
        canonicalize_in_range(raw)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }

    /// Sum of several measures with the given coefficients.
    pub fn linear_sum<'a>(terms: impl IntoIterator<Item = (f64, &'a Self)>) -> Self {
        let mut raw = Vec::new();
        for (c, m) in terms {
            raw.extend(m.atoms.iter().map(|&(x, w)| (x, c * w)));
        }
        canonicalize_in_range(raw)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.1 >= 0.0)
    }

    /// Probability measure to within `tol` in mass with non-negative weights.
    pub fn is_probability(&self, tol: f64) -> bool {
        self.is_nonnegative() && (total_mass(self) - 1.0).abs() <= tol
    }
}

fn check_atom(i: usize, x: f64, w: f64) -> Result<f64> {
    if !w.is_finite() {
        return Err(Error::Domain(format!("atom {i} has non-finite weight {w}")));
    }
    if !x.is_finite() || !(-DOMAIN_SLOP..=1.0 + DOMAIN_SLOP).contains(&x) {
        return Err(Error::Domain(format!("atom {i} at position {x} lies outside K = [0, 1]")));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Sorts atoms, merges coincident positions and drops zero weights.
pub fn canonicalize(atoms: Vec<(f64, f64)>) -> Result<AtomicSignedMeasure> {
    let mut checked = Vec::with_capacity(atoms.len());
    for (i, (x, w)) in atoms.into_iter().enumerate() {
        checked.push((check_atom(i, x, w)?, w));
    }
    Ok(canonicalize_in_range(checked))
}

pub(crate) fn canonicalize_in_range(mut atoms: Vec<(f64, f64)>) -> AtomicSignedMeasure {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match out.last_mut() {
            Some(last) if x == last.0 => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out.retain(|a| a.1 != 0.0);
    AtomicSignedMeasure { atoms: out }
}

pub fn jordan(mu: &AtomicSignedMeasure) -> JordanPair {
    let plus = mu.atoms.iter().filter(|a| a.1 > 0.0).copied().collect();
    let minus = mu.atoms.iter().filter(|a| a.1 < 0.0).map(|&(x, w)| (x, -w)).collect();
    JordanPair {
        plus: AtomicSignedMeasure { atoms: plus },
        minus: AtomicSignedMeasure { atoms: minus },
    }
}

pub fn total_mass(mu: &AtomicSignedMeasure) -> f64 {
    mu.atoms.iter().map(|a| a.1).sum()
}

pub fn total_variation(mu: &AtomicSignedMeasure) -> f64 {
    mu.atoms.iter().map(|a| a.1.abs()).sum()
}

/// Image measure `T_* mu`; fails if `T` maps an atom outside `K`.
pub fn pushforward(mu: &AtomicSignedMeasure, t: impl Fn(f64) -> f64) -> Result<AtomicSignedMeasure> {
    let mut raw = Vec::with_capacity(mu.len());
    for (i, &(x, w)) in mu.atoms.iter().enumerate() {
        let y = t(x);
        if !y.is_finite() || !(-DOMAIN_SLOP..=1.0 + DOMAIN_SLOP).contains(&y) {
            return Err(Error::Domain(format!(
                "pushforward sends atom {i} at {x} to {y}, outside K = [0, 1]"
            )));
        }
        raw.push((y.clamp(0.0, 1.0), w));
    }
    Ok(canonicalize_in_range(raw))
}

/// Result of [`compress`] together with its guaranteed dual-norm error.
#[derive(Debug, Clone)]
pub struct Compressed {
    pub measure: AtomicSignedMeasure,
    pub error_bound: f64,
}

/// Merges runs of same-sign atoms spanning at most `delta` into their weighted centroid.
///
/// The dual-norm error is at most `total_variation(mu) * delta^zeta`.
pub fn compress(mu: &AtomicSignedMeasure, delta: f64, zeta: HolderExponent) -> Result<Compressed> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("compression radius must be positive, got {delta}")));
    }
    let mut out = Vec::with_capacity(mu.len());
    let atoms = mu.atoms();
    let mut i = 0;
    while i < atoms.len() {
        let (x0, w0) = atoms[i];
        let sign = w0 > 0.0;
        let mut mass = w0;
        let mut moment = w0 * x0;
        let mut j = i + 1;
        while j < atoms.len() && (atoms[j].1 > 0.0) == sign && atoms[j].0 - x0 <= delta {
            mass += atoms[j].1;
            moment += atoms[j].1 * atoms[j].0;
            j += 1;
        }
        let c = if j == i + 1 { x0 } else { (moment / mass).clamp(atoms[i].0, atoms[j - 1].0) };
        out.push((c, mass));
        i = j;
    }
    Ok(Compressed {
        measure: canonicalize_in_range(out),
        error_bound: total_variation(mu) * delta.powf(zeta.value()),
    })
}

/// Splits every atom linearly between the two nearest of `points` equally spaced lattice
/// positions `k / (points - 1)`. Linear in the measure; preserves mass and mean.
///
/// The dual-norm error is at most `total_variation(mu) * spacing^zeta`.
pub fn project_to_lattice(mu: &AtomicSignedMeasure, points: usize, zeta: HolderExponent) -> Compressed {
    assert!(points >= 2, "lattice needs at least two points");
    let scale = (points - 1) as f64;
    let mut weights = vec![0.0; points];
    for &(x, w) in mu.atoms() {
        let t = x * scale;
        let k = (t.floor() as usize).min(points - 2);
        let frac = t - k as f64;
        weights[k] += w * (1.0 - frac);
        weights[k + 1] += w * frac;
    }
    let atoms = weights
        .into_iter()
        .enumerate()
        .filter(|&(_, w)| w != 0.0)
        .map(|(k, w)| (k as f64 / scale, w))
        .collect();
    Compressed {
        measure: AtomicSignedMeasure { atoms },
        error_bound: total_variation(mu) * (1.0 / scale).powf(zeta.value()),
    }
}

/// Serializes as a JSON array of `[position, weight]` pairs with 17 significant digits.
pub fn to_json(mu: &AtomicSignedMeasure) -> String {
    crate::io::to_json_string(&mu.atoms)
}

pub fn from_json(text: &str) -> Result<AtomicSignedMeasure> {
    let raw: Vec<(f64, f64)> = serde_json::from_str(text)?;
    canonicalize(raw)
}
