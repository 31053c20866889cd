//! Disintegrated measures on `Σ = [0, 1] × K`: a marginal density per base cell and one
//! fiber measure per cell.

use crate::base_rpf::{holder_quotient, sample_grid, RPFDiscretization};
use crate::error::{Error, Result};
use crate::holder_norm::{norm, HolderExponent};
use crate::io::to_json_string;
use crate::signed_measure::{canonicalize, total_mass, AtomicSignedMeasure};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Atoms of the fallback fiber used where the marginal density vanishes.
pub const FALLBACK_ATOMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Nu,
    M,
}

/// Base cells with the masses of the reference measures and the eigenfunction relating them.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub midpoints: Vec<f64>,
    pub nu: Vec<f64>,
    pub m: Vec<f64>,
    pub h: Vec<f64>,
}

impl CellGrid {
    pub fn from_rpf(rpf: &RPFDiscretization) -> Arc<Self> {
        Arc::new(Self { midpoints: rpf.midpoints.clone(), nu: rpf.nu.clone(), m: rpf.m.clone(), h: rpf.h.clone() })
    }

    /// Lebesgue cells with `h ≡ 1`, so that `nu = m`.
    pub fn lebesgue(n: usize) -> Arc<Self> {
        let w = vec![1.0 / n as f64; n];
        Arc::new(Self { midpoints: sample_grid(n), nu: w.clone(), m: w, h: vec![1.0; n] })
    }

    pub fn n(&self) -> usize {
        self.midpoints.len()
    }

    pub fn weights(&self, reference: Reference) -> &[f64] {
        match reference {
            Reference::Nu => &self.nu,
            Reference::M => &self.m,
        }
    }
}

/// A measure given cellwise by its restriction `mu|_gamma = phi1(gamma) mu_gamma`.
#[derive(Debug, Clone)]
pub struct DisintegratedMeasure {
    pub reference: Reference,
    pub restrictions: Vec<AtomicSignedMeasure>,
    pub grid: Arc<CellGrid>,
}

/// Observable `s(x, y)` with a bound on `|s|_zeta = H_zeta(s) + sup |s|`.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub zeta: HolderExponent,
    pub bound: f64,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable").field("name", &self.name).field("bound", &self.bound).finish()
    }
}

impl Observable {
    /// Estimates `|s|_zeta` on a 33 × 33 grid with the max metric on `Σ`.
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, zeta: HolderExponent) -> Self {
        let f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = Arc::new(f);
        let k = 33;
        let pts: Vec<(f64, f64, f64)> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i as f64 / (k - 1) as f64, j as f64 / (k - 1) as f64)))
            .map(|(x, y)| (x, y, f(x, y)))
            .collect();
        let sup = pts.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
        let mut h = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                let d = (a.0 - b.0).abs().max((a.1 - b.1).abs());
                h = h.max((a.2 - b.2).abs() / zeta.pow(d));
            }
        }
        Self { name: name.into(), f, zeta, bound: h + sup }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

impl DisintegratedMeasure {
    pub fn n(&self) -> usize {
        self.restrictions.len()
    }

    /// Marginal density `phi1(gamma) = mu|_gamma(K)`.
    pub fn phi1(&self) -> Vec<f64> {
        self.restrictions.iter().map(total_mass).collect()
    }

    /// Normalised fiber of cell `k`; the uniform fallback where the marginal vanishes.
    pub fn fiber(&self, k: usize) -> AtomicSignedMeasure {
        let mass = total_mass(&self.restrictions[k]);
        if mass == 0.0 {
            AtomicSignedMeasure::uniform(FALLBACK_ATOMS)
        } else {
            self.restrictions[k].scaled(1.0 / mass)
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.restrictions.iter().all(|r| r.is_nonnegative())
    }

    /// Restrictions rewritten against the other reference measure (`m = h nu`).
    pub fn to_reference(&self, target: Reference) -> Self {
        if target == self.reference {
            return self.clone();
        }
        let h = &self.grid.h;
        let restrictions = self
            .restrictions
            .iter()
            .zip(h)
            .map(|(r, &hk)| match target {
                Reference::Nu => r.scaled(hk),
                Reference::M => r.scaled(1.0 / hk),
            })
            .collect();
        Self { reference: target, restrictions, grid: self.grid.clone() }
    }

    /// `a * self + b * other` cellwise; both must share the reference and grid size.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        let other = other.to_reference(self.reference);
        if other.n() != self.n() {
            return Err(Error::Domain(format!("cell counts differ: {} vs {}", self.n(), other.n())));
        }
        let restrictions = self
            .restrictions
            .par_iter()
            .zip(&other.restrictions)
            .map(|(r, s)| r.combine(a, s, b))
            .collect();
        Ok(Self { reference: self.reference, restrictions, grid: self.grid.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn total_mass(&self) -> f64 {
        let w = self.grid.weights(self.reference);
        self.restrictions.iter().zip(w).map(|(r, wk)| wk * total_mass(r)).sum()
    }

    /// Largest atom count over cells.
    pub fn max_atoms(&self) -> usize {
        self.restrictions.iter().map(|r| r.len()).max().unwrap_or(0)
    }

    /// `{n, reference, phi1, fibers, signed}`; fibers are probabilities for non-negative
    /// measures and the restrictions themselves otherwise.
    pub fn to_json(&self) -> String {
        let signed = !self.is_nonnegative();
        let fibers: Vec<Vec<(f64, f64)>> = (0..self.n())
            .map(|k| if signed { self.restrictions[k].atoms().to_vec() } else { self.fiber(k).atoms().to_vec() })
            .collect();
        to_json_string(&MeasureFile { n: self.n(), reference: self.reference, phi1: self.phi1(), fibers, signed: Some(signed) })
    }

    pub fn from_json(text: &str, grid: Arc<CellGrid>) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text)?;
        if file.n != grid.n() || file.phi1.len() != file.n || file.fibers.len() != file.n {
            return Err(Error::Format(format!(
                "measure has n = {} with {} densities and {} fibers; grid has {} cells",
                file.n,
                file.phi1.len(),
                file.fibers.len(),
                grid.n()
            )));
        }
        let mut restrictions = Vec::with_capacity(file.n);
        for (k, (atoms, &d)) in file.fibers.into_iter().zip(&file.phi1).enumerate() {
            let fiber = canonicalize(atoms).map_err(|e| Error::Format(format!("cell {k}: {e}")))?;
            let signed = file.signed.unwrap_or_else(|| !fiber.is_nonnegative());
            restrictions.push(if signed { fiber } else { fiber.scaled(d) });
        }
        Ok(Self { reference: file.reference, restrictions, grid })
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    n: usize,
    reference: Reference,
    phi1: Vec<f64>,
    fibers: Vec<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signed: Option<bool>,
}

/// Cells carrying `density * weight` with fiber `fiber`.
pub fn product_measure(grid: Arc<CellGrid>, reference: Reference, density: &[f64], fiber: &AtomicSignedMeasure) -> Result<DisintegratedMeasure> {
    if density.len() != grid.n() {
        return Err(Error::Domain(format!("density has {} cells, grid has {}", density.len(), grid.n())));
    }
    let restrictions = density.iter().map(|&d| fiber.scaled(d)).collect();
    Ok(DisintegratedMeasure { reference, restrictions, grid })
}

fn cell_norms(dm: &DisintegratedMeasure, zeta: HolderExponent) -> Result<Vec<f64>> {
    dm.restrictions.par_iter().map(|r| norm(r, zeta)).collect()
}

/// `||mu||_1 = Σ_gamma ||mu|_gamma||_o nu(gamma)`.
pub fn l1_norm(dm: &DisintegratedMeasure, zeta: HolderExponent) -> Result<f64> {
    let d = dm.to_reference(Reference::Nu);
    Ok(cell_norms(&d, zeta)?.iter().zip(&d.grid.nu).map(|(a, w)| a * w).sum())
}

/// `||mu||_inf = max over cells with m > 0 of ||mu|_gamma||_o`, restrictions taken against `m`.
pub fn linf_norm(dm: &DisintegratedMeasure, zeta: HolderExponent) -> Result<f64> {
    let d = dm.to_reference(Reference::M);
    Ok(cell_norms(&d, zeta)?.iter().zip(&d.grid.m).filter(|p| *p.1 > 0.0).map(|p| *p.0).fold(0.0, f64::max))
}

/// `max_{i != j} |v_i - v_j| / |x_i - x_j|^zeta` over cell midpoints.
pub fn holder_constant(values: &[f64], midpoints: &[f64], zeta: HolderExponent) -> f64 {
    holder_quotient(midpoints, values, zeta)
}

fn density_strong_norm(dm: &DisintegratedMeasure, zeta: HolderExponent) -> f64 {
    let phi = dm.phi1();
    holder_constant(&phi, &dm.grid.midpoints, zeta) + phi.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// `|phi1|_zeta + ||mu||_1` with `phi1` the density against `nu`.
pub fn s1_norm(dm: &DisintegratedMeasure, zeta: HolderExponent) -> Result<f64> {
    let d = dm.to_reference(Reference::Nu);
    Ok(density_strong_norm(&d, zeta) + l1_norm(&d, zeta)?)
}

/// `|phi1|_zeta + ||mu||_inf` with `phi1` the density against `m`.
pub fn sinf_norm(dm: &DisintegratedMeasure, zeta: HolderExponent) -> Result<f64> {
    let d = dm.to_reference(Reference::M);
    Ok(density_strong_norm(&d, zeta) + linf_norm(&d, zeta)?)
}

/// `|mu|_zeta = max_{i != j} ||mu|_i - mu|_j||_o / |x_i - x_j|^zeta` for non-negative measures.
pub fn disintegration_holder(dm: &DisintegratedMeasure, zeta: HolderExponent) -> Result<f64> {
    if !dm.is_nonnegative() {
        return Err(Error::Domain("regularity is defined for non-negative measures only".into()));
    }
    let n = dm.n();
    let mids = &dm.grid.midpoints;
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut best = 0.0f64;
            for j in i + 1..n {
                let d = norm(&dm.restrictions[i].sub(&dm.restrictions[j]), zeta)?;
                best = best.max(d / zeta.pow((mids[i] - mids[j]).abs()));
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(per_row.into_iter().fold(0.0, f64::max))
}

/// The measure `s mu`: restrictions reweighted atomwise by `s(x_gamma, y)`.
pub fn multiply_observable(dm: &DisintegratedMeasure, s: &Observable) -> DisintegratedMeasure {
    let mids = &dm.grid.midpoints;
    let restrictions = dm
        .restrictions
        .par_iter()
        .zip(mids)
        .map(|(r, &x)| {
            let atoms = r.atoms().iter().map(|&(y, w)| (y, w * s.eval(x, y))).collect();
            crate::signed_measure::canonicalize_in_range(atoms)
        })
        .collect();
    DisintegratedMeasure { reference: dm.reference, restrictions, grid: dm.grid.clone() }
}

/// `∫ g dmu = Σ_gamma w(gamma) Σ_atoms weight * g(x_gamma, y)`.
pub fn integrate(dm: &DisintegratedMeasure, g: &Observable) -> f64 {
    let w = dm.grid.weights(dm.reference);
    dm.restrictions
        .iter()
        .zip(&dm.grid.midpoints)
        .zip(w)
        .map(|((r, &x), wk)| wk * r.integrate(|y| g.eval(x, y)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z1() -> HolderExponent {
        HolderExponent::LIPSCHITZ
    }

    #[test]
    fn product_of_dirac_has_zero_regularity_and_unit_norms() {
        let grid = CellGrid::lebesgue(16);
        let dm = product_measure(grid, Reference::M, &[1.0; 16], &AtomicSignedMeasure::dirac(0.0).unwrap()).unwrap();
        assert_eq!(disintegration_holder(&dm, z1()).unwrap(), 0.0);
        assert!((l1_norm(&dm, z1()).unwrap() - 1.0).abs() < 1e-12);
        assert!((linf_norm(&dm, z1()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_norm_of_linear_density() {
        let grid = CellGrid::lebesgue(64);
        let dens = grid.midpoints.clone();
        let dm = product_measure(grid, Reference::M, &dens, &AtomicSignedMeasure::dirac(0.0).unwrap()).unwrap();
        let s = sinf_norm(&dm, z1()).unwrap();
        let top = 127.0 / 128.0;
        assert!((s - (1.0 + 2.0 * top)).abs() < 1e-9);
    }

    #[test]
    fn signed_input_rejected_by_regularity() {
        let grid = CellGrid::lebesgue(8);
        let fiber = canonicalize(vec![(0.2, 1.0), (0.4, -0.5)]).unwrap();
        let dm = product_measure(grid, Reference::M, &[1.0; 8], &fiber).unwrap();
        assert!(disintegration_holder(&dm, z1()).is_err());
    }

    #[test]
    fn constant_observable_scales_integral() {
        let grid = CellGrid::lebesgue(8);
        let fiber = canonicalize(vec![(0.2, 0.5), (0.8, 0.5)]).unwrap();
        let dm = product_measure(grid, Reference::M, &[1.0; 8], &fiber).unwrap();
        let three = Observable::new("three", |_, _| 3.0, z1());
        let y = Observable::new("y", |_, y| y, z1());
        let scaled = multiply_observable(&dm, &three);
        assert!((integrate(&scaled, &y) - 3.0 * integrate(&dm, &y)).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip_positive_and_signed() {
        let grid = CellGrid::lebesgue(8);
        let fiber = canonicalize(vec![(0.25, 0.25), (0.75, 0.75)]).unwrap();
        let dens: Vec<f64> = (0..8).map(|k| 0.5 + k as f64 / 8.0).collect();
        let dm = product_measure(grid.clone(), Reference::Nu, &dens, &fiber).unwrap();
        let back = DisintegratedMeasure::from_json(&dm.to_json(), grid.clone()).unwrap();
        for (a, b) in back.restrictions.iter().zip(&dm.restrictions) {
            for (p, q) in a.atoms().iter().zip(b.atoms()) {
                assert!((p.0 - q.0).abs() < 1e-15 && (p.1 - q.1).abs() < 1e-15);
            }
        }
        let signed = dm.sub(&product_measure(grid.clone(), Reference::Nu, &[1.0; 8], &AtomicSignedMeasure::dirac(0.5).unwrap()).unwrap()).unwrap();
        let back = DisintegratedMeasure::from_json(&signed.to_json(), grid).unwrap();
        assert_eq!(back.restrictions, signed.restrictions);
    }
}
