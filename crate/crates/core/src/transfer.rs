//! Transfer operators of the skew product `F(x, y) = (f(x), G(x, y))` acting on
//! disintegrated measures.

use crate::base_rpf::{
    check_hypotheses, random_test_vectors, spectral_radius_on_kernel, BaseMap, FiberReport, HypothesisReport,
    Potential, RPFDiscretization,
};
use crate::disintegration::{
    l1_norm, linf_norm, s1_norm, sinf_norm, DisintegratedMeasure, Observable, Reference,
};
use crate::error::{Error, Result};
use crate::fit::{lasota_yorke_fit, tail_fit, ExpFit, LasotaYorkeFit, Trajectory};
use crate::holder_norm::HolderExponent;
use crate::signed_measure::{canonicalize_in_range, compress, project_to_lattice, pushforward, AtomicSignedMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

pub type FiberFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Fiber map `G(x, ·)`, an `alpha`-contraction of `K` for every `x`, with a bound on
/// `sup_y |G(x1, y) - G(x2, y)| / |x1 - x2|^zeta` for `x1, x2` in the same branch domain.
#[derive(Clone)]
pub struct FiberMap {
    pub name: String,
    g: FiberFn,
    pub alpha: f64,
    pub holder: f64,
}

impl std::fmt::Debug for FiberMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiberMap").field("name", &self.name).field("alpha", &self.alpha).finish()
    }
}

impl FiberMap {
    pub fn new(name: impl Into<String>, alpha: f64, holder: f64, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), g: Arc::new(g), alpha, holder }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.g)(x, y)
    }
}

#[derive(Clone, Debug)]
pub struct SkewSystem {
    pub base: BaseMap,
    pub fiber: FiberMap,
    pub potential: Potential,
    pub zeta: HolderExponent,
}

impl SkewSystem {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.base.apply(x), self.fiber.eval(x, y))
    }

    /// `alpha^zeta`, the fiber contraction of the dual norm.
    pub fn alpha_zeta(&self) -> f64 {
        self.zeta.pow(self.fiber.alpha)
    }
}

/// Fiber compression applied after every operator step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorConfig {
    /// Same-sign atoms within this distance are merged; `None` disables merging.
    pub compress_delta: Option<f64>,
    /// When a cell exceeds this many atoms, every cell is projected onto a lattice of this
    /// many points in `K`; otherwise same-sign merging applies.
    pub atom_cap: Option<usize>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { compress_delta: Some(1e-4), atom_cap: Some(64) }
    }
}

impl OperatorConfig {
    pub const EXACT: OperatorConfig = OperatorConfig { compress_delta: None, atom_cap: None };
}

/// Image measure and the largest per-cell dual-norm error introduced by compression.
#[derive(Debug, Clone)]
pub struct Step {
    pub measure: DisintegratedMeasure,
    pub compression_error: f64,
}

fn reduce(mu: AtomicSignedMeasure, zeta: HolderExponent, cfg: &OperatorConfig, project: bool) -> Result<(AtomicSignedMeasure, f64)> {
    if let (true, Some(cap)) = (project, cfg.atom_cap) {
        let c = project_to_lattice(&mu, cap, zeta);
        return Ok((c.measure, c.error_bound));
    }
    match cfg.compress_delta {
        Some(delta) if mu.len() > 1 => {
            let c = compress(&mu, delta, zeta)?;
            Ok((c.measure, c.error_bound))
        }
        _ => Ok((mu, 0.0)),
    }
}

fn step(sys: &SkewSystem, rpf: &RPFDiscretization, dm: &DisintegratedMeasure, scale: f64, cfg: &OperatorConfig) -> Result<Step> {
    if dm.n() != rpf.n {
        return Err(Error::Domain(format!("measure has {} cells, discretisation has {}", dm.n(), rpf.n)));
    }
    let pushed: Vec<AtomicSignedMeasure> = rpf
        .preimages
        .par_iter()
        .map(|row| -> Result<AtomicSignedMeasure> {
            let mut raw: Vec<(f64, f64)> = Vec::new();
            for p in row {
                let src = &dm.restrictions[p.cell];
                if src.is_empty() {
                    continue;
                }
                let pushed = pushforward(src, |z| sys.fiber.eval(p.point, z))?;
                let c = p.weight * scale;
                raw.extend(pushed.atoms().iter().map(|&(y, w)| (y, c * w)));
            }
            Ok(canonicalize_in_range(raw))
        })
        .collect::<Result<_>>()?;
    // One cell over the cap sends every cell to the lattice, so that the step stays a single
    // linear map once atoms proliferate.
    let project = cfg.atom_cap.is_some_and(|cap| pushed.iter().any(|r| r.len() > cap));
    let cells: Vec<(AtomicSignedMeasure, f64)> =
        pushed.into_par_iter().map(|r| reduce(r, sys.zeta, cfg, project)).collect::<Result<_>>()?;
    let compression_error = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    let restrictions = cells.into_iter().map(|c| c.0).collect();
    Ok(Step {
        measure: DisintegratedMeasure { reference: dm.reference, restrictions, grid: dm.grid.clone() },
        compression_error,
    })
}

/// `(F_Phi mu)|_x = Σ_i e^{phi(y_i)} G(y_i, ·)_* mu|_{y_i}` on `nu`-referenced measures.
pub fn apply_f_phi(sys: &SkewSystem, rpf: &RPFDiscretization, dm: &DisintegratedMeasure, cfg: &OperatorConfig) -> Result<Step> {
    if rpf.twisted || dm.reference != Reference::Nu {
        return Err(Error::Domain("F_Phi acts on nu-referenced measures with the plain operator".into()));
    }
    step(sys, rpf, dm, 1.0, cfg)
}

/// `F_Phi / lambda`.
pub fn apply_f_phi_normalized(sys: &SkewSystem, rpf: &RPFDiscretization, dm: &DisintegratedMeasure, cfg: &OperatorConfig) -> Result<Step> {
    if rpf.twisted || dm.reference != Reference::Nu {
        return Err(Error::Domain("F_Phi acts on nu-referenced measures with the plain operator".into()));
    }
    step(sys, rpf, dm, 1.0 / rpf.lambda, cfg)
}

/// Normalised twisted operator on `m`-referenced measures, with weights
/// `h(y_i) e^{phi(y_i)} / (lambda h(x))`.
pub fn apply_f_phih_normalized(sys: &SkewSystem, rpf_twisted: &RPFDiscretization, dm: &DisintegratedMeasure, cfg: &OperatorConfig) -> Result<Step> {
    if !rpf_twisted.twisted || dm.reference != Reference::M {
        return Err(Error::Domain("the twisted operator acts on m-referenced measures".into()));
    }
    step(sys, rpf_twisted, dm, 1.0 / rpf_twisted.lambda, cfg)
}

/// Applies the normalised operator matching `rpf`: twisted on `m`, plain on `nu`.
pub fn apply_normalized(sys: &SkewSystem, rpf: &RPFDiscretization, dm: &DisintegratedMeasure, cfg: &OperatorConfig) -> Result<Step> {
    if rpf.twisted {
        apply_f_phih_normalized(sys, rpf, &dm.to_reference(Reference::M), cfg)
    } else {
        apply_f_phi_normalized(sys, rpf, &dm.to_reference(Reference::Nu), cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    /// `||mu_{k+1} - mu_k||` for every step.
    pub distances: Vec<f64>,
    pub norm: &'static str,
    pub fit: Option<ExpFit>,
    pub alpha_zeta: f64,
    pub r_hat: f64,
    pub beta3: f64,
    pub d3: f64,
    pub d4: f64,
    pub compression_error: f64,
}

impl ConvergenceReport {
    /// Rows `iteration, distance` for CSV output.
    pub fn csv_rows(&self) -> Vec<(usize, Vec<f64>)> {
        self.distances.iter().enumerate().map(|(k, &d)| (k + 1, vec![d])).collect()
    }
}

/// Iterates the normalised operator until successive distances drop below `tol`
/// (`||·||_inf` for the twisted operator, `||·||_1` otherwise). Non-convergence within
/// `max_iter` steps is reported, not raised.
pub fn iterate_to_equilibrium(
    sys: &SkewSystem,
    rpf: &RPFDiscretization,
    dm0: &DisintegratedMeasure,
    tol: f64,
    max_iter: usize,
    cfg: &OperatorConfig,
) -> Result<(DisintegratedMeasure, ConvergenceReport)> {
    let zeta = sys.zeta;
    let distance = |a: &DisintegratedMeasure, b: &DisintegratedMeasure| -> Result<f64> {
        let d = a.sub(b)?;
        if rpf.twisted {
            linf_norm(&d, zeta)
        } else {
            l1_norm(&d, zeta)
        }
    };
    let mut mu = dm0.to_reference(if rpf.twisted { Reference::M } else { Reference::Nu });
    let mut distances = Vec::new();
    let mut converged = false;
    let mut compression_error = 0.0f64;
    for _ in 0..max_iter {
        let next = apply_normalized(sys, rpf, &mu, cfg)?;
        compression_error = compression_error.max(next.compression_error);
        let d = distance(&next.measure, &mu)?;
        distances.push(d);
        mu = next.measure;
        if d < tol {
            converged = true;
            break;
        }
    }
    let r_hat = match rpf.kernel_decay {
        Some(k) => k.r_hat,
        None => {
            let mut probe = rpf.clone();
            spectral_radius_on_kernel(&mut probe, zeta)?.r_hat
        }
    };
    let d_hat = rpf.kernel_decay.map(|k| k.d_hat).unwrap_or(1.0);
    let az = sys.alpha_zeta();
    let beta3 = r_hat.sqrt().max(az.sqrt());
    let abar1 = 1.0 / (1.0 - az);
    let abar2 = (1.0 + az) / (1.0 - az);
    let d3 = 1.0 / az.sqrt() + abar1 * d_hat / r_hat.sqrt();
    let d4 = 1.0 / az.sqrt() + abar2 * d_hat / r_hat.sqrt();
    let fit = tail_fit(&distances, 1e-300);
    let report = ConvergenceReport {
        converged,
        iterations: distances.len(),
        distances,
        norm: if rpf.twisted { "inf" } else { "1" },
        fit,
        alpha_zeta: az,
        r_hat,
        beta3,
        d3,
        d4,
        compression_error,
    };
    Ok((mu, report))
}

/// Random measure with `∫ phi1 dm = 0`, random probability fibers and zero-mass dipoles.
pub fn random_zero_average(rpf: &RPFDiscretization, zeta: HolderExponent, rng: &mut ChaCha8Rng) -> DisintegratedMeasure {
    let grid = crate::disintegration::CellGrid::from_rpf(rpf);
    let mut phi = random_test_vectors(&rpf.midpoints, zeta, 1, rng.random())[0].clone();
    let c = phi.iter().zip(&rpf.m).map(|(a, b)| a * b).sum::<f64>() / rpf.m.iter().sum::<f64>();
    phi.iter_mut().for_each(|v| *v -= c);
    let restrictions = phi
        .iter()
        .map(|&d| {
            let k = rng.random_range(1..=3);
            let mut atoms: Vec<(f64, f64)> = (0..k).map(|_| (rng.random::<f64>(), d / k as f64)).collect();
            let amp = rng.random_range(-0.5..0.5);
            atoms.push((rng.random::<f64>(), amp));
            atoms.push((rng.random::<f64>(), -amp));
            canonicalize_in_range(atoms)
        })
        .collect();
    DisintegratedMeasure { reference: Reference::M, restrictions, grid }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// Fitted decay rate of `S^inf` norms of zero-average measures (largest over trials).
    pub xi: f64,
    /// Smallest `R` with `||N^n mu|| <= R xi^n ||mu||` on all sampled trajectories.
    pub r: f64,
    pub trial_rates: Vec<f64>,
}

const GAP_HORIZON: usize = 24;

/// Decay of `S^inf` norms under the normalised twisted operator on zero-average measures.
pub fn estimate_spectral_gap(sys: &SkewSystem, rpf_twisted: &RPFDiscretization, trials: usize, seed: u64, cfg: &OperatorConfig) -> Result<GapReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<DisintegratedMeasure> = (0..trials.max(1)).map(|_| random_zero_average(rpf_twisted, sys.zeta, &mut rng)).collect();
    let trajectories: Vec<Vec<f64>> = starts
        .iter()
        .map(|mu0| -> Result<Vec<f64>> {
            let mut mu = mu0.clone();
            let mut norms = vec![sinf_norm(&mu, sys.zeta)?];
            for _ in 0..GAP_HORIZON {
                mu = apply_f_phih_normalized(sys, rpf_twisted, &mu, cfg)?.measure;
                norms.push(sinf_norm(&mu, sys.zeta)?);
            }
            Ok(norms)
        })
        .collect::<Result<_>>()?;
    let trial_rates: Vec<f64> = trajectories
        .iter()
        .map(|t| tail_fit(t, 1e-12 * t[0]).map(|f| f.rate).unwrap_or(0.0))
        .collect();
    let xi = trial_rates.iter().copied().fold(0.0, f64::max);
    let r = trajectories
        .iter()
        .flat_map(|t| {
            let t0 = t[0];
            t.iter().enumerate().map(move |(n, &v)| if xi > 0.0 { v / (xi.powi(n as i32) * t0) } else { (n == 0) as u8 as f64 })
        })
        .fold(1.0, f64::max);
    Ok(GapReport { xi, r, trial_rates })
}

/// Fits `||F̄^n mu||_{S1} <= A beta2^n ||mu||_{S1} + B2 ||mu||_1` for `n <= 20` on random
/// `nu`-referenced measures.
pub fn verify_ly_s1(sys: &SkewSystem, rpf: &RPFDiscretization, samples: usize, seed: u64, cfg: &OperatorConfig) -> Result<LasotaYorkeFit> {
    if rpf.twisted {
        return Err(Error::Domain("the S1 inequality uses the plain operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = crate::disintegration::CellGrid::from_rpf(rpf);
    let dens = random_test_vectors(&rpf.midpoints, sys.zeta, samples.max(1), rng.random());
    let trajectories: Vec<Trajectory> = dens
        .iter()
        .map(|phi| -> Result<Trajectory> {
            let restrictions = phi
                .iter()
                .map(|&d| {
                    let a = rng.random::<f64>();
                    let amp = rng.random_range(-0.5..0.5);
                    canonicalize_in_range(vec![(a, d), (rng.random::<f64>(), amp), (rng.random::<f64>(), -amp)])
                })
                .collect();
            let mut mu = DisintegratedMeasure { reference: Reference::Nu, restrictions, grid: grid.clone() };
            let weak0 = l1_norm(&mu, sys.zeta)?;
            let mut strong = vec![s1_norm(&mu, sys.zeta)?];
            for _ in 0..20 {
                mu = apply_f_phi_normalized(sys, rpf, &mu, cfg)?.measure;
                strong.push(s1_norm(&mu, sys.zeta)?);
            }
            Ok(Trajectory { strong, weak0 })
        })
        .collect::<Result<_>>()?;
    Ok(lasota_yorke_fit(&trajectories))
}

/// Returns `y0` with `G(x, y0) = y0` for every sampled `x`, if there is one.
pub fn check_class_s(sys: &SkewSystem) -> Option<f64> {
    let xs: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
    let fixed: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut y = 0.5;
            for _ in 0..10_000 {
                let next = sys.fiber.eval(x, y);
                if (next - y).abs() < 1e-15 {
                    return next;
                }
                y = next;
            }
            y
        })
        .collect();
    let lo = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fixed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-10 {
        return None;
    }
    let y0 = 0.5 * (lo + hi);
    xs.iter().all(|&x| (sys.fiber.eval(x, y0) - y0).abs() <= 1e-10).then_some(y0)
}

/// The potential `x -> Phi(x, y0)` on the base.
pub fn reduce_potential(phi: &Observable, y0: f64) -> Potential {
    let phi = phi.clone();
    Potential::new(format!("{}(x, {y0})", phi.name), move |x| phi.eval(x, y0))
}

/// Constants of `|F̄ mu|_zeta <= beta |mu|_zeta + D ||mu||_inf` on the cell grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegularityConstants {
    /// Largest of the declared `L`, the inverse-branch Lipschitz ratio and its cell-midpoint version.
    pub l_eff: f64,
    pub beta: f64,
    pub a1: f64,
    pub epsilon: f64,
    pub g_holder: f64,
    pub h_ratio: f64,
    pub d: f64,
    /// `D / (1 - beta)` when `beta < 1`.
    pub bound: Option<f64>,
}

/// Measures the regularity constants over all pairs of cells and same-branch preimages.
pub fn regularity_constants(sys: &SkewSystem, rpf: &RPFDiscretization) -> RegularityConstants {
    let n = rpf.n;
    let zeta = sys.zeta;
    let mids = &rpf.midpoints;
    let h = &rpf.h;
    let deg = rpf.preimages[0].len();
    let zs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let inf_w = rpf
        .preimages
        .iter()
        .flatten()
        .map(|p| sys.potential.eval(p.point).exp())
        .fold(f64::INFINITY, f64::min);

    let l_eff = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut l = 0.0f64;
            for k in j + 1..n {
                let d = mids[k] - mids[j];
                for i in 0..deg {
                    let (p, q) = (&rpf.preimages[j][i], &rpf.preimages[k][i]);
                    l = l.max((p.point - q.point).abs() / d).max((mids[p.cell] - mids[q.cell]).abs() / d);
                }
            }
            l
        })
        .reduce(|| 0.0, f64::max)
        .max(sys.base.lipschitz);

    let (a1, epsilon, g_hat) = (0..n)
        .into_par_iter()
        .map(|j| {
            let (mut a, mut e, mut g) = (0.0f64, 0.0f64, 0.0f64);
            for k in j + 1..n {
                let scale = zeta.pow(l_eff * (mids[k] - mids[j]));
                for i in 0..deg {
                    let (p, q) = (&rpf.preimages[j][i], &rpf.preimages[k][i]);
                    a = a.max((h[p.cell] / h[j] - h[q.cell] / h[k]).abs() / scale);
                    let dw = (sys.potential.eval(p.point).exp() - sys.potential.eval(q.point).exp()).abs();
                    e = e.max(dw / (inf_w * scale));
                    for &z in &zs {
                        let dg = (sys.fiber.eval(p.point, z) - sys.fiber.eval(q.point, z)).abs();
                        g = g.max(zeta.pow(dg) / scale);
                    }
                }
            }
            (a, e, g)
        })
        .reduce(|| (0.0, 0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1), x.2.max(y.2)));

    let g_holder = if zeta.is_lipschitz() { g_hat.max(sys.fiber.holder) } else { g_hat };
    let hmax = h.iter().copied().fold(0.0, f64::max);
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let h_ratio = hmax / hmin;
    let d = zeta.pow(l_eff) * (a1 * h_ratio + epsilon + g_holder);
    let beta = zeta.pow(sys.fiber.alpha * l_eff);
    RegularityConstants { l_eff, beta, a1, epsilon, g_holder, h_ratio, d, bound: (beta < 1.0).then(|| d / (1.0 - beta)) }
}

/// Base hypotheses plus the fiber contraction, the fiber Hölder bound and the regularity
/// precondition `(alpha L)^zeta < 1`, all on sampled points.
pub fn check_system(sys: &SkewSystem, samples: usize) -> HypothesisReport {
    let mut report = check_hypotheses(&sys.base, &sys.potential, sys.zeta, samples);
    let k = 128;
    let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let mut alpha_sampled = 0.0f64;
    let mut holder_sampled = 0.0f64;
    let mut in_range = true;
    for &x in &grid {
        for w in grid.windows(2) {
            let (a, b) = (sys.fiber.eval(x, w[0]), sys.fiber.eval(x, w[1]));
            in_range &= (-1e-12..=1.0 + 1e-12).contains(&a);
            alpha_sampled = alpha_sampled.max((a - b).abs() / (w[1] - w[0]));
        }
    }
    for b in &sys.base.branches {
        let xs: Vec<f64> = (0..=k).map(|i| b.domain.0 + (b.domain.1 - b.domain.0) * (i as f64 + 0.5) / (k + 1) as f64).collect();
        for (i, &x1) in xs.iter().enumerate() {
            for &x2 in &xs[i + 1..] {
                let dx = sys.zeta.pow((x1 - x2).abs());
                for &y in &[0.0, 0.5, 1.0] {
                    holder_sampled = holder_sampled.max((sys.fiber.eval(x1, y) - sys.fiber.eval(x2, y)).abs() / dx);
                }
            }
        }
    }
    let contraction_pass = in_range && alpha_sampled <= sys.fiber.alpha * (1.0 + 1e-9) && sys.fiber.alpha < 1.0;
    let holder_pass = holder_sampled <= sys.fiber.holder * (1.0 + 1e-6) + 1e-12;
    let regularity_factor = sys.zeta.pow(sys.fiber.alpha * sys.base.lipschitz);
    if !contraction_pass {
        report.failures.push(format!("fiber contraction: sampled {alpha_sampled:.6} against alpha = {}", sys.fiber.alpha));
    }
    if !holder_pass {
        report.failures.push(format!("fiber regularity: sampled {holder_sampled:.6} against declared {}", sys.fiber.holder));
    }
    report.fiber = Some(FiberReport {
        alpha: sys.fiber.alpha,
        alpha_sampled,
        contraction_pass,
        holder_declared: sys.fiber.holder,
        holder_sampled,
        holder_pass,
        regularity_factor,
        regularity_precondition_violated: regularity_factor >= 1.0,
    });
    report
}
