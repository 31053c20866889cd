//! Decay of correlations, by transfer-operator iteration and by Birkhoff averages.

use crate::base_rpf::{BaseKind, RPFDiscretization};
use crate::disintegration::{integrate, multiply_observable, DisintegratedMeasure, Observable, Reference};
use crate::error::{Error, Result};
use crate::fit::exp_fit;
use crate::io::{csv_string, to_json_string};
use crate::transfer::{apply_f_phih_normalized, OperatorConfig, SkewSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Entries below this are ignored by [`fit_exponential`].
pub const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationTable {
    pub method: &'static str,
    pub n: Vec<usize>,
    /// `∫ g∘F^n · u dmu0 - ∫ g dmu0 ∫ u dmu0`.
    pub covariance: Vec<f64>,
    /// `C_n = |covariance_n|`.
    pub c: Vec<f64>,
    /// Standard errors of Monte Carlo estimates; empty for operator estimates.
    pub stderr: Vec<f64>,
}

impl CorrelationTable {
    /// CSV with columns `n, C_n, stderr`; operator rows carry `nan` standard errors.
    pub fn to_csv(&self) -> String {
        let rows: Vec<(usize, Vec<f64>)> = self
            .n
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, vec![self.c[i], self.stderr.get(i).copied().unwrap_or(f64::NAN)]))
            .collect();
        csv_string(&["n", "C_n", "stderr"], &rows)
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    Ok,
    /// Fewer than four entries above the floor; the fit uses what is there.
    FewPoints,
    /// Fitted rate at least one.
    NonDecaying,
    /// Every entry is below the floor.
    BelowFloor,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub prefactor: f64,
    pub rate: f64,
    pub r_squared: f64,
    pub flag: FitFlag,
}

/// Least-squares fit of `ln C_n` against `n` over entries above [`FIT_FLOOR`].
pub fn fit_exponential(table: &CorrelationTable) -> RateFit {
    let pts: Vec<(f64, f64)> =
        table.n.iter().zip(&table.c).filter(|p| *p.1 > FIT_FLOOR).map(|(&n, &c)| (n as f64, c)).collect();
    if pts.is_empty() {
        return RateFit { prefactor: 0.0, rate: 0.0, r_squared: 0.0, flag: FitFlag::BelowFloor };
    }
    let Some(f) = exp_fit(&pts) else {
        return RateFit { prefactor: pts[0].1, rate: 0.0, r_squared: 0.0, flag: FitFlag::FewPoints };
    };
    let flag = if f.rate >= 1.0 - 1e-12 {
        FitFlag::NonDecaying
    } else if pts.len() < 4 {
        FitFlag::FewPoints
    } else {
        FitFlag::Ok
    };
    RateFit { prefactor: f.prefactor, rate: f.rate, r_squared: f.r_squared, flag }
}

/// `C_n(u, g) = |∫ g dF̄^n(u mu0) - ∫ g dmu0 ∫ u dmu0|` for `n = 0..=n_max`.
pub fn correlation_operator(
    sys: &SkewSystem,
    rpf_twisted: &RPFDiscretization,
    mu0: &DisintegratedMeasure,
    u: &Observable,
    g: &Observable,
    n_max: usize,
    cfg: &OperatorConfig,
) -> Result<CorrelationTable> {
    let mu0 = mu0.to_reference(Reference::M);
    let product = integrate(&mu0, g) * integrate(&mu0, u);
    let mut nu = multiply_observable(&mu0, u);
    let mut covariance = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            nu = apply_f_phih_normalized(sys, rpf_twisted, &nu, cfg)?.measure;
        }
        covariance.push(integrate(&nu, g) - product);
    }
    Ok(CorrelationTable {
        method: "operator",
        n: (0..=n_max).collect(),
        c: covariance.iter().map(|c| c.abs()).collect(),
        covariance,
        stderr: Vec::new(),
    })
}

/// Orbit sampling parameters. Birkhoff estimates require the caller to assert that the
/// equilibrium state is physical (e.g. it coincides with the SRB measure).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BirkhoffConfig {
    pub orbits: usize,
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub assert_physical: bool,
}

/// Base point. Maps `x -> l x mod 1` are run on base-`l` digit expansions with fresh random
/// low digits, so floating-point orbits do not collapse onto `0`.
enum BaseState {
    Digits { l: u64, top: u64, x: u64 },
    Float(f64),
}

impl BaseState {
    fn new(sys: &SkewSystem, rng: &mut ChaCha8Rng) -> Self {
        match sys.base.kind {
            BaseKind::LinearExpanding { l } => {
                let l = l as u64;
                let mut top = 1u64;
                while top.checked_mul(l).is_some_and(|t| t <= 1 << 62) {
                    top *= l;
                }
                Self::Digits { l, top, x: rng.random_range(0..top) }
            }
            _ => Self::Float(rng.random::<f64>()),
        }
    }

    fn point(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Self::Digits { top, x, .. } => (x as f64 + rng.random::<f64>()) / top as f64,
            Self::Float(x) => x,
        }
    }

    fn advance(&mut self, sys: &SkewSystem, current: f64, rng: &mut ChaCha8Rng) {
        match self {
            Self::Digits { l, top, x } => *x = (*x % (*top / *l)) * *l + rng.random_range(0..*l),
            Self::Float(x) => *x = sys.base.apply(current),
        }
    }
}

/// Orbit of `F` after burn-in, `len` points long.
fn orbit(sys: &SkewSystem, cfg: &BirkhoffConfig, index: usize, len: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut base = BaseState::new(sys, &mut rng);
    let mut y: f64 = rng.random();
    let mut out = Vec::with_capacity(len);
    for k in 0..cfg.burn_in + len {
        let x = base.point(&mut rng);
        if k >= cfg.burn_in {
            out.push((x, y));
        }
        y = sys.fiber.eval(x, y).clamp(0.0, 1.0);
        base.advance(sys, x, &mut rng);
    }
    out
}

fn require_physical(cfg: &BirkhoffConfig) -> Result<()> {
    if !cfg.assert_physical {
        return Err(Error::Domain("Birkhoff estimates need the equilibrium state to be physical".into()));
    }
    if cfg.orbits < 2 || cfg.length == 0 {
        return Err(Error::Domain("Birkhoff estimates need at least two orbits of positive length".into()));
    }
    Ok(())
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Space average of `s` from time averages over independent orbits; batch-means standard error.
pub fn birkhoff_mean(sys: &SkewSystem, s: &Observable, cfg: &BirkhoffConfig) -> Result<(f64, f64)> {
    require_physical(cfg)?;
    let batches: Vec<f64> = (0..cfg.orbits)
        .into_par_iter()
        .map(|i| {
            let pts = orbit(sys, cfg, i, cfg.length);
            pts.iter().map(|&(x, y)| s.eval(x, y)).sum::<f64>() / pts.len() as f64
        })
        .collect();
    Ok(mean_and_stderr(&batches))
}

/// Monte Carlo `C_n(u, g)` for `n = 0..=n_max`; each orbit is one batch.
pub fn correlation_birkhoff(sys: &SkewSystem, u: &Observable, g: &Observable, n_max: usize, cfg: &BirkhoffConfig) -> Result<CorrelationTable> {
    require_physical(cfg)?;
    let per_orbit: Vec<Vec<f64>> = (0..cfg.orbits)
        .into_par_iter()
        .map(|i| {
            let pts = orbit(sys, cfg, i, cfg.length + n_max);
            let us: Vec<f64> = pts.iter().map(|&(x, y)| u.eval(x, y)).collect();
            let gs: Vec<f64> = pts.iter().map(|&(x, y)| g.eval(x, y)).collect();
            let t = cfg.length as f64;
            (0..=n_max)
                .map(|n| {
                    let mu = us[..cfg.length].iter().sum::<f64>() / t;
                    let mg = gs[n..n + cfg.length].iter().sum::<f64>() / t;
                    let cross = (0..cfg.length).map(|k| us[k] * gs[k + n]).sum::<f64>() / t;
                    cross - mu * mg
                })
                .collect()
        })
        .collect();
    let mut covariance = Vec::with_capacity(n_max + 1);
    let mut stderr = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let col: Vec<f64> = per_orbit.iter().map(|r| r[n]).collect();
        let (m, s) = mean_and_stderr(&col);
        covariance.push(m);
        stderr.push(s);
    }
    Ok(CorrelationTable {
        method: "birkhoff",
        n: (0..=n_max).collect(),
        c: covariance.iter().map(|c| c.abs()).collect(),
        covariance,
        stderr,
    })
}
