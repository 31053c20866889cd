//! Exponential-rate fits shared by the convergence, spectral and correlation estimators.

use serde::Serialize;

/// `value ≈ prefactor * rate^n`, fitted by least squares on `ln value`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ExpFit {
    pub prefactor: f64,
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `ln v` against `n`; needs two or more positive points.
pub fn exp_fit(points: &[(f64, f64)]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(n, v)| (n, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(ExpFit { prefactor: intercept.exp(), rate: slope.exp(), r_squared, points: pts.len() })
}

/// Fit over the second half of a sequence indexed from zero, keeping entries above `floor`.
pub fn tail_fit(values: &[f64], floor: f64) -> Option<ExpFit> {
    let start = values.len() / 2;
    let tail: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(start)
        .filter(|p| *p.1 > floor)
        .map(|(n, &v)| (n as f64, v))
        .collect();
    if tail.len() >= 3 {
        return exp_fit(&tail);
    }
    let all: Vec<(f64, f64)> =
        values.iter().enumerate().filter(|p| *p.1 > floor).map(|(n, &v)| (n as f64, v)).collect();
    exp_fit(&all)
}

/// Constants of `s_n <= B beta^n s_0 + C w_0` fitted to sampled trajectories.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct LasotaYorkeFit {
    pub b: f64,
    pub beta: f64,
    pub c: f64,
    /// False when the fitted contraction rate is not below one.
    pub contracting: bool,
}

/// One sampled trajectory: strong norms `s_0 .. s_N` and the initial weak norm `w_0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub strong: Vec<f64>,
    pub weak0: f64,
}

/// `C` absorbs the asymptotic part `s_N / w_0`; `beta` is the fitted decay rate of the
/// remaining excess and `B` the smallest prefactor making every sample satisfy the bound.
pub fn lasota_yorke_fit(samples: &[Trajectory]) -> LasotaYorkeFit {
    let c = samples
        .iter()
        .filter(|t| t.weak0 > 0.0)
        .map(|t| t.strong.last().copied().unwrap_or(0.0) / t.weak0)
        .fold(0.0, f64::max);
    let horizon = samples.iter().map(|t| t.strong.len()).max().unwrap_or(0);
    let mut excess = vec![0.0f64; horizon];
    for t in samples {
        let s0 = t.strong[0];
        if s0 <= 0.0 {
            continue;
        }
        for (n, &s) in t.strong.iter().enumerate().skip(1) {
            excess[n] = excess[n].max((s - c * t.weak0).max(0.0) / s0);
        }
    }
    let top = excess.iter().copied().fold(0.0, f64::max);
    if top <= 1e-14 {
        return LasotaYorkeFit { b: 0.0, beta: 0.0, c, contracting: true };
    }
    let pts: Vec<(f64, f64)> = excess
        .iter()
        .enumerate()
        .skip(1)
        .filter(|p| *p.1 > 1e-14 * top)
        .map(|(n, &e)| (n as f64, e))
        .collect();
    let beta = match exp_fit(&pts) {
        Some(f) => f.rate,
        None => pts[0].1.powf(1.0 / pts[0].0),
    };
    let b = pts.iter().map(|&(n, e)| e / beta.powf(n)).fold(0.0, f64::max).max(1.0);
    LasotaYorkeFit { b, beta, c, contracting: beta < 1.0 }
}
