//! Piecewise expanding base maps, potentials and the discretised Ruelle-Perron-Frobenius
//! operator `L_phi g(x) = Σ_{y ∈ f^{-1}x} g(y) e^{phi(y)}`.

use crate::error::{Error, Result};
use crate::fit::{lasota_yorke_fit, tail_fit, LasotaYorkeFit, Trajectory};
use crate::holder_norm::HolderExponent;
use crate::io::{csv_string, to_json_string};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One full branch of the base map: `forward` maps `domain` onto `[0, 1]`.
#[derive(Clone)]
pub struct Branch {
    pub domain: (f64, f64),
    pub forward: ScalarFn,
    pub inverse: ScalarFn,
    pub derivative: ScalarFn,
    /// Lipschitz constant of `inverse`.
    pub inverse_lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseKind {
    /// `x -> l x mod 1`.
    LinearExpanding { l: u32 },
    MannevillePomeau { alpha: f64 },
    Other,
}

/// Base map `f` with its expansion constants: inverse branches are `L`-Lipschitz on the
/// region `region` (met by `q` branch domains) and `1/sigma`-Lipschitz elsewhere.
#[derive(Clone)]
pub struct BaseMap {
    pub name: String,
    pub kind: BaseKind,
    pub branches: Vec<Branch>,
    pub sigma: f64,
    pub lipschitz: f64,
    pub q: usize,
    pub region: Vec<(f64, f64)>,
}

impl std::fmt::Debug for BaseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaseMap")
            .field("name", &self.name)
            .field("degree", &self.degree())
            .field("sigma", &self.sigma)
            .field("lipschitz", &self.lipschitz)
            .field("q", &self.q)
            .finish()
    }
}

impl BaseMap {
    pub fn degree(&self) -> usize {
        self.branches.len()
    }

    /// Index of the branch whose domain contains `x` (domains are half-open, the last closed).
    pub fn branch_of(&self, x: f64) -> usize {
        let last = self.branches.len() - 1;
        self.branches
            .iter()
            .position(|b| x >= b.domain.0 && x < b.domain.1)
            .unwrap_or(last)
    }

    pub fn apply(&self, x: f64) -> f64 {
        let b = &self.branches[self.branch_of(x)];
        (b.forward)(x).clamp(0.0, 1.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.branches[self.branch_of(x)].derivative)(x)
    }

    pub fn in_region(&self, x: f64) -> bool {
        self.region.iter().any(|&(a, b)| x >= a && x <= b)
    }
}

/// Potential `phi : [0, 1] -> R`, optionally with a declared Hölder constant.
#[derive(Clone)]
pub struct Potential {
    pub name: String,
    f: ScalarFn,
    pub declared_holder: Option<f64>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential").field("name", &self.name).finish()
    }
}

impl Potential {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f), declared_holder: None }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::new(format!("constant({c})"), move |_| c);
        p.declared_holder = Some(0.0);
        p
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn with_declared_holder(mut self, h: f64) -> Self {
        self.declared_holder = Some(h);
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Sampled `H_zeta(phi)` on `samples` equally spaced points.
    pub fn holder_estimate(&self, zeta: HolderExponent, samples: usize) -> f64 {
        let xs = sample_grid(samples);
        let vs: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        holder_quotient(&xs, &vs, zeta)
    }
}

/// `samples` midpoints of a uniform partition of `[0, 1]`.
pub fn sample_grid(samples: usize) -> Vec<f64> {
    (0..samples).map(|i| (i as f64 + 0.5) / samples as f64).collect()
}

/// `max_{i != j} |v_i - v_j| / |x_i - x_j|^zeta` over all pairs.
pub fn holder_quotient(xs: &[f64], vs: &[f64], zeta: HolderExponent) -> f64 {
    (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in i + 1..xs.len() {
                let d = (xs[i] - xs[j]).abs();
                if d > 0.0 {
                    best = best.max((vs[i] - vs[j]).abs() / zeta.pow(d));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Cell index of `x` in a uniform partition of `[0, 1]` into `n` cells.
pub fn cell_of(x: f64, n: usize) -> usize {
    ((x * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// An inverse-branch image of a cell midpoint.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Preimage {
    pub branch: usize,
    pub point: f64,
    pub cell: usize,
    /// `e^{phi(point)}`, times `h(cell) / h(target)` for the twisted operator.
    pub weight: f64,
}

/// Sparse rows `row j -> [(column, value)]`.
#[derive(Debug, Clone)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(k, w)| w * v[k]).sum()).collect()
    }

    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (j, r) in self.rows.iter().enumerate() {
            for &(k, w) in r {
                out[k] += v[j] * w;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (j, r) in self.rows.iter().enumerate() {
            for &(k, w) in r {
                d[j][k] += w;
            }
        }
        d
    }

    /// `D_h^{-1} M D_h`.
    pub fn conjugate(&self, h: &[f64]) -> Self {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(j, r)| r.iter().map(|&(k, w)| (k, w * h[k] / h[j])).collect())
            .collect();
        Self { rows }
    }
}

/// Leading eigentriple from power iteration.
#[derive(Debug, Clone, Serialize)]
pub struct Eigen {
    pub lambda: f64,
    pub h: Vec<f64>,
    pub nu: Vec<f64>,
    pub iterations: usize,
    pub residual_right: f64,
    pub residual_left: f64,
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 100_000;
const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

fn normalize_l1(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    v.iter_mut().for_each(|x| *x /= s);
    s
}

fn power(apply: impl Fn(&[f64]) -> Vec<f64>, n: usize, what: &str) -> Result<(Vec<f64>, usize)> {
    let mut v = vec![1.0 / n as f64; n];
    for it in 1..=POWER_MAX_ITER {
        let mut w = apply(&v);
        let s = normalize_l1(&mut w);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Numeric(format!("{what}: power iteration degenerated")));
        }
        let change = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = w.iter().map(|x| x.abs()).fold(0.0, f64::max);
        v = w;
        if change <= POWER_TOL * scale {
            return Ok((v, it));
        }
    }
    Err(Error::NonConvergence { what: what.to_string(), iterations: POWER_MAX_ITER })
}

/// Power iteration for the right and left leading eigenvectors, normalised so that
/// `Σ nu = 1` and `Σ h nu = 1`.
pub fn eigentriple(m: &SparseRows) -> Result<Eigen> {
    let n = m.n();
    let (mut h, it_r) = power(|v| m.apply(v), n, "right eigenvector")?;
    let (mut nu, it_l) = power(|v| m.apply_left(v), n, "left eigenvector")?;
    normalize_l1(&mut nu);
    let mh = m.apply(&h);
    let lambda = dot(&nu, &mh) / dot(&nu, &h);
    let c = dot(&h, &nu);
    h.iter_mut().for_each(|x| *x /= c);
    let mh = m.apply(&h);
    let nm = m.apply_left(&nu);
    let hmax = h.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let numax = nu.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let residual_right =
        mh.iter().zip(&h).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max) / (lambda * hmax);
    let residual_left =
        nm.iter().zip(&nu).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max) / (lambda * numax);
    if residual_right > EIGEN_RESIDUAL_TOL || residual_left > EIGEN_RESIDUAL_TOL {
        return Err(Error::Numeric(format!(
            "eigen residuals {residual_right:e} / {residual_left:e} exceed {EIGEN_RESIDUAL_TOL:e}"
        )));
    }
    Ok(Eigen { lambda, h, nu, iterations: it_r.max(it_l), residual_right, residual_left })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Decay constants of the operator restricted to the kernel of its eigenprojection.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct KernelDecay {
    pub r_hat: f64,
    pub d_hat: f64,
}

/// Leading data of the linear-interpolation collocation, used for spectral fits.
#[derive(Debug, Clone)]
struct SmoothOperator {
    rows: SparseRows,
    eigen: Eigen,
}

/// Piecewise-constant collocation of `L_phi` on `n` cells with its leading eigentriple.
#[derive(Clone)]
pub struct RPFDiscretization {
    pub n: usize,
    pub midpoints: Vec<f64>,
    pub preimages: Vec<Vec<Preimage>>,
    pub matrix: SparseRows,
    pub lambda: f64,
    pub h: Vec<f64>,
    pub nu: Vec<f64>,
    pub m: Vec<f64>,
    pub iterations: usize,
    pub residual_right: f64,
    pub residual_left: f64,
    /// Set for `L_{phi,h}(g) = L_phi(g h) / h`. The fields `h`, `nu`, `m` always hold the
    /// eigentriple of `L_phi`; see [`RPFDiscretization::fixed_vector`].
    pub twisted: bool,
    pub kernel_decay: Option<KernelDecay>,
    pub map: BaseMap,
    pub potential: Potential,
    smooth: Arc<OnceLock<std::result::Result<SmoothOperator, String>>>,
}

impl std::fmt::Debug for RPFDiscretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RPFDiscretization")
            .field("n", &self.n)
            .field("lambda", &self.lambda)
            .field("twisted", &self.twisted)
            .finish()
    }
}

pub fn midpoints(n: usize) -> Vec<f64> {
    sample_grid(n)
}

/// Builds the collocation matrix `M[j, cell(f_i^{-1} x_j)] += e^{phi(f_i^{-1} x_j)}` and its
/// leading eigentriple.
pub fn build_rpf(map: &BaseMap, pot: &Potential, n: usize) -> Result<RPFDiscretization> {
    if n < 8 {
        return Err(Error::Construction(format!("need at least 8 cells, got {n}")));
    }
    if map.branches.is_empty() {
        return Err(Error::Construction("base map has no branches".into()));
    }
    let mids = midpoints(n);
    let preimages: Vec<Vec<Preimage>> = mids
        .par_iter()
        .map(|&x| {
            map.branches
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let y = (b.inverse)(x).clamp(0.0, 1.0);
                    let phi = pot.eval(y);
                    Preimage { branch: i, point: y, cell: cell_of(y, n), weight: phi.exp() }
                })
                .collect()
        })
        .collect();
    for (j, row) in preimages.iter().enumerate() {
        if let Some(p) = row.iter().find(|p| !(p.weight.is_finite() && p.weight > 0.0)) {
            return Err(Error::Construction(format!(
                "potential is not finite at preimage {} of cell {j}",
                p.point
            )));
        }
    }
    let matrix = rows_from_preimages(&preimages);
    let e = eigentriple(&matrix)?;
    let m = e.h.iter().zip(&e.nu).map(|(a, b)| a * b).collect();
    Ok(RPFDiscretization {
        n,
        midpoints: mids,
        preimages,
        matrix,
        lambda: e.lambda,
        h: e.h,
        nu: e.nu,
        m,
        iterations: e.iterations,
        residual_right: e.residual_right,
        residual_left: e.residual_left,
        twisted: false,
        kernel_decay: None,
        map: map.clone(),
        potential: pot.clone(),
        smooth: Arc::new(OnceLock::new()),
    })
}

fn rows_from_preimages(pre: &[Vec<Preimage>]) -> SparseRows {
    SparseRows { rows: pre.iter().map(|r| r.iter().map(|p| (p.cell, p.weight)).collect()).collect() }
}

/// Twisted operator `L_{phi,h}`; its matrix is `D_h^{-1} M D_h` and it fixes constants up to `lambda`.
pub fn twisted_operator(rpf: &RPFDiscretization) -> Result<RPFDiscretization> {
    if rpf.twisted {
        return Ok(rpf.clone());
    }
    let inf_h = rpf.h.iter().copied().fold(f64::INFINITY, f64::min);
    // Also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(inf_h >= 1e-12) {
        return Err(Error::SingularConjugation(inf_h));
    }
    let h = &rpf.h;
    let preimages: Vec<Vec<Preimage>> = rpf
        .preimages
        .iter()
        .enumerate()
        .map(|(j, row)| row.iter().map(|p| Preimage { weight: p.weight * h[p.cell] / h[j], ..*p }).collect())
        .collect();
    let mut out = rpf.clone();
    out.matrix = rows_from_preimages(&preimages);
    out.preimages = preimages;
    out.twisted = true;
    out.kernel_decay = None;
    Ok(out)
}

impl RPFDiscretization {
    /// Right eigenvector of the stored matrix: `h`, or constants when twisted.
    pub fn fixed_vector(&self) -> Vec<f64> {
        if self.twisted {
            vec![1.0; self.n]
        } else {
            self.h.clone()
        }
    }

    /// Left eigenvector of the stored matrix: `nu`, or `m` when twisted.
    pub fn dual_vector(&self) -> &[f64] {
        if self.twisted {
            &self.m
        } else {
            &self.nu
        }
    }

    /// `L̄ g = L g / lambda` on cell values.
    pub fn apply_normalized(&self, g: &[f64]) -> Vec<f64> {
        self.matrix.apply(g).into_iter().map(|v| v / self.lambda).collect()
    }

    pub fn apply_normalized_left(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.apply_left(v).into_iter().map(|x| x / self.lambda).collect()
    }

    fn smooth(&self) -> Result<&SmoothOperator> {
        let cell = self.smooth.get_or_init(|| build_smooth(self).map_err(|e| e.to_string()));
        cell.as_ref().map_err(|e| Error::Numeric(e.clone()))
    }

    /// Eigen summary as JSON.
    pub fn eigen_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            n: usize,
            lambda: f64,
            twisted: bool,
            h: &'a [f64],
            nu: &'a [f64],
            m: &'a [f64],
            residual_right: f64,
            residual_left: f64,
            iterations: usize,
            kernel_decay: Option<KernelDecay>,
        }
        to_json_string(&Dump {
            n: self.n,
            lambda: self.lambda,
            twisted: self.twisted,
            h: &self.h,
            nu: &self.nu,
            m: &self.m,
            residual_right: self.residual_right,
            residual_left: self.residual_left,
            iterations: self.iterations,
            kernel_decay: self.kernel_decay,
        })
    }

    /// Per-cell table `cell, midpoint, h, nu, m`.
    pub fn eigen_csv(&self) -> String {
        let rows: Vec<(usize, Vec<f64>)> = (0..self.n)
            .map(|j| (j, vec![self.midpoints[j], self.h[j], self.nu[j], self.m[j]]))
            .collect();
        csv_string(&["cell", "midpoint", "h", "nu", "m"], &rows)
    }
}

/// Linear interpolation between midpoint values, extended as a constant past the end midpoints.
fn interp_entries(y: f64, n: usize) -> [(usize, f64); 2] {
    let t = y * n as f64 - 0.5;
    if t <= 0.0 {
        return [(0, 1.0), (0, 0.0)];
    }
    if t >= (n - 1) as f64 {
        return [(n - 1, 1.0), (n - 1, 0.0)];
    }
    let k = t.floor() as usize;
    let frac = t - k as f64;
    [(k, 1.0 - frac), (k + 1, frac)]
}

fn build_smooth(rpf: &RPFDiscretization) -> Result<SmoothOperator> {
    let n = rpf.n;
    let rows = SparseRows {
        rows: rpf
            .midpoints
            .iter()
            .map(|&x| {
                let mut row = Vec::new();
                for b in &rpf.map.branches {
                    let y = (b.inverse)(x).clamp(0.0, 1.0);
                    let w = rpf.potential.eval(y).exp();
                    for (k, c) in interp_entries(y, n) {
                        if c > 0.0 {
                            row.push((k, w * c));
                        }
                    }
                }
                row
            })
            .collect(),
    };
    let eigen = eigentriple(&rows)?;
    Ok(SmoothOperator { rows, eigen })
}

/// Normalised smooth companion operator and its kernel projection, following `rpf.twisted`.
struct SmoothView {
    rows: SparseRows,
    lambda: f64,
    fixed: Vec<f64>,
    dual: Vec<f64>,
}

fn smooth_view(rpf: &RPFDiscretization) -> Result<SmoothView> {
    let s = rpf.smooth()?;
    let e = &s.eigen;
    if rpf.twisted {
        let dual: Vec<f64> = e.h.iter().zip(&e.nu).map(|(a, b)| a * b).collect();
        Ok(SmoothView { rows: s.rows.conjugate(&e.h), lambda: e.lambda, fixed: vec![1.0; rpf.n], dual })
    } else {
        Ok(SmoothView { rows: s.rows.clone(), lambda: e.lambda, fixed: e.h.clone(), dual: e.nu.clone() })
    }
}

/// Strong norm `|g|_s = H_zeta(g) + sup |g|` on midpoints.
pub fn strong_norm(mids: &[f64], g: &[f64], zeta: HolderExponent) -> f64 {
    holder_quotient(mids, g, zeta) + sup_abs(g)
}

pub fn sup_abs(g: &[f64]) -> f64 {
    g.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Random Hölder test vectors on the midpoints: trigonometric sums, McShane envelopes and
/// piecewise-linear random walks.
pub fn random_test_vectors(mids: &[f64], zeta: HolderExponent, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| match k % 3 {
            0 => {
                let terms: Vec<(f64, f64, f64)> = (1..=4)
                    .map(|m| (rng.random_range(-1.0..1.0) / m as f64, m as f64, rng.random::<f64>() * TAU))
                    .collect();
                let c0 = rng.random_range(-1.0..1.0);
                mids.iter()
                    .map(|&x| c0 + terms.iter().map(|&(a, m, p)| a * (TAU * m * x + p).cos()).sum::<f64>())
                    .collect()
            }
            1 => {
                let anchors: Vec<(f64, f64)> =
                    (0..6).map(|_| (rng.random::<f64>(), rng.random_range(-1.0..1.0))).collect();
                let scale = rng.random_range(0.2..3.0);
                mids.iter()
                    .map(|&x| {
                        anchors.iter().map(|&(a, v)| v - scale * zeta.pow((x - a).abs())).fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect()
            }
            _ => {
                let mut v = rng.random_range(-1.0..1.0);
                let step = 1.0 / mids.len() as f64;
                mids.iter()
                    .map(|_| {
                        v += rng.random_range(-3.0..3.0) * zeta.pow(step);
                        v
                    })
                    .collect()
            }
        })
        .collect()
}

const LY_HORIZON: usize = 30;

/// Fits `|L̄^n g|_s <= B beta^n |g|_s + C |g|_w` with `|g|_w = sup |g|` over sampled `g` and
/// `n <= 30`, using the linear-interpolation companion of the discretisation.
pub fn verify_lasota_yorke(rpf: &RPFDiscretization, zeta: HolderExponent, samples: usize) -> Result<LasotaYorkeFit> {
    let view = smooth_view(rpf)?;
    let mut tests = random_test_vectors(&rpf.midpoints, zeta, samples.max(1), 0x4c59);
    tests.push(vec![1.0; rpf.n]);
    let trajectories: Vec<Trajectory> = tests
        .par_iter()
        .map(|g| {
            let mut v = g.clone();
            let mut strong = vec![strong_norm(&rpf.midpoints, &v, zeta)];
            for _ in 0..LY_HORIZON {
                v = view.rows.apply(&v).into_iter().map(|x| x / view.lambda).collect();
                strong.push(strong_norm(&rpf.midpoints, &v, zeta));
            }
            Trajectory { strong, weak0: sup_abs(g) }
        })
        .collect();
    Ok(lasota_yorke_fit(&trajectories))
}

/// Fits `r_hat, D_hat` with `|L̄^n g|_s <= D_hat r_hat^n |g|_s` on the kernel of the leading
/// eigenprojection and stores them in `rpf`.
pub fn spectral_radius_on_kernel(rpf: &mut RPFDiscretization, zeta: HolderExponent) -> Result<KernelDecay> {
    let view = smooth_view(rpf)?;
    let tests = random_test_vectors(&rpf.midpoints, zeta, 24, 0x6b65);
    let trajectories: Vec<Vec<f64>> = tests
        .par_iter()
        .map(|g| {
            let c = dot(g, &view.dual);
            let mut v: Vec<f64> = g.iter().zip(&view.fixed).map(|(a, f)| a - c * f).collect();
            let mut norms = vec![strong_norm(&rpf.midpoints, &v, zeta)];
            for _ in 0..LY_HORIZON {
                v = view.rows.apply(&v).into_iter().map(|x| x / view.lambda).collect();
                let c = dot(&v, &view.dual);
                v.iter_mut().zip(&view.fixed).for_each(|(a, f)| *a -= c * f);
                norms.push(strong_norm(&rpf.midpoints, &v, zeta));
            }
            norms
        })
        .collect();
    let r_hat = trajectories
        .iter()
        .filter_map(|t| tail_fit(t, 1e-13 * t[0]).map(|f| f.rate))
        .fold(0.0, f64::max)
        .min(1.0);
    let d_hat = trajectories
        .iter()
        .flat_map(|t| {
            let t0 = t[0];
            t.iter().enumerate().filter(move |_| t0 > 0.0).map(move |(n, &v)| {
                if r_hat > 0.0 {
                    v / (r_hat.powi(n as i32) * t0)
                } else if n == 0 {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .fold(1.0, f64::max);
    let decay = KernelDecay { r_hat, d_hat };
    rpf.kernel_decay = Some(decay);
    Ok(decay)
}

/// Outcome of checking the base hypotheses on sampled points.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub f1_pass: bool,
    /// Largest sampled local inverse-Lipschitz constant inside / outside the region.
    pub f1_max_inside: f64,
    pub f1_max_outside: f64,
    pub f2_pass: bool,
    pub q_measured: usize,
    pub f3_pass: bool,
    pub oscillation: f64,
    pub holder_exp_phi: f64,
    pub epsilon: f64,
    pub combined_value: f64,
    pub combined_pass: bool,
    pub partition_pass: bool,
    pub failures: Vec<String>,
    pub fiber: Option<FiberReport>,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Fiber-side checks filled in by the skew-product layer.
#[derive(Debug, Clone, Serialize)]
pub struct FiberReport {
    pub alpha: f64,
    pub alpha_sampled: f64,
    pub contraction_pass: bool,
    pub holder_declared: f64,
    pub holder_sampled: f64,
    pub holder_pass: bool,
    pub regularity_factor: f64,
    /// Set when `(alpha L)^zeta >= 1`, so the regularity estimate does not apply.
    pub regularity_precondition_violated: bool,
}

/// `e^eps ((deg - q) sigma^{-zeta} + q L^zeta (1 + (L - 1)^zeta)) / deg`.
pub fn combined_bound(deg: usize, q: usize, sigma: f64, l: f64, zeta: HolderExponent, eps: f64) -> f64 {
    let z = zeta.value();
    let lm1 = (l - 1.0).max(0.0);
    eps.exp() * ((deg - q) as f64 * sigma.powf(-z) + q as f64 * l.powf(z) * (1.0 + lm1.powf(z))) / deg as f64
}

const SLOP: f64 = 1e-9;

/// Checks expansion, the bounded count of weakly expanding branches and the potential
/// smallness condition on `samples` points per branch.
pub fn check_hypotheses(map: &BaseMap, pot: &Potential, zeta: HolderExponent, samples: usize) -> HypothesisReport {
    let samples = samples.max(64);
    let mut failures = Vec::new();

    // Partition: domains tile [0, 1].
    let mut doms: Vec<(f64, f64)> = map.branches.iter().map(|b| b.domain).collect();
    doms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut partition_pass = (doms[0].0).abs() < SLOP && (doms.last().unwrap().1 - 1.0).abs() < SLOP;
    for w in doms.windows(2) {
        partition_pass &= (w[0].1 - w[1].0).abs() < SLOP;
    }
    if !partition_pass {
        failures.push("branch domains do not tile [0, 1]".into());
    }

    // Local inverse-Lipschitz constants from secants of each inverse branch.
    let ys = sample_grid(samples);
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for b in &map.branches {
        let xs: Vec<f64> = ys.iter().map(|&y| (b.inverse)(y)).collect();
        for k in 0..samples - 1 {
            let l = (xs[k + 1] - xs[k]).abs() / (ys[k + 1] - ys[k]);
            if map.in_region(0.5 * (xs[k] + xs[k + 1])) {
                inside = inside.max(l);
            } else {
                outside = outside.max(l);
            }
        }
    }
    let f1_pass = inside <= map.lipschitz * (1.0 + SLOP) && outside <= (1.0 + SLOP) / map.sigma;
    if !f1_pass {
        failures.push(format!(
            "expansion: sampled inverse Lipschitz {inside:.6} (region, bound {}) / {outside:.6} (elsewhere, bound {:.6})",
            map.lipschitz,
            1.0 / map.sigma
        ));
    }

    let q_measured = map
        .branches
        .iter()
        .filter(|b| map.region.iter().any(|&(a, c)| a.max(b.domain.0) < c.min(b.domain.1)))
        .count();
    let f2_pass = q_measured <= map.q && map.q < map.degree();
    if !f2_pass {
        failures.push(format!("weakly expanding branches: {q_measured} measured, {} declared, degree {}", map.q, map.degree()));
    }

    // Inverse branches only compare points of one branch domain, so the Hölder constant of
    // e^phi is taken domain by domain.
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    let mut holder_exp_phi = 0.0f64;
    for b in &map.branches {
        let (a, c) = b.domain;
        let xs: Vec<f64> = sample_grid(samples).into_iter().map(|t| a + (c - a) * t).collect();
        let phis: Vec<f64> = xs.iter().map(|&x| pot.eval(x)).collect();
        sup = phis.iter().copied().fold(sup, f64::max);
        inf = phis.iter().copied().fold(inf, f64::min);
        let exps: Vec<f64> = phis.iter().map(|p| p.exp()).collect();
        holder_exp_phi = holder_exp_phi.max(holder_quotient(&xs, &exps, zeta));
    }
    let oscillation = sup - inf;
    let epsilon = oscillation.max(holder_exp_phi / inf.exp());
    let combined_value = combined_bound(map.degree(), map.q, map.sigma, map.lipschitz, zeta, epsilon);
    let combined_pass = combined_value < 1.0;
    let f3_pass = combined_pass && epsilon.is_finite();
    if !f3_pass {
        failures.push(format!("potential: epsilon = {epsilon:.6} gives combined value {combined_value:.6} >= 1"));
    }

    HypothesisReport {
        f1_pass,
        f1_max_inside: inside,
        f1_max_outside: outside,
        f2_pass,
        q_measured,
        f3_pass,
        oscillation,
        holder_exp_phi,
        epsilon,
        combined_value,
        combined_pass,
        partition_pass,
        failures,
        fiber: None,
    }
}
