//! The dual Hölder norm `||mu||_o = sup { ∫ g dmu : |g|_inf <= 1, H_zeta(g) <= 1 }` on
//! atomic signed measures.
//!
//! Restricted to the atoms the supremum is a linear program in the values `g_i`:
//! maximise `Σ w_i g_i` subject to `|g_i| <= 1` and `|g_i - g_j| <= |x_i - x_j|^zeta`.
//! [`dual_norm`] solves it through its dual, a min-cost flow on the complete graph over the
//! atoms plus a ground node at cost 1 from every atom, and recovers an optimal `g` from
//! shortest-path potentials. [`dual_norm_adjacent`] is the `zeta = 1` fast path where only
//! neighbouring constraints are needed.

use crate::error::{Error, Result};
use crate::signed_measure::{total_variation, AtomicSignedMeasure};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Optimality tolerance of the dual-norm solvers.
pub const LP_TOL: f64 = 1e-9;

/// A Hölder exponent in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HolderExponent(f64);

impl HolderExponent {
    pub fn new(zeta: f64) -> Result<Self> {
        if zeta > 0.0 && zeta <= 1.0 {
            Ok(Self(zeta))
        } else {
            Err(Error::Construction(format!("Hölder exponent must lie in (0, 1], got {zeta}")))
        }
    }

    pub const LIPSCHITZ: HolderExponent = HolderExponent(1.0);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_lipschitz(self) -> bool {
        self.0 == 1.0
    }

    /// `d^zeta` for a distance `d >= 0`.
    pub fn pow(self, d: f64) -> f64 {
        if self.0 == 1.0 {
            d
        } else {
            d.powf(self.0)
        }
    }
}

impl TryFrom<f64> for HolderExponent {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HolderExponent> for f64 {
    fn from(z: HolderExponent) -> f64 {
        z.0
    }
}

/// Optimal value and an optimal test function sampled at the atoms.
#[derive(Debug, Clone)]
pub struct DualNorm {
    pub value: f64,
    /// `(position, g(position))` for every atom.
    pub witness: Vec<(f64, f64)>,
}

/// Exact dual norm through the full all-pairs linear program.
pub fn dual_norm(mu: &AtomicSignedMeasure, zeta: HolderExponent) -> Result<DualNorm> {
    let atoms = mu.atoms();
    if atoms.is_empty() {
        return Ok(DualNorm { value: 0.0, witness: Vec::new() });
    }
    let plan = transport_plan(atoms, zeta)?;
    let g = ground_potentials(atoms, zeta, &plan);
    let value: f64 = atoms.iter().zip(&g).map(|(a, gi)| a.1 * gi).sum();
    let witness = atoms.iter().zip(g).map(|(a, gi)| (a.0, gi)).collect();
    Ok(DualNorm { value, witness })
}

/// Dual norm for `zeta = 1` keeping only the constraints between neighbouring atoms.
pub fn dual_norm_adjacent(mu: &AtomicSignedMeasure) -> DualNorm {
    chain_solve(mu.atoms())
}

/// Value of the dual norm, using the fast path when `zeta = 1`.
pub fn norm(mu: &AtomicSignedMeasure, zeta: HolderExponent) -> Result<f64> {
    if mu.is_empty() {
        return Ok(0.0);
    }
    if single_signed(mu) {
        return Ok(total_variation(mu));
    }
    if zeta.is_lipschitz() {
        Ok(chain_solve(mu.atoms()).value)
    } else {
        Ok(dual_norm(mu, zeta)?.value)
    }
}

fn single_signed(mu: &AtomicSignedMeasure) -> bool {
    let atoms = mu.atoms();
    atoms.iter().all(|a| a.1 > 0.0) || atoms.iter().all(|a| a.1 < 0.0)
}

/// `||mu - nu||_o`.
pub fn dual_distance(mu: &AtomicSignedMeasure, nu: &AtomicSignedMeasure, zeta: HolderExponent) -> Result<f64> {
    norm(&mu.sub(nu), zeta)
}

/// Best value of `∫ g dmu` over `samples` random test functions with `|g|_inf <= 1`,
/// `H_zeta(g) <= 1`, always including `g ≡ 1` and `g ≡ -1`. A certified lower bound.
pub fn lower_bound_sample<R: Rng>(
    mu: &AtomicSignedMeasure,
    zeta: HolderExponent,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mass: f64 = mu.integrate(|_| 1.0);
    let mut best = mass.abs();
    let atoms = mu.atoms();
    if atoms.is_empty() {
        return 0.0;
    }
    for s in 0..samples {
        // McShane extension of random anchor values; alternate between random anchors and
        // anchors at the atoms carrying their sign.
        let anchors: Vec<(f64, f64)> = if s % 2 == 0 {
            let k = rng.random_range(1..=8usize);
            (0..k).map(|_| (rng.random::<f64>(), rng.random_range(-1.0..=1.0))).collect()
        } else {
            atoms
                .iter()
                .map(|&(x, w)| (x, w.signum() * rng.random_range(0.5..=1.0)))
                .collect()
        };
        let g = |x: f64| {
            anchors
                .iter()
                .map(|&(a, v)| v - zeta.pow((x - a).abs()))
                .fold(f64::NEG_INFINITY, f64::max)
                .clamp(-1.0, 1.0)
        };
        best = best.max(mu.integrate(g));
    }
    best
}

// ---------------------------------------------------------------------------
// Full LP through min-cost transport.

struct Plan {
    /// Negative atoms followed by the ground source.
    sources: Vec<usize>,
    /// Positive atoms followed by the ground sink.
    sinks: Vec<usize>,
    flow: Vec<Vec<f64>>,
}

const GROUND: usize = usize::MAX;

fn transport_cost(atoms: &[(f64, f64)], zeta: HolderExponent, a: usize, b: usize) -> f64 {
    match (a == GROUND, b == GROUND) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => zeta.pow((atoms[a].0 - atoms[b].0).abs()),
    }
}

/// Successive shortest paths with Dijkstra on reduced costs.
fn transport_plan(atoms: &[(f64, f64)], zeta: HolderExponent) -> Result<Plan> {
    let mut sources: Vec<usize> = (0..atoms.len()).filter(|&i| atoms[i].1 < 0.0).collect();
    let mut sinks: Vec<usize> = (0..atoms.len()).filter(|&i| atoms[i].1 > 0.0).collect();
    let neg: f64 = sources.iter().map(|&i| -atoms[i].1).sum();
    let pos: f64 = sinks.iter().map(|&i| atoms[i].1).sum();
    let mut supply: Vec<f64> = sources.iter().map(|&i| -atoms[i].1).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|&i| atoms[i].1).collect();
    sources.push(GROUND);
    supply.push(pos);
    sinks.push(GROUND);
    demand.push(neg);

    let (ns, nt) = (sources.len(), sinks.len());
    let cost: Vec<Vec<f64>> = sources
        .iter()
        .map(|&s| sinks.iter().map(|&t| transport_cost(atoms, zeta, s, t)).collect())
        .collect();
    let eps = 1e-14 * (pos + neg).max(f64::MIN_POSITIVE);
    let mut flow = vec![vec![0.0; nt]; ns];
    let mut pot = vec![0.0; ns + nt];
    let mut dist = vec![0.0; ns + nt];
    let mut done = vec![false; ns + nt];
    let mut parent = vec![usize::MAX; ns + nt];
    let max_rounds = 64 * (ns + nt) * (ns + nt) + 64;

    let mut rounds = 0;
    while demand.iter().any(|&d| d > eps) && supply.iter().any(|&s| s > eps) {
        rounds += 1;
        if rounds > max_rounds {
            return Err(Error::NonConvergence { what: "dual-norm transport".into(), iterations: rounds });
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        done.iter_mut().for_each(|d| *d = false);
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        for s in 0..ns {
            if supply[s] > eps {
                dist[s] = 0.0;
            }
        }
        let target = loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..ns + nt {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                return Err(Error::NonConvergence { what: "dual-norm transport".into(), iterations: rounds });
            }
            done[u] = true;
            if u < ns {
                for (t, &c) in cost[u].iter().enumerate() {
                    let v = ns + t;
                    if done[v] {
                        continue;
                    }
                    let nd = dist[u] + (c + pot[u] - pot[v]).max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = u;
                    }
                }
            } else {
                let t = u - ns;
                if demand[t] > eps {
                    break t;
                }
                for s in 0..ns {
                    if done[s] || flow[s][t] <= eps {
                        continue;
                    }
                    let nd = dist[u] + (-cost[s][t] + pot[u] - pot[s]).max(0.0);
                    if nd < dist[s] {
                        dist[s] = nd;
                        parent[s] = u;
                    }
                }
            }
        };
        let reach = dist[ns + target];
        for v in 0..ns + nt {
            pot[v] += dist[v].min(reach);
        }
        // Bottleneck along the path back to a source with spare supply.
        let mut amount = demand[target];
        let mut v = ns + target;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u >= ns {
                amount = amount.min(flow[v][u - ns]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        supply[v] -= amount;
        demand[target] -= amount;
        let mut v = ns + target;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u < ns {
                flow[u][v - ns] += amount;
            } else {
                flow[v][u - ns] -= amount;
                if flow[v][u - ns] < eps {
                    flow[v][u - ns] = 0.0;
                }
            }
            v = u;
        }
    }
    Ok(Plan { sources, sinks, flow })
}

/// Shortest-path distances from the ground node in the residual graph of an optimal flow.
/// They are feasible for every pairwise constraint and tight on every used arc.
fn ground_potentials(atoms: &[(f64, f64)], zeta: HolderExponent, plan: &Plan) -> Vec<f64> {
    let n = atoms.len();
    let g_idx = |i: usize| if i == GROUND { n } else { i };
    // Reverse arcs of used flow: sink -> source with negative cost.
    let mut reverse: Vec<(usize, usize, f64)> = Vec::new();
    for (si, &s) in plan.sources.iter().enumerate() {
        for (ti, &t) in plan.sinks.iter().enumerate() {
            if plan.flow[si][ti] > 0.0 && !(s == GROUND && t == GROUND) {
                reverse.push((g_idx(t), g_idx(s), -transport_cost(atoms, zeta, s, t)));
            }
        }
    }
    let cost = |a: usize, b: usize| -> f64 {
        if a == n || b == n {
            1.0
        } else {
            zeta.pow((atoms[a].0 - atoms[b].0).abs())
        }
    };
    let mut d = vec![1.0; n + 1];
    d[n] = 0.0;
    for _ in 0..=n + 1 {
        let mut changed = false;
        for &(a, b, c) in &reverse {
            if d[a] + c < d[b] - 1e-15 {
                d[b] = d[a] + c;
                changed = true;
            }
        }
        for a in 0..=n {
            for b in 0..=n {
                if a != b && d[a] + cost(a, b) < d[b] - 1e-15 {
                    d[b] = d[a] + cost(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let shift = d[n];
    d.truncate(n);
    d.iter().map(|&v| (v - shift).clamp(-1.0, 1.0)).collect()
}

// ---------------------------------------------------------------------------
// zeta = 1: dynamic programme over the chain of atoms.

/// Concave piecewise-linear function on `[-1, 1]` given by its breakpoints.
#[derive(Clone)]
struct Concave {
    pts: Vec<(f64, f64)>,
}

impl Concave {
    fn linear(w: f64) -> Self {
        Self { pts: vec![(-1.0, -w), (1.0, w)] }
    }

    fn argmax_interval(&self) -> (f64, f64, f64) {
        let vmax = self.pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let a = self.pts.iter().find(|p| p.1 == vmax).unwrap().0;
        let b = self.pts.iter().rev().find(|p| p.1 == vmax).unwrap().0;
        (a, b, vmax)
    }

    fn eval(&self, t: f64) -> f64 {
        let k = self.pts.partition_point(|p| p.0 < t);
        if k == 0 {
            return self.pts[0].1;
        }
        if k == self.pts.len() {
            return self.pts[k - 1].1;
        }
        let (t0, v0) = self.pts[k - 1];
        let (t1, v1) = self.pts[k];
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }

    /// `t -> max_{|s - t| <= r} self(s) + w t` on `[-1, 1]`.
    fn window_max_plus_linear(&self, r: f64, w: f64) -> Self {
        let (a, b, vmax) = self.argmax_interval();
        let mut shifted: Vec<(f64, f64)> = Vec::with_capacity(self.pts.len() + 2);
        shifted.extend(self.pts.iter().filter(|p| p.0 < a).map(|&(t, v)| (t - r, v)));
        shifted.push((a - r, vmax));
        shifted.push((b + r, vmax));
        shifted.extend(self.pts.iter().filter(|p| p.0 > b).map(|&(t, v)| (t + r, v)));
        let stretched = Concave { pts: shifted };
        let mut pts = Vec::with_capacity(stretched.pts.len() + 2);
        pts.push((-1.0, stretched.eval(-1.0)));
        pts.extend(stretched.pts.iter().filter(|p| p.0 > -1.0 && p.0 < 1.0).copied());
        pts.push((1.0, stretched.eval(1.0)));
        pts.dedup_by(|x, y| x.0 == y.0);
        for p in &mut pts {
            p.1 += w * p.0;
        }
        Concave { pts }
    }
}

fn chain_solve(atoms: &[(f64, f64)]) -> DualNorm {
    if atoms.is_empty() {
        return DualNorm { value: 0.0, witness: Vec::new() };
    }
    let mut maximizers = Vec::with_capacity(atoms.len());
    let mut v = Concave::linear(atoms[0].1);
    for k in 1..atoms.len() {
        let (a, b, _) = v.argmax_interval();
        maximizers.push((a, b));
        let r = atoms[k].0 - atoms[k - 1].0;
        v = v.window_max_plus_linear(r, atoms[k].1);
    }
    let (a, _, value) = v.argmax_interval();
    let mut g = vec![0.0; atoms.len()];
    g[atoms.len() - 1] = a;
    for k in (0..atoms.len() - 1).rev() {
        let t = g[k + 1];
        let r = atoms[k + 1].0 - atoms[k].0;
        let (a, b) = maximizers[k];
        g[k] = t.clamp(a, b).clamp(t - r, t + r).clamp(-1.0, 1.0);
    }
    let witness = atoms.iter().zip(&g).map(|(at, &gi)| (at.0, gi)).collect();
    DualNorm { value, witness }
}
