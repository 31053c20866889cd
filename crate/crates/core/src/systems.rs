//! Base maps, fiber maps and the example gallery.

use crate::base_rpf::{combined_bound, BaseKind, BaseMap, Branch, FiberReport, HypothesisReport, Potential};
use crate::error::{Error, Result};
use crate::holder_norm::HolderExponent;
use crate::transfer::{check_system, FiberMap, SkewSystem};
use std::f64::consts::PI;
use std::sync::Arc;

/// `x -> l x mod 1` with `L = 1/l`, `sigma = l` and no weakly expanding branch.
pub fn linear_expanding(l: u32) -> Result<BaseMap> {
    if l < 2 {
        return Err(Error::Construction(format!("linear expanding map needs l >= 2, got {l}")));
    }
    let lf = l as f64;
    let branches = (0..l)
        .map(|i| {
            let fi = i as f64;
            Branch {
                domain: (fi / lf, (fi + 1.0) / lf),
                forward: Arc::new(move |x| lf * x - fi),
                inverse: Arc::new(move |y| (y + fi) / lf),
                derivative: Arc::new(move |_| lf),
                inverse_lipschitz: 1.0 / lf,
            }
        })
        .collect();
    Ok(BaseMap {
        name: format!("linear-{l}"),
        kind: BaseKind::LinearExpanding { l },
        branches,
        sigma: lf,
        lipschitz: 1.0 / lf,
        q: 0,
        region: Vec::new(),
    })
}

/// Inverse of `x (1 + 2^alpha x^alpha)` on `[0, 1/2]` by safeguarded Newton iteration.
fn mp_left_inverse(alpha: f64, y: f64) -> f64 {
    let c = 2f64.powf(alpha);
    let f = |x: f64| x * (1.0 + c * x.powf(alpha)) - y;
    let df = |x: f64| 1.0 + (1.0 + alpha) * c * x.powf(alpha);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let mut x = y.clamp(0.0, 1.0) * 0.5;
    for _ in 0..200 {
        let fx = f(x);
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-16 || hi - lo <= 1e-16 {
            return next;
        }
        x = next;
    }
    x
}

/// Manneville-Pomeau map `x (1 + 2^alpha x^alpha)` on `[0, 1/2]`, `2x - 1` on `(1/2, 1]`,
/// with `deg = 2`, `L = 1`, `sigma = 2`, `q = 1`.
pub fn manneville_pomeau(alpha: f64) -> Result<BaseMap> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Construction(format!("Manneville-Pomeau exponent must lie in (0, 1), got {alpha}")));
    }
    let c = 2f64.powf(alpha);
    let left = Branch {
        domain: (0.0, 0.5),
        forward: Arc::new(move |x| x * (1.0 + c * x.powf(alpha))),
        inverse: Arc::new(move |y| mp_left_inverse(alpha, y)),
        derivative: Arc::new(move |x| 1.0 + (1.0 + alpha) * c * x.powf(alpha)),
        inverse_lipschitz: 1.0,
    };
    let right = Branch {
        domain: (0.5, 1.0),
        forward: Arc::new(|x| 2.0 * x - 1.0),
        inverse: Arc::new(|y| 0.5 * (y + 1.0)),
        derivative: Arc::new(|_| 2.0),
        inverse_lipschitz: 0.5,
    };
    // Points where the derivative is at most sigma = 2, with a margin.
    let weak_edge = ((1.0 + alpha) * c).powf(-1.0 / alpha);
    Ok(BaseMap {
        name: format!("manneville-pomeau({alpha})"),
        kind: BaseKind::MannevillePomeau { alpha },
        branches: vec![left, right],
        sigma: 2.0,
        lipschitz: 1.0,
        q: 1,
        region: vec![(0.0, (1.02 * weak_edge).min(0.5))],
    })
}

/// `phi_t = -t log |Df|`.
pub fn geometric_potential(map: &BaseMap, t: f64) -> Potential {
    let kind = map.kind;
    let map = map.clone();
    let name = format!("-{t} log|Df|");
    let p = Potential::new(name, move |x| -t * map.derivative(x).ln());
    match kind {
        BaseKind::LinearExpanding { .. } => p.with_declared_holder(0.0),
        _ => p,
    }
}

/// `G(x, y) = alpha y`.
pub fn fiber_linear(alpha: f64) -> Result<FiberMap> {
    check_alpha(alpha)?;
    Ok(FiberMap::new(format!("linear({alpha})"), alpha, 0.0, move |_, y| alpha * y))
}

/// `G(x, y) = a1 y` for `x <= 1/2`, `a2 y` otherwise.
pub fn fiber_discontinuous(a1: f64, a2: f64) -> Result<FiberMap> {
    check_alpha(a1)?;
    check_alpha(a2)?;
    Ok(FiberMap::new(format!("discontinuous({a1}, {a2})"), a1.max(a2), 0.0, move |x, y| if x <= 0.5 { a1 * y } else { a2 * y }))
}

/// `G(x, y) = h1(x) y` for `x <= 1/2`, `h2(x) y` otherwise, with declared Hölder constants
/// of the two pieces. Requires `h1(1/2) != h2(1/2)` and values in `[0, 1)`.
pub fn fiber_holder(
    h1: impl Fn(f64) -> f64 + Send + Sync + 'static,
    h2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    h1_holder: f64,
    h2_holder: f64,
) -> Result<FiberMap> {
    if (h1(0.5) - h2(0.5)).abs() < 1e-12 {
        return Err(Error::Construction("the two pieces agree at x = 1/2; use a continuous fiber map".into()));
    }
    let mut alpha = 0.0f64;
    for i in 0..=1024 {
        let x = i as f64 / 1024.0;
        let v = if x <= 0.5 { h1(x) } else { h2(x) };
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Construction(format!("fiber factor {v} at x = {x} lies outside [0, 1)")));
        }
        alpha = alpha.max(v);
    }
    Ok(FiberMap::new("holder-pieces", alpha, h1_holder.max(h2_holder), move |x, y| if x <= 0.5 { h1(x) * y } else { h2(x) * y }))
}

/// `G(x, y) = alpha y + o(x)`; fails with a witness if some `G(x, ·)` leaves `[0, 1]`.
pub fn fiber_tsujii(alpha: f64, o: impl Fn(f64) -> f64 + Send + Sync + 'static, o_holder: f64) -> Result<FiberMap> {
    check_alpha(alpha)?;
    for i in 0..=4096 {
        let x = i as f64 / 4096.0;
        let v = o(x);
        if v < -1e-12 || alpha + v > 1.0 + 1e-12 {
            return Err(Error::Construction(format!(
                "G(x, ·) leaves K at x = {x}: o(x) = {v}, image [{v}, {}]",
                alpha + v
            )));
        }
    }
    Ok(FiberMap::new(format!("tsujii({alpha})"), alpha, o_holder, move |x, y| alpha * y + o(x)))
}

/// `o(x) = (1 + cos 2 pi x) / 4`, with Lipschitz constant `pi / 2`.
pub fn tsujii_offset(x: f64) -> f64 {
    0.25 * (1.0 + (2.0 * PI * x).cos())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Construction(format!("fiber contraction must lie in [0, 1), got {alpha}")))
    }
}

/// Declared constants of an example without an executable system.
#[derive(Debug, Clone, Copy)]
pub struct ExampleConstants {
    pub deg: usize,
    pub q: usize,
    pub sigma: f64,
    pub l: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub zeta: f64,
}

#[derive(Clone)]
pub enum GalleryKind {
    System(fn() -> Result<SkewSystem>),
    Constants(ExampleConstants),
}

#[derive(Clone)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: GalleryKind,
}

impl GalleryEntry {
    pub fn system(&self) -> Option<Result<SkewSystem>> {
        match &self.kind {
            GalleryKind::System(build) => Some(build()),
            GalleryKind::Constants(_) => None,
        }
    }
}

fn doubling_linear() -> Result<SkewSystem> {
    Ok(SkewSystem { base: linear_expanding(2)?, fiber: fiber_linear(0.5)?, potential: Potential::zero(), zeta: HolderExponent::LIPSCHITZ })
}

fn tsujii() -> Result<SkewSystem> {
    Ok(SkewSystem {
        base: linear_expanding(2)?,
        fiber: fiber_tsujii(0.5, tsujii_offset, PI / 2.0)?,
        potential: Potential::constant(-(2f64.ln())),
        zeta: HolderExponent::LIPSCHITZ,
    })
}

fn tripling_linear() -> Result<SkewSystem> {
    Ok(SkewSystem {
        base: linear_expanding(3)?,
        fiber: fiber_linear(0.3)?,
        potential: Potential::constant(-(3f64.ln())),
        zeta: HolderExponent::new(0.5)?,
    })
}

fn mp_linear() -> Result<SkewSystem> {
    let base = manneville_pomeau(0.5)?;
    let potential = geometric_potential(&base, 0.05);
    Ok(SkewSystem { base, fiber: fiber_linear(0.5)?, potential, zeta: HolderExponent::new(0.5)? })
}

fn mp_discontinuous() -> Result<SkewSystem> {
    Ok(SkewSystem {
        base: manneville_pomeau(0.5)?,
        fiber: fiber_discontinuous(0.3, 0.6)?,
        potential: Potential::zero(),
        zeta: HolderExponent::LIPSCHITZ,
    })
}

fn mp_holder() -> Result<SkewSystem> {
    Ok(SkewSystem {
        base: manneville_pomeau(0.5)?,
        fiber: fiber_holder(|x| 0.3 + 0.4 * x, |x| 0.6 - 0.2 * (x - 0.5), 0.4, 0.2)?,
        potential: Potential::zero(),
        zeta: HolderExponent::LIPSCHITZ,
    })
}

/// Named examples; entries with [`GalleryKind::Constants`] only carry declared constants.
pub fn gallery() -> Vec<GalleryEntry> {
    vec![
        GalleryEntry { name: "doubling-linear", description: "2x mod 1, phi = 0, G = y/2", kind: GalleryKind::System(doubling_linear) },
        GalleryEntry { name: "tsujii", description: "2x mod 1, phi = -log 2, G = y/2 + (1 + cos 2 pi x)/4", kind: GalleryKind::System(tsujii) },
        GalleryEntry { name: "tripling-linear", description: "3x mod 1, phi = -log 3, G = 0.3 y, zeta = 1/2", kind: GalleryKind::System(tripling_linear) },
        GalleryEntry { name: "mp-linear", description: "Manneville-Pomeau 1/2, phi = -0.05 log|Df|, G = y/2, zeta = 1/2", kind: GalleryKind::System(mp_linear) },
        GalleryEntry { name: "mp-discontinuous", description: "Manneville-Pomeau 1/2, phi = 0, G = 0.3 y | 0.6 y", kind: GalleryKind::System(mp_discontinuous) },
        GalleryEntry { name: "mp-holder", description: "Manneville-Pomeau 1/2, phi = 0, G = h1(x) y | h2(x) y", kind: GalleryKind::System(mp_holder) },
        GalleryEntry {
            name: "tripling-perturbed",
            description: "degree 3 with one weakly expanding branch (declared constants only)",
            kind: GalleryKind::Constants(ExampleConstants { deg: 3, q: 1, sigma: 3.0, l: 1.0, epsilon: 0.0, alpha: 0.5, zeta: 0.5 }),
        },
    ]
}

pub fn gallery_entry(name: &str) -> Option<GalleryEntry> {
    gallery().into_iter().find(|e| e.name == name)
}

/// Runs the hypothesis checks of an entry: sampled for systems, from declared constants otherwise.
pub fn check_example_constants(entry: &GalleryEntry, samples: usize) -> Result<HypothesisReport> {
    match &entry.kind {
        GalleryKind::System(build) => Ok(check_system(&build()?, samples)),
        GalleryKind::Constants(c) => Ok(constants_report(c)?),
    }
}

/// Report for declared constants; the expansion conditions are taken as declared.
pub fn constants_report(c: &ExampleConstants) -> Result<HypothesisReport> {
    let zeta = HolderExponent::new(c.zeta)?;
    let combined_value = combined_bound(c.deg, c.q, c.sigma, c.l, zeta, c.epsilon);
    let f2_pass = c.q < c.deg;
    let regularity_factor = zeta.pow(c.alpha * c.l);
    let mut failures = Vec::new();
    if !f2_pass {
        failures.push(format!("q = {} is not below the degree {}", c.q, c.deg));
    }
    if combined_value >= 1.0 {
        failures.push(format!("combined value {combined_value:.6} >= 1"));
    }
    Ok(HypothesisReport {
        f1_pass: true,
        f1_max_inside: c.l,
        f1_max_outside: 1.0 / c.sigma,
        f2_pass,
        q_measured: c.q,
        f3_pass: combined_value < 1.0,
        oscillation: 0.0,
        holder_exp_phi: 0.0,
        epsilon: c.epsilon,
        combined_value,
        combined_pass: combined_value < 1.0,
        partition_pass: true,
        failures,
        fiber: Some(FiberReport {
            alpha: c.alpha,
            alpha_sampled: c.alpha,
            contraction_pass: c.alpha < 1.0,
            holder_declared: 0.0,
            holder_sampled: 0.0,
            holder_pass: true,
            regularity_factor,
            regularity_precondition_violated: regularity_factor >= 1.0,
        }),
    })
}
