//! The `ergodykit` subcommands. Each writes its reports into the output directory.

use crate::config::RunConfig;
use crate::CliError;
use ergodykit_core::base_rpf::{spectral_radius_on_kernel, verify_lasota_yorke, HypothesisReport, KernelDecay};
use ergodykit_core::disintegration::{disintegration_holder, l1_norm, linf_norm, product_measure, s1_norm, sinf_norm};
use ergodykit_core::fit::LasotaYorkeFit;
use ergodykit_core::io::{csv_string, fmt_f64, to_json_string};
use ergodykit_core::statistics::{correlation_birkhoff, correlation_operator, fit_exponential, BirkhoffConfig, CorrelationTable, RateFit};
use ergodykit_core::systems::{self, GalleryKind};
use ergodykit_core::transfer::{
    check_system, estimate_spectral_gap, iterate_to_equilibrium, regularity_constants, ConvergenceReport, GapReport, RegularityConstants,
    SkewSystem,
};
use ergodykit_core::{build_rpf, twisted_operator, AtomicSignedMeasure, CellGrid, DisintegratedMeasure, RPFDiscretization, Reference};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Everything a command needs: the parsed configuration, the system and both discretisations.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub system: SkewSystem,
    pub rpf: RPFDiscretization,
    pub twisted: RPFDiscretization,
}

impl Context {
    pub fn new(config: RunConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut config = config;
        if let Some(s) = seed {
            config.seed = s;
        }
        let system = config.system()?;
        let rpf = build_rpf(&system.base, &system.potential, config.base_cells)?;
        let mut twisted = twisted_operator(&rpf)?;
        spectral_radius_on_kernel(&mut twisted, system.zeta)?;
        let out = out.unwrap_or_else(|| config.directory.clone());
        fs::create_dir_all(&out).map_err(|e| CliError::Io(out.clone(), e))?;
        Ok(Self { config, out, system, rpf, twisted })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        Ok(path)
    }

    fn write_json(&self, name: &str, contents: &str) -> Result<Option<PathBuf>, CliError> {
        if self.config.formats.json {
            self.write(name, contents).map(Some)
        } else {
            Ok(None)
        }
    }

    fn write_csv(&self, name: &str, contents: &str) -> Result<Option<PathBuf>, CliError> {
        if self.config.formats.csv {
            self.write(name, contents).map(Some)
        } else {
            Ok(None)
        }
    }

    /// `m x delta_1` iterated to the equilibrium state.
    pub fn equilibrium(&self) -> Result<(DisintegratedMeasure, ConvergenceReport), CliError> {
        let grid = CellGrid::from_rpf(&self.twisted);
        let start = product_measure(grid, Reference::M, &vec![1.0; self.config.base_cells], &AtomicSignedMeasure::dirac(1.0)?)?;
        Ok(iterate_to_equilibrium(&self.system, &self.twisted, &start, self.config.tol, self.config.max_iter, &self.config.operator)?)
    }

    /// Reads a measure dump; schema problems are configuration errors.
    pub fn load_measure(&self, path: &Path) -> Result<DisintegratedMeasure, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        DisintegratedMeasure::from_json(&text, CellGrid::from_rpf(&self.twisted))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Writes `equilibrium.json`, `convergence.csv`, `convergence.json` and `eigen.json`.
pub fn equilibrium(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let (mu0, report) = ctx.equilibrium()?;
    if !report.converged {
        eprintln!("warning: no convergence to tol {} within {} iterations", fmt_f64(ctx.config.tol), report.iterations);
    }
    let mut files = Vec::new();
    files.extend(ctx.write_json("equilibrium.json", &mu0.to_json())?);
    files.extend(ctx.write_csv("convergence.csv", &csv_string(&["iteration", "distance"], &report.csv_rows()))?);
    files.extend(ctx.write_json("convergence.json", &to_json_string(&report))?);
    files.extend(ctx.write_json("eigen.json", &ctx.rpf.eigen_json())?);
    if ctx.config.formats.csv {
        files.push(ctx.write("eigen.csv", &ctx.rpf.eigen_csv())?);
    }
    Ok(files)
}

#[derive(Serialize)]
struct VerifyDump<'a> {
    system: String,
    zeta: f64,
    lambda: f64,
    hypotheses: &'a HypothesisReport,
    pass: bool,
    lasota_yorke: LasotaYorkeFit,
    kernel_decay: Option<KernelDecay>,
}

/// Writes `hypothesis_report.json`. Failed hypotheses are part of the report, not an error.
pub fn verify(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let sys = &ctx.system;
    let report = check_system(sys, ctx.config.samples);
    let ly = verify_lasota_yorke(&ctx.rpf, sys.zeta, 16)?;
    let dump = VerifyDump {
        system: format!("{} / {}", sys.base.name, sys.fiber.name),
        zeta: sys.zeta.value(),
        lambda: ctx.rpf.lambda,
        hypotheses: &report,
        pass: report.pass(),
        lasota_yorke: ly,
        kernel_decay: ctx.twisted.kernel_decay,
    };
    Ok(vec![ctx.write("hypothesis_report.json", &to_json_string(&dump))?])
}

#[derive(Serialize)]
struct CorrelationDump<'a> {
    observable_u: &'a str,
    observable_g: &'a str,
    operator: &'a CorrelationTable,
    operator_fit: RateFit,
    birkhoff: Option<&'a CorrelationTable>,
    birkhoff_fit: Option<RateFit>,
    gap: GapReport,
    /// `|u mu0|_{S^inf} R xi^n`, the shape of the theoretical bound.
    bound_prefactor: f64,
}

/// Writes `correlations.csv` (`method, n, C_n, stderr`) and `correlations.json`.
pub fn correlations(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let sys = &ctx.system;
    let cfg = &ctx.config;
    let (mu0, _) = ctx.equilibrium()?;
    let (u, g) = cfg.observables(sys.zeta);
    let op = correlation_operator(sys, &ctx.twisted, &mu0, &u, &g, cfg.correlation_n, &cfg.operator)?;
    let birkhoff = if cfg.physical && cfg.mc_orbits >= 2 {
        let bc = BirkhoffConfig { orbits: cfg.mc_orbits, length: cfg.mc_length, burn_in: cfg.mc_burn_in, seed: cfg.seed, assert_physical: true };
        Some(correlation_birkhoff(sys, &u, &g, cfg.correlation_n, &bc)?)
    } else {
        None
    };
    let gap = estimate_spectral_gap(sys, &ctx.twisted, cfg.gap_trials, cfg.seed, &cfg.operator)?;
    let um = ergodykit_core::disintegration::multiply_observable(&mu0.to_reference(Reference::M), &u);
    let bound_prefactor = sinf_norm(&um, sys.zeta)? * gap.r * g.bound;

    let mut csv = String::from("method,n,C_n,stderr\n");
    for t in std::iter::once(&op).chain(birkhoff.as_ref()) {
        for (i, &n) in t.n.iter().enumerate() {
            let se = t.stderr.get(i).copied().unwrap_or(f64::NAN);
            csv.push_str(&format!("{},{n},{},{}\n", t.method, fmt_f64(t.c[i]), fmt_f64(se)));
        }
    }
    let dump = CorrelationDump {
        observable_u: &cfg.observable_u,
        observable_g: &cfg.observable_g,
        operator_fit: fit_exponential(&op),
        operator: &op,
        birkhoff_fit: birkhoff.as_ref().map(fit_exponential),
        birkhoff: birkhoff.as_ref(),
        gap,
        bound_prefactor,
    };
    let mut files = Vec::new();
    files.extend(ctx.write_csv("correlations.csv", &csv)?);
    files.extend(ctx.write_json("correlations.json", &to_json_string(&dump))?);
    Ok(files)
}

#[derive(Serialize)]
struct RegularityDump {
    source: String,
    empirical: f64,
    constants: RegularityConstants,
    within_bound: Option<bool>,
}

/// Writes `regularity.json` for the equilibrium state, or for `measure` when given.
pub fn regularity(ctx: &Context, measure: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let sys = &ctx.system;
    let (mu, source) = match measure {
        Some(p) => (ctx.load_measure(p)?, p.display().to_string()),
        None => (ctx.equilibrium()?.0, "equilibrium".to_string()),
    };
    let mu = mu.to_reference(Reference::M);
    if !mu.is_nonnegative() {
        return Err(CliError::Input("regularity needs a non-negative measure".into()));
    }
    let empirical = disintegration_holder(&mu, sys.zeta)?;
    let constants = regularity_constants(sys, &ctx.twisted);
    let dump = RegularityDump { source, empirical, within_bound: constants.bound.map(|b| empirical <= b), constants };
    Ok(vec![ctx.write("regularity.json", &to_json_string(&dump))?])
}

#[derive(Serialize)]
struct NormsDump {
    total_mass: f64,
    l1: f64,
    linf: f64,
    s1: f64,
    sinf: f64,
}

/// Writes `norms.json` with the weak and strong norms of a dumped measure.
pub fn norms(ctx: &Context, measure: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mu = ctx.load_measure(measure)?;
    let z = ctx.system.zeta;
    let dump = NormsDump { total_mass: mu.total_mass(), l1: l1_norm(&mu, z)?, linf: linf_norm(&mu, z)?, s1: s1_norm(&mu, z)?, sinf: sinf_norm(&mu, z)? };
    Ok(vec![ctx.write("norms.json", &to_json_string(&dump))?])
}

/// One line per gallery entry: name, description and declared constants.
pub fn gallery_listing() -> Result<String, CliError> {
    let mut out = String::new();
    for entry in systems::gallery() {
        let constants = match &entry.kind {
            GalleryKind::System(build) => {
                let s = build()?;
                format!(
                    "deg={} q={} sigma={} L={} alpha={} |G|={} zeta={}",
                    s.base.degree(),
                    s.base.q,
                    s.base.sigma,
                    s.base.lipschitz,
                    s.fiber.alpha,
                    s.fiber.holder,
                    s.zeta.value()
                )
            }
            GalleryKind::Constants(c) => {
                format!("deg={} q={} sigma={} L={} alpha={} eps={} zeta={} (constants only)", c.deg, c.q, c.sigma, c.l, c.alpha, c.epsilon, c.zeta)
            }
        };
        out.push_str(&format!("{}\t{}\t{}\n", entry.name, entry.description, constants));
    }
    Ok(out)
}
