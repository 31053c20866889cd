//! Flat `[section] key = value` run configuration.

use ergodykit_core::base_rpf::Potential;
use ergodykit_core::systems::{self, fiber_discontinuous, fiber_holder, fiber_linear, fiber_tsujii, geometric_potential, tsujii_offset};
use ergodykit_core::transfer::{FiberMap, OperatorConfig, SkewSystem};
use ergodykit_core::{HolderExponent, Observable};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: &'static str, key: &'static str },
    #[error("{0}")]
    Invalid(String),
}

const SYSTEM_KEYS: &[&str] = &[
    "gallery",
    "base",
    "base_degree",
    "base_alpha",
    "base_lipschitz",
    "fiber",
    "fiber_alpha",
    "fiber_alpha2",
    "fiber_a1",
    "fiber_b1",
    "fiber_a2",
    "fiber_b2",
    "potential",
    "potential_value",
    "potential_t",
    "zeta",
];
const DISCRETIZATION_KEYS: &[&str] = &["base_cells", "fiber_atom_cap", "compress_delta"];
const RUN_KEYS: &[&str] = &[
    "max_iter",
    "tol",
    "correlation_n",
    "observable_u",
    "observable_g",
    "gap_trials",
    "samples",
    "mc_orbits",
    "mc_length",
    "mc_burn_in",
    "physical",
    "seed",
];
const OUTPUT_KEYS: &[&str] = &["directory", "formats"];

fn section_keys(name: &str) -> Option<&'static [&'static str]> {
    match name {
        "system" => Some(SYSTEM_KEYS),
        "discretization" => Some(DISCRETIZATION_KEYS),
        "run" => Some(RUN_KEYS),
        "output" => Some(OUTPUT_KEYS),
        _ => None,
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value pairs, keyed by `(section, key)`, remembering source lines.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Line { line, message: format!("malformed section header `{content}`") })?
                    .trim();
                if section_keys(name).is_none() {
                    return Err(ConfigError::Line { line, message: format!("unknown section [{name}]") });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Line { line, message: format!("expected `key = value`, found `{content}`") })?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| ConfigError::Line { line, message: format!("key `{key}` appears before any section header") })?;
            if !section_keys(sec).unwrap().contains(&key) {
                return Err(ConfigError::Line { line, message: format!("unknown key `{key}` in [{sec}]") });
            }
            if value.is_empty() {
                return Err(ConfigError::Line { line, message: format!("key `{key}` has an empty value") });
            }
            let slot = (sec.to_string(), key.to_string());
            if let Some(prev) = entries.get(&slot) {
                let prev: &Entry = prev;
                return Err(ConfigError::Line { line, message: format!("key `{key}` already set on line {}", prev.line) });
            }
            entries.insert(slot, Entry { value: value.to_string(), line });
        }
        Ok(Self { entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.get(section, key).is_some()
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| ConfigError::Line { line: e.line, message: format!("invalid value `{}` for `{key}`: {err}", e.value) }),
        }
    }

    fn checked<T: std::str::FromStr + Copy>(
        &self,
        section: &str,
        key: &str,
        ok: impl Fn(T) -> bool,
        range: &str,
    ) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.parsed::<T>(section, key)?;
        match v {
            Some(x) if !ok(x) => {
                let e = self.get(section, key).unwrap();
                Err(ConfigError::Line { line: e.line, message: format!("`{key}` = {} is outside {range}", e.value) })
            }
            _ => Ok(v),
        }
    }

    fn line_error(&self, section: &str, key: &str, message: String) -> ConfigError {
        match self.get(section, key) {
            Some(e) => ConfigError::Line { line: e.line, message },
            None => ConfigError::Invalid(message),
        }
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

fn optional_limit<T: std::str::FromStr>(raw: &RawConfig, key: &str, default: Option<T>, ok: impl Fn(&T) -> bool, range: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match raw.get("discretization", key) {
        None => Ok(default),
        Some(e) if e.value == "none" => Ok(None),
        Some(e) => {
            let v = e
                .value
                .parse::<T>()
                .map_err(|err| ConfigError::Line { line: e.line, message: format!("invalid value `{}` for `{key}`: {err}", e.value) })?;
            if ok(&v) {
                Ok(Some(v))
            } else {
                Err(ConfigError::Line { line: e.line, message: format!("`{key}` = {} is outside {range}", e.value) })
            }
        }
    }
}

/// Named observables accepted by `observable_u` and `observable_g`.
pub const OBSERVABLES: &[&str] = &["one", "x", "y", "xy", "cos", "ycos", "sum"];

pub fn observable(name: &str, zeta: HolderExponent) -> Option<Observable> {
    let f: fn(f64, f64) -> f64 = match name {
        "one" => |_, _| 1.0,
        "x" => |x, _| x,
        "y" => |_, y| y,
        "xy" => |x, y| x * y,
        "cos" => |x, _| (2.0 * PI * x).cos(),
        "ycos" => |x, y| y * (2.0 * PI * x).cos(),
        "sum" => |x, y| x + y,
        _ => return None,
    };
    Some(Observable::new(name, f, zeta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
}

/// Validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    raw: RawConfig,
    pub base_cells: usize,
    pub operator: OperatorConfig,
    pub max_iter: usize,
    pub tol: f64,
    pub correlation_n: usize,
    pub observable_u: String,
    pub observable_g: String,
    pub gap_trials: usize,
    pub samples: usize,
    pub mc_orbits: usize,
    pub mc_length: usize,
    pub mc_burn_in: usize,
    pub physical: bool,
    pub seed: u64,
    pub directory: PathBuf,
    pub formats: Formats,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;
        let base_cells = raw
            .checked::<usize>("discretization", "base_cells", |n| n >= 8, "[8, inf)")?
            .ok_or(ConfigError::Missing { section: "discretization", key: "base_cells" })?;
        let atom_cap = optional_limit::<usize>(&raw, "fiber_atom_cap", Some(64), |&c| c >= 2, "[2, inf) or `none`")?;
        let compress_delta = optional_limit::<f64>(&raw, "compress_delta", Some(1e-4), |&d| d > 0.0 && d < 1.0, "(0, 1) or `none`")?;
        let run = "run";
        let max_iter = raw.checked::<usize>(run, "max_iter", |n| n >= 1, "[1, inf)")?.unwrap_or(500);
        let tol = raw.checked::<f64>(run, "tol", |t| t > 0.0 && finite(t), "(0, inf)")?.unwrap_or(1e-10);
        let correlation_n = raw.checked::<usize>(run, "correlation_n", |n| n >= 1, "[1, inf)")?.unwrap_or(20);
        let gap_trials = raw.checked::<usize>(run, "gap_trials", |n| n >= 5, "[5, inf)")?.unwrap_or(8);
        let samples = raw.checked::<usize>(run, "samples", |n| n >= 64, "[64, inf)")?.unwrap_or(512);
        let mc_orbits = raw.parsed::<usize>(run, "mc_orbits")?.unwrap_or(0);
        let mc_length = raw.checked::<usize>(run, "mc_length", |n| n >= 1, "[1, inf)")?.unwrap_or(20_000);
        let mc_burn_in = raw.parsed::<usize>(run, "mc_burn_in")?.unwrap_or(100);
        let physical = raw.parsed::<bool>(run, "physical")?.unwrap_or(false);
        let seed = raw.parsed::<u64>(run, "seed")?.unwrap_or(0);
        let mut names = Vec::new();
        for key in ["observable_u", "observable_g"] {
            let name = raw.get(run, key).map(|e| e.value.clone()).unwrap_or_else(|| "y".into());
            if !OBSERVABLES.contains(&name.as_str()) {
                return Err(raw.line_error(run, key, format!("unknown observable `{name}`; expected one of {}", OBSERVABLES.join(", "))));
            }
            names.push(name);
        }
        if mc_orbits == 1 {
            return Err(raw.line_error(run, "mc_orbits", "`mc_orbits` must be 0 or at least 2".into()));
        }
        let directory = raw.get("output", "directory").map(|e| PathBuf::from(&e.value)).unwrap_or_else(|| PathBuf::from("out"));
        let formats = match raw.get("output", "formats") {
            None => Formats { json: true, csv: true },
            Some(e) => {
                let mut f = Formats { json: false, csv: false };
                for part in e.value.split(',').map(str::trim) {
                    match part {
                        "json" => f.json = true,
                        "csv" => f.csv = true,
                        other => {
                            return Err(ConfigError::Line { line: e.line, message: format!("unknown output format `{other}`; expected json or csv") })
                        }
                    }
                }
                f
            }
        };
        let cfg = Self {
            base_cells,
            operator: OperatorConfig { compress_delta, atom_cap },
            max_iter,
            tol,
            correlation_n,
            observable_u: names[0].clone(),
            observable_g: names[1].clone(),
            gap_trials,
            samples,
            mc_orbits,
            mc_length,
            mc_burn_in,
            physical,
            seed,
            directory,
            formats,
            raw,
        };
        // Surface system errors at parse time.
        cfg.system()?;
        Ok(cfg)
    }

    pub fn observables(&self, zeta: HolderExponent) -> (Observable, Observable) {
        (observable(&self.observable_u, zeta).unwrap(), observable(&self.observable_g, zeta).unwrap())
    }

    /// Builds the skew product described in `[system]`.
    pub fn system(&self) -> Result<SkewSystem, ConfigError> {
        let raw = &self.raw;
        let s = "system";
        if let Some(e) = raw.get(s, "gallery") {
            if let Some(other) = SYSTEM_KEYS.iter().find(|k| **k != "gallery" && raw.has(s, k)) {
                return Err(raw.line_error(s, other, format!("`{other}` cannot be combined with `gallery`")));
            }
            let entry = systems::gallery_entry(&e.value)
                .ok_or_else(|| ConfigError::Line { line: e.line, message: format!("unknown gallery entry `{}`", e.value) })?;
            return match entry.system() {
                Some(sys) => sys.map_err(|err| ConfigError::Line { line: e.line, message: err.to_string() }),
                None => Err(ConfigError::Line { line: e.line, message: format!("gallery entry `{}` has constants only, no system", e.value) }),
            };
        }

        let zeta_v = raw.checked::<f64>(s, "zeta", |z| z > 0.0 && z <= 1.0, "(0, 1]")?.unwrap_or(1.0);
        let zeta = HolderExponent::new(zeta_v).map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let base_kind = raw.get(s, "base").ok_or(ConfigError::Missing { section: "system", key: "base" })?;
        let mut base = match base_kind.value.as_str() {
            "linear" => {
                let l = raw.checked::<u32>(s, "base_degree", |l| l >= 2, "[2, inf)")?.unwrap_or(2);
                systems::linear_expanding(l)
            }
            "manneville-pomeau" => {
                let a = raw.checked::<f64>(s, "base_alpha", |a| a > 0.0 && a < 1.0, "(0, 1)")?.unwrap_or(0.5);
                systems::manneville_pomeau(a)
            }
            other => {
                return Err(ConfigError::Line { line: base_kind.line, message: format!("unknown base `{other}`; expected linear or manneville-pomeau") })
            }
        }
        .map_err(|e| ConfigError::Line { line: base_kind.line, message: e.to_string() })?;
        if let Some(l) = raw.checked::<f64>(s, "base_lipschitz", |l| l >= 1.0 && finite(l), "[1, inf)")? {
            base.lipschitz = l;
        }

        let pot_kind = raw.get(s, "potential").map(|e| e.value.as_str()).unwrap_or("zero");
        let potential = match pot_kind {
            "zero" => Potential::zero(),
            "constant" => {
                let c = raw.checked::<f64>(s, "potential_value", finite, "the finite reals")?.ok_or(ConfigError::Missing { section: "system", key: "potential_value" })?;
                Potential::constant(c)
            }
            "geometric" => {
                let t = raw.checked::<f64>(s, "potential_t", finite, "the finite reals")?.ok_or(ConfigError::Missing { section: "system", key: "potential_t" })?;
                geometric_potential(&base, t)
            }
            other => return Err(raw.line_error(s, "potential", format!("unknown potential `{other}`; expected zero, constant or geometric"))),
        };

        let fiber_entry = raw.get(s, "fiber").ok_or(ConfigError::Missing { section: "system", key: "fiber" })?;
        let alpha = || -> Result<f64, ConfigError> {
            raw.checked::<f64>(s, "fiber_alpha", |a| (0.0..1.0).contains(&a), "[0, 1)")?.ok_or(ConfigError::Missing { section: "system", key: "fiber_alpha" })
        };
        let fiber: Result<FiberMap, ConfigError> = match fiber_entry.value.as_str() {
            "linear" => fiber_linear(alpha()?).map_err(|e| raw.line_error(s, "fiber_alpha", e.to_string())),
            "discontinuous" => {
                let a2 = raw.checked::<f64>(s, "fiber_alpha2", |a| (0.0..1.0).contains(&a), "[0, 1)")?.ok_or(ConfigError::Missing { section: "system", key: "fiber_alpha2" })?;
                fiber_discontinuous(alpha()?, a2).map_err(|e| raw.line_error(s, "fiber", e.to_string()))
            }
            "affine" => {
                let mut v = [0.0; 4];
                for (slot, key) in v.iter_mut().zip(["fiber_a1", "fiber_b1", "fiber_a2", "fiber_b2"]) {
                    *slot = raw.checked::<f64>(s, key, finite, "the finite reals")?.ok_or_else(|| ConfigError::Invalid(format!("affine fibers need `{key}` in [system]")))?;
                }
                let [a1, b1, a2, b2] = v;
                fiber_holder(move |x| a1 + b1 * x, move |x| a2 + b2 * x, b1.abs(), b2.abs()).map_err(|e| raw.line_error(s, "fiber", e.to_string()))
            }
            "tsujii" => fiber_tsujii(alpha()?, tsujii_offset, PI / 2.0).map_err(|e| raw.line_error(s, "fiber_alpha", e.to_string())),
            other => Err(ConfigError::Line {
                line: fiber_entry.line,
                message: format!("unknown fiber `{other}`; expected linear, discontinuous, affine or tsujii"),
            }),
        };
        Ok(SkewSystem { base, fiber: fiber?, potential, zeta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[system]\nbase = linear\nfiber = linear\nfiber_alpha = 0.5\n[discretization]\nbase_cells = 16\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.base_cells, 16);
        assert_eq!(c.operator, OperatorConfig::default());
        assert_eq!(c.max_iter, 500);
        assert!(c.formats.json && c.formats.csv);
        let sys = c.system().unwrap();
        assert_eq!(sys.base.degree(), 2);
        assert_eq!(sys.fiber.alpha, 0.5);
    }

    #[test]
    fn unknown_key_names_its_line() {
        let err = RunConfig::parse(&format!("{MINIMAL}[run]\nspeed = 3\n")).unwrap_err();
        assert_eq!(err.to_string(), "line 8: unknown key `speed` in [run]");
    }

    #[test]
    fn missing_base_cells_is_named() {
        let err = RunConfig::parse("[system]\ngallery = tsujii\n").unwrap_err();
        assert!(err.to_string().contains("`base_cells`"), "{err}");
    }

    #[test]
    fn comments_and_none_limits() {
        let c = RunConfig::parse(&format!("# header\n{MINIMAL}fiber_atom_cap = none ; no cap\ncompress_delta = none\n")).unwrap();
        assert_eq!(c.operator, OperatorConfig::EXACT);
    }

    #[test]
    fn gallery_excludes_other_system_keys() {
        let err = RunConfig::parse("[system]\ngallery = tsujii\nzeta = 0.5\n[discretization]\nbase_cells = 16\n").unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for bad in ["zeta = 1.5", "fiber_alpha = 1", "base_degree = 1"] {
            let text = MINIMAL.replace("fiber_alpha = 0.5", if bad.starts_with("fiber_alpha") { bad } else { "fiber_alpha = 0.5" });
            let text = if bad.starts_with("fiber_alpha") { text } else { text.replace("[system]\n", &format!("[system]\n{bad}\n")) };
            assert!(RunConfig::parse(&text).is_err(), "{bad}");
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = RunConfig::parse(&format!("{MINIMAL}base_cells = 32\n")).unwrap_err();
        assert!(err.to_string().contains("already set on line 6"), "{err}");
    }
}
