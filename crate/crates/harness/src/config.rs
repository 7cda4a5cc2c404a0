//! Run configuration: a TOML file, overlaid by `FHP_*` environment
//! variables, overlaid by command-line flags.
//!
//! Environment keys map to config paths by stripping the `FHP_` prefix,
//! lowercasing, and splitting on `__`: `FHP_RUN__SEED=7` sets `run.seed`,
//! `FHP_MODEL__LAMBDA__EXPONENT=3` sets `model.lambda.exponent`. Values are
//! read as TOML literals and fall back to strings.

use std::fmt;
use std::path::{Path, PathBuf};

use fhp_core::gaussian::ModelSpec;
use fhp_core::sequence::{FamilyKind, SequenceFamily};
use fhp_core::spectral::SingularSystem;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const ENV_PREFIX: &str = "FHP_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Filter one observation and compare with the conditional expectation.
    Filter,
    /// Compare the optimal smoothing operator against candidate operators.
    VerifyOptimality,
    /// Sample the model and check the residual trace formula.
    MonteCarlo,
    /// Trace-class and Hilbert-Schmidt decisions for the model.
    Admissibility,
    /// Hilbert-scale diagnostics for levels 1..=n.
    ScaleReport,
    /// Backward heat conduction example.
    HeatDemo,
    /// Classical HP filter against its spectral counterpart.
    ClassicalHp,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Filter => "filter",
            Command::VerifyOptimality => "verify-optimality",
            Command::MonteCarlo => "monte-carlo",
            Command::Admissibility => "admissibility",
            Command::ScaleReport => "scale-report",
            Command::HeatDemo => "heat-demo",
            Command::ClassicalHp => "classical-hp",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Coefficients,
    Grid,
}

/// A sequence family as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl FamilyConfig {
    pub fn to_family(&self, key: &str) -> Result<SequenceFamily> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                HarnessError::Config(format!("{key}.{name}: missing required key for kind \"{}\"", self.kind))
            })
        };
        let kind = match self.kind.as_str() {
            "power-law" => FamilyKind::PowerLaw {
                exponent: need(self.exponent, "exponent")?,
            },
            "exponential" => FamilyKind::Exponential {
                rate: need(self.rate, "rate")?,
                quadratic: self.quadratic.unwrap_or(false),
            },
            "constant" => FamilyKind::Constant,
            "explicit" => FamilyKind::Explicit {
                values: self.values.clone().ok_or_else(|| {
                    HarnessError::Config(format!("{key}.values: missing required key for kind \"explicit\""))
                })?,
            },
            other => {
                return Err(HarnessError::Config(format!(
                    "{key}.kind: unknown family \"{other}\" (expected power-law, exponential, constant or explicit)"
                )))
            }
        };
        SequenceFamily::new(kind, self.scale).map_err(|e| HarnessError::Config(format!("{key}: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub truncation: Option<usize>,
    #[serde(default)]
    pub kernel_dim: usize,
    pub y0: Option<Vec<f64>>,
    pub kernel_vars: Option<Vec<f64>>,
    pub lambda: Option<FamilyConfig>,
    pub sigma_u: Option<FamilyConfig>,
    pub sigma_v: Option<FamilyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub samples: usize,
    pub output_dir: PathBuf,
    pub scale_index: Option<u32>,
    pub max_scale_index: u32,
    pub strict: bool,
    /// Worker threads for Monte Carlo; 0 uses every core.
    pub workers: usize,
    pub input: Option<PathBuf>,
    pub input_format: InputFormat,
    pub candidates: usize,
    pub trials: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 1000,
            output_dir: PathBuf::from("fhp-out"),
            scale_index: None,
            max_scale_index: 4,
            strict: false,
            workers: 0,
            input: None,
            input_format: InputFormat::Coefficients,
            candidates: 200,
            trials: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSection {
    pub tau: f64,
    pub t0: f64,
    pub truncation: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    fhp_core::heat::DEFAULT_GRID
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub sigma_u: f64,
    pub sigma_v: f64,
    /// Length of the synthetic series when no input file is given.
    #[serde(default = "default_length")]
    pub length: usize,
}

fn default_length() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    /// Monte Carlo acceptance band in standard errors.
    pub sigma_multiplier: f64,
    /// Relative slack for candidate comparisons in verify-optimality.
    pub optimality: f64,
    /// Relative bound on the span part of the residual.
    pub residual: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            sigma_multiplier: 3.0,
            optimality: 1e-14,
            residual: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunSection,
    pub heat: Option<HeatSection>,
    pub classical: Option<ClassicalSection>,
    #[serde(default)]
    pub tolerance: ToleranceSection,
}

/// Flag values that take precedence over file and environment.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict: bool,
    pub scale_index: Option<u32>,
    pub workers: Option<usize>,
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = root;
    for seg in parents {
        let entry = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            HarnessError::Config(format!("{}: cannot override inside a non-table value", path.join(".")))
        })?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

fn parse_env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `FHP_*` variables from `vars` to a parsed config table.
pub fn apply_env(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut pairs: Vec<_> = vars
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|s| (s.to_lowercase(), v)))
        .collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key.split("__").map(str::to_string).collect();
        if path.iter().any(String::is_empty) {
            return Err(HarnessError::Config(format!(
                "{ENV_PREFIX}{}: malformed override key",
                key.to_uppercase()
            )));
        }
        set_path(table, &path, parse_env_value(&raw))?;
    }
    Ok(())
}

fn resolve_paths(table: &mut toml::Table, base: &Path) {
    let Some(run) = table.get_mut("run").and_then(toml::Value::as_table_mut) else {
        return;
    };
    for key in ["input", "output_dir"] {
        if let Some(toml::Value::String(p)) = run.get_mut(key) {
            if Path::new(p.as_str()).is_relative() {
                *p = base.join(p.as_str()).to_string_lossy().into_owned();
            }
        }
    }
}

/// Reads and validates a config. Relative paths in the file are resolved
/// against the file's directory; environment and flag paths are taken as
/// given.
pub fn load_config(
    path: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    flags: &FlagOverrides,
) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| HarnessError::io(format!("reading {}", p.display()), e))?;
            let mut t: toml::Table =
                toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {}", p.display(), e.message())))?;
            resolve_paths(&mut t, p.parent().unwrap_or(Path::new(".")));
            t
        }
        None => toml::Table::new(),
    };
    apply_env(&mut table, env)?;
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))?;
    cfg.apply_flags(flags);
    cfg.check_ranges()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn apply_flags(&mut self, f: &FlagOverrides) {
        if let Some(s) = f.seed {
            self.run.seed = s;
        }
        if let Some(s) = f.samples {
            self.run.samples = s;
        }
        if let Some(o) = &f.out {
            self.run.output_dir = o.clone();
        }
        if f.strict {
            self.run.strict = true;
        }
        if let Some(n) = f.scale_index {
            self.run.scale_index = Some(n);
        }
        if let Some(w) = f.workers {
            self.run.workers = w;
        }
    }

    /// Binds the subcommand; a `command` key in the file must agree with it.
    pub fn bind_command(&mut self, cli: Command) -> Result<()> {
        match self.command {
            Some(c) if c != cli => Err(HarnessError::Config(format!(
                "command: config file is for \"{c}\" but \"{cli}\" was requested"
            ))),
            _ => {
                self.command = Some(cli);
                self.check_command()
            }
        }
    }

    pub fn command(&self) -> Command {
        self.command.unwrap_or(Command::Filter)
    }

    fn check_ranges(&self) -> Result<()> {
        let t = &self.tolerance;
        for (name, v) in [
            ("tolerance.sigma_multiplier", t.sigma_multiplier),
            ("tolerance.optimality", t.optimality),
            ("tolerance.residual", t.residual),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HarnessError::Config(format!(
                    "{name}: must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.run.samples == 0 {
            return Err(HarnessError::Config("run.samples: must be > 0".into()));
        }
        if self.run.scale_index == Some(0) {
            return Err(HarnessError::Config("run.scale_index: must be >= 1".into()));
        }
        if self.run.max_scale_index == 0 {
            return Err(HarnessError::Config("run.max_scale_index: must be >= 1".into()));
        }
        for (name, fam) in [
            ("model.lambda", &self.model.lambda),
            ("model.sigma_u", &self.model.sigma_u),
            ("model.sigma_v", &self.model.sigma_v),
        ] {
            if let Some(f) = fam {
                f.to_family(name)?;
            }
        }
        Ok(())
    }

    fn check_command(&self) -> Result<()> {
        match self.command() {
            Command::Filter | Command::VerifyOptimality | Command::Admissibility | Command::ScaleReport => {
                self.build_model().map(|_| ())
            }
            Command::MonteCarlo => {
                if self.run.samples < 100 {
                    return Err(HarnessError::Config(format!(
                        "run.samples: monte-carlo needs at least 100 samples, got {}",
                        self.run.samples
                    )));
                }
                self.build_model().map(|_| ())
            }
            Command::HeatDemo => {
                self.heat_problem()?;
                self.heat_families().map(|_| ())
            }
            Command::ClassicalHp => {
                let c = self.classical_section()?;
                for (name, v) in [("classical.sigma_u", c.sigma_u), ("classical.sigma_v", c.sigma_v)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(HarnessError::Config(format!("{name}: must be > 0, got {v}")));
                    }
                }
                if self.run.input.is_none() && c.length < 3 {
                    return Err(HarnessError::Config(format!(
                        "classical.length: must be >= 3, got {}",
                        c.length
                    )));
                }
                Ok(())
            }
        }
    }

    fn family(&self, fam: &Option<FamilyConfig>, key: &str) -> Result<SequenceFamily> {
        fam.as_ref()
            .ok_or_else(|| HarnessError::Config(format!("{key}: missing required key")))?
            .to_family(key)
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let n = m
            .truncation
            .ok_or_else(|| HarnessError::Config("model.truncation: missing required key".into()))?;
        if n == 0 {
            return Err(HarnessError::Config("model.truncation: must be >= 1".into()));
        }
        let d0 = m.kernel_dim;
        let y0 = m.y0.clone().unwrap_or_else(|| vec![0.0; d0]);
        let kv = m.kernel_vars.clone().unwrap_or_else(|| vec![1.0; d0]);
        if y0.len() != d0 {
            return Err(HarnessError::Config(format!(
                "model.y0: expected {d0} entries (kernel_dim), got {}",
                y0.len()
            )));
        }
        if kv.len() != d0 {
            return Err(HarnessError::Config(format!(
                "model.kernel_vars: expected {d0} entries (kernel_dim), got {}",
                kv.len()
            )));
        }
        if let Some(v) = kv.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(HarnessError::Config(format!(
                "model.kernel_vars: entries must be > 0, got {v}"
            )));
        }
        let lambda = self.family(&m.lambda, "model.lambda")?;
        let sigma_u = self.family(&m.sigma_u, "model.sigma_u")?;
        let sigma_v = self.family(&m.sigma_v, "model.sigma_v")?;
        let system =
            SingularSystem::new(lambda, n, d0).map_err(|e| HarnessError::Config(format!("model.lambda: {e}")))?;
        ModelSpec::from_families(system, y0, sigma_u, kv, sigma_v)
            .map_err(|e| HarnessError::Config(format!("model: {e}")))
    }

    pub fn heat_problem(&self) -> Result<fhp_core::heat::HeatProblem> {
        let h = self
            .heat
            .as_ref()
            .ok_or_else(|| HarnessError::Config("heat: missing required section".into()))?;
        fhp_core::heat::HeatProblem::new(h.tau, h.t0, h.truncation, h.grid)
            .map_err(|e| HarnessError::Config(format!("heat: {e}")))
    }

    /// Noise and signal spectra for the heat demo.
    pub fn heat_families(&self) -> Result<(SequenceFamily, SequenceFamily)> {
        Ok((
            self.family(&self.model.sigma_u, "model.sigma_u")?,
            self.family(&self.model.sigma_v, "model.sigma_v")?,
        ))
    }

    pub fn classical_section(&self) -> Result<&ClassicalSection> {
        self.classical
            .as_ref()
            .ok_or_else(|| HarnessError::Config("classical: missing required section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
truncation = 32
lambda = { kind = "power-law", exponent = 2.0 }
sigma_u = { kind = "constant" }
sigma_v = { kind = "constant", scale = 0.5 }
"#;

    fn parse(text: &str, env: Vec<(&str, &str)>) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        let env = env.into_iter().map(|(a, b)| (a.to_string(), b.to_string()));
        load_config(Some(&p), env, &FlagOverrides::default())
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = parse(MINIMAL, vec![]).unwrap();
        let m = cfg.build_model().unwrap();
        assert_eq!(m.truncation(), 32);
        assert_eq!(m.system().values()[1], 0.25);
        assert_eq!(cfg.run.samples, 1000);
    }

    #[test]
    fn zero_exponent_rejected() {
        let text = MINIMAL.replace("exponent = 2.0", "exponent = 0.0");
        let err = parse(&text, vec![]).unwrap_err().to_string();
        assert!(
            err.contains("model.lambda") && err.contains("exponent must be > 0"),
            "{err}"
        );
    }

    #[test]
    fn unknown_command_and_keys_rejected() {
        let err = parse(&format!("command = \"bogus\"\n{MINIMAL}"), vec![]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(parse(&format!("{MINIMAL}\nbogus = 1\n"), vec![]).is_err());
        let text = MINIMAL.replace("truncation = 32", "truncation = 32\ntrunc = 3");
        assert!(parse(&text, vec![]).unwrap_err().to_string().contains("trunc"));
    }

    #[test]
    fn env_overrides_nested_keys() {
        let cfg = parse(
            MINIMAL,
            vec![
                ("FHP_RUN__SEED", "77"),
                ("FHP_MODEL__LAMBDA__EXPONENT", "3"),
                ("FHP_RUN__OUTPUT_DIR", "elsewhere"),
                ("HOME", "/x"),
            ],
        )
        .unwrap();
        assert_eq!(cfg.run.seed, 77);
        assert_eq!(cfg.model.lambda.as_ref().unwrap().exponent, Some(3.0));
        assert_eq!(cfg.run.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn flags_win_over_env() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, MINIMAL).unwrap();
        let flags = FlagOverrides {
            seed: Some(5),
            ..Default::default()
        };
        let cfg = load_config(Some(&p), vec![("FHP_RUN__SEED".into(), "9".into())], &flags).unwrap();
        assert_eq!(cfg.run.seed, 5);
    }

    #[test]
    fn command_mismatch_and_requirements() {
        let mut cfg = parse(&format!("command = \"admissibility\"\n{MINIMAL}"), vec![]).unwrap();
        assert!(cfg.clone().bind_command(Command::Filter).is_err());
        cfg.bind_command(Command::Admissibility).unwrap();
        let mut few = parse(MINIMAL, vec![("FHP_RUN__SAMPLES", "50")]).unwrap();
        assert!(few
            .bind_command(Command::MonteCarlo)
            .unwrap_err()
            .to_string()
            .contains("100"));
        let mut heat = parse(MINIMAL, vec![]).unwrap();
        assert!(heat
            .bind_command(Command::HeatDemo)
            .unwrap_err()
            .to_string()
            .contains("heat"));
    }

    #[test]
    fn kernel_lengths_checked() {
        let text = MINIMAL.replace("truncation = 32", "truncation = 4\nkernel_dim = 2\ny0 = [1.0]");
        let err = parse(&text, vec![]).unwrap().build_model().unwrap_err().to_string();
        assert!(err.contains("model.y0"), "{err}");
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, format!("{MINIMAL}\n[run]\noutput_dir = \"out\"\n")).unwrap();
        let cfg = load_config(Some(&p), Vec::new(), &FlagOverrides::default()).unwrap();
        assert_eq!(cfg.run.output_dir, dir.path().join("out"));
    }
}
