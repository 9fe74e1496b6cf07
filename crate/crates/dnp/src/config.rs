//! Run configuration: JSON with a versioned `schema` field.

use std::fs;
use std::path::{Path, PathBuf};

use dnp_core::forcing::{sample_forcing, ForcingSpec, SineTerm};
use dnp_core::verify::{
    derived_forcing, ExactSolution, MmsMode, MmsSpec, MoscoKind, MoscoSequenceSpec,
};
use dnp_core::{
    CascadeParams, DiffusionField, DualTrajectory, Nonlinearity, ProblemSpec, SpatialMesh,
    TemporalMesh,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::Io { .. } => None,
        }
    }
}

impl From<dnp_core::Error> for ConfigError {
    fn from(e: dnp_core::Error) -> Self {
        match e {
            dnp_core::Error::Config { key, reason } => ConfigError::Invalid { key, reason },
            other => ConfigError::invalid("problem", other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub cascade: CascadeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mms: Option<MmsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mosco: Option<MoscoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("dnp-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: f64,
    pub m: f64,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "one")]
    pub period: f64,
    /// Interior nodes `M`.
    pub nodes: usize,
    /// Time steps `N`.
    pub steps: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `|s|^{p−2}s` with the configured `p`.
    #[default]
    Power,
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    /// Two-column CSV `s, α(s)`, relative to the config file.
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    Constant {
        value: f64,
    },
    /// One value per cell, `M + 1` in total.
    Cells {
        values: Vec<f64>,
    },
    /// `base · (1 + amplitude · sin(mode · πx/L))`.
    Sine {
        base: f64,
        amplitude: f64,
        mode: f64,
    },
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingConfig {
    #[default]
    Zero,
    Sines {
        terms: Vec<SineTerm>,
    },
    /// Slice-major `N × M` values.
    Grid {
        values: Vec<f64>,
    },
    /// Forcing that makes `exact` the solution.
    Manufactured {
        exact: ExactSolution,
        mode: MmsMode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "twenty")]
    pub fields: usize,
    #[serde(default = "twenty")]
    pub growth_samples: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            fields: 20,
            growth_samples: 20,
            noise: default_noise(),
        }
    }
}

fn twenty() -> usize {
    20
}

fn default_noise() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoscoConfig {
    pub kind: MoscoKind,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `(p, m)` pairs.
    pub pairs: Vec<(f64, f64)>,
    /// Final ε values; an empty list keeps the cascade schedule.
    #[serde(default)]
    pub epsilon_final: Vec<f64>,
}

/// Parses and validates a config. Relative tabulated paths resolve against `base_dir`.
pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." {
            "config".to_string()
        } else {
            path
        };
        ConfigError::invalid(key, e.inner().to_string())
    })?;
    if let NonlinearityConfig::Tabulated { path } = &mut cfg.problem.nonlinearity {
        if path.is_relative() {
            *path = base_dir.join(&*path);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA {
            return Err(ConfigError::invalid(
                "schema",
                format!("unsupported version {}, expected {SCHEMA}", self.schema),
            ));
        }
        let spec = self.problem.build(self.cascade.delta)?;
        self.cascade.validate(Some(&spec))?;
        if let Some(v) = &self.verify {
            if v.fields == 0 || v.growth_samples == 0 {
                return Err(ConfigError::invalid(
                    "verify.fields",
                    "sample counts must be positive",
                ));
            }
            if !(v.noise > 0.0 && v.noise.is_finite()) {
                return Err(ConfigError::invalid("verify.noise", "must be positive"));
            }
        }
        if let Some(mms) = &self.mms {
            if mms.levels == 0 {
                return Err(ConfigError::invalid("mms.levels", "must be at least 1"));
            }
        }
        if let Some(m) = &self.mosco {
            if m.n_max == 0 {
                return Err(ConfigError::invalid("mosco.n_max", "must be at least 1"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.pairs.is_empty() {
                return Err(ConfigError::invalid("sweep.pairs", "must not be empty"));
            }
            for &(p, m) in &s.pairs {
                self.problem
                    .with_exponents(p, m)
                    .build(self.cascade.delta)?;
            }
            if s.epsilon_final.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(ConfigError::invalid(
                    "sweep.epsilon_final",
                    "values must be positive",
                ));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ProblemSpec, ConfigError> {
        self.problem.build(self.cascade.delta)
    }

    pub fn mosco_sequence(&self) -> Result<MoscoSequenceSpec, ConfigError> {
        let m = self.mosco.as_ref().ok_or_else(|| {
            ConfigError::invalid("mosco", "the mosco command needs a `mosco` block")
        })?;
        Ok(MoscoSequenceSpec {
            kind: m.kind,
            n_max: m.n_max,
            base: self.spec()?,
        })
    }

    pub fn mms_spec(&self) -> Result<MmsSpec, ConfigError> {
        self.mms
            .ok_or_else(|| ConfigError::invalid("mms", "the mms command needs an `mms` block"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }
}

impl ProblemConfig {
    pub fn with_exponents(&self, p: f64, m: f64) -> ProblemConfig {
        ProblemConfig {
            p,
            m,
            ..self.clone()
        }
    }

    fn nonlinearity(&self) -> Result<Nonlinearity, ConfigError> {
        let nl = match &self.nonlinearity {
            NonlinearityConfig::Power => {
                if self.p == 2.0 {
                    Nonlinearity::identity()
                } else {
                    Nonlinearity::power(self.p).map_err(|_| {
                        ConfigError::invalid("problem.p", format!("must exceed 1, got {}", self.p))
                    })?
                }
            }
            NonlinearityConfig::PiecewiseLinear { knots } => {
                Nonlinearity::piecewise_linear(knots.clone())?
            }
            NonlinearityConfig::Tabulated { path } => Nonlinearity::tabulated(read_table(path)?)?,
        };
        if nl.p() != self.p {
            return Err(ConfigError::invalid(
                "problem.p",
                format!(
                    "the nonlinearity has growth exponent {}, config says {}",
                    nl.p(),
                    self.p
                ),
            ));
        }
        Ok(nl)
    }

    /// Builds the instance; `delta` enters manufactured forcing.
    pub fn build(&self, delta: f64) -> Result<ProblemSpec, ConfigError> {
        if !(self.m.is_finite() && self.m > 1.0) {
            return Err(ConfigError::invalid(
                "problem.m",
                format!("must exceed 1, got {}", self.m),
            ));
        }
        if self.nodes == 0 {
            return Err(ConfigError::invalid("problem.nodes", "must be positive"));
        }
        if self.steps == 0 {
            return Err(ConfigError::invalid("problem.steps", "must be positive"));
        }
        let smesh = SpatialMesh::new(self.length, self.nodes)
            .map_err(|e| ConfigError::invalid("problem.length", e.to_string()))?;
        let tmesh = TemporalMesh::new(self.period, self.steps)
            .map_err(|e| ConfigError::invalid("problem.period", e.to_string()))?;
        let nl = self.nonlinearity()?;
        let a = match &self.diffusion {
            DiffusionConfig::Constant { value } => DiffusionField::constant(&smesh, *value),
            DiffusionConfig::Cells { values } => DiffusionField::from_values(values.clone()),
            DiffusionConfig::Sine {
                base,
                amplitude,
                mode,
            } => {
                let l = smesh.length();
                DiffusionField::from_fn(&smesh, |x| {
                    base * (1.0 + amplitude * (mode * std::f64::consts::PI * x / l).sin())
                })
            }
        }
        .map_err(|e| ConfigError::invalid("problem.diffusion", e.to_string()))?;
        let zero = DualTrajectory::zeros(tmesh.steps(), smesh.interior());
        let spec = ProblemSpec::new(nl, self.m, a, zero, smesh, tmesh)?;
        let f = match &self.forcing {
            ForcingConfig::Zero => return Ok(spec),
            ForcingConfig::Sines { terms } => {
                sample_forcing(&ForcingSpec::Sines(terms.clone()), &smesh, &tmesh)
            }
            ForcingConfig::Grid { values } => sample_forcing(
                &ForcingSpec::Grid {
                    steps: tmesh.steps(),
                    nodes: smesh.interior(),
                    values: values.clone(),
                },
                &smesh,
                &tmesh,
            ),
            ForcingConfig::Manufactured { exact, mode } => {
                derived_forcing(exact, *mode, &spec, delta)
            }
        }
        .map_err(|e| ConfigError::invalid("problem.forcing", e.to_string()))?;
        Ok(spec.with_forcing(f)?)
    }
}

/// Reads `s, α(s)` rows; a non-numeric first row is taken as a header.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let key = "problem.nonlinearity.path";
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConfigError::invalid(key, format!("{}: {e}", path.display())))?;
    let mut knots = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError::invalid(key, e.to_string()))?;
        if rec.len() != 2 {
            return Err(ConfigError::invalid(
                key,
                format!("row {} has {} columns", row + 1, rec.len()),
            ));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(s), Ok(a)) => knots.push((s, a)),
            _ if row == 0 => continue,
            _ => {
                return Err(ConfigError::invalid(
                    key,
                    format!("row {} is not numeric", row + 1),
                ))
            }
        }
    }
    Ok(knots)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema": 1, "problem": {"p": 2, "m": 3, "nodes": 4, "steps": 3}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.cascade, CascadeParams::default());
        assert_eq!(cfg.problem.forcing, ForcingConfig::Zero);
        let spec = cfg.spec().unwrap();
        assert_eq!((spec.tmesh.steps(), spec.smesh.interior()), (3, 4));
    }

    #[test]
    fn bad_m_names_key() {
        let text = MINIMAL.replace("\"m\": 3", "\"m\": 0.5");
        let err = parse(&text, Path::new(".")).unwrap_err();
        assert_eq!(err.key(), Some("problem.m"));
    }

    #[test]
    fn type_errors_carry_path() {
        let text = MINIMAL.replace("\"nodes\": 4", "\"nodes\": \"four\"");
        assert_eq!(
            parse(&text, Path::new(".")).unwrap_err().key(),
            Some("problem.nodes")
        );
        let text = MINIMAL.replace("}}", "}, \"cascade\": {\"omega\": 2.0}}");
        assert_eq!(
            parse(&text, Path::new(".")).unwrap_err().key(),
            Some("cascade.omega")
        );
    }

    #[test]
    fn wrong_schema() {
        let text = MINIMAL.replace("\"schema\": 1", "\"schema\": 2");
        assert_eq!(
            parse(&text, Path::new(".")).unwrap_err().key(),
            Some("schema")
        );
    }

    #[test]
    fn mismatched_growth_exponent() {
        let text = MINIMAL.replace("\"p\": 2", "\"p\": 3").replace(
            "\"nodes\"",
            "\"nonlinearity\": {\"kind\": \"piecewise_linear\", \"knots\": [[-1, -1], [0, 0], [1, 3]]}, \"nodes\"",
        );
        assert_eq!(
            parse(&text, Path::new(".")).unwrap_err().key(),
            Some("problem.p")
        );
    }

    #[test]
    fn echo_round_trips() {
        let text = MINIMAL.replace(
            "}}",
            "}, \"mosco\": {\"kind\": \"identity\", \"n_max\": 2}}",
        );
        let cfg = parse(&text, Path::new(".")).unwrap();
        let again = parse(&cfg.to_json(), Path::new(".")).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn tabulated_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("alpha.csv"),
            "s,alpha\n-2,-2\n0,0\n1,1\n3,3\n",
        )
        .unwrap();
        let text = MINIMAL.replace(
            "\"nodes\"",
            "\"nonlinearity\": {\"kind\": \"tabulated\", \"path\": \"alpha.csv\"}, \"nodes\"",
        );
        let text = text.replace("\"m\": 3", "\"m\": 2.5");
        let cfg = parse(&text, dir.path()).unwrap();
        assert_eq!(cfg.spec().unwrap().nl.alpha(2.0), 2.0);
    }
}
