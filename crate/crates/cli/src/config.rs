//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use narx_fusion_core::fusion::{BenchmarkSpec, Case, StepTest};
use narx_fusion_core::FusionConfig;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "NARX_FUSION_SEED";

/// One file fully determines a `fuse` run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    /// Defaults to the case's reference step test.
    pub validation: Option<StepTest>,
    pub fusion: FusionConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    /// Plant that supplies local-model data and validation truth.
    pub case: Case,
    /// Grid coordinates at which local models are identified from the plant.
    #[serde(default)]
    pub anchors: Vec<f64>,
    /// JSON list of local models to fuse instead of identifying them.
    /// Relative paths resolve against the config file.
    pub local_models: Option<PathBuf>,
    /// Grid coordinates of the validation step tests.
    #[serde(default)]
    pub validate_at: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("{}: config schema violation", path.display()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                cfg.schema_version
            );
        }
        if cfg.experiment.local_models.is_none() && cfg.experiment.anchors.len() < 2 {
            bail!(
                "{}: experiment.anchors needs at least 2 entries when experiment.local_models is not given",
                path.display()
            );
        }
        if let Some(p) = &cfg.experiment.local_models {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.experiment.local_models = Some(base.join(p));
            }
        }
        if let Some(seed) = seed_override()? {
            cfg.fusion.seed = seed;
        }
        Ok(cfg)
    }

    pub fn validation(&self) -> StepTest {
        self.validation
            .unwrap_or_else(|| BenchmarkSpec::reference(self.experiment.case).validation)
    }
}

/// Seed from the environment, if set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(SEED_ENV),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let dir = tempfile::tempdir()?;
        let p = dir.path().join("c.toml");
        fs::write(&p, text)?;
        RunConfig::load(&p)
    }

    const BASE: &str = r#"
schema_version = 1
[experiment]
case = "toy"
anchors = [0.1, 0.3]
[fusion]
n_y = 3
n_u = 3
gamma = 0.5
cv_folds = 3
n = 448
n_v = 155
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.fusion.lambda_grid.resolve(), (100, 4.0));
        assert_eq!(cfg.validation(), BenchmarkSpec::reference(Case::Toy).validation);
    }

    #[test]
    fn gamma_of_one_is_rejected() {
        let err = parse(&BASE.replace("gamma = 0.5", "gamma = 1.0")).unwrap_err();
        assert!(format!("{err:#}").contains("gamma"), "{err:#}");
    }

    #[test]
    fn unknown_field_is_named() {
        let err = parse(&BASE.replace("n = 448", "n = 448\nbogus = 1")).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("bogus") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn wrong_schema_version() {
        assert!(parse(&BASE.replace("schema_version = 1", "schema_version = 7")).is_err());
    }
}
