//! JSON run configuration consumed by the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::solver::SolverConfig;

/// Optional default file locations; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub stripes_out: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub solver: SolverConfig<f64>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
}

impl RunConfig {
    /// Parses and checks everything that does not depend on the input cube.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))?;
        if let Some(n) = &cfg.noise {
            n.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> serde_json::Value {
        serde_json::json!({
            "solver": serde_json::to_value(SolverConfig::<f64>::default()).unwrap(),
            "seed": 3,
            "paths": {"output": "out.nlt"}
        })
    }

    #[test]
    fn parses_full_document() {
        let cfg = RunConfig::from_json(&sample().to_string()).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.paths.output.as_deref(), Some(Path::new("out.nlt")));
        assert!(cfg.noise.is_none());
    }

    #[test]
    fn missing_key_is_named() {
        let mut v = sample();
        v["solver"].as_object_mut().unwrap().remove("gamma");
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = sample();
        v["extra"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v = sample();
        v["solver"]["lambda"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn noise_spec_is_validated() {
        let mut v = sample();
        v["noise"] = serde_json::to_value(crate::noise::NoiseSpec::case(1, 8, 0).unwrap()).unwrap();
        assert!(RunConfig::from_json(&v.to_string()).is_ok());
        v["noise"]["stripe_density"] = serde_json::json!(2.0);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
