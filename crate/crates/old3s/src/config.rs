//! JSON run configuration. Every tunable has a default; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use old3s_core::learner::{ModelConfig, VariantConfig, VariantKind};
use old3s_core::stream::{make_schedule, PhaseSchedule, DEFAULT_FRACTIONS};
use old3s_core::synth::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A CSV file on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    /// Class names in index order; unlisted labels are an error.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
}

fn default_label() -> String {
    "class".into()
}

/// Where the `S1` rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv(CsvSource),
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Shares of `T1`, `Tb` and `T2`.
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    /// OCA window; `None` means `min(1000, n/10)`.
    #[serde(default)]
    pub window: Option<usize>,
    /// Width of the evolved space.
    #[serde(default = "default_d2")]
    pub d2: usize,
    /// Shuffle rows once per seed before streaming.
    #[serde(default = "default_true")]
    pub shuffle: bool,
    #[serde(default = "default_variants")]
    pub variants: Vec<VariantKind>,
    /// Depth of `old_fd`; `None` means the model depth.
    #[serde(default)]
    pub fixed_depth: Option<usize>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_epochs")]
    pub hindsight_epochs: usize,
    /// Also write a final model checkpoint per run.
    #[serde(default)]
    pub checkpoint: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_fractions() -> [f64; 3] {
    let (a, b, c) = DEFAULT_FRACTIONS;
    [a, b, c]
}
fn default_d2() -> usize {
    30
}
fn default_true() -> bool {
    true
}
fn default_variants() -> Vec<VariantKind> {
    VariantKind::ALL.to_vec()
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_epochs() -> usize {
    old3s_core::eval::HINDSIGHT_EPOCHS
}
fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file. Relative dataset paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        if let DataSource::Csv(src) = &mut config.data {
            if src.path.is_relative() {
                if let Some(dir) = path.parent() {
                    src.path = dir.join(&src.path);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.variants.is_empty() {
            return bad("variants: at least one variant is required".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds: at least one seed is required".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds: duplicate seed".into());
        }
        if self.d2 == 0 {
            return bad("d2: must be positive".into());
        }
        if self.hindsight_epochs == 0 {
            return bad("hindsight_epochs: must be positive".into());
        }
        if self.fixed_depth.is_some() && !self.variants.contains(&VariantKind::OldFd) {
            return bad("fixed_depth: only meaningful with the old_fd variant".into());
        }
        self.model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        for &kind in &self.variants {
            self.variant(kind, 0)
                .validate()
                .map_err(|e| CliError::Config(format!("{}: {e}", kind.name())))?;
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate().map_err(|e| CliError::Config(format!("data.synthetic: {e}")))?;
            self.schedule(spec.n)?;
        }
        Ok(())
    }

    pub fn schedule(&self, n_total: usize) -> CliResult<PhaseSchedule> {
        let [a, b, c] = self.fractions;
        make_schedule(n_total, (a, b, c), self.window).map_err(|e| CliError::Config(format!("schedule: {e}")))
    }

    pub fn variant(&self, kind: VariantKind, seed: u64) -> VariantConfig {
        let mut v = VariantConfig::new(kind, self.model.clone(), seed);
        if kind == VariantKind::OldFd {
            if let Some(k) = self.fixed_depth {
                v.fixed_depth = Some(k);
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"data": {"synthetic": {"n": 200, "d1": 4, "classes": 2, "margin": 2.0, "seed": 1}}}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.fractions, [0.45, 0.10, 0.45]);
        assert_eq!(c.variants, VariantKind::ALL.to_vec());
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.seeds.len(), 5);
        let echo = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&echo).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_variants_are_named() {
        let e = RunConfig::from_json(&MINIMAL.replace("\"data\"", "\"lr\": 1, \"data\"")).unwrap_err();
        assert!(e.to_string().contains("lr"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::from_json(&MINIMAL.replace("\"data\"", "\"variants\": [\"old4s\"], \"data\"")).unwrap_err();
        assert!(e.to_string().contains("old4s"), "{e}");
        let e = RunConfig::from_json(&MINIMAL.replace("\"data\"", "\"model\": {\"etaa\": 1}, \"data\"")).unwrap_err();
        assert!(e.to_string().contains("etaa"), "{e}");
    }

    #[test]
    fn semantic_checks() {
        let with = |extra: &str| RunConfig::from_json(&MINIMAL.replace("\"data\"", &format!("{extra}, \"data\"")));
        assert!(with("\"seeds\": []").is_err());
        assert!(with("\"seeds\": [1, 1]").is_err());
        assert!(with("\"fractions\": [0.1, 0.8, 0.1]").is_err());
        assert!(with("\"model\": {\"beta\": 1.5}").is_err());
        assert!(with("\"fixed_depth\": 9").is_err());
        assert!(with("\"fixed_depth\": 2, \"variants\": [\"old3s\"]").is_err());
        assert!(with("\"fixed_depth\": 2, \"variants\": [\"old_fd\"]").is_ok());
    }
}
