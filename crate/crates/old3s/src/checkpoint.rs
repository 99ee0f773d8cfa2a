//! Versioned JSON snapshots of a learner, including its RNG position, so a run
//! can resume bit for bit.

use std::path::Path;

use old3s_core::learner::{Learner, VariantKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MAGIC: &str = "OLD3S-CKPT-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub magic: String,
    pub variant: VariantKind,
    pub seed: u64,
    pub d1: usize,
    pub d2: usize,
    pub classes: usize,
    /// Last round the learner has consumed.
    pub round: usize,
    pub learner: Learner,
}

impl Checkpoint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: VariantKind,
        seed: u64,
        d1: usize,
        d2: usize,
        classes: usize,
        round: usize,
        learner: Learner,
    ) -> Self {
        Self {
            magic: MAGIC.into(),
            variant,
            seed,
            d1,
            d2,
            classes,
            round,
            learner,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match probe.get("magic").and_then(|m| m.as_str()) {
            Some(MAGIC) => {}
            Some(other) => return Err(format!("unsupported checkpoint format {other:?}")),
            None => return Err("missing checkpoint magic".into()),
        }
        serde_json::from_value(probe).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::io(path, e))
    }
}
