//! Run configuration: seeds, budgets, and schema versions. A config plus a
//! corpus fully determines every output byte, so configs are echoed into
//! run manifests next to the artifacts they produced.

use crate::dsl::RenderConfig;
use serde::{Deserialize, Serialize};

/// File format versions, printed by `--version` and stamped into outputs.
pub mod schema {
    pub const CORPUS: u32 = 1;
    pub const CHECKPOINT: u32 = 1;
    pub const TRACES: u32 = 1;
    pub const THETA: u32 = 1;
}

/// Enumeration budget: whichever of the two limits trips first ends the
/// search. `max_programs` counts completed candidate programs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub timeout_sec: f64,
    pub max_programs: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            timeout_sec: 60.0,
            max_programs: 120_000_000,
        }
    }
}

/// Gradient-descent settings for recognition-model training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub step: f64,
    pub epochs: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            step: 0.1,
            epochs: 300,
        }
    }
}

/// Everything a training run needs besides the corpus itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub cycles: usize,
    pub beam_size: usize,
    pub dream_count: usize,
    /// Productions per dream before the sampler restarts.
    pub dream_max_depth: usize,
    /// Budget per image per cycle while the image is still unsolved.
    pub explore: Budget,
    /// Cheaper budget once an image already has a non-empty beam; the search
    /// then only looks for higher-prior refinements.
    pub refine_max_programs: u64,
    pub sgd: SgdConfig,
    pub render: RenderConfig,
    /// Recognition-model input resolution (features are block means).
    pub feature_width: usize,
    pub feature_height: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            cycles: 20,
            beam_size: 5,
            dream_count: 1500,
            dream_max_depth: 40,
            explore: Budget::default(),
            refine_max_programs: 100_000,
            sgd: SgdConfig::default(),
            render: RenderConfig::default(),
            feature_width: 16,
            feature_height: 16,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = RunConfig {
            seed: 42,
            ..RunConfig::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
