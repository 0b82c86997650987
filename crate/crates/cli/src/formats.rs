//! File formats handed between subcommands. Every file carries its schema
//! version so stale artifacts fail loudly instead of misparsing.

use limn_core::motor::CostWeights;
use limn_core::stimuli::{GridSpec, Stimulus};
use limn_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};

/// Corpus manifest (`corpus.json` in a corpus directory). Images are
/// re-rendered from the stimuli on load; the PGM files next to the manifest
/// are for inspection and golden tests.
#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusFile {
    pub schema: u32,
    pub set: String,
    pub seed: u64,
    pub items: Vec<CorpusItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub stimulus: Stimulus,
}

/// `solve` output: ranked programs per image.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolvedFile {
    pub schema: u32,
    pub ckpt: String,
    pub items: Vec<SolvedItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolvedItem {
    pub id: String,
    pub grid: GridSpec,
    /// Whether the top program renders the image exactly.
    pub solved: bool,
    pub programs: Vec<ProgramScore>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProgramScore {
    pub text: String,
    pub log_prior: f64,
    pub distance: f64,
    pub score: f64,
}

/// `ground` output: admissible orderings of each item's top program.
#[derive(Debug, Serialize, Deserialize)]
pub struct GroundedFile {
    pub schema: u32,
    pub items: Vec<GroundedItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GroundedItem {
    pub id: String,
    pub program: String,
    pub trajectories: Vec<Trajectory>,
}

/// `fit-theta` output: per-subject weights plus their average.
#[derive(Debug, Serialize, Deserialize)]
pub struct ThetaFile {
    pub schema: u32,
    pub lambda: f64,
    pub subjects: Vec<CostWeights>,
    pub general: CostWeights,
}

/// Run manifest written next to a `train` checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainManifest {
    pub schema: u32,
    pub corpus: String,
    pub config: limn_core::config::RunConfig,
}
