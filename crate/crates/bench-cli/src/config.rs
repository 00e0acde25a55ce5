//! Scenario configuration files (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::BenchError;

/// One runnable scenario: what to compute, with which seed, written where.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Stem of the output files.
    pub name: String,
    /// Master seed; every random stream of the run derives from it.
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the result files, relative to the working directory.
    pub dir: Option<String>,
}

/// Parameters of the two-tritter interferometer with control phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TritterConfig {
    /// `[T1, T2, T3, θ]` of both tritters.
    #[serde(default = "balanced_tritter")]
    pub tritter: [f64; 4],
    /// Photons injected per input arm.
    pub input: Vec<u32>,
    #[serde(default = "unit")]
    pub visibility: f64,
}

fn balanced_tritter() -> [f64; 4] {
    [0.5, 1.0 / 3.0, 0.5, std::f64::consts::FRAC_PI_2]
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    /// Closed-form total-variance bounds of the three benchmark families.
    ScalingLaws { d: Vec<usize>, energy: Vec<f64> },
    /// Generalized NOON probe at uniform and optimal reference weight.
    HongBenchmark { d: usize, n: u32 },
    /// Analytic QFI against number covariances of random probes.
    QfiOracle { states: usize, max_modes: usize, max_photons: u32 },
    /// Optimal and probe-adapted POVMs for the optimal generalized NOON probe.
    OptimalPovm { d: Vec<usize>, n: u32, random_points: usize },
    /// Coherent benchmark with finite references and homodyne readout.
    CoherentBenchmark { d: usize, energy: f64, reference_energy: Vec<f64>, mismatch: Vec<f64> },
    /// Two-photon coincidence behind a balanced beam splitter.
    HomDip { visibility: Vec<f64> },
    /// Best per-shot `Tr(F⁻¹)` of the two-tritter interferometer.
    TritterFisher {
        circuit: TritterConfig,
        phases: Vec<f64>,
        controls_per_dim: usize,
    },
    /// Plug-in Fisher information of the cos² fringe from sampled counts.
    EmpiricalFisher { phase: f64, step: f64, samples: u64 },
    /// Maximum likelihood on the two-tritter interferometer.
    MleTwoTritter {
        circuit: TritterConfig,
        truth: Vec<f64>,
        shots: usize,
        runs: usize,
        grid_resolution: usize,
        settings: Vec<Vec<f64>>,
    },
    /// Maximum likelihood on a single NOON phase.
    NoonMle { n: u32, shots: usize, runs: usize, grid_resolution: usize },
    /// Adaptive and fixed-control SMC on the two-tritter interferometer.
    SmcConvergence {
        circuit: TritterConfig,
        truth: Vec<f64>,
        particles: usize,
        repetitions: usize,
        runs: usize,
        candidates_per_dim: usize,
        fixed_controls: Vec<f64>,
        checkpoints: Vec<usize>,
    },
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::ScalingLaws { .. } => "scaling-laws",
            Scenario::HongBenchmark { .. } => "hong-benchmark",
            Scenario::QfiOracle { .. } => "qfi-oracle",
            Scenario::OptimalPovm { .. } => "optimal-povm",
            Scenario::CoherentBenchmark { .. } => "coherent-benchmark",
            Scenario::HomDip { .. } => "hom-dip",
            Scenario::TritterFisher { .. } => "tritter-fisher",
            Scenario::EmpiricalFisher { .. } => "empirical-fisher",
            Scenario::MleTwoTritter { .. } => "mle-two-tritter",
            Scenario::NoonMle { .. } => "noon-mle",
            Scenario::SmcConvergence { .. } => "smc-convergence",
        }
    }
}

/// Kinds accepted in `[scenario] kind = ...`, with a one-line summary.
pub const SCENARIO_KINDS: [(&str, &str); 11] = [
    ("scaling-laws", "total-variance bounds of coherent, separate NOON and generalized NOON probes"),
    ("hong-benchmark", "Tr(Q^-1) of the generalized NOON probe, uniform vs optimal weight"),
    ("qfi-oracle", "analytic QFI matrix vs 4x number covariance on random probes"),
    ("optimal-povm", "POVM orthonormality, completeness, FI <= QFI and saturation"),
    ("coherent-benchmark", "coherent QFI with finite references and homodyne variance"),
    ("hom-dip", "two-photon coincidence probability vs visibility"),
    ("tritter-fisher", "best per-shot Tr(F^-1) of the two-tritter interferometer"),
    ("empirical-fisher", "Fisher information estimated from sampled frequencies"),
    ("mle-two-tritter", "maximum-likelihood coverage on the two-tritter interferometer"),
    ("noon-mle", "maximum-likelihood variance for a single NOON phase"),
    ("smc-convergence", "adaptive vs fixed SMC posterior trace against the CRB"),
];

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let de = toml::Deserializer::parse(text).map_err(|e| BenchError::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            BenchError::Config(format!("at `{path}`: {}", e.into_inner()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(m) => BenchError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        hash_text(&serde_json::to_string(self).expect("config serializes"))
    }
}

/// SHA-256 of `text` as lowercase hex.
pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
