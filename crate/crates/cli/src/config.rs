use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pftlab::ensemble::{SamplerConfig, StationarityConfig, ThermoConfig};
use pftlab::grid::Lattice;

/// Everything a run depends on. Written back as `config.toml` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand that produced the outputs, filled in on resolution.
    pub command: String,
    pub seed: Option<u64>,
    pub lattice: LatticeConfig,
    pub model: ModelConfig,
    pub output: OutputConfig,
    pub check: CheckConfig,
    pub evolve: EvolveConfig,
    pub gauge: GaugeConfig,
    pub ensemble: EnsembleConfig,
    pub sampler: SamplerTable,
    pub stationarity: StationarityTable,
    pub thermo: ThermoTable,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: None,
            lattice: LatticeConfig::default(),
            model: ModelConfig::default(),
            output: OutputConfig::default(),
            check: CheckConfig::default(),
            evolve: EvolveConfig::default(),
            gauge: GaugeConfig::default(),
            ensemble: EnsembleConfig::default(),
            sampler: SamplerTable::default(),
            stationarity: StationarityTable::default(),
            thermo: ThermoTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: usize,
    pub circumference: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { n: 32, circumference: TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub mass: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { mass: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Per-site columns in flow traces.
    pub per_site: bool,
    pub histogram_bins: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("pftlab-out"), per_site: false, histogram_bins: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub sizes: Vec<usize>,
    pub lapse_n: String,
    pub lapse_m: String,
    pub shift_n: String,
    pub shift_m: String,
    pub xi: [String; 2],
    pub zeta: [String; 2],
    /// Random states for `verify multisym`.
    pub states: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            sizes: vec![32, 64, 128, 256],
            lapse_n: "1".into(),
            lapse_m: "cos(x)".into(),
            shift_n: "sin(x)".into(),
            shift_m: "cos(2*x)".into(),
            xi: ["1 + 0.2*cos(x)".into(), "0".into()],
            zeta: ["0.1*t".into(), "0.3*sin(x)".into()],
            states: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// φ = sin x, Π = 0 on the identity slice
    Wave,
    /// Smooth random profile drawn from the seed
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub xi: [String; 2],
    pub preset: Preset,
    /// Embedding CSV replacing the preset slice.
    pub embedding: Option<PathBuf>,
    pub lambda_end: f64,
    pub step: f64,
    pub every: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            xi: ["1".into(), "0".into()],
            preset: Preset::Wave,
            embedding: None,
            lambda_end: 1.0,
            step: 1e-3,
            every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    pub f0: String,
    pub f1: String,
    pub initial: Preset,
    pub lambda_end: f64,
    pub step: f64,
    pub every: usize,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self {
            f0: "lambda".into(),
            f1: "x".into(),
            initial: Preset::Wave,
            lambda_end: 1.0,
            step: 1e-3,
            every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Matter,
    Regulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub mode: Mode,
    pub xi: [String; 2],
    pub b: f64,
    pub sigma_p: f64,
    pub sigma_tau: f64,
    pub pin_zero_mode: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Matter,
            xi: ["1".into(), "0".into()],
            b: 1.0,
            sigma_p: 1.0,
            sigma_tau: 0.05,
            pin_zero_mode: false,
        }
    }
}

/// Sampler settings without the seed, which lives at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerTable {
    pub chains: usize,
    pub samples_per_chain: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub target_acceptance: f64,
    pub langevin: bool,
    pub batches_per_chain: usize,
}

impl Default for SamplerTable {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            chains: d.chains,
            samples_per_chain: d.samples_per_chain,
            burn_in: d.burn_in,
            thin: d.thin,
            target_acceptance: d.target_acceptance,
            langevin: d.langevin,
            batches_per_chain: d.batches_per_chain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityTable {
    pub enabled: bool,
    pub flow_time: f64,
    pub step: f64,
    pub flow_mass: Option<f64>,
}

impl Default for StationarityTable {
    fn default() -> Self {
        let d = StationarityConfig::default();
        Self { enabled: false, flow_time: d.flow_time, step: d.step, flow_mass: d.flow_mass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermoTable {
    /// Defaults to the ensemble `xi`.
    pub xi_final: Option<[String; 2]>,
    /// Defaults to the ensemble `b`.
    pub b_final: Option<f64>,
    pub stages: usize,
    pub fd_step: f64,
    pub min_ess: f64,
}

impl Default for ThermoTable {
    fn default() -> Self {
        let d = ThermoConfig::default();
        Self { xi_final: None, b_final: None, stages: d.stages, fd_step: d.fd_step, min_ess: d.min_ess }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// SHA-256 of the resolved config with the output directory blanked, so that
    /// the same run written to two places carries the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn lattice(&self) -> pftlab::Result<Lattice> {
        Lattice::new(self.lattice.n, self.lattice.circumference)
    }

    pub fn require_seed(&self) -> anyhow::Result<u64> {
        self.seed.ok_or_else(|| {
            anyhow::Error::new(pftlab::Error::InvalidParameter(
                "a seed is required: pass --seed or set `seed` in the config".into(),
            ))
        })
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            seed,
            chains: s.chains,
            samples_per_chain: s.samples_per_chain,
            burn_in: s.burn_in,
            thin: s.thin,
            target_acceptance: s.target_acceptance,
            langevin: s.langevin,
            batches_per_chain: s.batches_per_chain,
        }
    }

    pub fn stationarity_config(&self) -> StationarityConfig {
        let s = &self.stationarity;
        StationarityConfig { flow_time: s.flow_time, step: s.step, flow_mass: s.flow_mass }
    }

    pub fn thermo_config(&self, seed: u64) -> ThermoConfig {
        let t = &self.thermo;
        ThermoConfig { sampler: self.sampler_config(seed), stages: t.stages, fd_step: t.fd_step, min_ess: t.min_ess }
    }
}
