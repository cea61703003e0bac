//! Pipeline configuration file.
//!
//! Every field is optional; missing fields take the defaults below.
//!
//! ```toml
//! seed = 0
//! videos = 200                # scenes to simulate
//! questions_per_video = 10    # cap applied after validation, before balancing
//! layouts = []                # layout ids to draw from; empty means all
//! # catalog = "layouts.toml"  # replaces the bundled layout catalog
//! # templates = "tmpl.toml"   # replaces the bundled question templates
//! baseline_seeds = [0, 1, 2]
//!
//! [simulation]
//! duration = 10.0             # seconds
//!
//! [perturbation]
//! trial_count = 10
//! position = 0.0025           # metres
//! angle = 0.0025              # radians
//! velocity = 0.0025           # fraction of initial speed
//! floor = 0.000625            # each draw is replayed at halved jitter down to this
//!
//! [balance]
//! template_cap = 1.25         # max answer share per template, × uniform
//! global_cap = 1.5            # max answer share per answer type, × uniform
//!
//! [splits]
//! ratios = [0.6, 0.2, 0.2]
//! hard_train_layouts = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]
//! hard_val_layouts = [13, 14, 15, 16]
//! hard_test_layouts = [17, 18, 19, 20]
//!
//! [export]
//! render = false              # PNG frames per video
//! fps = 5
//! resolution = 256
//! variation_traces = false    # full traces of every object-removal variation
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use causim_core::curation::{BalanceConfig, PerturbationPolicy, SplitConfig};
use causim_physics::render::{DEFAULT_FPS, DEFAULT_RESOLUTION};
use causim_physics::SimConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub duration: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { duration: causim_physics::trace::DEFAULT_DURATION }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub render: bool,
    pub fps: u32,
    pub resolution: u32,
    pub variation_traces: bool,
}

impl Default for ExportSection {
    fn default() -> Self {
        ExportSection { render: false, fps: DEFAULT_FPS, resolution: DEFAULT_RESOLUTION, variation_traces: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub videos: usize,
    pub questions_per_video: usize,
    pub layouts: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub baseline_seeds: Vec<u64>,
    pub simulation: SimulationSection,
    pub perturbation: PerturbationPolicy,
    pub balance: BalanceConfig,
    pub splits: SplitConfig,
    pub export: ExportSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            videos: 200,
            questions_per_video: 10,
            layouts: vec![],
            catalog: None,
            templates: None,
            baseline_seeds: vec![0, 1, 2],
            simulation: SimulationSection::default(),
            perturbation: PerturbationPolicy::default(),
            balance: BalanceConfig::default(),
            splits: SplitConfig::default(),
            export: ExportSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let c: PipelineConfig = toml::from_str(text).context("config does not parse")?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; relative catalog paths resolve against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut c = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.catalog, &mut c.templates].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.videos == 0 {
            bail!("`videos` must be at least 1");
        }
        if self.questions_per_video == 0 {
            bail!("`questions_per_video` must be at least 1");
        }
        if !(self.simulation.duration.is_finite() && self.simulation.duration > 0.0) {
            bail!("`simulation.duration` must be positive");
        }
        if self.baseline_seeds.is_empty() {
            bail!("`baseline_seeds` must not be empty");
        }
        if !(self.balance.template_cap >= 1.0 && self.balance.global_cap >= 1.0) {
            bail!("balance caps must be at least 1 (uniform)");
        }
        self.perturbation.validate()?;
        self.splits.validate()?;
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { duration: self.simulation.duration, ..SimConfig::default() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
