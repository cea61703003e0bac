//! Dataset stages: simulate → generate → validate → balance and cap → split → export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use causim_core::baselines::{evaluate_baselines, BaselineScore, TrainStats};
use causim_core::catalog::{catalog_load, Catalog};
use causim_core::curation::{self, assign_splits, validate_scene_instances, BalanceReport, SplitMode};
use causim_core::describe::{describe, OracleDescription};
use causim_core::questions::{
    instantiate, QAInstance, Rejection, SceneRef, Split, SplitTags, SynonymTable, TemplateCatalog, ValidationStatus,
};
use causim_core::seed::{derive_seed, rng_for};
use causim_core::seed_key;
use causim_core::stats::{stats, DatasetStats};
use causim_core::video::Video;
use causim_physics::render::{render_frames, write_png_frames};
use causim_physics::SimConfig;
use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::{self, write_json, write_jsonl, Manifest, FORMAT_VERSION};
use crate::config::PipelineConfig;

/// Fresh scene seeds tried per video before the simulate stage gives up.
pub const MAX_SCENE_ATTEMPTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Io,
    Config,
    Simulate,
    Generate,
    Validate,
    Balance,
    Split,
    Export,
    Report,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Io => 1,
            Stage::Config => 2,
            Stage::Simulate => 3,
            Stage::Generate => 4,
            Stage::Validate => 5,
            Stage::Balance => 6,
            Stage::Split => 7,
            Stage::Export => 8,
            Stage::Report => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Io => "io",
            Stage::Config => "config",
            Stage::Simulate => "simulate",
            Stage::Generate => "generate",
            Stage::Validate => "validate",
            Stage::Balance => "balance",
            Stage::Split => "split",
            Stage::Export => "export",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("{stage} failed: {source:#}")]
pub struct StageError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

impl StageError {
    pub fn new(stage: Stage, source: impl Into<anyhow::Error>) -> Self {
        StageError { stage, source: source.into() }
    }
}

pub trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> StageContext<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, e))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub videos: usize,
    /// Sampling or simulation failures that were retried with a new seed.
    pub retries: usize,
    pub by_layout: BTreeMap<u32, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateTally {
    pub generated: usize,
    /// rejection reason → videos.
    pub rejected: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub attempts: usize,
    pub generated: usize,
    pub by_template: BTreeMap<String, TemplateTally>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub stable: usize,
    pub unstable: usize,
    /// Percent of checked instances that are stable.
    pub survival: f64,
    /// template → (stable, unstable).
    pub by_template: BTreeMap<String, (usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CapReport {
    /// Stable instances entering curation.
    pub input: usize,
    pub kept: usize,
    pub per_video: usize,
    /// Dropped by the per-video cap over all rounds.
    pub dropped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub simulate: SimulateReport,
    pub generate: GenerateReport,
    pub validate: ValidationReport,
    pub cap: CapReport,
    pub balance: BalanceReport,
    /// Largest answer share (percent) and size per template after balancing.
    pub template_shares: BTreeMap<String, (f64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub mode: SplitMode,
    pub train: usize,
    pub test: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<BaselineScore>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Statistics of the whole dataset and of every split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub all: DatasetStats,
    pub easy: BTreeMap<Split, DatasetStats>,
    pub hard: BTreeMap<Split, DatasetStats>,
}

pub fn split_of(q: &QAInstance, mode: SplitMode) -> Option<Split> {
    match mode {
        SplitMode::Easy => q.splits.easy,
        SplitMode::Hard => q.splits.hard,
    }
}

pub fn split_members(instances: &[QAInstance], mode: SplitMode, split: Split) -> Vec<QAInstance> {
    instances.iter().filter(|q| split_of(q, mode) == Some(split)).cloned().collect()
}

pub fn stats_report(instances: &[QAInstance]) -> StatsReport {
    let per = |mode| {
        Split::ALL.iter().map(|s| (*s, stats(instances.iter().filter(|q| split_of(q, mode) == Some(*s))))).collect()
    };
    StatsReport { all: stats(instances), easy: per(SplitMode::Easy), hard: per(SplitMode::Hard) }
}

/// Heuristics fitted on the train split and scored on the test split.
pub fn baseline_run(instances: &[QAInstance], mode: SplitMode, seeds: &[u64]) -> BaselineRun {
    let train = split_members(instances, mode, Split::Train);
    let test = split_members(instances, mode, Split::Test);
    let result = evaluate_baselines(&test, &TrainStats::from_instances(&train), seeds);
    let (scores, error) = match result {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    BaselineRun { mode, train: train.len(), test: test.len(), seeds: seeds.to_vec(), scores, error }
}

fn rejection_key(r: &Rejection) -> &'static str {
    match r {
        Rejection::TooFewObjects { .. } => "too_few_objects",
        Rejection::NoValidAnswer => "no_valid_answer",
        Rejection::NoRelation => "no_relation",
        Rejection::Eval(_) => "eval_error",
        Rejection::Counterfactual(_) => "counterfactual_error",
        Rejection::Render(_) => "render_error",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct VariationEntry {
    removed_object_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph: Option<causim_core::events::CausalGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Everything the export stage writes.
pub struct Dataset {
    pub videos: Vec<Video>,
    pub instances: Vec<QAInstance>,
    pub report: CurationReport,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub catalog: Catalog,
    pub templates: TemplateCatalog,
    pub synonyms: SynonymTable,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    /// Loads catalogs and checks the configuration against them. `jobs`
    /// defaults to every available core.
    pub fn new(config: PipelineConfig, jobs: Option<usize>) -> Result<Self, StageError> {
        config.validate().stage(Stage::Config)?;
        let catalog = match &config.catalog {
            Some(p) => catalog_load(p).stage(Stage::Config)?,
            None => Catalog::bundled(),
        };
        let templates = match &config.templates {
            Some(p) => TemplateCatalog::load(p).stage(Stage::Config)?,
            None => TemplateCatalog::bundled(),
        };
        for id in &config.layouts {
            if catalog.layout(*id).is_none() {
                return Err(StageError::new(Stage::Config, anyhow!("layout {id} is not in the catalog")));
            }
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().stage(Stage::Config)?;
        Ok(Pipeline { config, catalog, templates, synonyms: SynonymTable::default(), pool })
    }

    pub fn sim_config(&self) -> SimConfig {
        self.config.sim_config()
    }

    pub fn layouts(&self) -> Vec<u32> {
        if self.config.layouts.is_empty() {
            self.catalog.layout_ids()
        } else {
            self.config.layouts.clone()
        }
    }

    fn par_map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    /// Video `i` uses layout `layouts[i % L]`; failed samples retry with a fresh seed.
    pub fn simulate(&self) -> Result<(Vec<Video>, SimulateReport), StageError> {
        let layouts = self.layouts();
        let cfg = self.sim_config();
        let seed = self.config.seed;
        let indices: Vec<usize> = (0..self.config.videos).collect();
        let results = self.par_map(&indices, |&i| {
            let layout = layouts[i % layouts.len()];
            let mut last = String::new();
            for attempt in 0..MAX_SCENE_ATTEMPTS {
                let scene_seed = derive_seed(&seed_key!["video", seed, i, attempt]);
                let scene = match self.catalog.sample_scene(layout, scene_seed) {
                    Ok(s) => s,
                    Err(e) => {
                        last = e.to_string();
                        continue;
                    }
                };
                match Video::simulate(scene, &cfg) {
                    Ok(v) => return Ok((v, attempt)),
                    Err(e) => last = e.to_string(),
                }
            }
            Err(anyhow!(
                "video {i} (layout {layout}): no valid scene in {MAX_SCENE_ATTEMPTS} attempts; last error: {last}"
            ))
        });
        let mut report = SimulateReport::default();
        let mut videos = Vec::with_capacity(results.len());
        let mut ids = BTreeSet::new();
        for r in results {
            let (v, retries) = r.stage(Stage::Simulate)?;
            if !ids.insert(v.scene_id().to_string()) {
                return Err(StageError::new(Stage::Simulate, anyhow!("duplicate scene id {}", v.scene_id())));
            }
            report.retries += retries;
            *report.by_layout.entry(v.scene.layout_id).or_default() += 1;
            videos.push(v);
        }
        report.videos = videos.len();
        info!("simulated {} videos ({} retries)", report.videos, report.retries);
        Ok((videos, report))
    }

    /// Every template tried once per video.
    pub fn generate(&self, videos: &[Video]) -> (Vec<QAInstance>, GenerateReport) {
        let seed = self.config.seed;
        let per_video = self.par_map(videos, |v| {
            let scene = SceneRef { scene_id: v.scene_id(), layout_id: v.scene.layout_id };
            self.templates
                .templates
                .iter()
                .map(|t| {
                    let mut rng = rng_for(&seed_key!["question", seed, v.scene_id(), t.id.as_str()]);
                    (t.id.clone(), instantiate(t, scene, &v.context, &self.synonyms, &mut rng))
                })
                .collect::<Vec<_>>()
        });
        let mut report = GenerateReport::default();
        let mut out = Vec::new();
        for (tid, r) in per_video.into_iter().flatten() {
            report.attempts += 1;
            let tally = report.by_template.entry(tid).or_default();
            match r {
                Ok(q) => {
                    tally.generated += 1;
                    out.push(q);
                }
                Err(e) => *tally.rejected.entry(rejection_key(&e).to_string()).or_default() += 1,
            }
        }
        report.generated = out.len();
        info!("generated {} questions from {} template attempts", report.generated, report.attempts);
        (out, report)
    }

    /// Marks every instance stable or unstable under perturbation.
    pub fn validate(
        &self,
        videos: &[Video],
        mut instances: Vec<QAInstance>,
    ) -> Result<(Vec<QAInstance>, ValidationReport), StageError> {
        let index: BTreeMap<&str, usize> = videos.iter().enumerate().map(|(i, v)| (v.scene_id(), i)).collect();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); videos.len()];
        for (k, q) in instances.iter().enumerate() {
            let &i = index
                .get(q.scene_id.as_str())
                .ok_or_else(|| anyhow!("question {} refers to unknown video {}", q.instance_id, q.scene_id))
                .stage(Stage::Validate)?;
            groups[i].push(k);
        }
        let cfg = self.sim_config();
        let policy = &self.config.perturbation;
        let work: Vec<(usize, &Vec<usize>)> = groups.iter().enumerate().filter(|(_, g)| !g.is_empty()).collect();
        let statuses = self.par_map(&work, |(i, g)| {
            let group: Vec<QAInstance> = g.iter().map(|k| instances[*k].clone()).collect();
            validate_scene_instances(&group, &videos[*i].scene, policy, &cfg)
        });
        let mut report = ValidationReport::default();
        for ((_, g), st) in work.iter().zip(statuses) {
            for (k, s) in g.iter().zip(st) {
                instances[*k].validation = s;
            }
        }
        for q in &instances {
            report.checked += 1;
            let e = report.by_template.entry(q.template_id.clone()).or_default();
            if q.validation == ValidationStatus::Stable {
                report.stable += 1;
                e.0 += 1;
            } else {
                report.unstable += 1;
                e.1 += 1;
            }
        }
        report.survival = if report.checked == 0 { 0.0 } else { 100.0 * report.stable as f64 / report.checked as f64 };
        info!("validation kept {}/{} ({:.1}%)", report.stable, report.checked, report.survival);
        Ok((instances, report))
    }

    /// At most `questions_per_video` per video, a seeded random subset.
    pub fn cap_per_video(&self, instances: Vec<QAInstance>) -> Vec<QAInstance> {
        let limit = self.config.questions_per_video;
        let mut by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (k, q) in instances.iter().enumerate() {
            by_scene.entry(q.scene_id.as_str()).or_default().push(k);
        }
        let mut keep = vec![false; instances.len()];
        for (scene, mut ks) in by_scene {
            if ks.len() > limit {
                ks.shuffle(&mut rng_for(&seed_key!["cap", self.config.seed, scene]));
                ks.truncate(limit);
            }
            for k in ks {
                keep[k] = true;
            }
        }
        instances.into_iter().zip(keep).filter(|(_, k)| *k).map(|(q, _)| q).collect()
    }

    /// Stable instances, balanced and capped per video. Balancing and the cap
    /// alternate until neither drops anything, so both guarantees hold.
    pub fn curate(&self, instances: Vec<QAInstance>) -> (Vec<QAInstance>, CapReport, BalanceReport) {
        let input = instances.len();
        let mut current: Vec<QAInstance> =
            instances.into_iter().filter(|q| q.validation == ValidationStatus::Stable).collect();
        let mut cap =
            CapReport { input: current.len(), kept: 0, per_video: self.config.questions_per_video, dropped: 0 };
        let mut total = BalanceReport { input: current.len(), ..BalanceReport::default() };
        loop {
            let (balanced, r) = curation::balance(current, &self.config.balance, self.config.seed);
            total.dropped_by_template_cap += r.dropped_by_template_cap;
            total.dropped_by_global_cap += r.dropped_by_global_cap;
            total.dropped_single_answer += r.dropped_single_answer;
            total.rounds += r.rounds;
            for t in r.single_answer_templates {
                if !total.single_answer_templates.contains(&t) {
                    total.single_answer_templates.push(t);
                }
            }
            let before = balanced.len();
            current = self.cap_per_video(balanced);
            cap.dropped += before - current.len();
            if current.len() == before {
                break;
            }
        }
        total.single_answer_templates.sort();
        total.kept = current.len();
        cap.kept = current.len();
        info!("kept {} of {} ({} stable) after balancing and capping", current.len(), input, cap.input);
        (current, cap, total)
    }

    pub fn split(&self, mut instances: Vec<QAInstance>) -> Result<Vec<QAInstance>, StageError> {
        for q in &mut instances {
            q.splits = SplitTags::default();
        }
        assign_splits(&mut instances, &self.config.splits, self.config.seed).stage(Stage::Split)?;
        Ok(instances)
    }

    /// Every stage in memory, without writing anything.
    pub fn build(&self) -> Result<Dataset, StageError> {
        let (videos, simulate) = self.simulate()?;
        let (generated, generate) = self.generate(&videos);
        let (validated, validate) = self.validate(&videos, generated)?;
        let (balanced, cap, balance) = self.curate(validated);
        let instances = self.split(balanced)?;
        let template_shares = curation::max_template_share(&instances);
        let report = CurationReport { simulate, generate, validate, cap, balance, template_shares };
        Ok(Dataset { videos, instances, report })
    }

    /// Builds and exports to `out`.
    pub fn run(&self, out: &Path, force: bool) -> Result<Manifest, StageError> {
        let data = self.build()?;
        self.export(&data, out, force)
    }

    fn write_video(&self, root: &Path, v: &Video) -> anyhow::Result<OracleDescription> {
        artifacts::write_video_core(root, v)?;
        let dir = artifacts::video_dir(root, v.scene_id());
        let mut entries = Vec::new();
        for d in &v.scene.dynamics {
            match v.variations.get(d.id) {
                Ok(var) => {
                    if self.config.export.variation_traces {
                        let p = dir.join("variations").join(format!("{}.jsonl", d.id));
                        fs::create_dir_all(p.parent().unwrap())?;
                        let mut w = std::io::BufWriter::new(fs::File::create(&p)?);
                        var.trace.write_jsonl(&mut w)?;
                        std::io::Write::flush(&mut w)?;
                    }
                    entries.push(VariationEntry {
                        removed_object_id: d.id,
                        graph: Some(var.graph.clone()),
                        error: None,
                    })
                }
                Err(e) => {
                    entries.push(VariationEntry { removed_object_id: d.id, graph: None, error: Some(e.to_string()) })
                }
            }
        }
        write_json(&dir.join("variations.json"), &entries)?;
        let description = describe(&v.scene, &v.events);
        write_json(&dir.join("description.json"), &description)?;
        if self.config.export.render {
            let frames = render_frames(&v.scene, &v.trace, self.config.export.fps, self.config.export.resolution)?;
            write_png_frames(&frames, &dir.join("frames"))?;
        }
        Ok(description)
    }

    /// Writes the dataset into `<out>.partial` and renames it to `out` once
    /// complete. A failed export leaves nothing behind.
    pub fn export(&self, data: &Dataset, out: &Path, force: bool) -> Result<Manifest, StageError> {
        if out.exists() {
            if !force {
                return Err(StageError::new(Stage::Export, anyhow!("{} already exists (use --force)", out.display())));
            }
            fs::remove_dir_all(out).with_context(|| format!("cannot remove {}", out.display())).stage(Stage::Export)?;
        }
        let staging = staging_dir(out);
        if staging.exists() {
            fs::remove_dir_all(&staging).stage(Stage::Export)?;
        }
        match self.export_into(data, &staging) {
            Ok(m) => {
                fs::rename(&staging, out)
                    .with_context(|| format!("cannot move output to {}", out.display()))
                    .stage(Stage::Export)?;
                info!("wrote {} questions over {} videos to {}", m.questions, m.videos, out.display());
                Ok(m)
            }
            Err(e) => {
                if let Err(rm) = fs::remove_dir_all(&staging) {
                    warn!("cannot clean up {}: {rm}", staging.display());
                }
                Err(e)
            }
        }
    }

    fn export_into(&self, data: &Dataset, root: &Path) -> Result<Manifest, StageError> {
        fs::create_dir_all(root).stage(Stage::Export)?;
        fs::write(root.join("config.toml"), self.config.to_toml()).stage(Stage::Export)?;

        let descriptions: Vec<OracleDescription> = self
            .par_map(&data.videos, |v| self.write_video(root, v).with_context(|| format!("video {}", v.scene_id())))
            .into_iter()
            .collect::<anyhow::Result<_>>()
            .stage(Stage::Export)?;
        write_jsonl(&root.join("descriptions.jsonl"), &descriptions).stage(Stage::Export)?;

        write_jsonl(&root.join("questions.jsonl"), &data.instances).stage(Stage::Export)?;
        let mut split_counts = BTreeMap::new();
        for (mode, name) in [(SplitMode::Easy, "easy"), (SplitMode::Hard, "hard")] {
            let mut counts = BTreeMap::new();
            for split in Split::ALL {
                let rows = split_members(&data.instances, mode, split);
                counts.insert(split.name().to_string(), rows.len());
                write_jsonl(&root.join("splits").join(name).join(format!("{}.jsonl", split.name())), &rows)
                    .stage(Stage::Export)?;
            }
            split_counts.insert(name.to_string(), counts);
        }

        let seeds = &self.config.baseline_seeds;
        let baselines = [
            baseline_run(&data.instances, SplitMode::Easy, seeds),
            baseline_run(&data.instances, SplitMode::Hard, seeds),
        ];
        let reports = root.join("reports");
        write_json(&reports.join("curation.json"), &data.report).stage(Stage::Report)?;
        write_json(&reports.join("stats.json"), &stats_report(&data.instances)).stage(Stage::Report)?;
        write_json(&reports.join("baselines.json"), &baselines).stage(Stage::Report)?;

        let mut category_counts = BTreeMap::new();
        for q in &data.instances {
            *category_counts.entry(q.category.name().to_string()).or_default() += 1;
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION.to_string(),
            engine_version: causim_physics::ENGINE_VERSION.to_string(),
            catalog_version: self.catalog.catalog_version.clone(),
            template_version: self.templates.version.clone(),
            seed: self.config.seed,
            videos: data.videos.len(),
            questions: data.instances.len(),
            split_counts,
            category_counts,
            files: artifacts::digest_tree(root).stage(Stage::Export)?,
        };
        write_json(&root.join("manifest.json"), &manifest).stage(Stage::Export)?;
        Ok(manifest)
    }
}

pub fn staging_dir(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}
