//! Perturbation stability checks, answer balancing and split assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use causim_physics::{simulate, PhysicsError, SceneSpec, SimConfig, Vec2};
use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterfactual::VariationCache;
use crate::dsl::{self, Answer, AnswerType, SimContext};
use crate::events::extract_events;
use crate::questions::{QAInstance, Split, ValidationStatus};
use crate::seed::{derive_seed, rng_for};
use crate::seed_key;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationPolicy {
    pub trial_count: u32,
    /// Metres, added per axis.
    pub position: f64,
    /// Radians, added.
    pub angle: f64,
    /// Fraction of the initial velocity.
    pub velocity: f64,
    /// Smallest position jitter tried, metres. Each trial's draw is also
    /// replayed at half, a quarter, ... of the magnitudes down to this floor,
    /// so the trials of a halved policy are a subset of the full policy's.
    pub floor: f64,
}

impl Default for PerturbationPolicy {
    fn default() -> Self {
        PerturbationPolicy { trial_count: 10, position: 0.0025, angle: 0.0025, velocity: 0.0025, floor: 0.000625 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("invalid perturbation policy: {0}")]
    Policy(String),
    #[error("invalid split config: {0}")]
    Split(String),
}

impl PerturbationPolicy {
    pub fn validate(&self) -> Result<(), CurationError> {
        if self.trial_count == 0 {
            return Err(CurationError::Policy("trial_count must be at least 1".into()));
        }
        for (name, v) in
            [("position", self.position), ("angle", self.angle), ("velocity", self.velocity), ("floor", self.floor)]
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CurationError::Policy(format!("{name} jitter must be a finite non-negative number")));
            }
        }
        Ok(())
    }

    /// Same draws with every magnitude multiplied by `factor`. The floor is
    /// absolute and stays put.
    pub fn scaled(&self, factor: f64) -> Self {
        PerturbationPolicy {
            position: self.position * factor,
            angle: self.angle * factor,
            velocity: self.velocity * factor,
            ..*self
        }
    }

    /// Magnitude factors replayed per trial: 1, 1/2, 1/4, ... while the
    /// position jitter stays at or above the floor.
    pub fn ladder(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        while out.len() < MAX_LADDER && self.position * out[out.len() - 1] * 0.5 >= self.floor && self.floor > 0.0 {
            out.push(out[out.len() - 1] * 0.5);
        }
        out
    }
}

const MAX_JITTER_HALVINGS: usize = 8;
const MAX_LADDER: usize = 16;

/// Unit draws in [-1, 1] for one trial: per dynamic object `[dx, dy, dangle, dv]`.
/// Drawn independently of the magnitudes, so a smaller policy yields a
/// proportionally smaller perturbation of the same direction.
fn unit_draws(scene: &SceneSpec, trial: u32) -> BTreeMap<u32, [f64; 4]> {
    let mut rng = rng_for(&seed_key!["perturb", scene.scene_id.as_str(), scene.rng_seed, trial]);
    scene
        .dynamics
        .iter()
        .map(|d| {
            let mut u = [0.0; 4];
            for x in &mut u {
                *x = rng.random_range(-1.0..=1.0);
            }
            (d.id, u)
        })
        .collect()
}

/// Jittered copy of the scene for one trial. Objects with zero initial
/// velocity stay at rest. Jitter that would push an object into another body
/// is halved for that object until the placement is clear.
pub fn perturb_scene(scene: &SceneSpec, policy: &PerturbationPolicy, trial: u32) -> SceneSpec {
    let draws = unit_draws(scene, trial);
    let mut shrink: BTreeMap<u32, f64> = scene.dynamics.iter().map(|d| (d.id, 1.0)).collect();
    let jitter = |shrink: &BTreeMap<u32, f64>| {
        let mut out = scene.clone();
        for d in &mut out.dynamics {
            let [ux, uy, ua, uv] = draws[&d.id];
            let k = shrink[&d.id];
            d.position += Vec2::new(ux * policy.position, uy * policy.position) * k;
            d.angle += ua * policy.angle * k;
            d.linear_velocity = d.linear_velocity * (1.0 + uv * policy.velocity);
        }
        out
    };
    for _ in 0..MAX_JITTER_HALVINGS * scene.dynamics.len().max(1) {
        let out = jitter(&shrink);
        let Err(PhysicsError::Overlap { a, b, .. }) = out.validate() else { return out };
        for id in [a, b] {
            if let Some(k) = shrink.get_mut(&id) {
                *k = if *k < 0.5f64.powi(MAX_JITTER_HALVINGS as i32 - 1) { 0.0 } else { *k * 0.5 };
            }
        }
    }
    jitter(&shrink)
}

/// Simulation settings for perturbed scenes: jitter may push objects into
/// slight contact, which the solver resolves.
pub fn perturbed_config(config: &SimConfig) -> SimConfig {
    let mut c = config.clone();
    c.world.reject_overlap = false;
    c
}

/// Program context for one trial, or `None` if the perturbed run fails.
pub fn perturbed_context(
    scene: &SceneSpec,
    policy: &PerturbationPolicy,
    trial: u32,
    config: &SimConfig,
) -> Option<SimContext> {
    let cfg = perturbed_config(config);
    let p = perturb_scene(scene, policy, trial);
    let trace = simulate(&p, &cfg).ok()?;
    let events = Arc::new(extract_events(&p, &trace));
    let cache = Arc::new(VariationCache::new(p.clone(), cfg));
    Some(SimContext::new(&p, &trace, events, cache))
}

fn same_answer(instance: &QAInstance, ctx: &SimContext) -> bool {
    matches!(dsl::answer(&instance.program, ctx), Ok(Some(a)) if a == instance.answer)
}

/// Stability of every instance of one scene. Trials are shared by all
/// instances; counterfactual re-simulations happen only when a program asks.
pub fn validate_scene_instances(
    instances: &[QAInstance],
    scene: &SceneSpec,
    policy: &PerturbationPolicy,
    config: &SimConfig,
) -> Vec<ValidationStatus> {
    let mut stable = vec![true; instances.len()];
    let ladder = policy.ladder();
    for trial in 0..policy.trial_count {
        for &k in &ladder {
            if !stable.iter().any(|s| *s) {
                break;
            }
            let ctx = perturbed_context(scene, &policy.scaled(k), trial, config);
            for (i, inst) in instances.iter().enumerate() {
                if stable[i] {
                    stable[i] = ctx.as_ref().is_some_and(|c| same_answer(inst, c));
                }
            }
        }
    }
    stable.into_iter().map(|s| if s { ValidationStatus::Stable } else { ValidationStatus::Unstable }).collect()
}

pub fn validate_instance(
    instance: &QAInstance,
    scene: &SceneSpec,
    policy: &PerturbationPolicy,
    config: &SimConfig,
) -> ValidationStatus {
    validate_scene_instances(std::slice::from_ref(instance), scene, policy, config)[0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    /// Allowed answer share within a template, as a multiple of uniform.
    pub template_cap: f64,
    /// Allowed answer share within an answer type across the dataset.
    pub global_cap: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        BalanceConfig { template_cap: 1.25, global_cap: 1.5 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub input: usize,
    pub kept: usize,
    pub dropped_by_template_cap: usize,
    pub dropped_by_global_cap: usize,
    pub dropped_single_answer: usize,
    /// Templates removed because every instance has the same answer.
    pub single_answer_templates: Vec<String>,
    pub rounds: usize,
}

/// Largest per-answer quota `m` with `m <= cap * Σ min(n_a, m)`.
pub fn answer_quota(counts: &[usize], cap_share: f64) -> usize {
    let max = counts.iter().copied().max().unwrap_or(0);
    (1..=max)
        .rev()
        .find(|&m| (m as f64) <= cap_share * counts.iter().map(|&n| n.min(m)).sum::<usize>() as f64 + 1e-9)
        .unwrap_or(0)
}

/// Deterministic drop priority: lower keys are kept first.
fn keep_order(seed: u64, ids: &mut [&QAInstance]) {
    ids.sort_by_key(|q| (derive_seed(&seed_key!["balance", seed, q.instance_id.as_str()]), q.instance_id.clone()));
}

fn cap_groups(
    groups: BTreeMap<Answer, Vec<&QAInstance>>,
    quota: impl Fn(&[usize]) -> usize,
    seed: u64,
) -> (BTreeSet<&str>, usize) {
    let counts: Vec<usize> = groups.values().map(Vec::len).collect();
    let m = quota(&counts);
    let mut keep = BTreeSet::new();
    let mut dropped = 0;
    for (_, mut v) in groups {
        keep_order(seed, &mut v);
        dropped += v.len().saturating_sub(m);
        keep.extend(v.into_iter().take(m).map(|q| q.instance_id.as_str()));
    }
    (keep, dropped)
}

/// Rejection-based balancing: per template each answer's share is capped at
/// `template_cap / k` (`k` distinct answers; boolean templates go to exact
/// parity), then per answer type at `global_cap / k`. Repeats until nothing
/// changes. Templates with a single answer are dropped.
pub fn balance(instances: Vec<QAInstance>, config: &BalanceConfig, seed: u64) -> (Vec<QAInstance>, BalanceReport) {
    let mut report = BalanceReport { input: instances.len(), ..Default::default() };
    let mut current = instances;
    let mut single = BTreeSet::new();
    loop {
        report.rounds += 1;
        let before = current.len();

        let mut by_template: BTreeMap<&str, BTreeMap<Answer, Vec<&QAInstance>>> = BTreeMap::new();
        for q in &current {
            by_template.entry(&q.template_id).or_default().entry(q.answer).or_default().push(q);
        }
        let mut keep: BTreeSet<String> = BTreeSet::new();
        for (tid, groups) in by_template {
            if groups.len() < 2 {
                single.insert(tid.to_string());
                continue;
            }
            let boolean = groups.keys().all(|a| a.answer_type() == AnswerType::Boolean);
            let k = groups.len() as f64;
            let (kept, dropped) = if boolean {
                cap_groups(groups, |c| c.iter().copied().min().unwrap_or(0), seed)
            } else {
                cap_groups(groups, |c| answer_quota(c, config.template_cap / k), seed)
            };
            report.dropped_by_template_cap += dropped;
            keep.extend(kept.into_iter().map(str::to_string));
        }
        current.retain(|q| keep.contains(&q.instance_id));

        let mut by_type: BTreeMap<AnswerType, BTreeMap<Answer, Vec<&QAInstance>>> = BTreeMap::new();
        for q in &current {
            by_type.entry(q.answer_type).or_default().entry(q.answer).or_default().push(q);
        }
        let mut keep: BTreeSet<String> = BTreeSet::new();
        for (_, groups) in by_type {
            let k = groups.len() as f64;
            let (kept, dropped) = cap_groups(groups, |c| answer_quota(c, config.global_cap / k), seed ^ 0x9e37);
            report.dropped_by_global_cap += dropped;
            keep.extend(kept.into_iter().map(str::to_string));
        }
        current.retain(|q| keep.contains(&q.instance_id));

        if current.len() == before {
            break;
        }
    }
    for t in &single {
        warn!("template {t} has a single answer; dropped");
    }
    report.single_answer_templates = single.into_iter().collect();
    report.kept = current.len();
    report.dropped_single_answer =
        report.input - report.kept - report.dropped_by_template_cap - report.dropped_by_global_cap;
    (current, report)
}

/// Largest share of any answer within any template.
pub fn max_template_share(instances: &[QAInstance]) -> BTreeMap<String, (f64, usize)> {
    let mut by_template: BTreeMap<&str, BTreeMap<Answer, usize>> = BTreeMap::new();
    for q in instances {
        *by_template.entry(&q.template_id).or_default().entry(q.answer).or_default() += 1;
    }
    by_template
        .into_iter()
        .map(|(t, h)| {
            let total: usize = h.values().sum();
            let max = h.values().copied().max().unwrap_or(0);
            (t.to_string(), (max as f64 / total as f64, h.len()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Easy,
    Hard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// train, val, test fractions by video.
    pub ratios: [f64; 3],
    pub hard_train_layouts: Vec<u32>,
    pub hard_val_layouts: Vec<u32>,
    pub hard_test_layouts: Vec<u32>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.6, 0.2, 0.2],
            hard_train_layouts: (1..=12).collect(),
            hard_val_layouts: (13..=16).collect(),
            hard_test_layouts: (17..=20).collect(),
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let sum: f64 = self.ratios.iter().sum();
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(CurationError::Split(format!("ratios {:?} must be non-negative and sum to 1", self.ratios)));
        }
        let sets =
            [("train", &self.hard_train_layouts), ("val", &self.hard_val_layouts), ("test", &self.hard_test_layouts)];
        for (i, (a, sa)) in sets.iter().enumerate() {
            for (b, sb) in &sets[i + 1..] {
                if let Some(l) = sa.iter().find(|l| sb.contains(l)) {
                    return Err(CurationError::Split(format!("layout {l} is in both the hard {a} and {b} sets")));
                }
            }
        }
        Ok(())
    }

    pub fn hard_split_of(&self, layout: u32) -> Option<Split> {
        if self.hard_train_layouts.contains(&layout) {
            Some(Split::Train)
        } else if self.hard_val_layouts.contains(&layout) {
            Some(Split::Val)
        } else if self.hard_test_layouts.contains(&layout) {
            Some(Split::Test)
        } else {
            None
        }
    }
}

/// Easy-mode split of video ids: seeded shuffle cut by the ratios.
pub fn easy_video_splits(scene_ids: &BTreeSet<String>, ratios: [f64; 3], seed: u64) -> BTreeMap<String, Split> {
    let mut videos: Vec<&String> = scene_ids.iter().collect();
    videos.shuffle(&mut rng_for(&seed_key!["split", "easy", seed]));
    let n = videos.len();
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    videos
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let s = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (v.clone(), s)
        })
        .collect()
}

/// Tags every instance with its easy and hard split. Instances whose layout is
/// not in any hard set get no hard tag.
pub fn assign_splits(instances: &mut [QAInstance], config: &SplitConfig, seed: u64) -> Result<(), CurationError> {
    config.validate()?;
    let scenes: BTreeSet<String> = instances.iter().map(|q| q.scene_id.clone()).collect();
    let easy = easy_video_splits(&scenes, config.ratios, seed);
    for q in instances.iter_mut() {
        q.splits.easy = easy.get(&q.scene_id).copied();
        q.splits.hard = config.hard_split_of(q.layout_id);
    }
    Ok(())
}
