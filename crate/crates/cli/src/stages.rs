//! Stage-by-stage execution through a work directory.
//!
//! ```text
//! <work>/
//!   config.toml
//!   videos/<scene_id>/{scene.json,trace.jsonl,graph.json}
//!   stages/simulate.json  generated.jsonl  generate.json
//!          validated.jsonl  validate.json
//!          balanced.jsonl  cap.json  balance.json
//!          split.jsonl
//! ```
//!
//! `export` reads the work directory and writes the final dataset.

use std::path::{Path, PathBuf};

use anyhow::Context;
use causim_core::curation::max_template_share;
use causim_core::questions::QAInstance;
use causim_core::video::Video;
use rayon::prelude::*;

use crate::artifacts::{self, read_json, read_questions, write_json, write_questions, Manifest};
use crate::pipeline::{CurationReport, Dataset, Pipeline, Stage, StageContext, StageError};

pub struct WorkDir(pub PathBuf);

impl WorkDir {
    pub fn stage_file(&self, name: &str) -> PathBuf {
        self.0.join("stages").join(name)
    }

    fn questions(&self, name: &str, stage: Stage) -> Result<Vec<QAInstance>, StageError> {
        read_questions(&self.stage_file(name))
            .with_context(|| format!("run the stage that writes stages/{name} first"))
            .stage(stage)
    }

    pub fn load_videos(&self, pipeline: &Pipeline, stage: Stage) -> Result<Vec<Video>, StageError> {
        let ids = artifacts::list_videos(&self.0).stage(stage)?;
        let cfg = pipeline.sim_config();
        ids.par_iter()
            .map(|id| artifacts::read_video(&self.0, id, &cfg))
            .collect::<anyhow::Result<Vec<_>>>()
            .stage(stage)
    }

    fn report<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T, StageError> {
        read_json(&self.stage_file(name)).stage(Stage::Export)
    }
}

pub fn simulate(p: &Pipeline, work: &WorkDir) -> Result<usize, StageError> {
    let (videos, report) = p.simulate()?;
    std::fs::create_dir_all(&work.0).stage(Stage::Io)?;
    std::fs::write(work.0.join("config.toml"), p.config.to_toml()).stage(Stage::Io)?;
    videos.par_iter().try_for_each(|v| artifacts::write_video_core(&work.0, v)).stage(Stage::Simulate)?;
    write_json(&work.stage_file("simulate.json"), &report).stage(Stage::Io)?;
    Ok(videos.len())
}

pub fn generate(p: &Pipeline, work: &WorkDir) -> Result<usize, StageError> {
    let videos = work.load_videos(p, Stage::Generate)?;
    let (qs, report) = p.generate(&videos);
    write_questions(&work.stage_file("generated.jsonl"), &qs).stage(Stage::Io)?;
    write_json(&work.stage_file("generate.json"), &report).stage(Stage::Io)?;
    Ok(qs.len())
}

pub fn validate(p: &Pipeline, work: &WorkDir) -> Result<usize, StageError> {
    let videos = work.load_videos(p, Stage::Validate)?;
    let qs = work.questions("generated.jsonl", Stage::Validate)?;
    let (qs, report) = p.validate(&videos, qs)?;
    write_questions(&work.stage_file("validated.jsonl"), &qs).stage(Stage::Io)?;
    write_json(&work.stage_file("validate.json"), &report).stage(Stage::Io)?;
    Ok(report.stable)
}

pub fn balance(p: &Pipeline, work: &WorkDir) -> Result<usize, StageError> {
    let qs = work.questions("validated.jsonl", Stage::Balance)?;
    let (kept, cap, report) = p.curate(qs);
    write_questions(&work.stage_file("balanced.jsonl"), &kept).stage(Stage::Io)?;
    write_json(&work.stage_file("cap.json"), &cap).stage(Stage::Io)?;
    write_json(&work.stage_file("balance.json"), &report).stage(Stage::Io)?;
    Ok(kept.len())
}

pub fn split(p: &Pipeline, work: &WorkDir) -> Result<usize, StageError> {
    let qs = work.questions("balanced.jsonl", Stage::Split)?;
    let qs = p.split(qs)?;
    write_questions(&work.stage_file("split.jsonl"), &qs).stage(Stage::Io)?;
    Ok(qs.len())
}

pub fn export(p: &Pipeline, work: &WorkDir, out: &Path, force: bool) -> Result<Manifest, StageError> {
    let videos = work.load_videos(p, Stage::Export)?;
    let instances = work.questions("split.jsonl", Stage::Export)?;
    let report = CurationReport {
        simulate: work.report("simulate.json")?,
        generate: work.report("generate.json")?,
        validate: work.report("validate.json")?,
        cap: work.report("cap.json")?,
        balance: work.report("balance.json")?,
        template_shares: max_template_share(&instances),
    };
    p.export(&Dataset { videos, instances, report }, out, force)
}
