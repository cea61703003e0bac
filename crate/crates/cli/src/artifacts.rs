//! On-disk dataset layout, JSON-lines helpers and the manifest.
//!
//! ```text
//! <out>/
//!   manifest.json              digests of every other file
//!   config.toml                effective configuration
//!   questions.jsonl            every kept question, both split tags
//!   splits/{easy,hard}/{train,val,test}.jsonl
//!   descriptions.jsonl         oracle narration per video
//!   reports/{curation,stats,baselines}.json
//!   videos/<scene_id>/
//!     scene.json  trace.jsonl  graph.json  variations.json  description.json
//!     variations/<removed_id>.jsonl   (export.variation_traces)
//!     frames/frame_NNNN.png           (export.render)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use causim_core::questions::QAInstance;
use causim_physics::{SceneSpec, SimConfig, SimulationTrace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use causim_core::video::Video;

pub const FORMAT_VERSION: &str = "1";

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid", path.display()))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a T>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let f = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn write_questions(path: &Path, instances: &[QAInstance]) -> anyhow::Result<()> {
    write_jsonl(path, instances)
}

pub fn read_questions(path: &Path) -> anyhow::Result<Vec<QAInstance>> {
    read_jsonl(path)
}

pub fn video_dir(root: &Path, scene_id: &str) -> PathBuf {
    root.join("videos").join(scene_id)
}

/// Writes scene, trace and event graph of one video.
pub fn write_video_core(root: &Path, video: &Video) -> anyhow::Result<()> {
    let dir = video_dir(root, video.scene_id());
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("scene.json"), &video.scene)?;
    let f = fs::File::create(dir.join("trace.jsonl"))?;
    let mut w = BufWriter::new(f);
    video.trace.write_jsonl(&mut w)?;
    w.flush()?;
    write_json(&dir.join("graph.json"), &video.graph)?;
    Ok(())
}

/// Scene ids of every video under `root/videos`, sorted.
pub fn list_videos(root: &Path) -> anyhow::Result<Vec<String>> {
    let dir = root.join("videos");
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let entry = entry?;
        if entry.path().join("scene.json").is_file() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

/// Reloads a stored video; derived data is recomputed from the trace.
pub fn read_video(root: &Path, scene_id: &str, config: &SimConfig) -> anyhow::Result<Video> {
    let dir = video_dir(root, scene_id);
    let scene: SceneSpec = read_json(&dir.join("scene.json"))?;
    let f = fs::File::open(dir.join("trace.jsonl")).with_context(|| format!("no trace for {scene_id}"))?;
    let trace = SimulationTrace::read_jsonl(BufReader::new(f)).with_context(|| format!("bad trace for {scene_id}"))?;
    Ok(Video::from_trace(scene, trace, config))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub engine_version: String,
    pub catalog_version: String,
    pub template_version: String,
    pub seed: u64,
    pub videos: usize,
    pub questions: usize,
    /// split mode → split → questions.
    pub split_counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub category_counts: BTreeMap<String, usize>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<(u64, String)> {
    let bytes = fs::read(path)?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Digests of every file under `root` except the manifest, sorted by path.
pub fn digest_tree(root: &Path) -> anyhow::Result<Vec<FileEntry>> {
    let mut paths = Vec::new();
    walk(root, &mut paths)?;
    let mut entries = Vec::with_capacity(paths.len());
    for p in paths {
        let rel =
            p.strip_prefix(root)?.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if rel == "manifest.json" {
            continue;
        }
        let (bytes, sha256) = sha256_file(&p)?;
        entries.push(FileEntry { path: rel, bytes, sha256 });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

/// Files whose digest no longer matches the manifest.
pub fn verify_manifest(root: &Path) -> anyhow::Result<Vec<String>> {
    let m: Manifest = read_json(&root.join("manifest.json"))?;
    let actual: BTreeMap<String, FileEntry> = digest_tree(root)?.into_iter().map(|e| (e.path.clone(), e)).collect();
    let mut bad = Vec::new();
    for e in &m.files {
        if actual.get(&e.path) != Some(e) {
            bad.push(e.path.clone());
        }
    }
    for p in actual.keys() {
        if !m.files.iter().any(|e| &e.path == p) {
            bad.push(p.clone());
        }
    }
    Ok(bad)
}
