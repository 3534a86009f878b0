//! Run directories, manifests and checkpoint files.
//!
//! Every command writes into a fresh directory named
//! `<UTC timestamp>-<command>[-<label>]`; existing directories are never reused.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use labelcraft::model::{
    load_checkpoint, save_checkpoint, FeatureEncoder, LabelingModel, RecommenderModel, RecommenderSpec,
};
use labelcraft::trainer::HistoryRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECOMMENDER_FILE: &str = "recommender.ckpt";
pub const LABELER_FILE: &str = "labeler.ckpt";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub label: String,
    pub seed: u64,
    /// SHA-256 of the resolved `config.toml` written next to the manifest.
    pub config_sha256: String,
    pub version: String,
    pub created_utc: String,
    pub files: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An output directory being filled by one command.
#[derive(Debug)]
pub struct RunDir {
    pub path: PathBuf,
    command: String,
    label: String,
    files: Vec<String>,
}

impl RunDir {
    /// Creates a new directory under `root`; a numeric suffix avoids collisions.
    pub fn create(root: &Path, command: &str, label: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
        let base = if label.is_empty() {
            format!("{stamp}-{command}")
        } else {
            format!("{stamp}-{command}-{label}")
        };
        for n in 0..1000 {
            let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
            let path = root.join(name);
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(RunDir {
                        path,
                        command: command.into(),
                        label: label.into(),
                        files: Vec::new(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e).with_context(|| format!("cannot create {}", path.display())),
            }
        }
        bail!("could not find a free run directory name under {}", root.display())
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.into());
        }
        self.path.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let p = self.file(name);
        fs::write(&p, contents).with_context(|| format!("cannot write {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn write_history(&mut self, name: &str, history: &[HistoryRecord]) -> anyhow::Result<()> {
        let f = fs::File::create(self.file(name))?;
        HistoryRecord::write_jsonl(history, std::io::BufWriter::new(f))?;
        Ok(())
    }

    /// Writes the resolved config and the manifest; call last.
    pub fn finish(mut self, cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
        let text = cfg.to_toml_string()?;
        self.write(CONFIG_FILE, &text)?;
        let manifest = Manifest {
            command: self.command.clone(),
            label: self.label.clone(),
            seed: cfg.seed,
            config_sha256: sha256_hex(text.as_bytes()),
            version: env!("CARGO_PKG_VERSION").into(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            files: self.files.clone(),
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(self.path)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecommenderMeta {
    spec: RecommenderSpec,
    encoder: FeatureEncoder,
}

pub fn save_recommender(path: &Path, rec: &RecommenderModel, encoder: &FeatureEncoder) -> anyhow::Result<()> {
    let meta = serde_json::to_value(RecommenderMeta {
        spec: rec.spec.clone(),
        encoder: encoder.clone(),
    })?;
    save_checkpoint(path, &rec.params, meta)?;
    Ok(())
}

pub fn load_recommender(path: &Path) -> anyhow::Result<(RecommenderModel, FeatureEncoder)> {
    let (params, meta) = load_checkpoint(path).with_context(|| format!("cannot read {}", path.display()))?;
    let meta: RecommenderMeta = serde_json::from_value(meta).context("checkpoint metadata is not a recommender")?;
    let rec = RecommenderModel::zeros(meta.spec).with_params(params)?;
    Ok((rec, meta.encoder))
}

pub fn save_labeler(path: &Path, labeler: &LabelingModel) -> anyhow::Result<()> {
    let meta = serde_json::json!({ "spec": labeler.spec, "scalers": labeler.scalers });
    save_checkpoint(path, &labeler.params, meta)?;
    Ok(())
}

/// Most recent directory under `root` holding a recommender checkpoint.
pub fn latest_train_run(root: &Path) -> anyhow::Result<PathBuf> {
    let mut runs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("cannot list {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RECOMMENDER_FILE).is_file())
        .collect();
    runs.sort();
    runs.pop()
        .ok_or_else(|| anyhow::anyhow!("no trained run found under {}", root.display()))
}
