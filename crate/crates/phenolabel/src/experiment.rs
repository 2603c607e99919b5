//! Experiment orchestration: config files, run manifests, and the artifact
//! set a full cross-validation run leaves behind.
//!
//! A run is driven by one JSON config. The master seed in that config
//! determines every seed used downstream (fold plan, per-strategy training,
//! per-run training), so a manifest that records the resolved config
//! reproduces the run bit-exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    corpus_to_jsonl, label_distribution, load_corpus, Corpus, CorpusError, CorpusFormat,
};
use crate::eval::{
    run_cross_validation, stratified_kfold, EvalError, StrategyOutcome, write_label_table,
    write_model_table,
};
use crate::label::Label;
use crate::model::EncoderConfig;
use crate::seeding::derive_seed_tagged;
use crate::synth::{generate_synthetic, SynthError, SyntheticSpec};
use crate::tokenizer::build_vocab;
use crate::train::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("manifest hash mismatch: recorded {recorded}, recomputed {recomputed}")]
    HashMismatch { recorded: String, recomputed: String },
}

/// Where the corpus for a run comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Load an existing corpus file (JSONL or CSV, by extension).
    CorpusPath(PathBuf),
    /// Generate the corpus from a synthetic spec file.
    SyntheticSpec(PathBuf),
}

/// One reproducible experiment: corpus source, architecture, per-strategy
/// training configs, fold plan shape, master seed, and output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub encoder: EncoderConfig,
    pub train: Vec<TrainConfig>,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "default_min_frequency")]
    pub vocab_min_frequency: usize,
}

fn default_min_frequency() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.train.is_empty() {
            return Err(ExperimentError::BadConfig(
                "no training strategies configured".to_string(),
            ));
        }
        let mut strategies: Vec<_> = self.train.iter().map(|t| t.strategy.name()).collect();
        strategies.sort_unstable();
        strategies.dedup();
        if strategies.len() != self.train.len() {
            return Err(ExperimentError::BadConfig(
                "each strategy may be configured at most once".to_string(),
            ));
        }
        if self.folds < 2 {
            return Err(ExperimentError::BadConfig(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.repeats == 0 {
            return Err(ExperimentError::BadConfig(
                "need at least 1 repeat".to_string(),
            ));
        }
        if self.vocab_min_frequency == 0 {
            return Err(ExperimentError::BadConfig(
                "vocab_min_frequency must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Loads a config file and resolves its relative paths against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.rebase(base);
        config.validate()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let rebase_path = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(p.as_path());
            }
        };
        match &mut self.corpus {
            CorpusSource::CorpusPath(p) | CorpusSource::SyntheticSpec(p) => rebase_path(p),
        }
        rebase_path(&mut self.out_dir);
    }

    /// Seed for the fold plan, derived from the master seed.
    pub fn plan_seed(&self) -> u64 {
        derive_seed_tagged(self.seed, "plan", &[])
    }

    /// Per-strategy training seeds, derived from the master seed by
    /// position in the train list.
    pub fn train_seeds(&self) -> Vec<u64> {
        (0..self.train.len())
            .map(|i| derive_seed_tagged(self.seed, "train", &[i as u64]))
            .collect()
    }

    /// Training configs with their seeds pinned to the derived values.
    pub fn resolved_train(&self) -> Vec<TrainConfig> {
        let seeds = self.train_seeds();
        self.train
            .iter()
            .zip(seeds)
            .map(|(cfg, seed)| {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                cfg
            })
            .collect()
    }

    /// Hash of the canonical JSON form, identifying the resolved config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex_digest(canonical.as_bytes())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Everything needed to reproduce a run: the resolved config, its hash,
/// every derived seed, and the identity of the corpus that was scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub plan_seed: u64,
    pub train_seeds: Vec<u64>,
    pub corpus_documents: usize,
    pub corpus_sha256: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let recomputed = manifest.config.hash();
        if recomputed != manifest.config_hash {
            return Err(ExperimentError::HashMismatch {
                recorded: manifest.config_hash,
                recomputed,
            });
        }
        Ok(manifest)
    }
}

/// Artifact file names inside the output directory.
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const MODEL_TABLE_FILE: &str = "model_metrics.csv";
pub const LABEL_TABLE_FILE: &str = "label_metrics.csv";
pub const LOSS_LOG_FILE: &str = "loss.csv";
pub const STATS_FILE: &str = "corpus_stats.json";

/// A completed run: the manifest and the per-strategy outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub outcomes: Vec<StrategyOutcome>,
}

/// Loads or generates the corpus named by the config.
pub fn load_experiment_corpus(config: &ExperimentConfig) -> Result<Corpus, ExperimentError> {
    match &config.corpus {
        CorpusSource::CorpusPath(path) => load_corpus(path, CorpusFormat::from_path(path))
            .map_err(|source| ExperimentError::Corpus {
                path: path.clone(),
                source,
            }),
        CorpusSource::SyntheticSpec(path) => {
            let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            let spec: SyntheticSpec = serde_json::from_str(&text)?;
            Ok(generate_synthetic(&spec)?)
        }
    }
}

/// Runs the full experiment and writes every artifact into `out_dir`:
/// the manifest, metrics JSON with all per-run records, the model-level
/// and label-level CSV tables, the per-epoch loss log, and the corpus
/// label distribution.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let corpus = load_experiment_corpus(config)?;

    let plan = stratified_kfold(&corpus, config.folds, config.repeats, config.plan_seed())?;
    let train_configs = config.resolved_train();
    let min_frequency = config.vocab_min_frequency;
    let outcomes = run_cross_validation(
        &corpus,
        |c| build_vocab(c, min_frequency),
        &config.encoder,
        &train_configs,
        &plan,
    )?;

    let manifest = Manifest {
        config_hash: config.hash(),
        master_seed: config.seed,
        plan_seed: config.plan_seed(),
        train_seeds: config.train_seeds(),
        corpus_documents: corpus.len(),
        corpus_sha256: hex_digest(corpus_to_jsonl(&corpus).as_bytes()),
        config: config.clone(),
    };

    write_artifacts(&config.out_dir, &manifest, &corpus, &outcomes)?;
    Ok(ExperimentOutput { manifest, outcomes })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_artifacts(
    out_dir: &Path,
    manifest: &Manifest,
    corpus: &Corpus,
    outcomes: &[StrategyOutcome],
) -> Result<(), ExperimentError> {
    fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    write_json(&out_dir.join(MANIFEST_FILE), manifest)?;
    write_json(&out_dir.join(METRICS_FILE), &outcomes)?;
    write_json(&out_dir.join(STATS_FILE), &label_distribution(corpus))?;

    let tabled: Vec<_> = outcomes.iter().map(|o| (o.strategy, &o.report)).collect();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: io::Error| ExperimentError::Io { path, source }
    };

    let model_path = out_dir.join(MODEL_TABLE_FILE);
    let file = fs::File::create(&model_path).map_err(io_err(&model_path))?;
    write_model_table(file, &tabled)?;

    let label_path = out_dir.join(LABEL_TABLE_FILE);
    let file = fs::File::create(&label_path).map_err(io_err(&label_path))?;
    write_label_table(file, &tabled)?;

    let loss_path = out_dir.join(LOSS_LOG_FILE);
    let file = fs::File::create(&loss_path).map_err(io_err(&loss_path))?;
    write_loss_log(file, outcomes).map_err(EvalError::from)?;
    Ok(())
}

/// One row per (strategy, run, epoch, head): the mean training loss.
fn write_loss_log<W: io::Write>(out: W, outcomes: &[StrategyOutcome]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "repeat", "fold", "epoch", "label", "loss"])?;
    for outcome in outcomes {
        for run in &outcome.training {
            for record in &run.stats.loss_history {
                w.write_record([
                    outcome.strategy.name().to_string(),
                    run.repeat.to_string(),
                    run.fold.to_string(),
                    record.epoch.to_string(),
                    record.label.map_or("ALL", Label::name).to_string(),
                    format!("{:.6}", record.loss),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
