//! Command-line front end: corpus generation, corpus statistics, full
//! cross-validation experiments, and gradient verification.
//!
//! Every command exits 0 on success; failures print one `error: ...` line
//! on stderr and exit nonzero.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phenolabel::corpus::{
    label_distribution, load_corpus, write_corpus, Corpus, CorpusFormat, Document,
    LabelDistribution,
};
use phenolabel::experiment::{run_experiment, ExperimentConfig, Manifest};
use phenolabel::label::{Label, LabelSet};
use phenolabel::model::{
    init_params, Classifier, EncoderConfig, HeadParams, ModelBundle, Strategy,
};
use phenolabel::synth::{generate_synthetic, SyntheticSpec};
use phenolabel::tokenizer::{build_vocab, tokenize, TokenSequence};
use phenolabel::train::{grad_check, grad_check_scaled, GradCheckReport};

#[derive(Parser)]
#[command(
    name = "phenolabel",
    version,
    about = "Multi-label phenotyping toolkit: synthetic corpora, compact encoders, cross-validated evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a spec file.
    Gen {
        /// Synthetic spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Output corpus path; .jsonl or .csv picks the format.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's generation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the label distribution of a corpus.
    Stats {
        /// Corpus file (.jsonl or .csv).
        #[arg(long)]
        corpus: PathBuf,
        /// Emit the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run a cross-validation experiment from a config or manifest file.
    Run {
        /// Experiment config JSON, or a manifest from a previous run.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cap worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Restrict the run to one strategy.
        #[arg(long, value_enum, default_value_t = StrategyChoice::Both)]
        strategy: StrategyChoice,
    },
    /// Verify analytic gradients against central differences.
    Gradcheck {
        /// Finite-difference step size.
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        /// Coordinates sampled per parameter tensor.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Scale analytic gradients to prove the check detects errors.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyChoice {
    #[value(name = "binary_relevance")]
    BinaryRelevance,
    #[value(name = "multi_label")]
    MultiLabel,
    #[value(name = "both")]
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { spec, out, seed } => cmd_gen(&spec, &out, seed),
        Command::Stats { corpus, json } => cmd_stats(&corpus, json),
        Command::Run {
            config,
            out,
            seed,
            jobs,
            strategy,
        } => cmd_run(&config, out, seed, jobs, strategy),
        Command::Gradcheck {
            step,
            samples,
            corrupt,
        } => cmd_gradcheck(step, samples, corrupt),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {}", message.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("{what} {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{what} {}: {e}", path.display()))
}

fn cmd_gen(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), String> {
    let mut spec: SyntheticSpec = read_json(spec_path, "spec")?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let corpus = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    write_corpus(&corpus, out, CorpusFormat::from_path(out))
        .map_err(|e| format!("{}: {e}", out.display()))?;
    println!("wrote {} documents to {}", corpus.len(), out.display());
    Ok(())
}

fn cmd_stats(corpus_path: &Path, json: bool) -> Result<(), String> {
    let corpus = load_corpus(corpus_path, CorpusFormat::from_path(corpus_path))
        .map_err(|e| format!("{}: {e}", corpus_path.display()))?;
    let dist = label_distribution(&corpus);
    if json {
        let text = serde_json::to_string_pretty(&dist).map_err(|e| e.to_string())?;
        println!("{text}");
    } else {
        print!("{}", render_stats(&dist));
    }
    Ok(())
}

fn render_stats(dist: &LabelDistribution) -> String {
    let mut out = String::new();
    let mut row = |name: &str, value: usize| {
        out.push_str(&format!("{name:<16}{value}\n"));
    };
    row("documents", dist.corpus_size);
    row("label instances", dist.total_label_instances);
    for label in Label::ALL {
        row(label.name(), dist.per_label_counts[label.index()]);
    }
    row("label-free", dist.cardinality_histogram[0]);
    for k in 1..=Label::COUNT {
        row(&format!("{k}-label"), dist.cardinality_histogram[k]);
    }
    for label in Label::ALL {
        row(
            &format!("single {}", label.name()),
            dist.single_label_breakdown[label.index()],
        );
    }
    for (idx, (a, b)) in LabelDistribution::PAIRS.iter().enumerate() {
        row(
            &format!("{}+{}", a.name(), b.name()),
            dist.pair_cooccurrence[idx],
        );
    }
    out
}

fn cmd_run(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: Option<usize>,
    strategy: StrategyChoice,
) -> Result<(), String> {
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err("--jobs must be at least 1".to_string());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| format!("worker pool: {e}"))?;
    }

    let mut config = load_run_config(config_path)?;
    if let Some(out) = out {
        config.out_dir = out;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    match strategy {
        StrategyChoice::Both => {}
        StrategyChoice::BinaryRelevance => retain_strategy(&mut config, Strategy::BinaryRelevance)?,
        StrategyChoice::MultiLabel => retain_strategy(&mut config, Strategy::MultiLabel)?,
    }

    let output = run_experiment(&config).map_err(|e| e.to_string())?;
    for outcome in &output.outcomes {
        let f1 = outcome.report.micro_f1;
        let acc = outcome.report.overall_accuracy;
        println!(
            "{}: micro-F1 {:.4} ± {:.4}, overall accuracy {:.4} ± {:.4} over {} runs",
            outcome.strategy,
            f1.mean,
            f1.std,
            acc.mean,
            acc.std,
            outcome.report.runs.len()
        );
    }
    println!("artifacts: {}", config.out_dir.display());
    Ok(())
}

/// A run input is either an experiment config or a manifest from a prior
/// run; manifests carry the resolved config under a recorded hash.
fn load_run_config(path: &Path) -> Result<ExperimentConfig, String> {
    let probe: serde_json::Value = read_json(path, "config")?;
    if probe.get("config_hash").is_some() {
        let manifest = Manifest::load(path).map_err(|e| e.to_string())?;
        return Ok(manifest.config);
    }
    ExperimentConfig::load(path).map_err(|e| e.to_string())
}

fn retain_strategy(config: &mut ExperimentConfig, wanted: Strategy) -> Result<(), String> {
    config.train.retain(|t| t.strategy == wanted);
    if config.train.is_empty() {
        return Err(format!("config has no train entry for strategy {wanted}"));
    }
    Ok(())
}

/// Fixed probe texts with targets covering positive, negative, and mixed
/// label patterns.
const PROBE_DOCS: [(&str, [f64; Label::COUNT]); 3] = [
    (
        "reports persistent suicidal ideation with a specific plan today",
        [1.0, 0.0, 0.0, 0.0],
    ),
    (
        "made a suicide attempt by overdose and cuts her forearms weekly",
        [0.0, 1.0, 0.0, 1.0],
    ),
    (
        "routine follow up visit with no safety concerns raised",
        [0.0, 0.0, 0.0, 0.0],
    ),
];

const PROBE_HIDDEN: usize = 8;
const FULL_TOLERANCE: f64 = 1e-4;
const HEAD_ONLY_TOLERANCE: f64 = 1e-6;

type ProbeBatch = Vec<(TokenSequence, [f64; Label::COUNT])>;

fn probe_bundle(num_layers: usize) -> Result<(ModelBundle, ProbeBatch), String> {
    let docs: Vec<Document> = PROBE_DOCS
        .iter()
        .enumerate()
        .map(|(i, (text, _))| Document {
            id: format!("probe{i}"),
            text: text.to_string(),
            gold: LabelSet::EMPTY,
        })
        .collect();
    let corpus = Corpus::new(docs).map_err(|e| e.to_string())?;
    let vocab = build_vocab(&corpus, 1);
    let config = EncoderConfig {
        num_layers,
        hidden: PROBE_HIDDEN,
        heads: 2,
        ff: 16,
        max_positions: 16,
        vocab: vocab.size(),
        seed: 401,
    };
    let encoder = init_params(&config).map_err(|e| e.to_string())?;
    let head = HeadParams::init(Label::COUNT, config.hidden, config.seed);
    let bundle = ModelBundle::MultiLabel {
        classifier: Classifier { encoder, head },
    };
    let batch = PROBE_DOCS
        .iter()
        .map(|(text, targets)| {
            (
                tokenize(text, &vocab, config.max_positions, false),
                *targets,
            )
        })
        .collect();
    Ok((bundle, batch))
}

fn cmd_gradcheck(step: f64, samples: usize, corrupt: bool) -> Result<(), String> {
    if !(step.is_finite() && step > 0.0) {
        return Err(format!("--step must be a positive number, got {step}"));
    }
    if samples == 0 {
        return Err("--samples must be at least 1".to_string());
    }
    let check = |bundle: &ModelBundle,
                 batch: &[(TokenSequence, [f64; Label::COUNT])]|
     -> Result<GradCheckReport, String> {
        if corrupt {
            grad_check_scaled(bundle, batch, step, samples, 1.1)
        } else {
            grad_check(bundle, batch, step, samples)
        }
        .map_err(|e| e.to_string())
    };

    let mut failures = Vec::new();
    for (name, layers, tolerance) in [
        ("full encoder", 1, FULL_TOLERANCE),
        ("head only", 0, HEAD_ONLY_TOLERANCE),
    ] {
        let (bundle, batch) = probe_bundle(layers)?;
        let report = check(&bundle, &batch)?;
        let pass = report.max_rel_error < tolerance;
        println!(
            "{name} ({layers} layer, hidden {PROBE_HIDDEN}): max relative error {:.3e} over {} coordinates: {}",
            report.max_rel_error,
            report.coordinates_checked,
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failures.push(format!(
                "{name} max relative error {:.3e} exceeds {tolerance:.0e}",
                report.max_rel_error
            ));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(format!("gradient check failed: {}", failures.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_rendering_names_every_count() {
        let docs = vec![Document {
            id: "a".to_string(),
            text: "x".to_string(),
            gold: LabelSet::from_labels(&[Label::SI, Label::SA]),
        }];
        let dist = label_distribution(&Corpus::new(docs).unwrap());
        let text = render_stats(&dist);
        assert!(text.contains("documents       1"));
        assert!(text.contains("SI+SA           1"));
        assert!(text.contains("2-label         1"));
    }
}
