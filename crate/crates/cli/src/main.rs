mod serve;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dubcorpus_core::corpus::{load_manifest, PairManifestEntry, MANIFEST_FILE};
use dubcorpus_core::eval::{self, DurationFilter, EvalError, RatingStore};
use dubcorpus_core::pipeline::{Pipeline, PipelineError, RunConfig, Stage, StageStatus};
use dubcorpus_core::synth::{self, SynthSpec};
use dubcorpus_core::SegmentLabel;

pub const EVAL_DIR: &str = "eval";
pub const SAMPLE_FILE: &str = "eval/sample.txt";
pub const RATINGS_FILE: &str = "eval/ratings.jsonl";

#[derive(Parser)]
#[command(
    name = "dubcorpus",
    version,
    about = "Build a parallel speech corpus from dubbed video pairs"
)]
struct Cli {
    /// Directory holding stage outputs and the run ledger.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Run configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for stage-internal parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_kv)]
    set: Vec<(String, String)>,
    #[command(subcommand)]
    command: Command,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("'{s}' is not KEY=VALUE"))?;
    Ok((k.trim().to_owned(), v.trim().to_owned()))
}

#[derive(Args)]
struct StageArgs {
    /// Rerun even when the ledger says the stage is up to date.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Remove frames present in only one track and write removal masks.
    Frames(StageArgs),
    /// Compact audio and produce labelled speech segments.
    Vad(StageArgs),
    /// Transcribe speech segments and drop unrecognized ones.
    Transcribe(StageArgs),
    /// Translate one track into the other track's language.
    Translate(StageArgs),
    /// Write the candidate similarity matrix.
    Similarity(StageArgs),
    /// Pair segments across tracks.
    Match {
        #[command(flatten)]
        stage: StageArgs,
        /// Maximum start difference in seconds.
        #[arg(long)]
        max_start_diff: Option<f64>,
        /// Maximum duration difference in seconds.
        #[arg(long)]
        max_dur_diff: Option<f64>,
        /// Minimum similarity score, exclusive.
        #[arg(long)]
        min_similarity: Option<f64>,
    },
    /// Cut paired audio and write the corpus manifest.
    Export(StageArgs),
    /// Summarize corpus yield.
    Stats(StageArgs),
    /// Run every stage in order.
    Run(StageArgs),
    /// Evaluation set management.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve the rating API over the exported corpus.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory of static files mounted at `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Print the agreement report from the rating log.
    Report {
        #[arg(long)]
        json: bool,
    },
    /// Print Cohen's kappa for annotator pairs.
    Kappa {
        /// Restrict to one annotator pair.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        annotators: Option<Vec<String>>,
    },
    /// Generate a synthetic dubbed pair with known ground truth.
    Synth {
        /// Target directory.
        dir: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Draw a seeded sample of exported pairs for rating.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Minimum duration of both sides, in seconds.
        #[arg(long)]
        min_dur: Option<f64>,
        /// Maximum duration of both sides, in seconds.
        #[arg(long)]
        max_dur: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 usage, 3 missing artifact, 4 validation, 1 anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(p) = err.downcast_ref::<PipelineError>() {
        return p.exit_code() as u8;
    }
    for cause in err.chain() {
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            return if io.kind() == std::io::ErrorKind::NotFound {
                3
            } else {
                1
            };
        }
    }
    4
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut overrides = cli.set.clone();
    let stage = |s: Stage, a: &StageArgs| (vec![s], a.force);
    let (stages, force) = match &cli.command {
        Command::Frames(a) => stage(Stage::Frames, a),
        Command::Vad(a) => stage(Stage::Vad, a),
        Command::Transcribe(a) => stage(Stage::Transcribe, a),
        Command::Translate(a) => stage(Stage::Translate, a),
        Command::Similarity(a) => stage(Stage::Similarity, a),
        Command::Match {
            stage: a,
            max_start_diff,
            max_dur_diff,
            min_similarity,
        } => {
            let flags = [
                ("match.max_start_diff_s", max_start_diff),
                ("match.max_dur_diff_s", max_dur_diff),
                ("match.min_similarity", min_similarity),
            ];
            for (key, v) in flags {
                if let Some(v) = v {
                    overrides.push((key.to_owned(), v.to_string()));
                }
            }
            stage(Stage::Match, a)
        }
        Command::Export(a) => stage(Stage::Export, a),
        Command::Stats(a) => stage(Stage::Stats, a),
        Command::Run(a) => (Stage::ALL.to_vec(), a.force),
        Command::Eval(EvalCommand::Sample {
            n,
            seed,
            min_dur,
            max_dur,
        }) => return sample(&cli.out_dir, *n, *seed, *min_dur, *max_dur),
        Command::Serve { addr, ui_dir } => {
            return serve::run(&cli.out_dir, addr, ui_dir.as_deref())
        }
        Command::Report { json } => return report(&cli.out_dir, *json),
        Command::Kappa { annotators } => return kappa(&cli.out_dir, annotators.as_deref()),
        Command::Synth { dir, seed } => {
            let truth = synth::generate(&SynthSpec::standard(*seed), dir)?;
            println!(
                "wrote {} planted pairs, {} decoys, {} unrecognized segments to {}",
                truth.pairs.len(),
                truth.decoys.len(),
                truth.unrecognized.len(),
                dir.display()
            );
            println!(
                "run with: dubcorpus --config {} run",
                dir.join(synth::RUN_CONFIG).display()
            );
            return Ok(());
        }
    };
    let run = RunConfig::load(cli.config.as_deref(), &overrides).map_err(PipelineError::from)?;
    let mut pipeline = Pipeline::new(&cli.out_dir, run)?;
    for s in stages {
        match pipeline.run_stage(s, force)? {
            StageStatus::Ran {
                elapsed_ms,
                summary,
            } => {
                println!("[{s}] done in {:.2} s", elapsed_ms as f64 / 1000.0);
                print!("{summary}");
            }
            StageStatus::UpToDate { summary } => {
                println!("[{s}] up to date");
                print!("{summary}");
            }
        }
    }
    Ok(())
}

pub fn manifest(out_dir: &Path) -> Result<Vec<PairManifestEntry>> {
    let path = out_dir.join(Stage::Export.name()).join(MANIFEST_FILE);
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            path,
            run_first: Stage::Export,
        }
        .into());
    }
    Ok(load_manifest(&path)?)
}

pub fn labels(entries: &[PairManifestEntry]) -> HashMap<String, SegmentLabel> {
    entries
        .iter()
        .map(|e| (e.pair_id.clone(), e.left.label))
        .collect()
}

fn sample(
    out_dir: &Path,
    n: usize,
    seed: u64,
    min_dur: Option<f64>,
    max_dur: Option<f64>,
) -> Result<()> {
    let entries = manifest(out_dir)?;
    let to_ms = |s: f64| (s * 1000.0).round() as u64;
    let filter = (min_dur.is_some() || max_dur.is_some()).then(|| DurationFilter {
        min_ms: min_dur.map_or(0, to_ms),
        max_ms: max_dur.map_or(u64::MAX, to_ms),
    });
    let ids = eval::sample_pairs(&entries, n, seed, filter)?;
    let path = out_dir.join(SAMPLE_FILE);
    std::fs::create_dir_all(out_dir.join(EVAL_DIR))?;
    let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "sampled {} of {} pairs into {}",
        ids.len(),
        entries.len(),
        path.display()
    );
    Ok(())
}

pub fn open_store(out_dir: &Path, entries: &[PairManifestEntry]) -> Result<RatingStore> {
    std::fs::create_dir_all(out_dir.join(EVAL_DIR))?;
    Ok(RatingStore::open(
        &out_dir.join(RATINGS_FILE),
        entries.iter().map(|e| e.pair_id.clone()),
    )?)
}

fn report(out_dir: &Path, json: bool) -> Result<()> {
    let entries = manifest(out_dir)?;
    let ratings = eval::read_ratings(&out_dir.join(RATINGS_FILE))?;
    if ratings.is_empty() {
        bail!(
            "no ratings recorded in {}",
            out_dir.join(RATINGS_FILE).display()
        );
    }
    let report = eval::agreement_report(&ratings, &labels(&entries));
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn kappa(out_dir: &Path, annotators: Option<&[String]>) -> Result<()> {
    let ratings = eval::read_ratings(&out_dir.join(RATINGS_FILE))?;
    let mut by: BTreeMap<&str, BTreeMap<String, eval::Score>> = BTreeMap::new();
    for r in &ratings {
        by.entry(&r.annotator)
            .or_default()
            .insert(r.pair_id.clone(), r.score);
    }
    let names: Vec<&str> = by.keys().copied().collect();
    let pairs: Vec<(&str, &str)> = match annotators {
        Some([a, b]) => vec![(a.as_str(), b.as_str())],
        _ => names
            .iter()
            .enumerate()
            .flat_map(|(i, a)| names[i + 1..].iter().map(move |b| (*a, *b)))
            .collect(),
    };
    if pairs.is_empty() {
        bail!("kappa needs ratings from at least two annotators");
    }
    let empty = BTreeMap::new();
    for (a, b) in pairs {
        let ra = by.get(a).unwrap_or(&empty);
        let rb = by.get(b).unwrap_or(&empty);
        match eval::cohen_kappa(ra, rb) {
            Ok(k) => println!("{a}\t{b}\t{k:.6}"),
            Err(e @ (EvalError::Disjoint | EvalError::TooFewItems(_))) => {
                println!("{a}\t{b}\t-\t{e}")
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
