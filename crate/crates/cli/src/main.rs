//! `replaycm`: drives the replay countermeasure pipeline one stage at a time.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use replay_cm::pipeline::{EvalInputs, ExperimentConfig, Layout, Pipeline};
use replay_cm::simcorpus::Split;
use replay_cm::{Error, Result};

fn override_help() -> String {
    ExperimentConfig::default().override_help()
}

#[derive(Debug, Parser)]
#[command(name = "replaycm", version, about = "Replay-attack countermeasure pipeline", after_help = override_help())]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file (TOML with sections); defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Work directory holding every artifact.
    #[arg(long, short, default_value = "work")]
    work: PathBuf,

    /// Override one config value, e.g. `--set cm.noise_std=0`; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// Shorthand for `--set features.kind=<KIND>`.
    #[arg(long, value_name = "KIND")]
    feature: Option<String>,

    /// Countermeasure artifact directory name (default: derived system name).
    #[arg(long)]
    name: Option<String>,

    /// Accept artifacts produced under a different config hash.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct Seeded {
    #[command(flatten)]
    common: Common,

    /// Seed for every random draw of this stage.
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    common: Common,

    /// Corpus split.
    #[arg(long, default_value = "dev")]
    split: Split,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,

    #[arg(long, default_value = "dev")]
    split: Split,

    /// Score file (default: the system's score file for the split).
    #[arg(long)]
    scores: Option<PathBuf>,

    /// bonafide/spoof key file (default: the corpus key).
    #[arg(long)]
    keys: Option<PathBuf>,

    /// Simulated ASV score file (default: the corpus ASV trials).
    #[arg(long)]
    asv_scores: Option<PathBuf>,

    /// target/nontarget/spoof ASV key file.
    #[arg(long)]
    asv_keys: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the synthetic corpus, manifest, keys and ASV trials.
    #[command(after_help = override_help())]
    Simulate(Seeded),
    /// Extract down-sampled signal features for every utterance.
    #[command(after_help = override_help())]
    Extract(Common),
    /// Train the x-vector TDNN on joint env+attack classes.
    #[command(name = "train-xvec", after_help = override_help())]
    TrainXvec(Seeded),
    /// Extract x-vectors for every utterance.
    #[command(name = "extract-xvec", after_help = override_help())]
    ExtractXvec(Common),
    /// Fit the LDA reduction on train-split x-vectors.
    #[command(name = "fit-lda", after_help = override_help())]
    FitLda(Common),
    /// Train the CNN countermeasure.
    #[command(name = "train-cm", after_help = override_help())]
    TrainCm(Seeded),
    /// Score a split with the trained countermeasure.
    #[command(after_help = override_help())]
    Score(SplitArgs),
    /// Report EER and min-tDCF of a score file.
    #[command(after_help = override_help())]
    Eval(EvalArgs),
    /// Confusion grids and env+attack verification EER.
    #[command(after_help = override_help())]
    Analyze(Seeded),
}

fn pipeline(c: &Common) -> Result<Pipeline> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(kind) = &c.feature {
        cfg.set(&format!("features.kind=\"{kind}\""))?;
    }
    for o in &c.overrides {
        cfg.set(o)?;
    }
    let mut p = Pipeline::new(cfg, Layout::new(&c.work))?;
    p.force = c.force;
    if let Some(name) = &c.name {
        p.system = name.clone();
    }
    Ok(p)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let m = pipeline(&a.common)?.simulate(a.seed)?;
            println!("simulated {} utterances", m.records.len());
        }
        Command::Extract(c) => {
            let a = pipeline(&c)?.extract()?;
            println!(
                "extracted {} x {} {} features for {} utterances",
                a.rows,
                a.cols,
                a.kind,
                a.records.len()
            );
        }
        Command::TrainXvec(a) => {
            let out = pipeline(&a.common)?.train_xvector(a.seed)?;
            println!(
                "validation accuracy {:.4} after {} epochs",
                out.val_accuracy,
                out.report.history.len()
            );
        }
        Command::ExtractXvec(c) => {
            let a = pipeline(&c)?.extract_xvectors()?;
            println!("extracted {} x-vectors of dimension {}", a.records.len(), a.rows);
        }
        Command::FitLda(c) => {
            let lda = pipeline(&c)?.fit_lda()?;
            println!(
                "LDA {} -> {} over {} classes",
                lda.in_dim(),
                lda.out_dim(),
                lda.class_means.len()
            );
        }
        Command::TrainCm(a) => {
            let p = pipeline(&a.common)?;
            let r = p.train_cm(a.seed)?;
            println!(
                "{}: best validation loss {:.6} at epoch {}",
                p.system, r.best_val_loss, r.best_epoch
            );
        }
        Command::Score(a) => {
            let p = pipeline(&a.common)?;
            let s = p.score(a.split)?;
            println!("scored {} {} utterances with {}", s.entries.len(), a.split, p.system);
        }
        Command::Eval(a) => {
            let p = pipeline(&a.common)?;
            let defaults = p.eval_inputs(a.split);
            let custom = a.scores.is_some() || a.keys.is_some() || a.asv_scores.is_some() || a.asv_keys.is_some();
            let summary = if custom {
                p.evaluate(&EvalInputs {
                    scores: a.scores.unwrap_or(defaults.scores),
                    keys: a.keys.unwrap_or(defaults.keys),
                    asv_scores: a.asv_scores.unwrap_or(defaults.asv_scores),
                    asv_keys: a.asv_keys.unwrap_or(defaults.asv_keys),
                })?
            } else {
                p.eval(a.split)?
            };
            print!("{}", summary.to_text());
        }
        Command::Analyze(a) => {
            let r = pipeline(&a.common)?.analyze(a.seed)?;
            println!("attack confusion (rows: dev group means, columns: train group means)");
            print!("{}", r.attack.to_text());
            println!("environment confusion");
            print!("{}", r.environment.to_text());
            println!(
                "verification EER {:.2}% over {} trials",
                100.0 * r.verification.eer,
                r.verification.n_target + r.verification.n_nontarget
            );
            println!(
                "same-quality similarity {:.4}, same-distance similarity {:.4}",
                r.quality.same_quality, r.quality.same_distance
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
