//! The `semlink` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::autoencoder::{load_model, save_model, Scenario, Scheme};
use crate::config;
use crate::error::{Error, Result};
use crate::evaluator::{
    compare, constellation_export, evaluate, write_constellation_csv, EvalChannel, Summary,
};
use crate::exec::{self, Execution};
use crate::trainer::train;

#[derive(Debug, Parser)]
#[command(name = "semlink", version, about = "Train and evaluate semantic path-loss autoencoders")]
pub struct Cli {
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run single-threaded. Results are identical either way.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one scheme and write the model file and its training log.
    Train(TrainArgs),
    /// Evaluate a model file over the semantic path-loss channel.
    Eval(EvalArgs),
    /// Export a model's constellation.
    Constellation(ConstellationArgs),
    /// Train and evaluate all three schemes on one scenario.
    Sweep(SweepArgs),
    /// Tabulate eval summaries against the baseline.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario config file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base preset: scenario1, scenario2, scenario3 or desk.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// baseline, spl or weighted-spl (default: the scenario's).
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Training seed (default: the scenario's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long, default_value = "model.toml")]
    pub out: PathBuf,
    /// Training log CSV (default: `<out>.log.csv`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Evaluate under this scenario instead of the one stored in the model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trials per message (default: the scenario's).
    #[arg(long)]
    pub trials: Option<u32>,
    /// Evaluation seed (default: the scenario's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Eval CSV to write.
    #[arg(long, default_value = "eval.csv")]
    pub out: PathBuf,
    /// Summary file (default: `<out>.summary.toml`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstellationArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Constellation CSV to write.
    #[arg(long, default_value = "constellation.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Seed for training and evaluation (default: the scenario's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per message (default: the scenario's).
    #[arg(long)]
    pub trials: Option<u32>,
    /// Output directory.
    #[arg(long, default_value = "sweep")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Summary files written by `eval` or `sweep`.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Comparison CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance written next to every CSV artifact as `<file>.meta.toml`.
#[derive(Debug, Serialize)]
struct Meta<'a> {
    artifact: &'a str,
    scheme: Scheme,
    scenario_hash: String,
    #[serde(serialize_with = "crate::rng::seed_serde::serialize")]
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u32>,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_meta(path: &Path, meta: &Meta<'_>) -> Result<()> {
    let text = toml::to_string(meta).expect("metadata serializes");
    fs::write(with_suffix(path, ".meta.toml"), text)?;
    Ok(())
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario> {
    let text = match &args.config {
        Some(path) => Some(
            fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?,
        ),
        None => None,
    };
    config::resolve(args.preset.as_deref(), text.as_deref(), std::env::vars()).map_err(|e| {
        match (&args.config, e) {
            (Some(p), Error::Config(msg)) => Error::Config(format!("{}: {msg}", p.display())),
            (_, e) => e,
        }
    })
}

fn echo_config(out: &mut dyn Write, scenario: &Scenario) -> Result<()> {
    writeln!(out, "# effective config (scenario hash {})", scenario.hash())?;
    write!(out, "{}", config::effective_config(scenario))?;
    writeln!(out)?;
    Ok(())
}

fn run_train(args: TrainArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(s) = args.scheme {
        scenario.scheme = s;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    echo_config(out, &scenario)?;
    let (params, log) = train(&scenario, &scenario.schedule, scenario.seed, exec)?;
    save_model(&args.out, &params, &scenario)?;
    let log_path = args.log.unwrap_or_else(|| with_suffix(&args.out, ".log.csv"));
    log.save_csv(&log_path)?;
    write_meta(
        &log_path,
        &Meta {
            artifact: "train-log",
            scheme: scenario.scheme,
            scenario_hash: scenario.hash(),
            seed: scenario.seed,
            trials: None,
        },
    )?;
    writeln!(out, "wrote {} and {}", args.out.display(), log_path.display())?;
    Ok(())
}

fn run_eval(args: EvalArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let (params, stored) = load_model(&args.model)
        .map_err(|e| Error::Config(format!("{}: {e}", args.model.display())))?;
    let scenario = match &args.config {
        Some(path) => {
            let mut sc = config::parse_config(path)?;
            sc.scheme = stored.scheme;
            crate::autoencoder::check_compatible(&params, &sc)?;
            sc
        }
        None => stored,
    };
    let trials = args.trials.unwrap_or(scenario.trials);
    let seed = args.seed.unwrap_or(scenario.seed);
    let report = evaluate(&params, &scenario, trials, seed, EvalChannel::Semantic, exec)?;
    report.save_csv(&args.out)?;
    write_meta(
        &args.out,
        &Meta {
            artifact: "eval",
            scheme: report.scheme,
            scenario_hash: report.scenario_hash.clone(),
            seed,
            trials: Some(trials),
        },
    )?;
    let summary_path = args
        .summary
        .unwrap_or_else(|| with_suffix(&args.out, ".summary.toml"));
    fs::write(&summary_path, report.summary().to_toml())?;
    writeln!(
        out,
        "{}: avg BLER {:.6}, avg RMSE {:.4} ({} trials/message, seed {seed})",
        report.scheme, report.avg_bler, report.avg_rmse, trials
    )?;
    writeln!(out, "wrote {} and {}", args.out.display(), summary_path.display())?;
    Ok(())
}

fn run_constellation(args: ConstellationArgs, out: &mut dyn Write) -> Result<()> {
    let (params, scenario) = load_model(&args.model)
        .map_err(|e| Error::Config(format!("{}: {e}", args.model.display())))?;
    let rows = constellation_export(&params)?;
    write_constellation_csv(&rows, fs::File::create(&args.out)?)?;
    write_meta(
        &args.out,
        &Meta {
            artifact: "constellation",
            scheme: scenario.scheme,
            scenario_hash: scenario.hash(),
            seed: scenario.seed,
            trials: None,
        },
    )?;
    writeln!(out, "wrote {} ({} rows)", args.out.display(), rows.len())?;
    Ok(())
}

fn run_sweep(args: SweepArgs, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let trials = args.trials.unwrap_or(scenario.trials);
    echo_config(out, &scenario)?;
    fs::create_dir_all(&args.out)?;
    let mut summaries = Vec::new();
    for scheme in Scheme::ALL {
        let sc = scenario.clone().with_scheme(scheme);
        let name = scheme.as_str();
        let model_path = args.out.join(format!("{name}.model.toml"));
        let log_path = args.out.join(format!("{name}.log.csv"));
        let eval_path = args.out.join(format!("{name}.eval.csv"));
        let const_path = args.out.join(format!("{name}.constellation.csv"));

        let (params, log) = train(&sc, &sc.schedule, sc.seed, exec)?;
        save_model(&model_path, &params, &sc)?;
        log.save_csv(&log_path)?;
        let report = evaluate(&params, &sc, trials, sc.seed, EvalChannel::Semantic, exec)?;
        report.save_csv(&eval_path)?;
        write_constellation_csv(&constellation_export(&params)?, fs::File::create(&const_path)?)?;
        for (path, artifact, t) in [
            (&log_path, "train-log", None),
            (&eval_path, "eval", Some(trials)),
            (&const_path, "constellation", None),
        ] {
            write_meta(
                path,
                &Meta {
                    artifact,
                    scheme,
                    scenario_hash: sc.hash(),
                    seed: sc.seed,
                    trials: t,
                },
            )?;
        }
        let summary = report.summary();
        fs::write(args.out.join(format!("{name}.summary.toml")), summary.to_toml())?;
        writeln!(
            out,
            "{name}: avg BLER {:.6}, avg RMSE {:.4}",
            summary.avg_bler, summary.avg_rmse
        )?;
        summaries.push(summary);
    }
    let cmp = compare(&summaries)?;
    cmp.write_csv(fs::File::create(args.out.join("compare.csv"))?)?;
    write!(out, "\n{}", cmp.to_table())?;
    Ok(())
}

fn run_compare(args: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let summaries = args
        .inputs
        .iter()
        .map(|p| Summary::load(p))
        .collect::<Result<Vec<_>>>()?;
    let cmp = compare(&summaries)?;
    if let Some(path) = &args.out {
        cmp.write_csv(fs::File::create(path)?)?;
    }
    write!(out, "{}", cmp.to_table())?;
    Ok(())
}

/// Parses `args` and runs the command, writing progress to `out`.
///
/// Argument errors (including `--help`) are returned as `clap` errors so
/// the caller can print them with the usual formatting.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> std::result::Result<Result<()>, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    Ok(execute(cli, out))
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidConfig {
                key: "threads".into(),
                reason: "--threads must be at least 1".into(),
            });
        }
        exec::init_threads(t);
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Train(a) => run_train(a, exec, out),
        Command::Eval(a) => run_eval(a, exec, out),
        Command::Constellation(a) => run_constellation(a, out),
        Command::Sweep(a) => run_sweep(a, exec, out),
        Command::Compare(a) => run_compare(a, out),
    }
}
