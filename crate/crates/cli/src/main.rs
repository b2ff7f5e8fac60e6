//! Command-line front end: generate synthetic traces, learn channel
//! models, enforce them over traces, and run the built-in evaluation.
//!
//! Machine-readable output goes to files or standard output; diagnostics
//! go to standard error. The exit code is 0 exactly when the requested
//! operation completed.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use muxwatch_core::eval::{evaluate_scenario, naive_config, report_csv};
use muxwatch_core::generator::{
    builtin_scenario, builtin_scenarios, generate, parse_scenario, write_ground_truth,
    ScenarioSpec,
};
use muxwatch_core::learner::{learn_naive, learn_statechart, parse_config, LearnConfig};
use muxwatch_core::metrics::time_overlap_pct;
use muxwatch_core::statechart::{
    event_log_to_string, parse_model, summary_to_string, write_event_log, write_model, Statechart,
};
use muxwatch_core::trace::{parse_trace, write_trace};

#[derive(Parser)]
#[command(name = "muxwatch", about = "Statechart anomaly detection for multiplexed periodic traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace and its ground truth.
    Generate {
        /// Built-in scenario id (1-13).
        #[arg(long)]
        builtin: Option<usize>,
        /// Scenario description file.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's duration in milliseconds.
        #[arg(long)]
        duration: Option<u64>,
        /// Trace file to write.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth CSV to write alongside the trace.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Learn a model from the beginning of a trace.
    Learn {
        /// Trace file to learn from.
        #[arg(long)]
        trace: PathBuf,
        /// Learner settings file (key=value lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Learn a single flat pattern instead of a statechart.
        #[arg(long)]
        naive: bool,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trace against a model, classifying every event.
    Enforce {
        /// Model file, as written by `learn`.
        #[arg(long)]
        model: PathBuf,
        /// Trace file to replay.
        #[arg(long)]
        trace: PathBuf,
        /// Write the per-event log here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the naive, learned, and oracle models on built-in
    /// scenarios.
    Evaluate {
        /// Built-in scenario id (1-13).
        #[arg(long)]
        builtin: Option<usize>,
        /// Evaluate the whole catalog and append per-model medians.
        #[arg(long)]
        all: bool,
        /// Override the built-in random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            builtin,
            scenario,
            seed,
            duration,
            out,
            truth,
        } => cmd_generate(builtin, scenario, seed, duration, &out, truth.as_deref()),
        Command::Learn {
            trace,
            config,
            naive,
            out,
        } => cmd_learn(&trace, config.as_deref(), naive, &out),
        Command::Enforce { model, trace, out } => cmd_enforce(&model, &trace, out.as_deref()),
        Command::Evaluate {
            builtin,
            all,
            seed,
            out,
        } => cmd_evaluate(builtin, all, seed, out.as_deref()),
    }
}

fn load_scenario(builtin: Option<usize>, scenario: Option<PathBuf>) -> Result<ScenarioSpec> {
    match (builtin, scenario) {
        (Some(id), None) => {
            builtin_scenario(id).with_context(|| format!("no built-in scenario {id}, ids run 1-13"))
        }
        (None, Some(path)) => {
            parse_scenario(&path).with_context(|| format!("reading {}", path.display()))
        }
        _ => bail!("pass exactly one of --builtin or --scenario"),
    }
}

fn cmd_generate(
    builtin: Option<usize>,
    scenario: Option<PathBuf>,
    seed: Option<u64>,
    duration: Option<u64>,
    out: &std::path::Path,
    truth: Option<&std::path::Path>,
) -> Result<()> {
    let mut spec = load_scenario(builtin, scenario)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(d) = duration {
        spec.duration_ms = d;
    }
    let (trace, gt) = generate(&spec)?;
    write_trace(&trace, out)?;
    if let Some(path) = truth {
        write_ground_truth(&gt, path)?;
    }
    println!(
        "events={} time_overlap_pct={:.2}",
        trace.events.len(),
        time_overlap_pct(&gt)
    );
    Ok(())
}

fn cmd_learn(
    trace_path: &std::path::Path,
    config: Option<&std::path::Path>,
    naive: bool,
    out: &std::path::Path,
) -> Result<()> {
    let trace = parse_trace(trace_path)?;
    let cfg = match config {
        Some(path) => parse_config(path)?,
        None if naive => naive_config(),
        None => LearnConfig::default(),
    };

    let model: Statechart;
    if naive {
        model = learn_naive(&trace, &cfg)?;
    } else {
        let (sc, report) = learn_statechart(&trace, &cfg)?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        println!("window_end={}", report.window_end);
        println!("partitions={}", report.partitions);
        println!("candidates={}", report.candidates);
        println!("chosen={}", report.chosen);
        println!("validation_score={:.4}", report.validation_score);
        model = sc;
    }
    write_model(&model, out)?;
    println!("n_dfas={}", model.dfas().len());
    println!("model_size={}", model.model_size());
    Ok(())
}

fn cmd_enforce(
    model_path: &std::path::Path,
    trace_path: &std::path::Path,
    out: Option<&std::path::Path>,
) -> Result<()> {
    let model = parse_model(model_path)?;
    let trace = parse_trace(trace_path)?;
    let result = model.enforce(&trace);
    match out {
        Some(path) => write_event_log(&result, path)?,
        None => print!("{}", event_log_to_string(&result)),
    }
    print!("{}", summary_to_string(&result.summary));
    let s = &result.summary;
    println!(
        "counts normal={} retransmission={} miss={} unknown={} selector_unknown={} warmup={}",
        s.normal, s.retransmission, s.miss, s.unknown, s.selector_unknown, s.warmup
    );
    Ok(())
}

fn cmd_evaluate(
    builtin: Option<usize>,
    all: bool,
    seed: Option<u64>,
    out: Option<&std::path::Path>,
) -> Result<()> {
    let specs = match (builtin, all) {
        (Some(id), false) => vec![
            builtin_scenario(id).with_context(|| format!("no built-in scenario {id}, ids run 1-13"))?,
        ],
        (None, true) => builtin_scenarios(),
        _ => bail!("pass exactly one of --builtin or --all"),
    };
    let evals = specs
        .into_iter()
        .map(|mut spec| {
            if let Some(s) = seed {
                spec.seed = s;
            }
            evaluate_scenario(&spec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let csv = report_csv(&evals, all);
    match out {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}
