use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pdpids::control::{tree_compile, DecisionTree};
use pdpids::harness::{
    build_trace, emit_metrics, run_experiment, ExperimentConfig, HarnessError, MetricsReport, OutputFormat, Pipeline,
};
use pdpids::traffic::write_trace;

/// Data-plane intrusion detection experiments.
#[derive(Parser)]
#[command(name = "pdpids", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// key = value experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed (and the seeds derived from it)
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the entropy detector over a trace and report window-level metrics
    RunEntropy {
        #[command(flatten)]
        common: Common,
        /// Write the per-window alarm log (JSON lines) here
        #[arg(long)]
        alarm_log: Option<PathBuf>,
    },
    /// Run the flow classifier and report flow-level metrics
    RunClassifier {
        #[command(flatten)]
        common: Common,
        /// Decision tree JSON; repeat for a forest. Replaces KNN.
        #[arg(long = "tree")]
        trees: Vec<PathBuf>,
    },
    /// Write the configured labeled trace as CSV
    GenTrace {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a decision tree into a rule table and print it
    CompileTree {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the prefix-expanded form instead of ranges
        #[arg(long)]
        lpm: bool,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>, pipeline: Pipeline) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load_for(p, pipeline)?,
        None => ExperimentConfig::defaults(pipeline),
    };
    if cfg.pipeline != pipeline {
        return Err(Failure::Config(anyhow::anyhow!(
            "configuration is for the {} pipeline, not {}",
            cfg.pipeline.name(),
            pipeline.name()
        )));
    }
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    Ok(cfg)
}

fn write_output(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(body.as_bytes()).context("writing stdout"),
    }
}

fn report(m: &MetricsReport, common: &Common) -> Result<(), Failure> {
    match &common.out {
        Some(p) => emit_metrics(m, p, common.format)?,
        None => {
            let body = match common.format {
                OutputFormat::Json => m.to_json() + "\n",
                OutputFormat::Csv => m.to_csv(),
            };
            write_output(None, &body)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::RunEntropy { common, alarm_log } => {
            let mut cfg = load_config(common.config.as_deref(), common.seed, Pipeline::Entropy)?;
            if alarm_log.is_some() {
                cfg.alarm_log = alarm_log;
            }
            let m = run_experiment(&cfg)?;
            report(&m, &common)
        }
        Cmd::RunClassifier { common, trees } => {
            let mut cfg = load_config(common.config.as_deref(), common.seed, Pipeline::Classifier)?;
            if !trees.is_empty() {
                cfg.classifier.trees = trees;
                cfg.validate()?;
            }
            let m = run_experiment(&cfg)?;
            report(&m, &common)
        }
        Cmd::GenTrace { config, seed, out } => {
            let cfg = match config.as_deref() {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::defaults(Pipeline::Entropy),
            };
            let cfg = match seed {
                Some(s) => cfg.with_seed(s),
                None => cfg,
            };
            let trace = build_trace(&cfg)?;
            let mut buf = Vec::new();
            write_trace(&mut buf, &trace).context("encoding trace")?;
            write_output(out.as_deref(), std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            Ok(())
        }
        Cmd::CompileTree { tree, out, lpm } => {
            let t = DecisionTree::load(&tree).map_err(|e| Failure::Config(e.into()))?;
            let p = tree_compile(&t).with_context(|| format!("compiling {}", tree.display()))?;
            let body = if lpm {
                let mut s = String::new();
                for r in p.lpm_form() {
                    let feats: Vec<String> = r
                        .prefixes
                        .iter()
                        .enumerate()
                        .map(|(i, ps)| {
                            let ps: Vec<String> = ps.iter().map(|(v, l)| format!("{v}/{l}")).collect();
                            format!("f{i}={{{}}}", ps.join(","))
                        })
                        .collect();
                    s += &format!("priority={} {} -> {}\n", r.priority, feats.join(" "), r.label);
                }
                s
            } else {
                p.dump()
            };
            write_output(out.as_deref(), &body)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
