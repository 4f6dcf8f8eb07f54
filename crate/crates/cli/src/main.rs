use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use speaker_naming::config::PipelineConfig;
use speaker_naming::eval::{baseline, weighted_prf, AliasMap, BaselineKind, EvalReport, GoldAnnotation};
use speaker_naming::io::{read_predictions, write_predictions};
use speaker_naming::optimizer::TraceRow;
use speaker_naming::pipeline::{load_dialogue, load_inputs, solve_dialogue, ModelSettings};
use speaker_naming::synth::generate;
use speaker_naming::Error;

/// Name the speakers of a subtitled movie from its dialogue.
#[derive(Debug, Parser)]
#[command(name = "speaker-naming", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set lambda_mi=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discover the character roster and write it as CSV.
    ExtractNames(Common),
    /// Solve for speaker names and write predictions (and the trace, if configured).
    Solve(Common),
    /// Score predictions against gold labels. Several configs give one row each.
    Evaluate {
        #[arg(short, long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Report CSV; defaults to the first config's `report`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Summary text; defaults to the first config's `summary`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Write baseline predictions (B1, B2 or B3).
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Overrides the config's `baseline`.
        #[arg(long)]
        kind: Option<BaselineKind>,
    },
    /// Write a synthetic movie directory with its own config.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Solve and write the per-iteration objective trace.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Defaults to the config's `trace`, else `trace.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(config: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut c = match config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::new("."),
    };
    for o in overrides {
        let (key, value) = o.split_once('=').ok_or_else(|| Error::Config {
            key: o.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        c.set(key.trim(), value.trim())?;
    }
    c.validate()?;
    Ok(c)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn solve(c: &PipelineConfig) -> Result<speaker_naming::pipeline::Solution> {
    let inputs = load_inputs(c)?;
    Ok(solve_dialogue(
        &inputs.dialogue,
        &inputs.modalities,
        &inputs.gender,
        &ModelSettings::from_config(c),
    )?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ExtractNames(common) => {
            let c = load_config(common.config.as_deref(), &common.overrides)?;
            let dialogue = load_dialogue(&c)?;
            write(&c.resolve(&c.roster), &dialogue.roster.to_csv())?;
        }
        Command::Solve(common) => {
            let c = load_config(common.config.as_deref(), &common.overrides)?;
            let sol = solve(&c)?;
            write(&c.resolve(&c.predictions), &write_predictions(&sol.names))?;
            if let Some(t) = &c.trace {
                write(&c.resolve(t), &TraceRow::to_csv(&sol.outcome.trace))?;
            }
        }
        Command::Trace { common, out } => {
            let c = load_config(common.config.as_deref(), &common.overrides)?;
            let sol = solve(&c)?;
            let path = out.unwrap_or_else(|| c.resolve(c.trace.as_deref().unwrap_or(Path::new("trace.csv"))));
            write(&path, &TraceRow::to_csv(&sol.outcome.trace))?;
        }
        Command::Evaluate {
            config,
            overrides,
            report,
            summary,
        } => {
            let mut rep = EvalReport::default();
            let mut first = None;
            for path in &config {
                let c = load_config(Some(path), &overrides)?;
                let preds = read_predictions(&read(&c.resolve(&c.predictions))?)?;
                let gold = GoldAnnotation::from_csv(&read(&c.require("gold", c.gold.as_ref())?)?)?;
                let aliases = match &c.aliases {
                    Some(a) => AliasMap::from_csv(&read(&c.resolve(a))?)?,
                    None => AliasMap::default(),
                };
                rep.push(c.video.clone(), weighted_prf(&preds, &gold, &aliases)?);
                first.get_or_insert(c);
            }
            let c = first.expect("clap requires at least one config");
            write(&report.unwrap_or_else(|| c.resolve(&c.report)), &rep.to_csv())?;
            write(&summary.unwrap_or_else(|| c.resolve(&c.summary)), &rep.summary())?;
        }
        Command::Baseline { common, kind } => {
            let c = load_config(common.config.as_deref(), &common.overrides)?;
            let kind = kind.unwrap_or(c.baseline);
            let inputs = load_inputs(&c)?;
            let gender = c.gender_probs.as_ref().map(|_| &inputs.gender);
            let names = baseline(kind, &inputs.dialogue.roster, inputs.dialogue.n(), gender, c.seed)?;
            write(&c.resolve(&c.predictions), &write_predictions(&names))?;
        }
        Command::Synth { common, out } => {
            let c = load_config(common.config.as_deref(), &common.overrides)?;
            generate(&c.synth)?.write_to(&out)?;
        }
    }
    Ok(())
}

/// 2 for data and parse errors, 3 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Numerical(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
