//! `ploss run`: build coupled belief trees for a scenario, characterize the
//! simplification online and write CSV tables.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use ploss_core::experiment::{run_experiment, write_outputs, ExperimentConfig, ExperimentOutput};
use ploss_core::Error;

#[derive(Parser)]
#[command(
    name = "ploss",
    version,
    about = "Online loss characterization for simplified belief planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON configuration file.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// beacon-1, beacon-2 or toy; selects that scenario's defaults.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated simplified particle counts.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the two-decimal table value of the normal quantile (2.56 at alpha = 0.01).
    #[arg(long)]
    paper_rounding: bool,
    /// Also compute original returns and the true loss.
    #[arg(long)]
    offline_ploss: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut o = Map::new();
        if let Some(s) = &self.scenario {
            o.insert("scenario".into(), Value::from(s.clone()));
        }
        if let Some(n) = &self.n_list {
            o.insert("simplified".into(), Value::from(n.clone()));
        }
        if let Some(a) = self.alpha {
            o.insert("alpha".into(), Value::from(a));
        }
        if let Some(s) = self.seed {
            o.insert("seed".into(), Value::from(s));
        }
        if self.paper_rounding {
            o.insert("paper_rounding".into(), Value::from(true));
        }
        if self.offline_ploss {
            o.insert("offline_ploss".into(), Value::from(true));
        }
        if let Some(d) = &self.out {
            o.insert(
                "output_dir".into(),
                Value::from(d.to_string_lossy().into_owned()),
            );
        }
        if let Some(t) = self.threads {
            o.insert("threads".into(), Value::from(t));
        }
        o
    }
}

fn print_summary(out: &ExperimentOutput) {
    println!(
        "scenario {}  N = {}  m = {}  alpha = {}  branches = {}",
        out.config.scenario,
        out.config.particles,
        out.config.replicates,
        out.config.alpha,
        out.branches
    );
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "n", "delta*", "beta(0)", "beta(d*)", "P(L>0)", "lambda"
    );
    for r in &out.runs {
        let o = &r.online;
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let ploss0 = r.offline.as_ref().map(|off| off.ploss_tdf[0]);
        let lambda = r.diagnostics.as_ref().map(|d| d.lambda_hat);
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>10} {:>10}",
            r.n,
            o.delta_star,
            o.beta_at(0.0),
            o.beta_at(o.delta_star),
            fmt(ploss0),
            fmt(lambda)
        );
    }
}

fn run(args: &RunArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let config = ExperimentConfig::from_json(&text, &args.overrides())?;
    let out = run_experiment(&config)?;
    for w in out.warnings() {
        eprintln!("warning: {w}");
    }
    write_outputs(&out, &config.output_dir)
        .with_context(|| format!("writing outputs to {}", config.output_dir.display()))?;
    print_summary(&out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                match e.downcast_ref::<Error>() {
                    Some(Error::Config(_)) => ExitCode::from(2),
                    _ => ExitCode::FAILURE,
                }
            }
        },
    }
}
