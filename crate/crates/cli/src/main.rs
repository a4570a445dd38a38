use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mimo_uplink::campaign::{run_campaign, Algorithm, RunSpec, DEFAULT_DROPS};
use mimo_uplink::cdf::empirical_cdf;
use mimo_uplink::output::{build_records, read_results_csv, summarize, write_outputs, CampaignSummary};
use mimo_uplink::solvers::DropLabel;
use mimo_uplink::SystemConfig;

/// Monte-Carlo power-control campaigns for multi-cell Massive MIMO uplink.
#[derive(Parser)]
#[command(name = "uplink-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write results.csv, summary.json and config.echo.
    Run {
        /// TOML system configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DROPS)]
        drops: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated subset of joint,data,gp,lp.
        #[arg(long, default_value = "joint,data,gp")]
        algos: String,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: one per core). Does not affect results.
        #[arg(long)]
        workers: Option<usize>,
        /// Stopping threshold on the relative energy change.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Empirical CDF of one column of a results.csv.
    Cdf {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long)]
        algo: String,
        /// Keep only drops with this label.
        #[arg(long, value_enum)]
        label: Option<Label>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the built-in default configuration as TOML.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Power,
    Se,
}

#[derive(Clone, Copy, ValueEnum)]
enum Label {
    Feasible,
    Congested,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, drops, seed, algos, out, workers, tolerance } => {
            let cfg = match &config {
                Some(path) => SystemConfig::load(path)?,
                None => SystemConfig::default(),
            };
            let mut spec = RunSpec::new(cfg, drops, seed, Algorithm::parse_list(&algos)?);
            spec.workers = workers;
            if let Some(t) = tolerance {
                spec.solver.tolerance = t;
            }
            run(&spec, &out)
        }
        Command::Cdf { input, metric, algo, label, out } => cdf(&input, metric, &algo, label, &out),
        Command::DefaultConfig => {
            print!("{}", SystemConfig::default().to_toml());
            Ok(())
        }
    }
}

fn run(spec: &RunSpec, out: &PathBuf) -> Result<()> {
    let outcomes = run_campaign(spec)?;
    let records = build_records(&outcomes, &spec.config, spec.solver.served_slack);
    let summary = summarize(&records, spec.num_drops, spec.seed, spec.config.num_users());
    write_outputs(&records, &summary, spec, out)?;
    print_summary(&summary);
    println!("wrote {}", out.display());
    Ok(())
}

fn print_summary(s: &CampaignSummary) {
    println!(
        "{} drops ({} feasible, {} congested), seed {}",
        s.num_drops, s.feasible_drops, s.congested_drops, s.seed
    );
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
    println!("algo   infeasible  unserved  power_mW  feasible_mW  congested_mW  iters");
    for (algo, a) in &s.algorithms {
        println!(
            "{:<6} {:>9.1}%  {:>7.1}%  {:>8}  {:>11}  {:>12}  {:>5.1}",
            algo.as_str(),
            100.0 * a.infeasible_fraction,
            100.0 * a.unserved_fraction,
            opt(a.mean_power_mw),
            opt(a.mean_power_feasible_mw),
            opt(a.mean_power_congested_mw),
            a.mean_iterations,
        );
    }
}

fn cdf(input: &PathBuf, metric: Metric, algo: &str, label: Option<Label>, out: &PathBuf) -> Result<()> {
    let algo: Algorithm = algo.parse()?;
    let want = label.map(|l| match l {
        Label::Feasible => DropLabel::Feasible,
        Label::Congested => DropLabel::Congested,
    });
    let samples: Vec<f64> = read_results_csv(input)?
        .into_iter()
        .filter(|r| r.algo == algo && r.status.has_allocation())
        .filter(|r| want.map_or(true, |l| r.drop_label == l))
        .map(|r| match metric {
            Metric::Power => r.power_mw,
            Metric::Se => r.se_bps_hz,
        })
        .collect();
    if samples.is_empty() {
        bail!("no rows for algorithm {algo} in {}", input.display());
    }
    let points = empirical_cdf(&samples)?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("cannot write {}", out.display()))?;
    w.write_record(["value", "probability"])?;
    for (x, p) in points {
        w.write_record([x.to_string(), p.to_string()])?;
    }
    w.flush().with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}
