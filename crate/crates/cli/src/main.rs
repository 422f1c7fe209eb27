//! `simulate`: run a built-in scenario and write its CSVs.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use dlt_access::metrics::mean;
use dlt_access::scenarios::{summarize, Execution, Scenario, SCENARIO_NAMES};
use dlt_access::{run_scenario, write_outcome, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "simulate", version, about = "Reputation-based access control simulator")]
struct Args {
    /// Scenario preset (see --list).
    #[arg(required_unless_present = "list")]
    scenario: Option<String>,

    /// Monte Carlo replicates per variant.
    #[arg(long)]
    runs: Option<usize>,

    /// Master seed; replicate seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<f64>,

    /// Output directory; CSVs go to OUT/<scenario>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// TOML file merged over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a single key, e.g. `--set rate.beta=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Run replicates one after another instead of on the worker pool.
    #[arg(long)]
    sequential: bool,

    /// Print the scenario names and exit.
    #[arg(long)]
    list: bool,
}

fn base_config(args: &Args) -> dlt_access::Result<SimConfig> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &args.config {
        cfg = cfg.merged_with_toml(&std::fs::read_to_string(path)?)?;
    }
    cfg = cfg.with_overrides(&args.overrides)?;
    if let Some(d) = args.duration {
        cfg.run.duration = d;
    }
    if let Some(r) = args.runs {
        cfg.run.runs = r;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn simulate(args: &Args) -> anyhow::Result<()> {
    let name = args.scenario.as_deref().unwrap_or_default();
    let base = base_config(args)?;
    base.validate()?;
    let scenario = Scenario::preset(name, &base)?;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let outcome = run_scenario(&scenario, base.run.runs, base.run.seed, exec)?;
    write_outcome(&args.out, &outcome).with_context(|| format!("writing CSVs under {}", args.out.display()))?;

    for v in &outcome.variants {
        let s: Vec<_> = v.runs.iter().map(|r| summarize(r, &v.config)).collect();
        let dr = mean(&s.iter().map(|x| x.dr).collect::<Vec<_>>()).unwrap_or(0.0);
        let lat: Vec<f64> = s.iter().filter_map(|x| x.mean_latency).collect();
        let drops: usize = s.iter().map(|x| x.drops).sum();
        let label = if v.label.is_empty() { &outcome.name } else { &v.label };
        println!(
            "{label}: DR {:.1}% of nu, mean latency {}, drops {drops} ({} runs)",
            100.0 * dr / v.config.scheduler.nu,
            mean(&lat).map_or("n/a".to_string(), |l| format!("{l:.2} s")),
            v.runs.len(),
        );
    }
    println!("wrote {}", args.out.join(&outcome.name).display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        for name in SCENARIO_NAMES {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    match simulate(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e
                .downcast_ref::<dlt_access::Error>()
                .is_some_and(dlt_access::Error::is_config_error);
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
