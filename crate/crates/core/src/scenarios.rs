//! Built-in experiment presets, Monte Carlo batches and CSV export.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::{AccessControl, IotNodes, Layout, SimConfig, ModeSwitch};
use crate::error::{Error, Result};
use crate::metrics::{mean, sample_times, std_dev, Filter, SeriesPoint};
use crate::model::{ModeKind, NodeId, ReputationVector};
use crate::network::{run, RunResult};
use crate::rng::replicate_seed;

pub const SCENARIO_NAMES: &[&str] = &[
    "honest",
    "mode-switch",
    "malicious",
    "drr-vs-drrminus",
    "iot-mixed",
    "pow-case1",
    "pow-case2",
    "pow-case3",
    "sweep-A",
    "sweep-beta",
    "sweep-W",
    "sweep-n",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    A,
    Beta,
    W,
    NodeCount,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::A => "A",
            SweepParameter::Beta => "beta",
            SweepParameter::W => "W",
            SweepParameter::NodeCount => "n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(SweepParameter::A),
            "beta" => Ok(SweepParameter::Beta),
            "W" | "w" => Ok(SweepParameter::W),
            "n" | "nodes" | "node_count" => Ok(SweepParameter::NodeCount),
            other => Err(Error::config(format!("unsupported sweep parameter `{other}`"))),
        }
    }

    pub fn default_values(self) -> &'static [f64] {
        match self {
            SweepParameter::A => &[0.025, 0.075, 0.225],
            SweepParameter::Beta => &[0.5, 0.7, 0.9],
            SweepParameter::W => &[1.0, 2.0, 4.0],
            SweepParameter::NodeCount => &[25.0, 50.0, 100.0],
        }
    }

    /// `base` with this parameter set to `value`. Node-count changes keep
    /// the base network's total reputation.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParameter::A => cfg.rate.a = value,
            SweepParameter::Beta => cfg.rate.beta = value,
            SweepParameter::W => cfg.rate.w = value,
            SweepParameter::NodeCount => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::config(format!("node count must be a positive integer, got {value}")));
                }
                let total = base.reputations()?.total();
                cfg.network.nodes = value as usize;
                cfg.reputation.total = Some(total);
                cfg.reputation.values = None;
                cfg.workload.modes = None;
                cfg.workload.content_rates = None;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub variants: Vec<Variant>,
    pub sweep: Option<SweepAxis>,
}

/// Highest-reputation node running in content mode.
pub fn top_content_node(cfg: &SimConfig) -> Result<Option<NodeId>> {
    Ok(cfg
        .mode_kinds()?
        .iter()
        .position(|k| *k == ModeKind::Content)
        .map(NodeId::from))
}

impl Scenario {
    fn single(name: &str, config: SimConfig) -> Self {
        Scenario {
            name: name.to_string(),
            variants: vec![Variant {
                label: String::new(),
                config,
            }],
            sweep: None,
        }
    }

    /// The named preset on top of `base`.
    pub fn preset(name: &str, base: &SimConfig) -> Result<Self> {
        let mut cfg = base.clone();
        let scenario = match name {
            "honest" => Scenario::single(name, cfg),
            "mode-switch" => {
                let node = top_content_node(&cfg)?
                    .ok_or_else(|| Error::config("mode-switch needs at least one content node"))?;
                cfg.events.push(ModeSwitch {
                    at: cfg.run.duration / 2.0,
                    node: node.0,
                    mode: ModeKind::BestEffort,
                });
                Scenario::single(name, cfg)
            }
            "malicious" => {
                cfg.workload.layout = Layout::Malicious;
                Scenario::single(name, cfg)
            }
            "drr-vs-drrminus" => {
                let mut drr = cfg.clone();
                cfg.scheduler.empty_queue_accrual = true;
                drr.scheduler.empty_queue_accrual = false;
                Scenario {
                    name: name.to_string(),
                    variants: vec![
                        Variant {
                            label: "drr-minus".into(),
                            config: cfg,
                        },
                        Variant {
                            label: "drr".into(),
                            config: drr,
                        },
                    ],
                    sweep: None,
                }
            }
            "iot-mixed" => {
                cfg.workload.iot_nodes = IotNodes::Odd;
                Scenario::single(name, cfg)
            }
            "pow-case1" | "pow-case2" | "pow-case3" => {
                cfg.run.access_control = AccessControl::Pow;
                cfg.pow.exclude_inactive = name == "pow-case1";
                cfg.pow.power_scale = if name == "pow-case3" { 1.05 } else { 1.0 };
                Scenario::single(name, cfg)
            }
            "sweep-A" => Scenario::sweep(SweepParameter::A, SweepParameter::A.default_values(), &cfg)?,
            "sweep-beta" => Scenario::sweep(SweepParameter::Beta, SweepParameter::Beta.default_values(), &cfg)?,
            "sweep-W" => Scenario::sweep(SweepParameter::W, SweepParameter::W.default_values(), &cfg)?,
            "sweep-n" => Scenario::sweep(
                SweepParameter::NodeCount,
                SweepParameter::NodeCount.default_values(),
                &cfg,
            )?,
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        for v in &scenario.variants {
            v.config.validate()?;
        }
        Ok(scenario)
    }

    pub fn sweep(parameter: SweepParameter, values: &[f64], base: &SimConfig) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("sweep needs at least one value"));
        }
        let variants = values
            .iter()
            .map(|&v| {
                let config = parameter.apply(base, v)?;
                config.validate()?;
                Ok(Variant {
                    label: format!("{}={}", parameter.as_str(), v),
                    config,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            name: format!("sweep-{}", parameter.as_str()),
            variants,
            sweep: Some(SweepAxis {
                parameter,
                values: values.to_vec(),
            }),
        })
    }
}

/// How replicates are dispatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; sequential when the `parallel` feature is off.
    #[default]
    Parallel,
}

/// `runs` independent replicates of `cfg`. Replicate k uses the k-th seed
/// derived from `master_seed`; results come back in replicate order.
pub fn run_batch(cfg: &SimConfig, runs: usize, master_seed: u64, exec: Execution) -> Result<Vec<RunResult>> {
    let one = |k: usize| {
        let mut c = cfg.clone();
        c.run.seed = replicate_seed(master_seed, k);
        run(&c)
    };
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..runs).into_par_iter().map(one).collect()
        }
        _ => (0..runs).map(one).collect(),
    }
}

#[derive(Debug)]
pub struct VariantOutcome {
    pub label: String,
    pub config: SimConfig,
    pub runs: Vec<RunResult>,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub sweep: Option<SweepAxis>,
    pub variants: Vec<VariantOutcome>,
}

impl ScenarioOutcome {
    pub fn variant(&self, label: &str) -> Option<&VariantOutcome> {
        self.variants.iter().find(|v| v.label == label)
    }
}

pub fn run_scenario(scenario: &Scenario, runs: usize, seed: u64, exec: Execution) -> Result<ScenarioOutcome> {
    if runs == 0 {
        return Err(Error::config("at least one run is required"));
    }
    let variants = scenario
        .variants
        .iter()
        .map(|v| {
            Ok(VariantOutcome {
                label: v.label.clone(),
                config: v.config.clone(),
                runs: run_batch(&v.config, runs, seed, exec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioOutcome {
        name: scenario.name.clone(),
        sweep: scenario.sweep.clone(),
        variants,
    })
}

/// `[max(0, end − 60), end)`: the steady-state window used in summaries.
pub fn steady_window(duration: f64) -> (f64, f64) {
    ((duration - 60.0).max(0.0), duration)
}

/// Mode of every node at time `t`, following the switch events.
pub fn modes_at(initial: &[ModeKind], events: &[ModeSwitch], t: f64) -> Vec<ModeKind> {
    let mut modes = initial.to_vec();
    let mut evs: Vec<&ModeSwitch> = events.iter().filter(|e| e.at <= t).collect();
    evs.sort_by(|a, b| a.at.total_cmp(&b.at));
    for e in evs {
        modes[e.node as usize] = e.mode;
    }
    modes
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    /// Over the steady-state window, work/s.
    pub dr: f64,
    pub mean_latency: Option<f64>,
    pub max_transit_slope: f64,
    pub drops: usize,
    pub honest_drops: usize,
    pub events: u64,
}

pub fn summarize(r: &RunResult, cfg: &SimConfig) -> RunSummary {
    let (t0, t1) = steady_window(r.duration);
    let (dr, mean_latency, slope) = if t1 > t0 {
        let times: Vec<f64> = sample_times(t1, cfg.metrics.stride)
            .into_iter()
            .filter(|t| *t >= t0)
            .collect();
        let transit = r.ledger.max_transit_series(&times, Filter::Honest);
        (
            r.ledger.dissemination_rate(t0, t1, Filter::Honest),
            r.ledger.mean_latency(t0, t1, Filter::Honest),
            crate::metrics::linear_slope(&times, &transit),
        )
    } else {
        (0.0, None, 0.0)
    };
    RunSummary {
        seed: r.seed,
        dr,
        mean_latency,
        max_transit_slope: slope,
        drops: r.ledger.drops().len(),
        honest_drops: r.ledger.honest_drops(),
        events: r.events,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn honest_series(r: &RunResult, cfg: &SimConfig) -> Vec<SeriesPoint> {
    r.ledger
        .series(r.duration, cfg.metrics.window, cfg.metrics.stride, Filter::Honest)
}

/// Per-run CSVs into `dir`.
pub fn write_run(dir: &Path, r: &RunResult, cfg: &SimConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let nu = cfg.scheduler.nu;

    let mut w = writer(&dir.join("series.csv"))?;
    w.write_record(["t", "dr", "dr_pct", "mean_latency", "max_transit"])?;
    for p in honest_series(r, cfg) {
        w.write_record([
            p.t.to_string(),
            p.dr.to_string(),
            (100.0 * p.dr / nu).to_string(),
            opt(p.mean_latency),
            p.max_transit.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("nodes.csv"))?;
    w.write_record(["t", "node", "mode", "rep", "dr", "scaled_dr"])?;
    let per_node = r.ledger.node_rate_series(r.duration, cfg.metrics.window, cfg.metrics.stride);
    let times = sample_times(r.duration, cfg.metrics.stride);
    for (k, t) in times.iter().enumerate() {
        let modes = modes_at(&r.initial_modes, &cfg.events, *t);
        for (i, series) in per_node.iter().enumerate() {
            let rep = r.reputations.values()[i];
            w.write_record([
                t.to_string(),
                i.to_string(),
                modes[i].to_string(),
                rep.to_string(),
                series[k].to_string(),
                (series[k] / rep).to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(&dir.join("latency.csv"))?;
    w.write_record(["node", "mode", "seq", "issue_time", "latency"])?;
    for rec in r.ledger.records() {
        if let Some(l) = rec.latency() {
            let i = rec.issuer().index();
            w.write_record([
                i.to_string(),
                r.initial_modes[i].to_string(),
                rec.id.seq.to_string(),
                rec.issue_time.to_string(),
                l.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(&dir.join("drops.csv"))?;
    w.write_record(["time", "node", "issuer", "seq", "work"])?;
    for d in r.ledger.drops() {
        let rec = r.ledger.record(d.serial);
        w.write_record([
            d.time.to_string(),
            d.node.to_string(),
            rec.issuer().to_string(),
            rec.id.seq.to_string(),
            rec.work.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn mean_std(xs: &[f64]) -> (String, String) {
    match mean(xs) {
        Some(m) => (m.to_string(), std_dev(xs).to_string()),
        None => (String::new(), String::new()),
    }
}

/// Pointwise mean and sample standard deviation of the honest series over runs.
pub fn aggregate_series(runs: &[RunResult], cfg: &SimConfig) -> Vec<[String; 7]> {
    let all: Vec<Vec<SeriesPoint>> = runs.iter().map(|r| honest_series(r, cfg)).collect();
    let len = all.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|k| {
            let dr: Vec<f64> = all.iter().map(|s| s[k].dr).collect();
            let lat: Vec<f64> = all.iter().filter_map(|s| s[k].mean_latency).collect();
            let tr: Vec<f64> = all.iter().map(|s| s[k].max_transit).collect();
            let (a, b) = mean_std(&dr);
            let (c, d) = mean_std(&lat);
            let (e, f) = mean_std(&tr);
            [all[0][k].t.to_string(), a, b, c, d, e, f]
        })
        .collect()
}

const SERIES_AGG_HEADER: [&str; 7] = [
    "t",
    "dr_mean",
    "dr_std",
    "mean_latency_mean",
    "mean_latency_std",
    "max_transit_mean",
    "max_transit_std",
];

/// Aggregated CSVs for one variant, plus every run in `run_<k>/`.
pub fn write_variant(dir: &Path, runs: &[RunResult], cfg: &SimConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, r) in runs.iter().enumerate() {
        write_run(&dir.join(format!("run_{k:03}")), r, cfg)?;
    }

    let mut w = writer(&dir.join("series_agg.csv"))?;
    w.write_record(SERIES_AGG_HEADER)?;
    for row in aggregate_series(runs, cfg) {
        w.write_record(row)?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("nodes_agg.csv"))?;
    w.write_record(["t", "node", "mode", "rep", "dr_mean", "dr_std", "scaled_dr_mean", "scaled_dr_std"])?;
    if let Some(first) = runs.first() {
        let per_run: Vec<Vec<Vec<f64>>> = runs
            .iter()
            .map(|r| r.ledger.node_rate_series(r.duration, cfg.metrics.window, cfg.metrics.stride))
            .collect();
        let reps: &ReputationVector = &first.reputations;
        let times = sample_times(first.duration, cfg.metrics.stride);
        for (k, t) in times.iter().enumerate() {
            let modes = modes_at(&first.initial_modes, &cfg.events, *t);
            for i in 0..reps.len() {
                let rep = reps.values()[i];
                let dr: Vec<f64> = per_run.iter().map(|p| p[i][k]).collect();
                let scaled: Vec<f64> = dr.iter().map(|d| d / rep).collect();
                let (a, b) = mean_std(&dr);
                let (c, d) = mean_std(&scaled);
                w.write_record([t.to_string(), i.to_string(), modes[i].to_string(), rep.to_string(), a, b, c, d])?;
            }
        }
    }
    w.flush()?;

    let mut w = writer(&dir.join("summary.csv"))?;
    w.write_record([
        "run",
        "seed",
        "dr",
        "dr_pct",
        "mean_latency",
        "max_transit_slope",
        "drops",
        "honest_drops",
        "events",
    ])?;
    for (k, r) in runs.iter().enumerate() {
        let s = summarize(r, cfg);
        w.write_record([
            k.to_string(),
            s.seed.to_string(),
            s.dr.to_string(),
            (100.0 * s.dr / cfg.scheduler.nu).to_string(),
            opt(s.mean_latency),
            s.max_transit_slope.to_string(),
            s.drops.to_string(),
            s.honest_drops.to_string(),
            s.events.to_string(),
        ])?;
    }
    w.flush()?;

    let mut f = fs::File::create(dir.join("config.toml"))?;
    f.write_all(cfg.to_toml_string().as_bytes())?;
    Ok(())
}

/// Writes `outcome` under `out/<scenario>/`. Multi-variant scenarios get one
/// subdirectory per variant; sweeps also get a combined `sweep.csv`.
pub fn write_outcome(out: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    let root = out.join(&outcome.name);
    fs::create_dir_all(&root)?;
    for v in &outcome.variants {
        let dir = if v.label.is_empty() { root.clone() } else { root.join(&v.label) };
        write_variant(&dir, &v.runs, &v.config)?;
    }
    if let Some(axis) = &outcome.sweep {
        let mut w = writer(&root.join("sweep.csv"))?;
        let mut header = vec!["parameter", "value"];
        header.extend(SERIES_AGG_HEADER);
        w.write_record(&header)?;
        for (v, value) in outcome.variants.iter().zip(&axis.values) {
            for row in aggregate_series(&v.runs, &v.config) {
                let mut rec = vec![axis.parameter.as_str().to_string(), value.to_string()];
                rec.extend(row);
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
