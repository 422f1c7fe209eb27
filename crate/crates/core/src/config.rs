//! Simulation configuration.
//!
//! Configuration files are TOML with one table per subsystem. Every key is
//! optional; missing keys take the defaults below, which are the reference
//! experiment settings (50 nodes, 4 neighbours, Zipf(0.9) reputation,
//! ν = 50, DC_max = 1, A = 0.075, β = 0.7, τ = 2, W = 2, W_max = 200,
//! 180 s runs).
//!
//! ```toml
//! [network]
//! nodes = 50
//! neighbours = 4
//!
//! [rate]
//! a = 0.075
//! beta = 0.7
//!
//! [[events]]
//! at = 90.0
//! node = 1
//! mode = "best-effort"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assured_rate, ModeKind, NodeId, NodeMode, ReputationVector, WorkDistribution};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub reputation: ReputationConfig,
    pub scheduler: SchedulerConfig,
    pub rate: RateConfig,
    pub buffer: BufferConfig,
    pub workload: WorkloadConfig,
    pub pow: PowConfig,
    pub metrics: MetricsConfig,
    pub run: RunConfig,
    /// Mode changes applied during the run.
    pub events: Vec<ModeSwitch>,
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphModel {
    /// Connected random k-regular graph (configuration model with rejection).
    RandomRegular,
    /// Every node picks k distinct random peers; edges are the union, so
    /// degrees are at least k.
    PickK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: usize,
    pub neighbours: usize,
    pub graph: GraphModel,
    /// Channel mean delays are drawn uniformly from [delay_min, delay_max] seconds.
    pub delay_min: f64,
    pub delay_max: f64,
    /// Per-transaction standard deviation around the channel mean.
    pub delay_std: f64,
    /// Sampled delays are clamped below at this value.
    pub delay_floor: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            nodes: 50,
            neighbours: 4,
            graph: GraphModel::RandomRegular,
            delay_min: 0.05,
            delay_max: 0.15,
            delay_std: 0.02,
            delay_floor: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReputationConfig {
    pub zipf_exponent: f64,
    /// Rescale the Zipf values to this total. Used by node-count sweeps to
    /// keep total reputation fixed while redistributing it.
    pub total: Option<f64>,
    /// Explicit per-node values; overrides the Zipf shape.
    pub values: Option<Vec<f64>>,
}

impl Default for ReputationConfig {
    fn default() -> Self {
        ReputationConfig {
            zipf_exponent: 0.9,
            total: None,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// ν, work per second.
    pub nu: f64,
    /// Σ Q_i.
    pub quantum_scale: f64,
    pub dc_max: f64,
    /// `false` gives classic DRR (no saving while a queue is empty).
    pub empty_queue_accrual: bool,
    /// Cadence of accrual cycles while the inbox is empty, seconds.
    pub idle_poll: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            nu: 50.0,
            quantum_scale: 1.0,
            dc_max: 1.0,
            empty_queue_accrual: true,
            idle_poll: 0.01,
        }
    }
}

/// Which reputation value multiplies W in the backoff threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdReputation {
    /// rep_m as stored.
    Raw,
    /// rep_m / Σ rep.
    Normalized,
    /// rep_m · N / Σ rep (mean reputation one).
    MeanOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub a: f64,
    pub beta: f64,
    pub tau: f64,
    pub w: f64,
    pub ema_coeff: f64,
    pub threshold_reputation: ThresholdReputation,
    /// Multiplier on the chosen reputation inside the threshold.
    pub threshold_unit: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            a: 0.075,
            beta: 0.7,
            tau: 2.0,
            w: 2.0,
            ema_coeff: 0.5,
            threshold_reputation: ThresholdReputation::MeanOne,
            threshold_unit: 5.0,
        }
    }
}

impl RateConfig {
    pub fn threshold(&self, m: NodeId, reps: &ReputationVector) -> f64 {
        let rep = match self.threshold_reputation {
            ThresholdReputation::Raw => reps.rep(m),
            ThresholdReputation::Normalized => reps.share(m),
            ThresholdReputation::MeanOne => reps.share(m) * reps.len() as f64,
        };
        self.w * self.threshold_unit * rep
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferConfig {
    pub w_max: f64,
}

impl Default for BufferConfig {
    fn default() -> Self {
        BufferConfig { w_max: 200.0 }
    }
}

/// Mode assignment by reputation rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Ranks cycle best-effort, content, inactive (rank 1 is best-effort).
    Honest,
    /// As `Honest`, with every rank divisible by 6 malicious.
    Malicious,
    AllBestEffort,
    AllContent,
    AllInactive,
}

impl Layout {
    pub fn mode_for(self, id: NodeId) -> ModeKind {
        let rank = id.rank();
        let honest = match rank % 3 {
            1 => ModeKind::BestEffort,
            2 => ModeKind::Content,
            _ => ModeKind::Inactive,
        };
        match self {
            Layout::Honest => honest,
            Layout::Malicious if rank.is_multiple_of(6) => ModeKind::Malicious,
            Layout::Malicious => honest,
            Layout::AllBestEffort => ModeKind::BestEffort,
            Layout::AllContent => ModeKind::Content,
            Layout::AllInactive => ModeKind::Inactive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IotNodes {
    None,
    /// Odd node numbers (even ranks) issue IoT-sized transactions.
    Odd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub layout: Layout,
    /// Explicit per-node modes; overrides `layout`.
    pub modes: Option<Vec<ModeKind>>,
    /// Content nodes issue at this fraction of their assured rate.
    pub content_fraction: f64,
    /// Per-node content rates (work/s); overrides `content_fraction`.
    pub content_rates: Option<Vec<f64>>,
    /// Malicious nodes issue at this multiple of their assured rate.
    pub malicious_multiplier: f64,
    pub work: WorkDistribution,
    pub iot_work: WorkDistribution,
    pub iot_nodes: IotNodes,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            layout: Layout::Honest,
            modes: None,
            content_fraction: 0.5,
            content_rates: None,
            malicious_multiplier: 10.0,
            work: WorkDistribution::Fixed { value: 1.0 },
            iot_work: WorkDistribution::Uniform {
                low: 0.25,
                high: 0.75,
            },
            iot_nodes: IotNodes::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessControl {
    /// DRR- scheduler, AIMD rate setter and LQD buffer management.
    Acc,
    /// FIFO scheduling with issue rates fixed by computing power.
    Pow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowConfig {
    /// Nodes marked inactive by the layout stay silent (active power below
    /// the estimate).
    pub exclude_inactive: bool,
    /// Multiplier on every node's computing power.
    pub power_scale: f64,
    /// Exponential solve times instead of deterministic ones.
    pub stochastic: bool,
}

impl Default for PowConfig {
    fn default() -> Self {
        PowConfig {
            exclude_inactive: false,
            power_scale: 1.0,
            stochastic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Sliding window for dissemination rate and latency series, seconds.
    pub window: f64,
    /// Sample spacing of exported series, seconds.
    pub stride: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window: 10.0,
            stride: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub duration: f64,
    pub runs: usize,
    pub seed: u64,
    pub access_control: AccessControl,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            duration: 180.0,
            runs: 5,
            seed: 1,
            access_control: AccessControl::Acc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSwitch {
    pub at: f64,
    pub node: u32,
    pub mode: ModeKind,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    fn to_table(&self) -> toml::Table {
        match toml::Value::try_from(self).expect("configuration always serialises") {
            toml::Value::Table(t) => t,
            _ => unreachable!("configuration serialises to a table"),
        }
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))
    }

    /// Deep-merges a TOML document over this configuration.
    pub fn merged_with_toml(&self, s: &str) -> Result<Self> {
        let over: toml::Table = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let mut base = self.to_table();
        merge_tables(&mut base, over);
        Self::from_table(base)
    }

    /// Applies `section.key=value` overrides. Values are parsed as TOML
    /// literals, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = self.to_table();
        for item in overrides {
            let item = item.as_ref();
            let (path, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override `{item}` is not key=value")))?;
            let value = parse_literal(raw.trim());
            let keys: Vec<&str> = path.trim().split('.').collect();
            set_path(&mut table, &keys, value)
                .map_err(|msg| Error::Parse(format!("override `{item}`: {msg}")))?;
        }
        Self::from_table(table)
    }

    pub fn reputations(&self) -> Result<ReputationVector> {
        let n = self.network.nodes;
        let reps = match &self.reputation.values {
            Some(v) if v.len() != n => {
                return Err(Error::config(format!(
                    "reputation.values has {} entries for {n} nodes",
                    v.len()
                )))
            }
            Some(v) => ReputationVector::new(v.clone())?,
            None => ReputationVector::zipf(n, self.reputation.zipf_exponent)?,
        };
        match self.reputation.total {
            Some(t) if t > 0.0 => reps.scaled_to_total(t),
            Some(t) => Err(Error::config(format!("reputation.total must be positive, got {t}"))),
            None => Ok(reps),
        }
    }

    pub fn mode_kinds(&self) -> Result<Vec<ModeKind>> {
        let n = self.network.nodes;
        match &self.workload.modes {
            Some(m) if m.len() != n => Err(Error::config(format!(
                "workload.modes has {} entries for {n} nodes",
                m.len()
            ))),
            Some(m) => Ok(m.clone()),
            None => Ok((0..n).map(|i| self.workload.layout.mode_for(NodeId::from(i))).collect()),
        }
    }

    /// Content rate of node `m` in work/s.
    pub fn content_rate(&self, m: NodeId, reps: &ReputationVector) -> Result<f64> {
        match &self.workload.content_rates {
            Some(r) => r
                .get(m.index())
                .copied()
                .ok_or_else(|| Error::config("workload.content_rates is shorter than the node count")),
            None => Ok(self.workload.content_fraction * assured_rate(m, reps, self.scheduler.nu)?),
        }
    }

    pub fn node_mode(&self, m: NodeId, kind: ModeKind, reps: &ReputationVector) -> Result<NodeMode> {
        Ok(match kind {
            ModeKind::Inactive => NodeMode::Inactive,
            ModeKind::Content => NodeMode::Content {
                rate: self.content_rate(m, reps)?,
            },
            ModeKind::BestEffort => NodeMode::BestEffort,
            ModeKind::Malicious => NodeMode::Malicious {
                multiplier: self.workload.malicious_multiplier,
            },
        })
    }

    pub fn node_modes(&self, reps: &ReputationVector) -> Result<Vec<NodeMode>> {
        self.mode_kinds()?
            .into_iter()
            .enumerate()
            .map(|(i, k)| self.node_mode(NodeId::from(i), k, reps))
            .collect()
    }

    pub fn work_distribution(&self, m: NodeId) -> WorkDistribution {
        match self.workload.iot_nodes {
            IotNodes::Odd if m.0 % 2 == 1 => self.workload.iot_work,
            _ => self.workload.work,
        }
    }

    pub fn max_work(&self) -> f64 {
        let mut w = self.workload.work.max();
        if self.workload.iot_nodes != IotNodes::None {
            w = w.max(self.workload.iot_work.max());
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        let s = &self.scheduler;
        let r = &self.rate;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::config(msg)) };

        check(n.nodes >= 1, "network.nodes must be at least 1")?;
        check(
            n.delay_min > 0.0 && n.delay_max >= n.delay_min,
            "network delays need 0 < delay_min <= delay_max",
        )?;
        check(n.delay_std >= 0.0, "network.delay_std must be >= 0")?;
        check(n.delay_floor > 0.0, "network.delay_floor must be > 0")?;
        check(s.nu > 0.0, "scheduler.nu must be > 0")?;
        check(s.quantum_scale > 0.0, "scheduler.quantum_scale must be > 0")?;
        check(s.dc_max > 0.0, "scheduler.dc_max must be > 0")?;
        check(s.idle_poll > 0.0, "scheduler.idle_poll must be > 0")?;
        check(r.a > 0.0, "rate.a must be > 0")?;
        check(r.beta > 0.0 && r.beta < 1.0, "rate.beta must lie in (0, 1)")?;
        check(r.tau > 0.0, "rate.tau must be > 0")?;
        check(r.w > 0.0, "rate.w must be > 0")?;
        check(r.threshold_unit > 0.0, "rate.threshold_unit must be > 0")?;
        check(r.ema_coeff > 0.0 && r.ema_coeff <= 1.0, "rate.ema_coeff must lie in (0, 1]")?;
        check(self.buffer.w_max > 0.0, "buffer.w_max must be > 0")?;
        check(
            self.workload.content_fraction > 0.0 && self.workload.content_fraction <= 1.0,
            "workload.content_fraction must lie in (0, 1]",
        )?;
        check(
            self.workload.malicious_multiplier > 1.0,
            "workload.malicious_multiplier must be > 1",
        )?;
        self.workload.work.validate()?;
        self.workload.iot_work.validate()?;
        check(
            self.max_work() <= s.dc_max,
            "scheduler.dc_max must be at least the largest transaction work",
        )?;
        check(self.pow.power_scale > 0.0, "pow.power_scale must be > 0")?;
        check(self.metrics.window > 0.0, "metrics.window must be > 0")?;
        check(self.metrics.stride > 0.0, "metrics.stride must be > 0")?;
        check(
            self.run.duration >= 0.0 && self.run.duration.is_finite(),
            "run.duration must be finite and >= 0",
        )?;
        check(self.run.runs >= 1, "run.runs must be at least 1")?;

        let reps = self.reputations()?;
        let kinds = self.mode_kinds()?;
        for (i, kind) in kinds.iter().enumerate() {
            let m = NodeId::from(i);
            if *kind == ModeKind::Content {
                let rate = self.content_rate(m, &reps)?;
                let assured = assured_rate(m, &reps, s.nu)?;
                if !(rate > 0.0 && rate <= assured * (1.0 + 1e-12)) {
                    return Err(Error::config(format!(
                        "content rate {rate} of node {m} must lie in (0, {assured}]"
                    )));
                }
            }
        }
        for ev in &self.events {
            check(
                (ev.node as usize) < n.nodes,
                "events: node id out of range",
            )?;
            check(
                ev.at >= 0.0 && ev.at <= self.run.duration,
                "events: switch time outside the run",
            )?;
            check(
                ev.mode != ModeKind::Malicious && kinds[ev.node as usize] != ModeKind::Malicious,
                "events: switching to or from malicious mode is not supported",
            )?;
        }
        crate::network::topology::check_feasible(n.nodes, n.neighbours, n.graph)
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, keys: &[&str], value: toml::Value) -> std::result::Result<(), String> {
    match keys {
        [] => Err("empty key".into()),
        [last] => {
            table.insert((*last).to_string(), value);
            Ok(())
        }
        [first, rest @ ..] => {
            let entry = table
                .entry((*first).to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => set_path(t, rest, value),
                _ => Err(format!("`{first}` is not a section")),
            }
        }
    }
}

fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
