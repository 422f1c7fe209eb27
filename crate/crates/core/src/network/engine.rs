//! Single-threaded discrete-event engine advancing every node.

use rand_distr::{Distribution, Exp};

use super::event::{Event, EventKind, EventQueue};
use super::topology::{build_channels, build_topology, Adjacency, Channel};
use crate::config::{AccessControl, SimConfig};
use crate::error::Result;
use crate::metrics::MetricsLedger;
use crate::model::{assured_rate, ModeKind, NodeId, NodeMode, ReputationVector, Transaction, TxId, WorkDistribution};
use crate::node::{Discipline, NodeState, Received};
use crate::pow::PowModel;
use crate::rate_setter::{local_alpha, RateParams, RateState, RateUpdate};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::scheduler::{DeficitState, DrrScheduler, Inbox};

/// Hooks into the run. Every method defaults to doing nothing.
pub trait Observer {
    fn on_event(&mut self, _event: &Event) {}
    /// W(Inbox) right after an arrival was queued, before any drops.
    fn on_enqueue(&mut self, _node: NodeId, _inbox_work: f64, _time: f64) {}
    fn on_scheduled(&mut self, _node: NodeId, _tx: &Transaction, _time: f64) {}
    fn on_drop(&mut self, _node: NodeId, _tx: &Transaction, _time: f64) {}
    fn on_rate(&mut self, _node: NodeId, _lambda: f64, _update: RateUpdate, _time: f64) {}
}

impl Observer for () {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeStats {
    /// Peak W(Inbox) seen right after an arrival, before buffer management.
    pub peak_inbox_work: f64,
    pub scheduled: u64,
    pub dropped: u64,
    pub rate_decreases: u64,
    pub final_lambda: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub duration: f64,
    pub reputations: ReputationVector,
    pub initial_modes: Vec<ModeKind>,
    pub final_modes: Vec<ModeKind>,
    pub adjacency: Adjacency,
    /// Mean delay of each `(u, v, mean)` channel, u < v.
    pub channel_means: Vec<(NodeId, NodeId, f64)>,
    pub ledger: MetricsLedger,
    pub nodes: Vec<NodeStats>,
    pub events: u64,
}

struct Runtime {
    sched_gen: u64,
    busy: bool,
    issue_gen: u64,
    last_issue: f64,
    next_work: f64,
    work: WorkDistribution,
    issue_rng: SimRng,
    delay_rng: SimRng,
    /// Channel to each neighbour, aligned with `NodeState::neighbours`.
    links: Vec<Channel>,
}

pub struct Simulation<'c, O: Observer> {
    cfg: &'c SimConfig,
    reps: ReputationVector,
    nodes: Vec<NodeState>,
    rt: Vec<Runtime>,
    stats: Vec<NodeStats>,
    queue: EventQueue,
    ledger: MetricsLedger,
    pow: Option<PowModel>,
    params: RateParams,
    initial_modes: Vec<ModeKind>,
    adjacency: Adjacency,
    channel_means: Vec<(NodeId, NodeId, f64)>,
    observer: O,
    events: u64,
}

pub fn run(cfg: &SimConfig) -> Result<RunResult> {
    run_with_observer(cfg, ())
}

pub fn run_with_observer<O: Observer>(cfg: &SimConfig, observer: O) -> Result<RunResult> {
    Ok(Simulation::new(cfg, observer)?.run().0)
}

impl<'c, O: Observer> Simulation<'c, O> {
    pub fn new(cfg: &'c SimConfig, observer: O) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.run.seed;
        let n = cfg.network.nodes;
        let reps = cfg.reputations()?;
        let kinds = cfg.mode_kinds()?;
        let modes = cfg.node_modes(&reps)?;
        let net = &cfg.network;
        let adjacency = build_topology(n, net.neighbours, net.graph, &mut stream_rng(seed, Stream::Topology))?;
        let channels = build_channels(
            &adjacency,
            net.delay_min,
            net.delay_max,
            net.delay_std,
            &mut stream_rng(seed, Stream::ChannelMeans),
        );
        let mut links: Vec<Vec<Option<Channel>>> = adjacency.iter().map(|l| vec![None; l.len()]).collect();
        for ch in &channels {
            let (u, v) = ch.endpoints;
            let iu = adjacency[u.index()].binary_search(&v).expect("channel endpoints are adjacent");
            let iv = adjacency[v.index()].binary_search(&u).expect("channel endpoints are adjacent");
            links[u.index()][iu] = Some(*ch);
            links[v.index()][iv] = Some(*ch);
        }

        let acc = cfg.run.access_control == AccessControl::Acc;
        let pow = if acc {
            None
        } else {
            let active = kinds
                .iter()
                .map(|k| !(cfg.pow.exclude_inactive && *k == ModeKind::Inactive))
                .collect();
            Some(PowModel::calibrated(&reps, cfg.scheduler.nu, cfg.pow.power_scale, active)?)
        };

        let mut nodes = Vec::with_capacity(n);
        let mut rt = Vec::with_capacity(n);
        for (i, (mode, neighbours)) in modes.iter().zip(&adjacency).enumerate() {
            let id = NodeId::from(i);
            let discipline = if acc {
                let deficits = DeficitState::new(&reps, cfg.scheduler.quantum_scale, cfg.scheduler.dc_max)
                    .with_empty_queue_accrual(cfg.scheduler.empty_queue_accrual);
                Discipline::Fair {
                    scheduler: DrrScheduler::new(deficits),
                    inbox: Inbox::new(n),
                    w_max: cfg.buffer.w_max,
                }
            } else {
                Discipline::Fifo {
                    queue: Default::default(),
                    work: 0.0,
                }
            };
            nodes.push(NodeState::new(id, *mode, neighbours.clone(), discipline));
            let work = cfg.work_distribution(id);
            let mut issue_rng = stream_rng(seed, Stream::Issue(id));
            let next_work = work.sample(&mut issue_rng);
            rt.push(Runtime {
                sched_gen: 0,
                busy: false,
                issue_gen: 0,
                last_issue: 0.0,
                next_work,
                work,
                issue_rng,
                delay_rng: stream_rng(seed, Stream::Delay(id)),
                links: links[i].iter().map(|c| c.expect("every edge has a channel")).collect(),
            });
        }

        let honest = modes.iter().map(NodeMode::is_honest).collect();
        let mut sim = Simulation {
            cfg,
            reps,
            nodes,
            rt,
            stats: vec![NodeStats::default(); n],
            queue: EventQueue::new(),
            ledger: MetricsLedger::new(honest),
            pow,
            params: RateParams {
                beta: cfg.rate.beta,
                tau: cfg.rate.tau,
            },
            initial_modes: kinds,
            adjacency,
            channel_means: channels
                .iter()
                .map(|c| (c.endpoints.0, c.endpoints.1, c.mean_delay))
                .collect(),
            observer,
            events: 0,
        };
        for i in 0..n {
            let id = NodeId::from(i);
            sim.init_rate_setter(id)?;
            sim.kick_scheduler(id, 0.0);
            sim.schedule_issue(id, 0.0);
        }
        for ev in &cfg.events {
            sim.queue.push(
                ev.at,
                EventKind::SetMode {
                    node: NodeId(ev.node),
                    mode: ev.mode,
                },
            );
        }
        Ok(sim)
    }

    fn acc(&self) -> bool {
        self.pow.is_none()
    }

    fn assured(&self, m: NodeId) -> f64 {
        assured_rate(m, &self.reps, self.cfg.scheduler.nu).expect("node ids come from the configuration")
    }

    fn init_rate_setter(&mut self, m: NodeId) -> Result<()> {
        let node = &mut self.nodes[m.index()];
        node.rate = if self.pow.is_none() && node.mode == NodeMode::BestEffort {
            Some(RateState::new(
                assured_rate(m, &self.reps, self.cfg.scheduler.nu)?,
                local_alpha(self.cfg.rate.a, m, &self.reps),
                self.cfg.rate.threshold(m, &self.reps),
                self.cfg.rate.ema_coeff,
            ))
        } else {
            None
        };
        Ok(())
    }

    /// Runs to the configured duration and returns the results along with
    /// the observer.
    pub fn run(mut self) -> (RunResult, O) {
        let end = self.cfg.run.duration;
        while let Some(ev) = self.queue.pop() {
            if ev.time > end {
                break;
            }
            self.events += 1;
            self.observer.on_event(&ev);
            self.handle(ev);
        }
        for (s, node) in self.stats.iter_mut().zip(&self.nodes) {
            s.final_lambda = node.rate.as_ref().map(|r| r.lambda);
        }
        let result = RunResult {
            seed: self.cfg.run.seed,
            duration: end,
            final_modes: self.nodes.iter().map(|n| n.mode.kind()).collect(),
            initial_modes: self.initial_modes,
            reputations: self.reps,
            adjacency: self.adjacency,
            channel_means: self.channel_means,
            ledger: self.ledger,
            nodes: self.stats,
            events: self.events,
        };
        (result, self.observer)
    }

    fn handle(&mut self, ev: Event) {
        let now = ev.time;
        match ev.kind {
            EventKind::Deliver { to, from, serial } => self.deliver(to, from, serial, now),
            EventKind::Issue { node, generation } => {
                if generation == self.rt[node.index()].issue_gen {
                    self.issue(node, now);
                }
            }
            EventKind::Wake { node, generation } => {
                if generation == self.rt[node.index()].sched_gen {
                    self.wake(node, now);
                }
            }
            EventKind::SetMode { node, mode } => self.set_mode(node, mode, now),
        }
    }

    fn wire_copy(&self, serial: u32) -> Transaction {
        let r = self.ledger.record(serial);
        Transaction::new(r.id, serial, r.work, r.issue_time)
    }

    fn deliver(&mut self, to: NodeId, from: NodeId, serial: u32, now: f64) {
        let tx = self.wire_copy(serial);
        let received = self.nodes[to.index()].receive(tx, from, &self.reps);
        self.after_admit(to, received, now);
    }

    fn after_admit(&mut self, m: NodeId, received: Received, now: f64) {
        let Received::Queued { dropped } = received else {
            return;
        };
        let node = &self.nodes[m.index()];
        let before_drops = node.inbox_work() + dropped.iter().map(|t| t.work).sum::<f64>();
        self.observer.on_enqueue(m, before_drops, now);
        let stats = &mut self.stats[m.index()];
        stats.peak_inbox_work = stats.peak_inbox_work.max(before_drops);
        stats.dropped += dropped.len() as u64;
        for tx in &dropped {
            self.ledger.record_drop(tx.serial, m, now);
            self.observer.on_drop(m, tx, now);
        }
        if !node.inbox_is_empty() {
            self.kick_scheduler(m, now);
        }
    }

    /// Wakes an idle scheduler immediately; a busy one picks the new
    /// arrival up when its current service ends.
    fn kick_scheduler(&mut self, m: NodeId, now: f64) {
        let rt = &mut self.rt[m.index()];
        if rt.busy {
            return;
        }
        rt.busy = true;
        rt.sched_gen += 1;
        let generation = rt.sched_gen;
        self.queue.push(now, EventKind::Wake { node: m, generation });
    }

    fn wake(&mut self, m: NodeId, now: f64) {
        let node = &mut self.nodes[m.index()];
        let Some(tx) = node.next_scheduled() else {
            let rt = &mut self.rt[m.index()];
            rt.busy = false;
            if !node.idle_round() {
                let generation = rt.sched_gen;
                self.queue
                    .push(now + self.cfg.scheduler.idle_poll, EventKind::Wake { node: m, generation });
            }
            return;
        };
        let (targets, update) = node.on_scheduled_local(&tx, now, self.params);
        if let (Some(update), Some(rate)) = (update, node.rate.as_ref()) {
            if update == RateUpdate::Decreased {
                self.stats[m.index()].rate_decreases += 1;
            }
            self.observer.on_rate(m, rate.lambda, update, now);
        }
        self.stats[m.index()].scheduled += 1;
        self.ledger.record_arrival(tx.serial, m, now);
        self.observer.on_scheduled(m, &tx, now);
        self.send(m, tx.serial, &targets, now);
        let rt = &self.rt[m.index()];
        self.queue.push(
            now + tx.work / self.cfg.scheduler.nu,
            EventKind::Wake {
                node: m,
                generation: rt.sched_gen,
            },
        );
    }

    fn send(&mut self, from: NodeId, serial: u32, targets: &[NodeId], now: f64) {
        let floor = self.cfg.network.delay_floor;
        let node = &self.nodes[from.index()];
        let rt = &mut self.rt[from.index()];
        for &to in targets {
            let k = node
                .neighbours
                .iter()
                .position(|n| *n == to)
                .expect("targets are neighbours");
            let delay = rt.links[k].sample_delay(&mut rt.delay_rng, floor);
            self.queue.push(now + delay, EventKind::Deliver { to, from, serial });
        }
    }

    /// Arms the issue timer of `m` for its next transaction, given that the
    /// previous one (or the mode change) happened at `now`.
    fn schedule_issue(&mut self, m: NodeId, now: f64) {
        let i = m.index();
        let mean_work = self.rt[i].work.mean();
        let rate = match (&self.pow, self.nodes[i].mode) {
            (Some(pow), _) => pow.issue_rate(m),
            (None, NodeMode::Content { rate }) => rate,
            (None, NodeMode::Malicious { multiplier }) => multiplier * self.assured(m),
            (None, NodeMode::BestEffort) => self.nodes[i].rate.as_ref().map_or(0.0, |r| r.lambda),
            (None, NodeMode::Inactive) => 0.0,
        };
        if rate <= 0.0 {
            return;
        }
        let rt = &mut self.rt[i];
        let poisson = match (&self.pow, self.nodes[i].mode) {
            (Some(_), _) => self.cfg.pow.stochastic,
            (None, NodeMode::Content { .. }) => true,
            _ => false,
        };
        let at = if poisson {
            now + Exp::new(rate / mean_work).expect("positive rate").sample(&mut rt.issue_rng)
        } else if let Some(r) = &self.nodes[i].rate {
            r.next_issue_time(now, rt.next_work)
        } else {
            now + rt.next_work / rate
        };
        self.queue.push(
            at,
            EventKind::Issue {
                node: m,
                generation: rt.issue_gen,
            },
        );
    }

    fn issue(&mut self, m: NodeId, now: f64) {
        let i = m.index();
        if let Some(r) = &self.nodes[i].rate {
            // λ or the pause may have moved since the timer was armed
            let due = r.next_issue_time(self.rt[i].last_issue, self.rt[i].next_work);
            if due > now {
                let generation = self.rt[i].issue_gen;
                self.queue.push(due, EventKind::Issue { node: m, generation });
                return;
            }
        }
        let acc = self.acc();
        let rt = &mut self.rt[i];
        let work = rt.next_work;
        rt.next_work = rt.work.sample(&mut rt.issue_rng);
        rt.last_issue = now;
        let node = &mut self.nodes[i];
        let id = TxId {
            issuer: m,
            seq: node.issue_seq,
        };
        node.issue_seq += 1;
        let serial = self.ledger.register(id, work, now);
        let tx = Transaction::new(id, serial, work, now);
        if acc && matches!(node.mode, NodeMode::Malicious { .. }) {
            let targets = node.publish_unscheduled(&tx);
            self.send(m, serial, &targets, now);
        } else {
            let received = node.admit_own(tx, &self.reps);
            self.after_admit(m, received, now);
        }
        self.schedule_issue(m, now);
    }

    fn set_mode(&mut self, m: NodeId, kind: ModeKind, now: f64) {
        let mode = self
            .cfg
            .node_mode(m, kind, &self.reps)
            .expect("mode switches are validated with the configuration");
        self.nodes[m.index()].mode = mode;
        self.init_rate_setter(m).expect("node ids come from the configuration");
        let rt = &mut self.rt[m.index()];
        rt.issue_gen += 1;
        rt.last_issue = now;
        self.schedule_issue(m, now);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn small(n: usize, k: usize) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.network.nodes = n;
        cfg.network.neighbours = k;
        cfg.run.duration = 20.0;
        cfg
    }

    #[test]
    fn zero_duration_is_empty() {
        let mut cfg = small(10, 4);
        cfg.run.duration = 0.0;
        let r = run(&cfg).unwrap();
        assert!(r.ledger.records().is_empty());
    }

    #[test]
    fn same_seed_same_ledger() {
        let cfg = small(10, 4);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn everything_disseminates_without_drops() {
        let mut cfg = small(10, 4);
        cfg.workload.layout = crate::config::Layout::AllContent;
        let r = run(&cfg).unwrap();
        assert!(r.ledger.drops().is_empty());
        let late = r
            .ledger
            .records()
            .iter()
            .filter(|t| t.issue_time < 15.0 && t.disseminated_at.is_none())
            .count();
        assert_eq!(late, 0);
    }
}
