//! Property checks shared by the proptest suite and the acceptance runner.
#![allow(dead_code)]

use std::collections::VecDeque;

use dlt_access::buffer::enforce_capacity;
use dlt_access::config::SimConfig;
use dlt_access::metrics::{coefficient_of_variation, Filter};
use dlt_access::model::{ModeKind, NodeId, ReputationVector, Transaction, TxId, WorkDistribution};
use dlt_access::rate_setter::{RateParams, RateState, RateUpdate};
use dlt_access::scheduler::{DeficitState, DrrScheduler, Inbox};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 1000;

pub fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn tx(issuer: usize, seq: usize, serial: usize, work: f64) -> Transaction {
    Transaction::new(
        TxId {
            issuer: NodeId::from(issuer),
            seq: seq as u32,
        },
        serial as u32,
        work,
        0.0,
    )
}

// ---------------------------------------------------------------- DRR-

#[derive(Debug, Clone)]
pub struct FairnessCase {
    pub reps: Vec<f64>,
    pub dc_max: f64,
    /// Per-issuer transaction works; every queue holds `pops` of them.
    pub works: Vec<Vec<f64>>,
    pub pops: usize,
    pub classic: bool,
}

pub fn fairness_case() -> impl Strategy<Value = FairnessCase> {
    (2usize..=5, 1.0f64..3.0, 20usize..300, any::<bool>()).prop_flat_map(|(n, dc_max, pops, classic)| {
        (
            prop::collection::vec(0.05f64..10.0, n),
            prop::collection::vec(prop::collection::vec(0.1f64..=1.0, pops), n),
        )
            .prop_map(move |(reps, works)| FairnessCase {
                reps,
                dc_max,
                works: works
                    .into_iter()
                    .map(|w| w.into_iter().map(|x| x * dc_max).collect())
                    .collect(),
                pops,
                classic,
            })
    })
}

/// Continuously backlogged issuers stay within the DRR lag bound after
/// every single scheduling step, and each issuer is served in FIFO order.
pub fn check_drr_fairness(c: &FairnessCase) -> Result<(), TestCaseError> {
    let n = c.reps.len();
    let reps = ReputationVector::new(c.reps.clone()).unwrap();
    let deficits = DeficitState::new(&reps, 1.0, c.dc_max).with_empty_queue_accrual(!c.classic);
    let quanta: Vec<f64> = (0..n).map(|i| deficits.quantum(NodeId::from(i))).collect();
    let q_min = quanta.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_work = c.works.iter().flatten().cloned().fold(0.0, f64::max);
    let bound = (c.dc_max + max_work) / q_min + 1e-9;

    let mut inbox = Inbox::new(n);
    let mut serial = 0;
    for (i, ws) in c.works.iter().enumerate() {
        for (k, &w) in ws.iter().enumerate() {
            inbox.enqueue(tx(i, k, serial, w)).unwrap();
            serial += 1;
        }
    }
    let mut sched = DrrScheduler::new(deficits);
    let mut served = vec![0.0; n];
    let mut next_seq = vec![0u32; n];
    for _ in 0..c.pops {
        let t = sched.next(&mut inbox).expect("backlogged inbox yields a transaction");
        let i = t.issuer().index();
        prop_assert_eq!(t.id.seq, next_seq[i], "FIFO violated for issuer {}", i);
        next_seq[i] += 1;
        served[i] += t.work;
        for a in 0..n {
            for b in a + 1..n {
                let lag = (served[a] / quanta[a] - served[b] / quanta[b]).abs();
                prop_assert!(lag <= bound, "lag {} > bound {} between {} and {}", lag, bound, a, b);
            }
        }
        for i in 0..n {
            prop_assert!(sched.deficits().counter(NodeId::from(i)) >= 0.0);
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CapCase {
    pub reps: Vec<f64>,
    pub quantum_scale: f64,
    pub dc_max: f64,
    /// Works fed to issuer 0 before the idle phase.
    pub burst: Vec<f64>,
    pub idle_cycles: usize,
}

pub fn cap_case() -> impl Strategy<Value = CapCase> {
    (
        prop::collection::vec(0.01f64..10.0, 1..8),
        0.05f64..4.0,
        0.1f64..3.0,
        prop::collection::vec(0.01f64..1.0, 0..10),
        1usize..400,
    )
        .prop_map(|(reps, quantum_scale, dc_max, burst, idle_cycles)| CapCase {
            reps,
            quantum_scale,
            dc_max,
            burst: burst.into_iter().map(|w| w * dc_max).collect(),
            idle_cycles,
        })
}

/// An issuer with an empty queue never holds more than `dc_max + Q_i`.
pub fn check_deficit_cap(c: &CapCase) -> Result<(), TestCaseError> {
    let n = c.reps.len();
    let reps = ReputationVector::new(c.reps.clone()).unwrap();
    let mut sched = DrrScheduler::new(DeficitState::new(&reps, c.quantum_scale, c.dc_max)).with_skip_idle(false);
    let mut inbox = Inbox::new(n);
    for (k, &w) in c.burst.iter().enumerate() {
        inbox.enqueue(tx(0, k, k, w)).unwrap();
    }
    while sched.next(&mut inbox).is_some() {}
    for _ in 0..c.idle_cycles {
        sched.idle_cycle(&inbox);
        for i in 0..n {
            let id = NodeId::from(i);
            let dc = sched.deficits().counter(id);
            let q = sched.deficits().quantum(id);
            prop_assert!(dc >= 0.0);
            prop_assert!(dc < c.dc_max + q, "issuer {} holds {} ≥ {} + {}", i, dc, c.dc_max, q);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- LQD

#[derive(Debug, Clone)]
pub struct LqdCase {
    pub reps: Vec<f64>,
    pub works: Vec<Vec<f64>>,
    pub w_max: f64,
}

pub fn lqd_case() -> impl Strategy<Value = LqdCase> {
    (1usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![Just(1.0), 0.05f64..10.0], n),
            // multiples of 1/8 keep every work sum exact, so the oracle and
            // the cached totals agree bit for bit
            prop::collection::vec(prop::collection::vec((1u32..=16).prop_map(|k| f64::from(k) / 8.0), 0..40), n),
            0.5f64..60.0,
        )
            .prop_map(|(reps, works, w_max)| LqdCase { reps, works, w_max })
    })
}

/// Brute-force LQD: recompute the scaled argmax after every drop.
pub fn lqd_oracle(reps: &[f64], works: &[Vec<f64>], w_max: f64) -> Vec<(usize, usize)> {
    let mut queues: Vec<VecDeque<(usize, f64)>> = works
        .iter()
        .map(|ws| ws.iter().cloned().enumerate().collect())
        .collect();
    let mut dropped = Vec::new();
    loop {
        let total: f64 = queues.iter().flatten().map(|(_, w)| w).sum();
        if total <= w_max {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, q) in queues.iter().enumerate() {
            if q.is_empty() {
                continue;
            }
            let ratio = q.iter().map(|(_, w)| w).sum::<f64>() / reps[i];
            if best.is_none_or(|(_, b)| ratio > b) {
                best = Some((i, ratio));
            }
        }
        let (d, _) = best.unwrap();
        let (seq, _) = queues[d].pop_front().unwrap();
        dropped.push((d, seq));
    }
    dropped
}

pub fn check_lqd(c: &LqdCase) -> Result<(), TestCaseError> {
    let reps = ReputationVector::new(c.reps.clone()).unwrap();
    let mut inbox = Inbox::new(c.reps.len());
    let mut serial = 0;
    for (i, ws) in c.works.iter().enumerate() {
        for (k, &w) in ws.iter().enumerate() {
            inbox.enqueue(tx(i, k, serial, w)).unwrap();
            serial += 1;
        }
    }
    let before = inbox.total_work();
    let dropped = enforce_capacity(&mut inbox, &reps, c.w_max);
    let got: Vec<(usize, usize)> = dropped
        .iter()
        .map(|t| (t.issuer().index(), t.id.seq as usize))
        .collect();
    let expected = lqd_oracle(&c.reps, &c.works, c.w_max);
    prop_assert!(inbox.total_work() <= c.w_max);
    prop_assert!(inbox.caches_coherent());
    if before <= c.w_max {
        prop_assert!(got.is_empty());
    }
    prop_assert_eq!(got, expected);
    Ok(())
}

// ---------------------------------------------------------------- AIMD

#[derive(Debug, Clone)]
pub struct AimdCase {
    pub lambda0: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub ema_coeff: f64,
    pub beta: f64,
    pub tau: f64,
    /// (time step, own-work sample, scheduled work)
    pub steps: Vec<(f64, f64, f64)>,
}

pub fn aimd_case() -> impl Strategy<Value = AimdCase> {
    (
        0.01f64..50.0,
        0.0f64..0.5,
        0.01f64..20.0,
        0.01f64..=1.0,
        0.05f64..0.99,
        0.01f64..5.0,
        prop::collection::vec((0.0f64..0.5, 0.0f64..40.0, 0.1f64..2.0), 1..400),
    )
        .prop_map(|(lambda0, alpha, threshold, ema_coeff, beta, tau, steps)| AimdCase {
            lambda0,
            alpha,
            threshold,
            ema_coeff,
            beta,
            tau,
            steps,
        })
}

/// Decreases are at least τ apart, nothing but the EMA moves while paused,
/// and λ never drops below β^k · λ0.
pub fn check_aimd_pause(c: &AimdCase) -> Result<(), TestCaseError> {
    let params = RateParams {
        beta: c.beta,
        tau: c.tau,
    };
    let mut s = RateState::new(c.lambda0, c.alpha, c.threshold, c.ema_coeff);
    let mut twin = s.clone();
    let mut now = 0.0;
    let mut last_decrease: Option<f64> = None;
    let mut decreases = 0;
    for &(dt, sample, work) in &c.steps {
        now += dt;
        let before = s.lambda;
        let paused = s.is_paused(now);
        let up = s.on_scheduled(work, sample, now, params);
        prop_assert_eq!(up, twin.on_scheduled(work, sample, now, params));
        prop_assert_eq!(s.lambda, twin.lambda);
        match up {
            RateUpdate::Held => {
                prop_assert!(paused);
                prop_assert_eq!(s.lambda, before);
            }
            RateUpdate::Decreased => {
                prop_assert!(!paused);
                if let Some(t) = last_decrease {
                    prop_assert!(now - t >= c.tau, "decreases at {} and {} closer than τ={}", t, now, c.tau);
                }
                last_decrease = Some(now);
                decreases += 1;
                prop_assert!((s.lambda - before * c.beta).abs() <= 1e-12 * before);
                prop_assert!(s.next_issue_time(now, 1.0) >= now + c.tau - 1e-12);
            }
            RateUpdate::Increased => {
                prop_assert!(!paused);
                prop_assert!((s.lambda - (before + c.alpha * work)).abs() <= 1e-9 * s.lambda.max(1.0));
            }
        }
        prop_assert!(s.lambda > 0.0);
        prop_assert!(s.lambda >= c.lambda0 * c.beta.powi(decreases) * (1.0 - 1e-9));
    }
    Ok(())
}

// ---------------------------------------------------------------- Poisson issuer

#[derive(Debug, Clone)]
pub struct PoissonCase {
    pub rate: f64,
    pub variable_work: bool,
    pub seed: u64,
}

pub fn poisson_case() -> impl Strategy<Value = PoissonCase> {
    (0.5f64..20.0, any::<bool>(), any::<u64>()).prop_map(|(rate, variable_work, seed)| PoissonCase {
        rate,
        variable_work,
        seed,
    })
}

/// Single content node on its own: issued work rate matches λ, and gaps
/// between issues are exponential (mean |tx|/λ, coefficient of variation 1).
pub fn check_poisson_issuer(c: &PoissonCase) -> Result<(), TestCaseError> {
    const EXPECTED_ISSUES: f64 = 1500.0;
    let mut cfg = SimConfig::default();
    cfg.network.nodes = 1;
    cfg.network.neighbours = 0;
    cfg.scheduler.nu = 100.0;
    cfg.workload.modes = Some(vec![ModeKind::Content]);
    cfg.workload.content_rates = Some(vec![c.rate]);
    if c.variable_work {
        cfg.workload.work = WorkDistribution::Uniform { low: 0.25, high: 0.75 };
    }
    let mean_work = cfg.workload.work.mean();
    let duration = EXPECTED_ISSUES * mean_work / c.rate;
    cfg.run.duration = duration;
    cfg.run.seed = c.seed;
    let r = dlt_access::run(&cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;

    let times: Vec<f64> = r.ledger.records().iter().map(|t| t.issue_time).collect();
    let count = times.len() as f64;
    // 5σ band on a Poisson count
    prop_assert!(
        (count - EXPECTED_ISSUES).abs() <= 5.0 * EXPECTED_ISSUES.sqrt(),
        "{} issues, expected {}",
        count,
        EXPECTED_ISSUES
    );
    let work_rate = r.ledger.issued_rate(0.0, duration, Filter::All);
    prop_assert!(
        (work_rate - c.rate).abs() <= 0.15 * c.rate,
        "issued {} work/s, configured {}",
        work_rate,
        c.rate
    );
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let cv = coefficient_of_variation(&gaps);
    prop_assert!((0.85..=1.15).contains(&cv), "gap CoV {}", cv);
    Ok(())
}
