//! DRR- fair scheduler.
//!
//! Every node keeps one FIFO queue per issuer and visits issuers in a fixed
//! round-robin order. On each visit the issuer's deficit counter is topped up
//! by its quantum (proportional to reputation) if it is below `dc_max`, and
//! this happens whether or not the queue has anything in it. Queued heads are
//! then scheduled while the counter covers their work.
//!
//! With `empty_queue_accrual` switched off the scheduler behaves like classic
//! DRR: only backlogged queues earn quantum and a counter is reset to zero
//! when its queue empties.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{NodeId, ReputationVector, Transaction};

/// Per-issuer FIFO queues with cached work totals.
#[derive(Debug, Clone)]
pub struct Inbox {
    queues: Vec<VecDeque<Transaction>>,
    per_issuer_work: Vec<f64>,
    total_work: f64,
    len: usize,
}

impl Inbox {
    pub fn new(node_count: usize) -> Self {
        Inbox {
            queues: vec![VecDeque::new(); node_count],
            per_issuer_work: vec![0.0; node_count],
            total_work: 0.0,
            len: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.queues.len()
    }

    pub fn enqueue(&mut self, tx: Transaction) -> Result<()> {
        let i = tx.issuer().index();
        let queue = self
            .queues
            .get_mut(i)
            .ok_or(Error::UnknownNode(tx.issuer()))?;
        if queue.iter().rev().any(|q| q.id == tx.id) {
            return Err(Error::DuplicateTransaction(tx.id));
        }
        self.per_issuer_work[i] += tx.work;
        self.total_work += tx.work;
        self.len += 1;
        queue.push_back(tx);
        Ok(())
    }

    pub fn head(&self, issuer: NodeId) -> Option<&Transaction> {
        self.queues[issuer.index()].front()
    }

    pub fn pop_head(&mut self, issuer: NodeId) -> Option<Transaction> {
        let i = issuer.index();
        let tx = self.queues[i].pop_front()?;
        self.len -= 1;
        if self.queues[i].is_empty() {
            self.per_issuer_work[i] = 0.0;
        } else {
            self.per_issuer_work[i] -= tx.work;
        }
        if self.len == 0 {
            self.total_work = 0.0;
        } else {
            self.total_work -= tx.work;
        }
        Some(tx)
    }

    /// Mutable access to a queued copy, for recording extra senders.
    pub fn find_mut(&mut self, issuer: NodeId, serial: u32) -> Option<&mut Transaction> {
        self.queues[issuer.index()]
            .iter_mut()
            .rev()
            .find(|tx| tx.serial == serial)
    }

    pub fn queue(&self, issuer: NodeId) -> &VecDeque<Transaction> {
        &self.queues[issuer.index()]
    }

    /// W(Inbox)
    pub fn total_work(&self) -> f64 {
        self.total_work
    }

    /// W(Inbox(i))
    pub fn issuer_work(&self, issuer: NodeId) -> f64 {
        self.per_issuer_work[issuer.index()]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn has_backlog(&self, issuer: NodeId) -> bool {
        !self.queues[issuer.index()].is_empty()
    }

    /// Recomputes the cached totals from the queues and reports whether they
    /// agree (within accumulated rounding).
    pub fn caches_coherent(&self) -> bool {
        let mut total = 0.0;
        for (q, cached) in self.queues.iter().zip(&self.per_issuer_work) {
            let w: f64 = q.iter().map(|tx| tx.work).sum();
            if (w - cached).abs() > 1e-9 * (1.0 + w) {
                return false;
            }
            total += w;
        }
        let len: usize = self.queues.iter().map(VecDeque::len).sum();
        len == self.len && (total - self.total_work).abs() <= 1e-9 * (1.0 + total)
    }
}

/// Deficit counters and quanta.
#[derive(Debug, Clone)]
pub struct DeficitState {
    counters: Vec<f64>,
    quanta: Vec<f64>,
    dc_max: f64,
    empty_queue_accrual: bool,
}

impl DeficitState {
    /// Quanta are `quantum_scale · rep_i / Σ rep`.
    pub fn new(reps: &ReputationVector, quantum_scale: f64, dc_max: f64) -> Self {
        let quanta = reps
            .values()
            .iter()
            .map(|r| quantum_scale * r / reps.total())
            .collect::<Vec<_>>();
        DeficitState {
            counters: vec![0.0; quanta.len()],
            quanta,
            dc_max,
            empty_queue_accrual: true,
        }
    }

    /// `false` gives classic DRR.
    pub fn with_empty_queue_accrual(mut self, enabled: bool) -> Self {
        self.empty_queue_accrual = enabled;
        self
    }

    pub fn empty_queue_accrual(&self) -> bool {
        self.empty_queue_accrual
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    pub fn counter(&self, i: NodeId) -> f64 {
        self.counters[i.index()]
    }

    pub fn set_counter(&mut self, i: NodeId, value: f64) {
        assert!(value >= 0.0, "deficit counters are non-negative");
        self.counters[i.index()] = value;
    }

    pub fn quantum(&self, i: NodeId) -> f64 {
        self.quanta[i.index()]
    }

    pub fn dc_max(&self) -> f64 {
        self.dc_max
    }

    /// Start-of-visit top-up. The cap is checked before adding, so a counter
    /// can end up to one quantum above `dc_max`.
    fn accrue(&mut self, i: NodeId, backlogged: bool) {
        if !backlogged && !self.empty_queue_accrual {
            return;
        }
        let dc = &mut self.counters[i.index()];
        if *dc < self.dc_max {
            *dc += self.quanta[i.index()];
        }
    }

    /// Schedules the head of `i`'s queue if the counter covers it.
    fn pop_affordable(&mut self, i: NodeId, inbox: &mut Inbox) -> Option<Transaction> {
        let work = inbox.head(i)?.work;
        let dc = &mut self.counters[i.index()];
        if *dc < work {
            return None;
        }
        *dc -= work;
        let tx = inbox.pop_head(i);
        if !self.empty_queue_accrual && !inbox.has_backlog(i) {
            self.counters[i.index()] = 0.0;
        }
        tx
    }

    /// A visit to `i` would neither add deficit nor schedule anything.
    fn visit_is_noop(&self, i: NodeId, inbox: &Inbox) -> bool {
        !inbox.has_backlog(i) && (!self.empty_queue_accrual || self.counters[i.index()] >= self.dc_max)
    }

    /// No further idle rounds can change any counter.
    pub fn saturated(&self, inbox: &Inbox) -> bool {
        (0..self.counters.len()).all(|i| self.visit_is_noop(NodeId::from(i), inbox))
    }
}

/// Result of one visit: what was scheduled, and when the scheduler is free
/// again given that each transaction occupies it for |tx|/ν.
#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub scheduled: Vec<Transaction>,
    pub busy_until: f64,
}

/// One visit to `issuer`.
pub fn visit(
    issuer: NodeId,
    state: &mut DeficitState,
    inbox: &mut Inbox,
    nu: f64,
    now: f64,
) -> Visit {
    state.accrue(issuer, inbox.has_backlog(issuer));
    let mut scheduled = Vec::new();
    let mut busy_until = now;
    while let Some(tx) = state.pop_affordable(issuer, inbox) {
        busy_until += tx.work / nu;
        scheduled.push(tx);
    }
    Visit {
        scheduled,
        busy_until,
    }
}

/// One full round-robin cycle over all issuers in ascending id order.
pub fn round(state: &mut DeficitState, inbox: &mut Inbox, nu: f64, now: f64) -> Visit {
    let mut out = Visit {
        scheduled: Vec::new(),
        busy_until: now,
    };
    for i in 0..state.len() {
        let v = visit(NodeId::from(i), state, inbox, nu, out.busy_until);
        out.scheduled.extend(v.scheduled);
        out.busy_until = v.busy_until;
    }
    out
}

/// Incremental form of the round-robin loop, for event-driven use: each call
/// to [`next`](Self::next) resumes exactly where the previous call stopped
/// and returns the next transaction to schedule. The caller accounts for the
/// |tx|/ν service time between calls.
#[derive(Debug, Clone)]
pub struct DrrScheduler {
    deficits: DeficitState,
    cursor: usize,
    in_visit: bool,
    skip_idle: bool,
    cycles: u64,
}

impl DrrScheduler {
    pub fn new(deficits: DeficitState) -> Self {
        DrrScheduler {
            deficits,
            cursor: 0,
            in_visit: false,
            skip_idle: true,
            cycles: 0,
        }
    }

    /// Skipping issuers whose visit is a no-op (full deficit, empty queue).
    pub fn with_skip_idle(mut self, skip: bool) -> Self {
        self.skip_idle = skip;
        self
    }

    pub fn deficits(&self) -> &DeficitState {
        &self.deficits
    }

    pub fn deficits_mut(&mut self) -> &mut DeficitState {
        &mut self.deficits
    }

    /// Completed round-robin cycles.
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    fn advance(&mut self) {
        self.in_visit = false;
        self.cursor += 1;
        if self.cursor == self.deficits.len() {
            self.cursor = 0;
            self.cycles += 1;
        }
    }

    /// Next transaction in DRR- order, or `None` if the inbox is empty.
    /// Cycles without elapsed time while nothing is affordable.
    pub fn next(&mut self, inbox: &mut Inbox) -> Option<Transaction> {
        if inbox.is_empty() {
            return None;
        }
        loop {
            let i = NodeId::from(self.cursor);
            if !self.in_visit {
                if self.skip_idle && self.deficits.visit_is_noop(i, inbox) {
                    self.advance();
                    continue;
                }
                self.deficits.accrue(i, inbox.has_backlog(i));
                self.in_visit = true;
            }
            if let Some(tx) = self.deficits.pop_affordable(i, inbox) {
                return Some(tx);
            }
            self.advance();
        }
    }

    /// One cycle of visits while the inbox is empty; only deficit accrues.
    /// Returns `true` once further idle cycles would change nothing.
    pub fn idle_cycle(&mut self, inbox: &Inbox) -> bool {
        debug_assert!(inbox.is_empty());
        for _ in 0..self.deficits.len() {
            let i = NodeId::from(self.cursor);
            if !self.in_visit {
                self.deficits.accrue(i, false);
            }
            self.advance();
        }
        self.deficits.saturated(inbox)
    }
}
