//! A full node: duplicate filter, inbox with buffer management, scheduler,
//! rate setter and flooding.
//!
//! The node is a passive state machine. The engine feeds it arrivals and
//! timer expiries and carries out the effects it reports (deliveries,
//! metrics updates).

use std::collections::VecDeque;

use bitvec::vec::BitVec;
use smallvec::SmallVec;

use crate::buffer::enforce_capacity;
use crate::model::{NodeId, NodeMode, ReputationVector, Transaction};
use crate::rate_setter::{RateParams, RateState, RateUpdate};
use crate::scheduler::{DrrScheduler, Inbox};

/// How the inbox is drained.
#[derive(Debug, Clone)]
pub enum Discipline {
    /// DRR- (or classic DRR) over per-issuer queues, with LQD buffer
    /// management at `w_max`.
    Fair {
        scheduler: DrrScheduler,
        inbox: Inbox,
        w_max: f64,
    },
    /// One arrival-ordered queue and no buffer policy.
    Fifo {
        queue: VecDeque<Transaction>,
        work: f64,
    },
}

/// Result of handing a transaction to a node.
#[derive(Debug, Clone, PartialEq)]
pub enum Received {
    /// Queued for scheduling; `dropped` lists what buffer management removed
    /// to make room (possibly including the new transaction itself).
    Queued { dropped: Vec<Transaction> },
    Duplicate,
}

pub type Targets = SmallVec<[NodeId; 8]>;

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub mode: NodeMode,
    pub neighbours: Vec<NodeId>,
    pub discipline: Discipline,
    /// Present while the node runs the AIMD rate setter.
    pub rate: Option<RateState>,
    seen: BitVec,
    visible: BitVec,
    pub issue_seq: u32,
}

fn set_bit(bits: &mut BitVec, i: u32) {
    let i = i as usize;
    if i >= bits.len() {
        bits.resize((i + 1).next_power_of_two().max(1024), false);
    }
    bits.set(i, true);
}

fn get_bit(bits: &BitVec, i: u32) -> bool {
    bits.get(i as usize).is_some_and(|b| *b)
}

impl NodeState {
    pub fn new(id: NodeId, mode: NodeMode, neighbours: Vec<NodeId>, discipline: Discipline) -> Self {
        debug_assert!(!neighbours.contains(&id));
        NodeState {
            id,
            mode,
            neighbours,
            discipline,
            rate: None,
            seen: BitVec::new(),
            visible: BitVec::new(),
            issue_seq: 0,
        }
    }

    pub fn has_seen(&self, serial: u32) -> bool {
        get_bit(&self.seen, serial)
    }

    /// In V_m.
    pub fn is_visible(&self, serial: u32) -> bool {
        get_bit(&self.visible, serial)
    }

    /// W(Inbox_m)
    pub fn inbox_work(&self) -> f64 {
        match &self.discipline {
            Discipline::Fair { inbox, .. } => inbox.total_work(),
            Discipline::Fifo { work, .. } => *work,
        }
    }

    /// W(Inbox_m(m))
    pub fn own_work(&self) -> f64 {
        match &self.discipline {
            Discipline::Fair { inbox, .. } => inbox.issuer_work(self.id),
            Discipline::Fifo { queue, .. } => queue
                .iter()
                .filter(|tx| tx.issuer() == self.id)
                .map(|tx| tx.work)
                .sum(),
        }
    }

    pub fn inbox_is_empty(&self) -> bool {
        match &self.discipline {
            Discipline::Fair { inbox, .. } => inbox.is_empty(),
            Discipline::Fifo { queue, .. } => queue.is_empty(),
        }
    }

    pub fn inbox(&self) -> Option<&Inbox> {
        match &self.discipline {
            Discipline::Fair { inbox, .. } => Some(inbox),
            Discipline::Fifo { .. } => None,
        }
    }

    /// Arrival of `tx` from neighbour `from`.
    pub fn receive(&mut self, mut tx: Transaction, from: NodeId, reps: &ReputationVector) -> Received {
        if self.has_seen(tx.serial) {
            self.note_sender(tx.issuer(), tx.serial, from);
            return Received::Duplicate;
        }
        tx.seen_from.clear();
        tx.seen_from.push(from);
        self.admit(tx, reps)
    }

    /// A freshly issued own transaction entering the own inbox.
    pub fn admit_own(&mut self, tx: Transaction, reps: &ReputationVector) -> Received {
        debug_assert_eq!(tx.issuer(), self.id);
        self.admit(tx, reps)
    }

    fn admit(&mut self, tx: Transaction, reps: &ReputationVector) -> Received {
        set_bit(&mut self.seen, tx.serial);
        match &mut self.discipline {
            Discipline::Fair { inbox, w_max, .. } => {
                inbox
                    .enqueue(tx)
                    .expect("duplicate filter keeps the inbox free of repeats");
                Received::Queued {
                    dropped: enforce_capacity(inbox, reps, *w_max),
                }
            }
            Discipline::Fifo { queue, work } => {
                *work += tx.work;
                queue.push_back(tx);
                Received::Queued { dropped: Vec::new() }
            }
        }
    }

    fn note_sender(&mut self, issuer: NodeId, serial: u32, from: NodeId) {
        let copy = match &mut self.discipline {
            Discipline::Fair { inbox, .. } => inbox.find_mut(issuer, serial),
            Discipline::Fifo { queue, .. } => queue.iter_mut().rev().find(|tx| tx.serial == serial),
        };
        if let Some(tx) = copy {
            if !tx.seen_from.contains(&from) {
                tx.seen_from.push(from);
            }
        }
    }

    /// Own transaction of a malicious node: straight into V_m, forwarded to
    /// every neighbour.
    pub fn publish_unscheduled(&mut self, tx: &Transaction) -> Targets {
        set_bit(&mut self.seen, tx.serial);
        set_bit(&mut self.visible, tx.serial);
        self.neighbours.iter().copied().collect()
    }

    /// Next transaction out of the scheduler, if any is ready now.
    pub fn next_scheduled(&mut self) -> Option<Transaction> {
        match &mut self.discipline {
            Discipline::Fair { scheduler, inbox, .. } => scheduler.next(inbox),
            Discipline::Fifo { queue, work } => {
                let tx = queue.pop_front()?;
                *work = if queue.is_empty() { 0.0 } else { *work - tx.work };
                Some(tx)
            }
        }
    }

    /// One idle round of deficit accrual. Returns `true` once further idle
    /// rounds would change nothing (always for FIFO).
    pub fn idle_round(&mut self) -> bool {
        match &mut self.discipline {
            Discipline::Fair { scheduler, inbox, .. } => scheduler.idle_cycle(inbox),
            Discipline::Fifo { .. } => true,
        }
    }

    /// Write and forward a transaction the scheduler just emitted, and run
    /// the rate setter. Returns the forwarding targets.
    pub fn on_scheduled_local(&mut self, tx: &Transaction, now: f64, params: RateParams) -> (Targets, Option<RateUpdate>) {
        set_bit(&mut self.visible, tx.serial);
        let targets = self
            .neighbours
            .iter()
            .copied()
            .filter(|n| *n != tx.issuer() && !tx.seen_from.contains(n))
            .collect();
        if self.rate.is_none() {
            return (targets, None);
        }
        let own = self.own_work();
        let update = self
            .rate
            .as_mut()
            .map(|rate| rate.on_scheduled(tx.work, own, now, params));
        (targets, update)
    }
}
