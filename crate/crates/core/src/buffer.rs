//! Longest-queue-drop buffer management, with queue length measured in work
//! and scaled by the issuer's reputation.

use crate::model::{NodeId, ReputationVector, Transaction};
use crate::scheduler::Inbox;

/// argmax_i W(Inbox(i)) / rep_i over non-empty queues; ties go to the lowest id.
pub fn scaled_longest(inbox: &Inbox, reps: &ReputationVector) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for i in 0..inbox.node_count() {
        let id = NodeId::from(i);
        if !inbox.has_backlog(id) {
            continue;
        }
        let ratio = inbox.issuer_work(id) / reps.rep(id);
        if best.is_none_or(|(_, b)| ratio > b) {
            best = Some((id, ratio));
        }
    }
    best.map(|(id, _)| id)
}

/// Drops queue heads until W(Inbox) ≤ `w_max`. Returns the dropped
/// transactions in drop order.
pub fn enforce_capacity(inbox: &mut Inbox, reps: &ReputationVector, w_max: f64) -> Vec<Transaction> {
    let mut dropped = Vec::new();
    while inbox.total_work() > w_max {
        let Some(d) = scaled_longest(inbox, reps) else {
            break;
        };
        if let Some(tx) = inbox.pop_head(d) {
            dropped.push(tx);
        }
    }
    dropped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TxId;

    fn fill(inbox: &mut Inbox, issuer: u32, count: u32, start_serial: u32) {
        for seq in 0..count {
            let tx = Transaction::new(
                TxId { issuer: NodeId(issuer), seq },
                start_serial + seq,
                1.0,
                0.0,
            );
            inbox.enqueue(tx).unwrap();
        }
    }

    #[test]
    fn below_cap_drops_nothing() {
        let reps = ReputationVector::new(vec![1.0, 5.0]).unwrap();
        let mut inbox = Inbox::new(2);
        fill(&mut inbox, 0, 50, 0);
        fill(&mut inbox, 1, 100, 1000);
        assert!(enforce_capacity(&mut inbox, &reps, 200.0).is_empty());
    }

    #[test]
    fn drops_head_of_scaled_longest() {
        let reps = ReputationVector::new(vec![1.0, 5.0, 1.0]).unwrap();
        let mut inbox = Inbox::new(3);
        fill(&mut inbox, 0, 50, 0);
        fill(&mut inbox, 1, 100, 1000);
        fill(&mut inbox, 2, 51, 2000);
        // ratios 50, 20, 51 → issuer 2 loses its oldest
        let dropped = enforce_capacity(&mut inbox, &reps, 200.0);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].id, TxId { issuer: NodeId(2), seq: 0 });
        assert_eq!(inbox.total_work(), 200.0);
    }

    #[test]
    fn tie_goes_to_lowest_id() {
        let reps = ReputationVector::new(vec![1.0, 1.0]).unwrap();
        let mut inbox = Inbox::new(2);
        fill(&mut inbox, 0, 3, 0);
        fill(&mut inbox, 1, 3, 100);
        assert_eq!(scaled_longest(&inbox, &reps), Some(NodeId(0)));
        let dropped = enforce_capacity(&mut inbox, &reps, 5.0);
        assert_eq!(dropped[0].issuer(), NodeId(0));
    }

    #[test]
    fn empty_inbox_has_no_longest() {
        let reps = ReputationVector::new(vec![1.0]).unwrap();
        assert_eq!(scaled_longest(&Inbox::new(1), &reps), None);
    }
}
