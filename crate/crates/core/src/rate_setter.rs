//! AIMD issue-rate controller for best-effort nodes.
//!
//! The only congestion signal is the node's own backlog in its own inbox,
//! smoothed by an EMA sampled every time the local scheduler emits a
//! transaction. Above the threshold the rate is cut by β and the controller
//! (and issuing) pauses for τ; otherwise the rate grows by α·|tx|.

use crate::model::{NodeId, ReputationVector};

/// α_m = A · rep_m / Σ rep
pub fn local_alpha(a: f64, m: NodeId, reps: &ReputationVector) -> f64 {
    a * reps.share(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub beta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateUpdate {
    Increased,
    Decreased,
    /// Inside the post-decrease wait; only the EMA moved.
    Held,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateState {
    pub lambda: f64,
    pub alpha: f64,
    pub ema_own_work: f64,
    pub paused_until: f64,
    pub ema_coeff: f64,
    /// Backlog level treated as congestion (W · rep_m).
    pub threshold: f64,
}

impl RateState {
    pub fn new(initial_lambda: f64, alpha: f64, threshold: f64, ema_coeff: f64) -> Self {
        assert!(initial_lambda > 0.0, "initial rate must be positive");
        assert!(ema_coeff > 0.0 && ema_coeff <= 1.0, "ema coefficient must lie in (0, 1]");
        RateState {
            lambda: initial_lambda,
            alpha,
            ema_own_work: 0.0,
            paused_until: f64::NEG_INFINITY,
            ema_coeff,
            threshold,
        }
    }

    pub fn is_paused(&self, now: f64) -> bool {
        now < self.paused_until
    }

    /// Runs once per transaction scheduled at this node. `own_work_sample`
    /// is W(Inbox_m(m)) at that instant.
    pub fn on_scheduled(
        &mut self,
        tx_work: f64,
        own_work_sample: f64,
        now: f64,
        params: RateParams,
    ) -> RateUpdate {
        self.ema_own_work =
            self.ema_coeff * own_work_sample + (1.0 - self.ema_coeff) * self.ema_own_work;
        if self.is_paused(now) {
            return RateUpdate::Held;
        }
        if self.ema_own_work > self.threshold {
            self.lambda *= params.beta;
            self.paused_until = now + params.tau;
            RateUpdate::Decreased
        } else {
            self.lambda += self.alpha * tx_work;
            RateUpdate::Increased
        }
    }

    /// Leaky-bucket spacing: the next transaction of work `next_tx_work`
    /// leaves `next_tx_work / λ` after the previous one, but never during a
    /// pause.
    pub fn next_issue_time(&self, last_issue: f64, next_tx_work: f64) -> f64 {
        (last_issue + next_tx_work / self.lambda).max(self.paused_until)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PARAMS: RateParams = RateParams { beta: 0.7, tau: 2.0 };

    #[test]
    fn alpha_examples() {
        let solo = ReputationVector::new(vec![4.0]).unwrap();
        assert_relative_eq!(local_alpha(0.075, NodeId(0), &solo), 0.075);
        let reps = ReputationVector::new(vec![2.0, 8.0]).unwrap();
        assert_relative_eq!(local_alpha(0.075, NodeId(0), &reps), 0.015);
        assert_eq!(local_alpha(0.0, NodeId(1), &reps), 0.0);
    }

    #[test]
    fn decrease_branch() {
        let mut s = RateState::new(2.0, 0.015, 4.0, 1.0);
        let up = s.on_scheduled(1.0, 4.5, 10.0, PARAMS);
        assert_eq!(up, RateUpdate::Decreased);
        assert_relative_eq!(s.lambda, 1.4);
        assert_eq!(s.paused_until, 12.0);
    }

    #[test]
    fn increase_branch() {
        let mut s = RateState::new(1.0, 0.015, 4.0, 0.5);
        assert_eq!(s.on_scheduled(1.0, 0.0, 0.0, PARAMS), RateUpdate::Increased);
        assert_relative_eq!(s.lambda, 1.015);
    }

    #[test]
    fn ema_tracks_samples_while_paused() {
        let mut s = RateState::new(1.0, 0.1, 1.0, 0.5);
        s.ema_own_work = 4.0;
        assert_eq!(s.on_scheduled(1.0, 4.0, 0.0, PARAMS), RateUpdate::Decreased);
        assert_eq!(s.on_scheduled(1.0, 0.0, 1.0, PARAMS), RateUpdate::Held);
        assert_relative_eq!(s.ema_own_work, 2.0);
        assert_relative_eq!(s.lambda, 0.7);
        // pause over, EMA decayed below threshold
        s.on_scheduled(1.0, 0.0, 2.5, PARAMS);
        assert_relative_eq!(s.lambda, 0.8);
    }

    #[test]
    fn issue_spacing() {
        let s = RateState::new(10.0, 0.0, 1.0, 0.5);
        assert_relative_eq!(s.next_issue_time(3.0, 1.0), 3.1);
        assert_relative_eq!(s.next_issue_time(3.0, 0.5), 3.05);
    }

    #[test]
    fn no_issue_during_pause() {
        let mut s = RateState::new(10.0, 0.0, 0.0, 1.0);
        s.on_scheduled(1.0, 1.0, 5.0, PARAMS);
        assert_eq!(s.paused_until, 7.0);
        let t = s.next_issue_time(5.0, 1.0);
        assert!(t >= 7.0);
    }
}
