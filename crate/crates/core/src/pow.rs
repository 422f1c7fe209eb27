//! Proof-of-work baseline: issue rates fixed by computing power, FIFO
//! scheduling and no buffer policy.
//!
//! Computing power follows the reputation (Zipf) shape. Difficulty is
//! calibrated so that every node issuing at full power would load the
//! network at exactly ν.

use crate::error::{Error, Result};
use crate::model::{NodeId, ReputationVector};

#[derive(Debug, Clone, PartialEq)]
pub struct PowModel {
    /// Hashes per second, up to a common unit.
    pub compute_power: Vec<f64>,
    /// Hashes per unit of writing work.
    pub difficulty: f64,
    pub power_scale: f64,
    /// Nodes that actually use their power.
    pub active: Vec<bool>,
}

impl PowModel {
    pub fn calibrated(reps: &ReputationVector, nu: f64, power_scale: f64, active: Vec<bool>) -> Result<Self> {
        if active.len() != reps.len() {
            return Err(Error::config("active set does not match the node count"));
        }
        if !(nu > 0.0 && power_scale > 0.0) {
            return Err(Error::config("PoW needs positive ν and power scale"));
        }
        Ok(PowModel {
            compute_power: reps.values().to_vec(),
            difficulty: reps.total() / nu,
            power_scale,
            active,
        })
    }

    /// Work per second node `m` can issue.
    pub fn issue_rate(&self, m: NodeId) -> f64 {
        if !self.active[m.index()] {
            return 0.0;
        }
        self.compute_power[m.index()] * self.power_scale / self.difficulty
    }

    pub fn aggregate_rate(&self) -> f64 {
        (0..self.active.len()).map(|i| self.issue_rate(NodeId::from(i))).sum()
    }
}
