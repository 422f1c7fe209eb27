//! Domain types shared by every component: node and transaction identities,
//! the reputation vector, node operating modes and the closed-form rate
//! quantities derived from them.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Identity of a node. Nodes are numbered densely from zero in decreasing
/// reputation order, so `NodeId(0)` is the rank-1 node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 1-based reputation rank.
    pub fn rank(self) -> usize {
        self.index() + 1
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Transaction identity: issuer plus the issuer's own sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId {
    pub issuer: NodeId,
    pub seq: u32,
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.issuer, self.seq)
    }
}

/// Unit of dissemination.
///
/// `serial` is a dense, simulation-wide index assigned in issue order; it is
/// what per-node bitsets and the metrics ledger are keyed on. `seen_from`
/// is local to one node's copy and lists the neighbours that copy (or its
/// duplicates) arrived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub id: TxId,
    pub serial: u32,
    pub work: f64,
    pub issue_time: f64,
    pub seen_from: SmallVec<[NodeId; 4]>,
}

impl Transaction {
    pub fn new(id: TxId, serial: u32, work: f64, issue_time: f64) -> Self {
        assert!(work > 0.0 && work.is_finite(), "transaction work must be positive");
        assert!(issue_time >= 0.0, "issue time must be non-negative");
        Transaction {
            id,
            serial,
            work,
            issue_time,
            seen_from: SmallVec::new(),
        }
    }

    #[inline]
    pub fn issuer(&self) -> NodeId {
        self.id.issuer
    }

    /// Copy of this transaction as it goes on the wire (no local history).
    pub fn wire_copy(&self) -> Transaction {
        Transaction {
            seen_from: SmallVec::new(),
            ..self.clone()
        }
    }
}

/// W(A): total writing work of a collection of transactions.
pub fn total_work<'a, I>(txs: I) -> f64
where
    I: IntoIterator<Item = &'a Transaction>,
{
    txs.into_iter().map(|tx| tx.work).sum()
}

/// Per-node reputation. Values are kept as given (not normalised); every
/// formula that needs a share divides by [`ReputationVector::total`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationVector {
    values: Vec<f64>,
    total: f64,
}

impl ReputationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("reputation vector must not be empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::config(format!("reputation of node {i} must be positive, got {v}")));
        }
        let total = values.iter().sum();
        Ok(ReputationVector { values, total })
    }

    /// Zipf-shaped reputations: the rank-i node gets `i^-s`.
    pub fn zipf(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("zipf reputations need at least one node"));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::config(format!("zipf exponent must be >= 0, got {s}")));
        }
        Self::new((1..=n).map(|i| (i as f64).powf(-s)).collect())
    }

    /// Same shape, rescaled so the values sum to `total`.
    pub fn scaled_to_total(&self, total: f64) -> Result<Self> {
        let k = total / self.total;
        Self::new(self.values.iter().map(|v| v * k).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: NodeId) -> Result<f64> {
        self.values.get(m.index()).copied().ok_or(Error::UnknownNode(m))
    }

    /// Reputation of `m`. Panics on an unknown node; use [`get`](Self::get)
    /// when the id is untrusted.
    #[inline]
    pub fn rep(&self, m: NodeId) -> f64 {
        self.values[m.index()]
    }

    /// rep_m / Σ rep
    #[inline]
    pub fn share(&self, m: NodeId) -> f64 {
        self.rep(m) / self.total
    }
}

pub fn zipf_reputations(n: usize, s: f64) -> Result<ReputationVector> {
    ReputationVector::zipf(n, s)
}

/// Assured issue rate: ν · rep_m / Σ rep_i, in work per second.
pub fn assured_rate(m: NodeId, reps: &ReputationVector, nu: f64) -> Result<f64> {
    Ok(nu * reps.get(m)? / reps.total())
}

/// How a node issues its own transactions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeMode {
    Inactive,
    /// Poisson issuing at a fixed work rate.
    Content { rate: f64 },
    /// AIMD-controlled leaky bucket.
    BestEffort,
    /// Deterministic issuing at `multiplier` times the assured rate, skipping
    /// its own scheduler.
    Malicious { multiplier: f64 },
}

impl NodeMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            NodeMode::Inactive => ModeKind::Inactive,
            NodeMode::Content { .. } => ModeKind::Content,
            NodeMode::BestEffort => ModeKind::BestEffort,
            NodeMode::Malicious { .. } => ModeKind::Malicious,
        }
    }

    pub fn is_honest(&self) -> bool {
        !matches!(self, NodeMode::Malicious { .. })
    }
}

/// Mode without its parameters, as written in configuration files and CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Inactive,
    Content,
    BestEffort,
    Malicious,
}

impl ModeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeKind::Inactive => "inactive",
            ModeKind::Content => "content",
            ModeKind::BestEffort => "best-effort",
            ModeKind::Malicious => "malicious",
        }
    }
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distribution of |tx| for the transactions a node issues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WorkDistribution {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl WorkDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            WorkDistribution::Fixed { value } => value,
            WorkDistribution::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            WorkDistribution::Fixed { value } => value,
            WorkDistribution::Uniform { high, .. } => high,
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            WorkDistribution::Fixed { value } => value,
            WorkDistribution::Uniform { low, .. } => low,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WorkDistribution::Fixed { value } => value,
            WorkDistribution::Uniform { low, high } if high > low => rng.random_range(low..high),
            WorkDistribution::Uniform { low, .. } => low,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = match *self {
            WorkDistribution::Fixed { value } => value > 0.0 && value.is_finite(),
            WorkDistribution::Uniform { low, high } => low > 0.0 && high >= low && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid work distribution {self:?}")))
        }
    }
}
