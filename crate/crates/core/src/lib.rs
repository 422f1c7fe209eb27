//! Reputation-based access control for DAG ledgers and the discrete-event
//! network simulator used to evaluate it.
//!
//! The access-control stack has three parts that every node runs on its
//! inbox: the DRR- fair [`scheduler`], the AIMD [`rate_setter`] used by
//! best-effort nodes, and longest-queue-drop [`buffer`] management. The
//! [`network`] engine wires nodes together over a random overlay with
//! stochastic delays; [`metrics`] observes dissemination; [`scenarios`]
//! holds the experiment presets and CSV export.
//!
//! ```
//! use dlt_access::{run, SimConfig};
//!
//! let mut cfg = SimConfig::default();
//! cfg.network.nodes = 10;
//! cfg.run.duration = 5.0;
//! let result = run(&cfg).unwrap();
//! assert!(!result.ledger.records().is_empty());
//! ```

pub mod buffer;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod network;
pub mod node;
pub mod pow;
pub mod rate_setter;
pub mod rng;
pub mod scenarios;
pub mod scheduler;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use metrics::{maxmin_oracle, Demand, Filter, MetricsLedger};
pub use model::{assured_rate, total_work, zipf_reputations, ModeKind, NodeId, NodeMode, ReputationVector, Transaction, TxId};
pub use network::{run, run_with_observer, Observer, RunResult};
pub use scenarios::{run_batch, run_scenario, write_outcome, Execution, Scenario};
