//! Random overlay graphs and the delay model of their channels.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::GraphModel;
use crate::error::{Error, Result};
use crate::model::NodeId;
use crate::rng::SimRng;

/// Sorted neighbour lists, one per node.
pub type Adjacency = Vec<Vec<NodeId>>;

pub fn check_feasible(n: usize, k: usize, model: GraphModel) -> Result<()> {
    if n == 1 && k == 0 {
        return Ok(());
    }
    if n <= k {
        return Err(Error::Topology(format!("{n} nodes cannot each have {k} neighbours")));
    }
    if k == 0 {
        return Err(Error::Topology("neighbour count must be at least 1".into()));
    }
    if model == GraphModel::RandomRegular && (n * k) % 2 == 1 {
        return Err(Error::Topology(format!("no {k}-regular graph on {n} nodes (n·k is odd)")));
    }
    Ok(())
}

pub fn build_topology(n: usize, k: usize, model: GraphModel, rng: &mut SimRng) -> Result<Adjacency> {
    check_feasible(n, k, model)?;
    if n == 1 {
        return Ok(vec![Vec::new()]);
    }
    loop {
        let adj = match model {
            GraphModel::RandomRegular => match pair_stubs(n, k, rng) {
                Some(adj) => adj,
                None => continue,
            },
            GraphModel::PickK => pick_k(n, k, rng),
        };
        if is_connected(&adj) {
            return Ok(adj);
        }
    }
}

/// One configuration-model pairing; `None` if it has a loop or multi-edge.
fn pair_stubs(n: usize, k: usize, rng: &mut SimRng) -> Option<Adjacency> {
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    stubs.shuffle(rng);
    let mut adj: Adjacency = vec![Vec::with_capacity(k); n];
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        if u == v || adj[u as usize].contains(&NodeId(v)) {
            return None;
        }
        adj[u as usize].push(NodeId(v));
        adj[v as usize].push(NodeId(u));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Some(adj)
}

fn pick_k(n: usize, k: usize, rng: &mut SimRng) -> Adjacency {
    let mut adj: Adjacency = vec![Vec::new(); n];
    for u in 0..n {
        let others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
        for &v in others.choose_multiple(rng, k) {
            if !adj[u].contains(&NodeId::from(v)) {
                adj[u].push(NodeId::from(v));
                adj[v].push(NodeId::from(u));
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

pub fn is_connected(adj: &Adjacency) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for v in &adj[u] {
            if !seen[v.index()] {
                seen[v.index()] = true;
                count += 1;
                stack.push(v.index());
            }
        }
    }
    count == adj.len()
}

/// Bidirectional link with a fixed mean delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub endpoints: (NodeId, NodeId),
    pub mean_delay: f64,
    pub per_tx_std: f64,
}

impl Channel {
    /// N(mean, std) clamped below at `floor`.
    pub fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R, floor: f64) -> f64 {
        if self.per_tx_std == 0.0 {
            return self.mean_delay.max(floor);
        }
        let z: f64 = rng.sample(StandardNormal);
        (self.mean_delay + self.per_tx_std * z).max(floor)
    }
}

/// One channel per edge (u < v), with means drawn uniformly from `[lo, hi]`.
pub fn build_channels(adj: &Adjacency, lo: f64, hi: f64, std: f64, rng: &mut SimRng) -> Vec<Channel> {
    let mut out = Vec::new();
    for (u, list) in adj.iter().enumerate() {
        for &v in list {
            if v.index() > u {
                let mean_delay = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                out.push(Channel {
                    endpoints: (NodeId::from(u), v),
                    mean_delay,
                    per_tx_std: std,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn rng(seed: u64) -> SimRng {
        stream_rng(seed, Stream::Topology)
    }

    #[test]
    fn five_nodes_degree_four_is_complete() {
        let adj = build_topology(5, 4, GraphModel::RandomRegular, &mut rng(3)).unwrap();
        for (u, list) in adj.iter().enumerate() {
            let want: Vec<NodeId> = (0..5).filter(|&v| v != u).map(NodeId::from).collect();
            assert_eq!(list, &want);
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let a = build_topology(50, 4, GraphModel::RandomRegular, &mut rng(11)).unwrap();
        let b = build_topology(50, 4, GraphModel::RandomRegular, &mut rng(11)).unwrap();
        let c = build_topology(50, 4, GraphModel::RandomRegular, &mut rng(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn regular_connected_and_simple() {
        for seed in 0..20 {
            let adj = build_topology(50, 4, GraphModel::RandomRegular, &mut rng(seed)).unwrap();
            assert!(is_connected(&adj));
            for (u, list) in adj.iter().enumerate() {
                assert_eq!(list.len(), 4);
                assert!(!list.contains(&NodeId::from(u)));
                assert!(list.windows(2).all(|w| w[0] < w[1]));
                for v in list {
                    assert!(adj[v.index()].contains(&NodeId::from(u)));
                }
            }
        }
    }

    #[test]
    fn pick_k_has_min_degree_k() {
        let adj = build_topology(30, 4, GraphModel::PickK, &mut rng(5)).unwrap();
        assert!(is_connected(&adj));
        assert!(adj.iter().all(|l| l.len() >= 4));
    }

    #[test]
    fn infeasible_rejected() {
        assert!(build_topology(4, 4, GraphModel::RandomRegular, &mut rng(0)).is_err());
        assert!(build_topology(5, 3, GraphModel::RandomRegular, &mut rng(0)).is_err());
        assert!(build_topology(5, 3, GraphModel::PickK, &mut rng(0)).is_ok());
    }

    #[test]
    fn zero_std_gives_mean() {
        let ch = Channel {
            endpoints: (NodeId(0), NodeId(1)),
            mean_delay: 0.1,
            per_tx_std: 0.0,
        };
        assert_eq!(ch.sample_delay(&mut rng(0), 0.001), 0.1);
    }

    #[test]
    fn delay_sample_mean() {
        let ch = Channel {
            endpoints: (NodeId(0), NodeId(1)),
            mean_delay: 0.1,
            per_tx_std: 0.02,
        };
        let mut r = rng(9);
        let n = 10_000;
        let mean = (0..n).map(|_| ch.sample_delay(&mut r, 0.001)).sum::<f64>() / n as f64;
        assert!((mean - 0.1).abs() < 3.0 * 0.02 / (n as f64).sqrt());
    }

    #[test]
    fn delay_truncated_at_floor() {
        let ch = Channel {
            endpoints: (NodeId(0), NodeId(1)),
            mean_delay: 0.005,
            per_tx_std: 0.02,
        };
        let mut r = rng(4);
        assert!((0..10_000).all(|_| ch.sample_delay(&mut r, 0.001) >= 0.001));
    }

    #[test]
    fn channel_means_in_range() {
        let adj = build_topology(50, 4, GraphModel::RandomRegular, &mut rng(1)).unwrap();
        let chans = build_channels(&adj, 0.05, 0.15, 0.02, &mut rng(2));
        assert_eq!(chans.len(), 100);
        assert!(chans.iter().all(|c| (0.05..=0.15).contains(&c.mean_delay)));
    }
}
