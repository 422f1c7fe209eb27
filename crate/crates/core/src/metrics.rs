//! Global observer: which honest nodes have written each transaction and
//! when, and the evaluation quantities derived from that.
//!
//! A transaction is disseminated once every honest node has scheduled it;
//! its dissemination time is the last of those arrivals. Rather than the
//! full arrival map, the ledger keeps the arrival count and the latest
//! arrival per transaction, which is all any metric here needs.

use crate::model::{NodeId, ReputationVector, TxId};

#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub id: TxId,
    pub work: f64,
    pub issue_time: f64,
    pub honest_arrivals: u32,
    pub last_arrival: f64,
    pub disseminated_at: Option<f64>,
}

impl TxRecord {
    pub fn issuer(&self) -> NodeId {
        self.id.issuer
    }

    pub fn latency(&self) -> Option<f64> {
        self.disseminated_at.map(|t| t - self.issue_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropRecord {
    pub serial: u32,
    pub node: NodeId,
    pub time: f64,
}

/// Which issuers a statistic covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    All,
    Honest,
    Issuer(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLedger {
    records: Vec<TxRecord>,
    honest: Vec<bool>,
    honest_count: u32,
    drops: Vec<DropRecord>,
}

impl MetricsLedger {
    /// `honest[i]` marks membership of node i in M*.
    pub fn new(honest: Vec<bool>) -> Self {
        let honest_count = honest.iter().filter(|h| **h).count() as u32;
        MetricsLedger {
            records: Vec::new(),
            honest,
            honest_count,
            drops: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.honest.len()
    }

    pub fn is_honest(&self, m: NodeId) -> bool {
        self.honest[m.index()]
    }

    /// Registers a newly issued transaction; returns its serial.
    pub fn register(&mut self, id: TxId, work: f64, issue_time: f64) -> u32 {
        let serial = self.records.len() as u32;
        self.records.push(TxRecord {
            id,
            work,
            issue_time,
            honest_arrivals: 0,
            last_arrival: f64::NEG_INFINITY,
            disseminated_at: None,
        });
        serial
    }

    /// `tx` entered V_node at `time`.
    pub fn record_arrival(&mut self, serial: u32, node: NodeId, time: f64) {
        if !self.honest[node.index()] {
            return;
        }
        let r = &mut self.records[serial as usize];
        debug_assert!(time >= r.issue_time);
        r.honest_arrivals += 1;
        r.last_arrival = r.last_arrival.max(time);
        if r.honest_arrivals == self.honest_count {
            r.disseminated_at = Some(r.last_arrival);
        }
    }

    pub fn record_drop(&mut self, serial: u32, node: NodeId, time: f64) {
        self.drops.push(DropRecord { serial, node, time });
    }

    pub fn records(&self) -> &[TxRecord] {
        &self.records
    }

    pub fn record(&self, serial: u32) -> &TxRecord {
        &self.records[serial as usize]
    }

    pub fn drops(&self) -> &[DropRecord] {
        &self.drops
    }

    /// Drops of transactions issued by honest nodes.
    pub fn honest_drops(&self) -> usize {
        self.drops
            .iter()
            .filter(|d| self.honest[self.record(d.serial).issuer().index()])
            .count()
    }

    fn accepts(&self, filter: Filter, r: &TxRecord) -> bool {
        match filter {
            Filter::All => true,
            Filter::Honest => self.honest[r.issuer().index()],
            Filter::Issuer(m) => r.issuer() == m,
        }
    }

    fn filtered(&self, filter: Filter) -> impl Iterator<Item = &TxRecord> {
        self.records.iter().filter(move |r| self.accepts(filter, r))
    }

    /// ΔW(D)/Δt over `[t0, t1)`, counting transactions by dissemination time.
    pub fn dissemination_rate(&self, t0: f64, t1: f64, filter: Filter) -> f64 {
        assert!(t1 > t0, "empty window");
        let work: f64 = self
            .filtered(filter)
            .filter(|r| r.disseminated_at.is_some_and(|t| t >= t0 && t < t1))
            .map(|r| r.work)
            .sum();
        work / (t1 - t0)
    }

    /// Work issued per second over `[t0, t1)`.
    pub fn issued_rate(&self, t0: f64, t1: f64, filter: Filter) -> f64 {
        assert!(t1 > t0, "empty window");
        let work: f64 = self
            .filtered(filter)
            .filter(|r| r.issue_time >= t0 && r.issue_time < t1)
            .map(|r| r.work)
            .sum();
        work / (t1 - t0)
    }

    /// DR_i / rep_i
    pub fn scaled_rate(&self, m: NodeId, t0: f64, t1: f64, reps: &ReputationVector) -> f64 {
        self.dissemination_rate(t0, t1, Filter::Issuer(m)) / reps.rep(m)
    }

    /// Latencies of transactions disseminated in `[t0, t1)`.
    pub fn latencies(&self, t0: f64, t1: f64, filter: Filter) -> Vec<f64> {
        self.filtered(filter)
            .filter(|r| r.disseminated_at.is_some_and(|t| t >= t0 && t < t1))
            .filter_map(TxRecord::latency)
            .collect()
    }

    pub fn mean_latency(&self, t0: f64, t1: f64, filter: Filter) -> Option<f64> {
        mean(&self.latencies(t0, t1, filter))
    }

    /// Empirical CDF of all latencies of `filter`'s disseminated
    /// transactions, as sorted `(latency, fraction ≤ latency)` points.
    pub fn latency_cdf(&self, filter: Filter) -> Vec<(f64, f64)> {
        let mut l: Vec<f64> = self.filtered(filter).filter_map(TxRecord::latency).collect();
        empirical_cdf(&mut l)
    }

    /// max(now − issue_time) over transactions issued by `now` and not
    /// disseminated by `now`; 0 if there are none.
    pub fn max_time_in_transit(&self, now: f64, filter: Filter) -> f64 {
        self.filtered(filter)
            .filter(|r| r.issue_time <= now && r.disseminated_at.is_none_or(|t| t > now))
            .map(|r| now - r.issue_time)
            .fold(0.0, f64::max)
    }

    /// [`max_time_in_transit`](Self::max_time_in_transit) at every time in
    /// `times` (ascending). Records are in issue order, so each sample's
    /// answer is the first record still in transit there; a next-free
    /// pointer forest assigns every sample exactly once.
    pub fn max_transit_series(&self, times: &[f64], filter: Filter) -> Vec<f64> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let n = times.len();
        let mut oldest = vec![f64::NAN; n];
        let mut next: Vec<usize> = (0..=n).collect();
        fn find(next: &mut [usize], mut i: usize) -> usize {
            while next[i] != i {
                next[i] = next[next[i]];
                i = next[i];
            }
            i
        }
        for r in self.filtered(filter) {
            let lo = times.partition_point(|&t| t < r.issue_time);
            let hi = match r.disseminated_at {
                Some(d) => times.partition_point(|&t| t < d),
                None => n,
            };
            let mut i = find(&mut next, lo);
            while i < hi {
                oldest[i] = r.issue_time;
                next[i] = i + 1;
                i = find(&mut next, i + 1);
            }
        }
        times
            .iter()
            .zip(oldest)
            .map(|(t, o)| if o.is_nan() { 0.0 } else { t - o })
            .collect()
    }

    /// Sliding-window series sampled at `stride, 2·stride, …, end`: the
    /// window ending at t covers `[max(0, t − window), t)`.
    pub fn series(&self, end: f64, window: f64, stride: f64, filter: Filter) -> Vec<SeriesPoint> {
        let times = sample_times(end, stride);
        let mut done: Vec<(f64, f64, f64)> = self
            .filtered(filter)
            .filter_map(|r| r.disseminated_at.map(|d| (d, r.work, d - r.issue_time)))
            .collect();
        done.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut work_prefix = Vec::with_capacity(done.len() + 1);
        let mut lat_prefix = Vec::with_capacity(done.len() + 1);
        let (mut w, mut l) = (0.0, 0.0);
        work_prefix.push(0.0);
        lat_prefix.push(0.0);
        for &(_, work, lat) in &done {
            w += work;
            l += lat;
            work_prefix.push(w);
            lat_prefix.push(l);
        }
        let transit = self.max_transit_series(&times, filter);
        times
            .iter()
            .zip(transit)
            .map(|(&t, max_transit)| {
                let t0 = (t - window).max(0.0);
                let a = done.partition_point(|x| x.0 < t0);
                let b = done.partition_point(|x| x.0 < t);
                let count = b - a;
                SeriesPoint {
                    t,
                    dr: (work_prefix[b] - work_prefix[a]) / (t - t0),
                    mean_latency: (count > 0).then(|| (lat_prefix[b] - lat_prefix[a]) / count as f64),
                    max_transit,
                }
            })
            .collect()
    }

    /// Per-issuer windowed DR series, one vector per node.
    pub fn node_rate_series(&self, end: f64, window: f64, stride: f64) -> Vec<Vec<f64>> {
        let times = sample_times(end, stride);
        let mut per_node: Vec<Vec<(f64, f64)>> = vec![Vec::new(); self.node_count()];
        for r in &self.records {
            if let Some(d) = r.disseminated_at {
                per_node[r.issuer().index()].push((d, r.work));
            }
        }
        per_node
            .into_iter()
            .map(|mut done| {
                done.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut prefix = vec![0.0];
                for &(_, w) in &done {
                    prefix.push(prefix.last().unwrap() + w);
                }
                times
                    .iter()
                    .map(|&t| {
                        let t0 = (t - window).max(0.0);
                        let a = done.partition_point(|x| x.0 < t0);
                        let b = done.partition_point(|x| x.0 < t);
                        (prefix[b] - prefix[a]) / (t - t0)
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub t: f64,
    pub dr: f64,
    /// `None` when nothing was disseminated in the window.
    pub mean_latency: Option<f64>,
    pub max_transit: f64,
}

/// `stride, 2·stride, …` up to and including `end` (within rounding).
pub fn sample_times(end: f64, stride: f64) -> Vec<f64> {
    let n = ((end / stride) + 1e-9).floor() as usize;
    (1..=n).map(|k| k as f64 * stride).collect()
}

pub fn empirical_cdf(values: &mut [f64]) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / n))
        .collect()
}

/// Per-node demand for the max-min oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demand {
    Bounded(f64),
    Unbounded,
}

/// Reputation-weighted max-min fair allocation of `nu` by water-filling.
pub fn maxmin_oracle(demands: &[Demand], reps: &[f64], nu: f64) -> Vec<f64> {
    assert_eq!(demands.len(), reps.len());
    let mut alloc = vec![0.0; demands.len()];
    let mut active: Vec<usize> = (0..demands.len())
        .filter(|&i| !matches!(demands[i], Demand::Bounded(d) if d <= 0.0))
        .collect();
    let mut remaining = nu;
    while !active.is_empty() && remaining > 0.0 {
        let total_rep: f64 = active.iter().map(|&i| reps[i]).sum();
        let level = remaining / total_rep;
        let (sated, rest): (Vec<usize>, Vec<usize>) = active
            .iter()
            .partition(|&&i| matches!(demands[i], Demand::Bounded(d) if d <= level * reps[i]));
        if sated.is_empty() {
            for &i in &active {
                alloc[i] = level * reps[i];
            }
            break;
        }
        for i in sated {
            if let Demand::Bounded(d) = demands[i] {
                alloc[i] = d;
                remaining -= d;
            }
        }
        active = rest;
    }
    alloc
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs).unwrap();
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Coefficient of variation, population form (std/mean with n denominator).
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs).unwrap_or(0.0);
    if m == 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    var.sqrt() / m
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Least-squares slope of y on x.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x).unwrap_or(0.0), mean(y).unwrap_or(0.0));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}
