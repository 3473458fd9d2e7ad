//! Discrete-event simulator of the two-queues-per-peer Jackson network:
//! origin-tagged jobs, Poisson exogenous arrivals, exponential services at
//! dedicated local/foreign rates, FCFS within each queue, and probabilistic
//! forwarding or resolution after every service.
//!
//! One run is strictly single-threaded and fully determined by its seed; RNG
//! streams are split per (replication, peer, purpose) so instrumentation or
//! extra peers never perturb existing streams.

use serde::{Deserialize, Serialize};
use std::collections::{BinaryHeap, VecDeque};

use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Exp};
use rand_pcg::Pcg64;

use crate::allocation::GoldenRuleAllocation;
use crate::error::{Error, Result};
use crate::flowbalance::{check_stability, solve_flow_balance, FlowSolution};
use crate::model::NetworkSpec;

/// Number of post-warmup batches used for within-run standard errors.
const BATCHES: usize = 20;

/// One query making its way through the network.
#[derive(Debug, Clone)]
pub struct Job {
    /// Peer the query entered the network at; fixed for life.
    pub origin: usize,
    /// Simulation time of the exogenous arrival.
    pub birth_time: f64,
    /// Forwards experienced so far; non-decreasing.
    pub hop_count: u32,
    /// Born after warmup, so its per-job statistics count.
    measured: bool,
    /// Time accumulated so far in other peers' foreign queues.
    rest_time: f64,
    /// When the job entered its current queue.
    entry_time: f64,
}

/// Simulation setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: NetworkSpec,
    /// Local-queue service rate per peer; the foreign queue gets the rest.
    pub mu0: Vec<f64>,
    /// Altruism weights; enables empirical disutility when present.
    pub alpha: Option<Vec<f64>>,
    /// Total exogenous arrivals to generate, across all peers.
    pub horizon: u64,
    /// Fraction of the horizon discarded as warmup, in `[0, 0.5]`.
    pub warmup: f64,
    pub seed: u64,
    pub replications: u32,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        self.spec.check_dimensions()?;
        if self.mu0.len() != self.spec.n {
            return Err(Error::DimensionMismatch(format!(
                "mu0 has {}, expected {}",
                self.mu0.len(),
                self.spec.n
            )));
        }
        if let Some(alpha) = &self.alpha {
            if alpha.len() != self.spec.n {
                return Err(Error::DimensionMismatch(format!(
                    "alpha has {}, expected {}",
                    alpha.len(),
                    self.spec.n
                )));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if !self.spec.lambda0.iter().any(|&l| l > 0.0) {
            return Err(Error::InvalidConfig(
                "no exogenous demand: nothing would ever arrive".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.warmup) {
            return Err(Error::InvalidConfig(format!(
                "warmup fraction {} must lie in [0, 0.5]",
                self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("at least one replication is required".into()));
        }
        Ok(())
    }
}

/// A point estimate with its standard error; across replications when there
/// are several, from batch means within the single run otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Exact per-queue counts and Little's-law ingredients for one replication.
/// Queues are indexed local `0..n`, foreign `n..2n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub end_time: f64,
    pub measured_time: f64,
    pub event_count: u64,
    pub arrivals: Vec<u64>,
    pub departures: Vec<u64>,
    pub in_system_at_end: Vec<u64>,
    /// Time-average occupancy per queue over the measured window.
    pub l_time_avg: Vec<f64>,
    /// Observed arrival rate per queue over the measured window.
    pub lambda_hat: Vec<f64>,
    /// Mean sojourn per completed visit, per queue.
    pub w_mean: Vec<f64>,
    /// Batch-means standard errors for `l_time_avg` / `w_mean`.
    pub l_se: Vec<f64>,
    pub w_se: Vec<f64>,
}

/// Empirical counterparts of the analytic queue statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub l_local: Vec<Estimate>,
    pub l_foreign: Vec<Estimate>,
    /// Entry `(i, j)`, `i != j`: origin-`i` occupancy of `j`'s foreign queue;
    /// the diagonal holds the local occupancy.
    pub l_cross: Vec<Vec<Estimate>>,
    /// Mean per-visit delay in each peer's foreign queue.
    pub foreign_delay: Vec<Estimate>,
    /// Mean end-to-end time from exogenous birth to resolution, per origin.
    pub system_time: Vec<Estimate>,
    /// Mean total time a job spends in *other* peers' foreign queues, per
    /// origin; the empirical left side of the reciprocity condition.
    pub rest_delay: Vec<Estimate>,
    /// Empirical visit rates: origin-`i` arrivals at peer `j` per unit time.
    pub visit_rate: Vec<Vec<Estimate>>,
    /// Empirical disutility per peer when altruism weights were supplied.
    pub disutility: Option<Vec<Estimate>>,
    pub event_count: u64,
    /// Mean simulated horizon time across replications.
    pub sim_time: f64,
    pub replications: u32,
    pub per_replication: Vec<ReplicationSummary>,
}

/// Reciprocity check against a simulation: per-peer ratio of the delay a
/// peer's traffic collected elsewhere to the delay factor it imposed at home.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProportionalityTable {
    /// Empirical ratio per peer; clusters around `kappa` under a golden-rule
    /// allocation.
    pub ratios: Vec<f64>,
    pub kappa: f64,
    /// Largest `|ratio - kappa| / kappa`.
    pub max_rel_deviation: f64,
    /// `(max ratio - min ratio) / kappa`.
    pub spread: f64,
}

/// Builds the proportionality table for a report produced under `alloc`.
pub fn verify_golden_rule(
    report: &SimReport,
    _flow: &FlowSolution,
    alloc: &GoldenRuleAllocation,
) -> ProportionalityTable {
    let ratios: Vec<f64> = report
        .rest_delay
        .iter()
        .zip(&report.foreign_delay)
        .map(|(rest, own)| rest.mean / own.mean)
        .collect();
    let kappa = alloc.kappa;
    let max_rel_deviation =
        ratios.iter().fold(0.0_f64, |acc, r| acc.max((r - kappa).abs() / kappa));
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    ProportionalityTable { ratios, kappa, max_rel_deviation, spread: (hi - lo) / kappa }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum QueueClass {
    Local,
    Foreign,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    /// Exogenous arrival at a peer.
    Arrival { peer: usize },
    /// Service completion at one queue.
    ServiceDone { peer: usize, class: QueueClass },
}

struct HeapEvent {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for HeapEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for HeapEvent {}
impl PartialOrd for HeapEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops
        // first and ties break deterministically
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Occupancy and delay accounting for one queue, with lazy area updates per
/// origin so every event costs O(1).
struct QueueState {
    jobs: VecDeque<Job>,
    rate: f64,
    arrivals: u64,
    departures: u64,
    area: f64,
    last_t: f64,
    count_by_origin: Vec<u64>,
    area_by_origin: Vec<f64>,
    last_t_by_origin: Vec<f64>,
    sojourn_sum: f64,
    sojourn_count: u64,
}

impl QueueState {
    fn new(n: usize, rate: f64) -> Self {
        Self {
            jobs: VecDeque::new(),
            rate,
            arrivals: 0,
            departures: 0,
            area: 0.0,
            last_t: 0.0,
            count_by_origin: vec![0; n],
            area_by_origin: vec![0.0; n],
            last_t_by_origin: vec![0.0; n],
            sojourn_sum: 0.0,
            sojourn_count: 0,
        }
    }

    fn advance(&mut self, now: f64) {
        self.area += self.jobs.len() as f64 * (now - self.last_t);
        self.last_t = now;
    }

    fn advance_origin(&mut self, origin: usize, now: f64) {
        self.area_by_origin[origin] +=
            self.count_by_origin[origin] as f64 * (now - self.last_t_by_origin[origin]);
        self.last_t_by_origin[origin] = now;
    }

    fn flush(&mut self, now: f64) {
        self.advance(now);
        for o in 0..self.count_by_origin.len() {
            self.advance_origin(o, now);
        }
    }
}

/// Cumulative accounting captured at batch boundaries.
#[derive(Clone)]
struct Snapshot {
    t: f64,
    q_area: Vec<f64>,
    q_sojourn_sum: Vec<f64>,
    q_sojourn_count: Vec<u64>,
    q_arrivals: Vec<u64>,
    cross_area: Vec<f64>,
    visits: Vec<u64>,
    origin_done: Vec<u64>,
    origin_system_sum: Vec<f64>,
    origin_rest_sum: Vec<f64>,
}

struct Replication<'a> {
    config: &'a SimConfig,
    n: usize,
    r0: Vec<f64>,
    queues: Vec<QueueState>,
    heap: BinaryHeap<HeapEvent>,
    seq: u64,
    arrival_rngs: Vec<Pcg64>,
    service_rngs: Vec<Pcg64>,
    routing_rngs: Vec<Pcg64>,
    exo_count: u64,
    measuring: bool,
    t_warm: f64,
    visits: Vec<u64>,
    origin_done: Vec<u64>,
    origin_system_sum: Vec<f64>,
    origin_rest_sum: Vec<f64>,
    event_count: u64,
    boundaries: Vec<u64>,
    next_boundary: usize,
    snapshots: Vec<Snapshot>,
}

/// SplitMix64 step, used to derive independent per-stream seeds.
fn splitmix(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, replication: u32, peer: usize, purpose: u64) -> Pcg64 {
    let a = splitmix(seed ^ splitmix(replication as u64));
    let b = splitmix(a ^ ((peer as u64) << 3 | purpose));
    Pcg64::seed_from_u64(b)
}

impl<'a> Replication<'a> {
    fn new(config: &'a SimConfig, index: u32) -> Self {
        let n = config.spec.n;
        let mut queues = Vec::with_capacity(2 * n);
        for i in 0..n {
            queues.push(QueueState::new(n, config.mu0[i]));
        }
        for i in 0..n {
            queues.push(QueueState::new(n, config.spec.mu[i] - config.mu0[i]));
        }
        let warm_count = (config.warmup * config.horizon as f64).round() as u64;
        let measured = config.horizon - warm_count;
        // batch boundaries by exogenous-arrival count
        let mut boundaries: Vec<u64> =
            (0..=BATCHES as u64).map(|k| warm_count + measured * k / BATCHES as u64).collect();
        boundaries.dedup();

        Self {
            config,
            n,
            r0: config.spec.resolution_probabilities(),
            queues,
            heap: BinaryHeap::new(),
            seq: 0,
            arrival_rngs: (0..n).map(|i| stream_rng(config.seed, index, i, 0)).collect(),
            service_rngs: (0..2 * n)
                .map(|q| stream_rng(config.seed, index, q % n, 1 + (q / n) as u64))
                .collect(),
            routing_rngs: (0..n).map(|i| stream_rng(config.seed, index, i, 3)).collect(),
            exo_count: 0,
            measuring: warm_count == 0,
            t_warm: 0.0,
            visits: vec![0; n * n],
            origin_done: vec![0; n],
            origin_system_sum: vec![0.0; n],
            origin_rest_sum: vec![0.0; n],
            event_count: 0,
            boundaries,
            next_boundary: 0,
            snapshots: Vec::with_capacity(BATCHES + 1),
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(HeapEvent { time, seq: self.seq, kind });
    }

    fn queue_index(&self, peer: usize, class: QueueClass) -> usize {
        match class {
            QueueClass::Local => peer,
            QueueClass::Foreign => self.n + peer,
        }
    }

    fn take_snapshot(&mut self, now: f64) {
        for q in &mut self.queues {
            q.flush(now);
        }
        let mut cross_area = vec![0.0; self.n * self.n];
        for origin in 0..self.n {
            for peer in 0..self.n {
                let qi = if origin == peer { peer } else { self.n + peer };
                cross_area[origin * self.n + peer] = self.queues[qi].area_by_origin[origin];
            }
        }
        self.snapshots.push(Snapshot {
            t: now,
            q_area: self.queues.iter().map(|q| q.area).collect(),
            q_sojourn_sum: self.queues.iter().map(|q| q.sojourn_sum).collect(),
            q_sojourn_count: self.queues.iter().map(|q| q.sojourn_count).collect(),
            q_arrivals: self.queues.iter().map(|q| q.arrivals).collect(),
            cross_area,
            visits: self.visits.clone(),
            origin_done: self.origin_done.clone(),
            origin_system_sum: self.origin_system_sum.clone(),
            origin_rest_sum: self.origin_rest_sum.clone(),
        });
    }

    fn enqueue(&mut self, mut job: Job, peer: usize, now: f64) {
        if self.measuring {
            self.visits[job.origin * self.n + peer] += 1;
        }
        let class = if job.origin == peer { QueueClass::Local } else { QueueClass::Foreign };
        let qi = self.queue_index(peer, class);
        job.entry_time = now;
        let origin = job.origin;
        let q = &mut self.queues[qi];
        q.advance(now);
        q.advance_origin(origin, now);
        q.arrivals += 1;
        q.count_by_origin[origin] += 1;
        q.jobs.push_back(job);
        let starts_service = q.jobs.len() == 1;
        let rate = q.rate;
        if starts_service {
            let service = Exp::new(rate).expect("positive rate").sample(&mut self.service_rngs[qi]);
            self.push(now + service, EventKind::ServiceDone { peer, class });
        }
    }

    fn run(&mut self) -> ReplicationSummary {
        let n = self.n;
        // first exogenous arrival per peer with demand
        for i in 0..n {
            let lambda = self.config.spec.lambda0[i];
            if lambda > 0.0 {
                let t = Exp::new(lambda).expect("positive rate").sample(&mut self.arrival_rngs[i]);
                self.push(t, EventKind::Arrival { peer: i });
            }
        }
        if self.boundaries.first() == Some(&0) {
            self.take_snapshot(0.0);
            self.next_boundary = 1;
        }

        let mut end_time = 0.0;
        while let Some(ev) = self.heap.pop() {
            let now = ev.time;
            self.event_count += 1;
            match ev.kind {
                EventKind::Arrival { peer } => {
                    self.exo_count += 1;
                    let job = Job {
                        origin: peer,
                        birth_time: now,
                        hop_count: 0,
                        measured: self.measuring,
                        rest_time: 0.0,
                        entry_time: now,
                    };
                    self.enqueue(job, peer, now);

                    if self.exo_count < self.config.horizon {
                        let lambda = self.config.spec.lambda0[peer];
                        let gap =
                            Exp::new(lambda).expect("positive rate").sample(&mut self.arrival_rngs[peer]);
                        self.push(now + gap, EventKind::Arrival { peer });
                    }

                    // warmup ends at the warm-count-th arrival
                    let warm_count = self.boundaries[0];
                    if !self.measuring && self.exo_count == warm_count {
                        self.measuring = true;
                        self.t_warm = now;
                    }
                    while self.next_boundary < self.boundaries.len()
                        && self.exo_count == self.boundaries[self.next_boundary]
                    {
                        self.take_snapshot(now);
                        self.next_boundary += 1;
                    }
                    if self.exo_count == self.config.horizon {
                        end_time = now;
                        break;
                    }
                }
                EventKind::ServiceDone { peer, class } => {
                    let qi = self.queue_index(peer, class);
                    let q = &mut self.queues[qi];
                    q.advance(now);
                    let mut job = q.jobs.pop_front().expect("service fired on empty queue");
                    q.advance_origin(job.origin, now);
                    q.departures += 1;
                    q.count_by_origin[job.origin] -= 1;
                    let sojourn = now - job.entry_time;
                    if self.measuring && now >= self.t_warm {
                        q.sojourn_sum += sojourn;
                        q.sojourn_count += 1;
                    }
                    if class == QueueClass::Foreign && job.measured {
                        job.rest_time += sojourn;
                    }
                    let more_work = !q.jobs.is_empty();
                    let rate = q.rate;
                    if more_work {
                        let service =
                            Exp::new(rate).expect("positive rate").sample(&mut self.service_rngs[qi]);
                        self.push(now + service, EventKind::ServiceDone { peer, class });
                    }

                    // resolve or forward
                    let u: f64 = self.routing_rngs[peer].random_range(0.0..1.0);
                    if u < self.r0[peer] {
                        if job.measured {
                            self.origin_done[job.origin] += 1;
                            self.origin_system_sum[job.origin] += now - job.birth_time;
                            self.origin_rest_sum[job.origin] += job.rest_time;
                        }
                    } else {
                        let mut x = u - self.r0[peer];
                        let mut target = None;
                        for j in 0..n {
                            let r = self.config.spec.routing.get(peer, j);
                            if x < r {
                                target = Some(j);
                                break;
                            }
                            x -= r;
                        }
                        // rounding can push x past the last slab; fall back to
                        // the last forwarding-positive peer
                        let target = target.unwrap_or_else(|| {
                            (0..n)
                                .rev()
                                .find(|&j| self.config.spec.routing.get(peer, j) > 0.0)
                                .expect("forwarding drawn but row has no mass")
                        });
                        job.hop_count += 1;
                        self.enqueue(job, target, now);
                    }
                }
            }
        }

        // close the books at the final arrival
        for q in &mut self.queues {
            q.flush(end_time);
        }
        if self.next_boundary < self.boundaries.len() {
            // horizon snapshot (already flushed; take_snapshot flushes again harmlessly)
            self.take_snapshot(end_time);
            self.next_boundary = self.boundaries.len();
        }

        let measured_time = end_time - self.t_warm;
        let warm_snap = &self.snapshots[0];
        let arrivals: Vec<u64> = self.queues.iter().map(|q| q.arrivals).collect();
        let departures: Vec<u64> = self.queues.iter().map(|q| q.departures).collect();
        let in_system: Vec<u64> = self.queues.iter().map(|q| q.jobs.len() as u64).collect();

        let l_time_avg: Vec<f64> = (0..2 * n)
            .map(|qi| (self.queues[qi].area - warm_snap.q_area[qi]) / measured_time)
            .collect();
        let lambda_hat: Vec<f64> = (0..2 * n)
            .map(|qi| (self.queues[qi].arrivals - warm_snap.q_arrivals[qi]) as f64 / measured_time)
            .collect();
        let w_mean: Vec<f64> = (0..2 * n)
            .map(|qi| {
                let count = self.queues[qi].sojourn_count - warm_snap.q_sojourn_count[qi];
                if count == 0 {
                    0.0
                } else {
                    (self.queues[qi].sojourn_sum - warm_snap.q_sojourn_sum[qi]) / count as f64
                }
            })
            .collect();

        let l_se = (0..2 * n)
            .map(|qi| {
                batch_se(&self.snapshots, |a, b| {
                    (b.q_area[qi] - a.q_area[qi]) / (b.t - a.t)
                })
            })
            .collect();
        let w_se = (0..2 * n)
            .map(|qi| {
                batch_se_counted(&self.snapshots, |a, b| {
                    let c = b.q_sojourn_count[qi] - a.q_sojourn_count[qi];
                    (c, (b.q_sojourn_sum[qi] - a.q_sojourn_sum[qi]), c as f64)
                })
            })
            .collect();

        ReplicationSummary {
            end_time,
            measured_time,
            event_count: self.event_count,
            arrivals,
            departures,
            in_system_at_end: in_system,
            l_time_avg,
            lambda_hat,
            w_mean,
            l_se,
            w_se,
        }
    }
}

/// Batch-means standard error of a per-batch statistic derived from
/// consecutive snapshots.
fn batch_se(snapshots: &[Snapshot], f: impl Fn(&Snapshot, &Snapshot) -> f64) -> f64 {
    let values: Vec<f64> = snapshots.windows(2).map(|w| f(&w[0], &w[1])).collect();
    se_of(&values)
}

/// Like [`batch_se`] but skips batches with an empty denominator.
fn batch_se_counted(
    snapshots: &[Snapshot],
    f: impl Fn(&Snapshot, &Snapshot) -> (u64, f64, f64),
) -> f64 {
    let values: Vec<f64> = snapshots
        .windows(2)
        .filter_map(|w| {
            let (count, num, den) = f(&w[0], &w[1]);
            if count == 0 {
                None
            } else {
                Some(num / den)
            }
        })
        .collect();
    se_of(&values)
}

fn se_of(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

/// Full per-replication estimates assembled from the raw accounting.
struct RepEstimates {
    l_local: Vec<f64>,
    l_foreign: Vec<f64>,
    l_cross: Vec<f64>,
    foreign_delay: Vec<f64>,
    system_time: Vec<f64>,
    rest_delay: Vec<f64>,
    visit_rate: Vec<f64>,
    l_local_se: Vec<f64>,
    l_foreign_se: Vec<f64>,
    l_cross_se: Vec<f64>,
    foreign_delay_se: Vec<f64>,
    system_time_se: Vec<f64>,
    rest_delay_se: Vec<f64>,
    visit_rate_se: Vec<f64>,
    summary: ReplicationSummary,
}

/// Runs the configured replications and aggregates the report.
pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let flow = solve_flow_balance(&config.spec)?;
    let stability = check_stability(&config.spec, &flow, &config.mu0);
    if !stability.ok {
        let detail: Vec<String> =
            stability.violations.iter().map(|v| format!("{}: {}", v.code.as_str(), v.message)).collect();
        return Err(Error::UnstableConfig(detail.join("; ")));
    }

    let n = config.spec.n;
    let reps: Vec<RepEstimates> =
        (0..config.replications).map(|r| run_replication(config, r)).collect();

    type Pick = fn(&RepEstimates) -> (&[f64], &[f64]);
    let agg = |pick: Pick, len: usize| -> Vec<Estimate> {
        (0..len)
            .map(|idx| {
                let values: Vec<f64> = reps.iter().map(|r| pick(r).0[idx]).collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let se = if values.len() >= 2 {
                    se_of(&values)
                } else {
                    pick(&reps[0]).1[idx]
                };
                Estimate { mean, se }
            })
            .collect()
    };

    let l_local = agg(|r| (&r.l_local, &r.l_local_se), n);
    let l_foreign = agg(|r| (&r.l_foreign, &r.l_foreign_se), n);
    let foreign_delay = agg(|r| (&r.foreign_delay, &r.foreign_delay_se), n);
    let system_time = agg(|r| (&r.system_time, &r.system_time_se), n);
    let rest_delay = agg(|r| (&r.rest_delay, &r.rest_delay_se), n);
    let cross_flat = agg(|r| (&r.l_cross, &r.l_cross_se), n * n);
    let visit_flat = agg(|r| (&r.visit_rate, &r.visit_rate_se), n * n);

    let to_rows = |flat: Vec<Estimate>| -> Vec<Vec<Estimate>> {
        flat.chunks(n).map(|c| c.to_vec()).collect()
    };

    let disutility = config.alpha.as_ref().map(|alpha| {
        (0..n)
            .map(|i| Estimate {
                mean: system_time[i].mean + alpha[i] * foreign_delay[i].mean,
                se: (system_time[i].se.powi(2)
                    + (alpha[i] * foreign_delay[i].se).powi(2))
                .sqrt(),
            })
            .collect()
    });

    Ok(SimReport {
        l_local,
        l_foreign,
        l_cross: to_rows(cross_flat),
        foreign_delay,
        system_time,
        rest_delay,
        visit_rate: to_rows(visit_flat),
        disutility,
        event_count: reps.iter().map(|r| r.summary.event_count).sum(),
        sim_time: reps.iter().map(|r| r.summary.end_time).sum::<f64>() / reps.len() as f64,
        replications: config.replications,
        per_replication: reps.into_iter().map(|r| r.summary).collect(),
    })
}

fn run_replication(config: &SimConfig, index: u32) -> RepEstimates {
    let n = config.spec.n;
    let mut rep = Replication::new(config, index);
    let summary = rep.run();
    let snaps = &rep.snapshots;
    let first = &snaps[0];
    let last = &snaps[snaps.len() - 1];
    let measured_time = summary.measured_time;

    let l_local: Vec<f64> = (0..n).map(|i| summary.l_time_avg[i]).collect();
    let l_foreign: Vec<f64> = (0..n).map(|i| summary.l_time_avg[n + i]).collect();
    let foreign_delay: Vec<f64> = (0..n).map(|i| summary.w_mean[n + i]).collect();

    let mut l_cross = vec![0.0; n * n];
    let mut l_cross_se = vec![0.0; n * n];
    for idx in 0..n * n {
        l_cross[idx] = (last.cross_area[idx] - first.cross_area[idx]) / measured_time;
        l_cross_se[idx] =
            batch_se(snaps, |a, b| (b.cross_area[idx] - a.cross_area[idx]) / (b.t - a.t));
    }

    let mut visit_rate = vec![0.0; n * n];
    let mut visit_rate_se = vec![0.0; n * n];
    for idx in 0..n * n {
        visit_rate[idx] = (last.visits[idx] - first.visits[idx]) as f64 / measured_time;
        visit_rate_se[idx] =
            batch_se(snaps, |a, b| (b.visits[idx] - a.visits[idx]) as f64 / (b.t - a.t));
    }

    let per_origin = |done: &dyn Fn(&Snapshot) -> &[u64],
                      sum: &dyn Fn(&Snapshot) -> &[f64]|
     -> (Vec<f64>, Vec<f64>) {
        let mut means = vec![0.0; n];
        let mut ses = vec![0.0; n];
        for i in 0..n {
            let count = done(last)[i] - done(first)[i];
            means[i] = if count == 0 {
                0.0
            } else {
                (sum(last)[i] - sum(first)[i]) / count as f64
            };
            ses[i] = batch_se_counted(snaps, |a, b| {
                let c = done(b)[i] - done(a)[i];
                (c, sum(b)[i] - sum(a)[i], c as f64)
            });
        }
        (means, ses)
    };

    let (system_time, system_time_se) =
        per_origin(&|s| &s.origin_done, &|s| &s.origin_system_sum);
    let (rest_delay, rest_delay_se) = per_origin(&|s| &s.origin_done, &|s| &s.origin_rest_sum);

    let l_local_se: Vec<f64> = (0..n).map(|i| summary.l_se[i]).collect();
    let l_foreign_se: Vec<f64> = (0..n).map(|i| summary.l_se[n + i]).collect();
    let foreign_delay_se: Vec<f64> = (0..n).map(|i| summary.w_se[n + i]).collect();

    RepEstimates {
        l_local,
        l_foreign,
        l_cross,
        foreign_delay,
        system_time,
        rest_delay,
        visit_rate,
        l_local_se,
        l_foreign_se,
        l_cross_se,
        foreign_delay_se,
        system_time_se,
        rest_delay_se,
        visit_rate_se,
        summary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn mm1_config(lambda: f64, mu: f64, horizon: u64, seed: u64) -> SimConfig {
        let spec =
            NetworkSpec::new(Matrix::zeros(1, 1), vec![lambda], vec![mu + 1.0]).unwrap();
        SimConfig {
            spec,
            mu0: vec![mu],
            alpha: None,
            horizon,
            warmup: 0.2,
            seed,
            replications: 1,
        }
    }

    #[test]
    fn mm1_occupancy_and_delay() {
        let report = simulate(&mm1_config(1.0, 2.0, 200_000, 7)).unwrap();
        // L = rho/(1-rho) = 1, W = 1/(mu-lambda) = 1
        let l = report.l_local[0];
        assert!((l.mean - 1.0).abs() < 3.0 * l.se.max(0.01), "L = {} +- {}", l.mean, l.se);
        let w = report.per_replication[0].w_mean[0];
        let w_se = report.per_replication[0].w_se[0];
        assert!((w - 1.0).abs() < 3.0 * w_se.max(0.01), "W = {w} +- {w_se}");
    }

    #[test]
    fn zero_warmup_measures_from_the_start() {
        let mut config = mm1_config(1.0, 2.0, 10_000, 3);
        config.warmup = 0.0;
        let report = simulate(&config).unwrap();
        let rep = &report.per_replication[0];
        assert_eq!(rep.measured_time, rep.end_time);
        assert!(rep.l_time_avg[0] > 0.0);
    }

    #[test]
    fn unstable_config_is_rejected() {
        let mut config = mm1_config(1.0, 2.0, 1000, 1);
        config.mu0 = vec![0.9]; // below the arrival rate
        assert!(matches!(simulate(&config), Err(Error::UnstableConfig(_))));
    }

    #[test]
    fn invalid_warmup_is_rejected() {
        let mut config = mm1_config(1.0, 2.0, 1000, 1);
        config.warmup = 0.9;
        assert!(matches!(simulate(&config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn determinism_bitwise() {
        let a = simulate(&mm1_config(1.0, 2.0, 20_000, 99)).unwrap();
        let b = simulate(&mm1_config(1.0, 2.0, 20_000, 99)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn flow_conservation_per_queue() {
        let routing = Matrix::from_rows(&[
            vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
            vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
            vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
        ]);
        let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();
        let config = SimConfig {
            spec,
            mu0: vec![2.43, 3.75, 2.32],
            alpha: None,
            horizon: 50_000,
            warmup: 0.2,
            seed: 5,
            replications: 2,
        };
        let report = simulate(&config).unwrap();
        for rep in &report.per_replication {
            for qi in 0..6 {
                assert_eq!(
                    rep.arrivals[qi],
                    rep.departures[qi] + rep.in_system_at_end[qi],
                    "queue {qi} leaks jobs"
                );
            }
        }
    }

    #[test]
    fn littles_law_per_queue() {
        let config = mm1_config(2.0, 3.0, 100_000, 11);
        let report = simulate(&config).unwrap();
        let rep = &report.per_replication[0];
        for qi in 0..2 {
            if rep.lambda_hat[qi] == 0.0 {
                continue;
            }
            let l = rep.l_time_avg[qi];
            let lw = rep.lambda_hat[qi] * rep.w_mean[qi];
            let tol = 3.0 * rep.l_se[qi].max(0.02);
            assert!((l - lw).abs() < tol, "queue {qi}: L {l} vs lambda W {lw} (tol {tol})");
        }
    }

    #[test]
    fn foreign_occupancy_decomposition_is_exact() {
        let routing = Matrix::from_rows(&[
            vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
            vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
            vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
        ]);
        let spec = NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap();
        let config = SimConfig {
            spec,
            mu0: vec![2.43, 3.75, 2.32],
            alpha: None,
            horizon: 30_000,
            warmup: 0.1,
            seed: 13,
            replications: 1,
        };
        let report = simulate(&config).unwrap();
        // counting identity: foreign occupancy decomposes by origin exactly
        for j in 0..3 {
            let total: f64 =
                (0..3).filter(|&i| i != j).map(|i| report.l_cross[i][j].mean).sum();
            assert!(
                (total - report.l_foreign[j].mean).abs() < 1e-9,
                "peer {j}: {total} vs {}",
                report.l_foreign[j].mean
            );
        }
    }
}
