//! Round-based simulated-peer harness. Each peer owns one routing row,
//! builds its row of the visit matrix by repeated local updates after a
//! one-time link-state flood, and the collective converges on the dominant
//! eigenvector through per-round component exchange plus exact scalar
//! reductions over a star tree rooted at peer 0.
//!
//! Peers exchange data exclusively through [`Message`] values routed by the
//! scheduler; no peer ever touches another peer's state. Rounds are advanced
//! in fixed id order by a single-threaded scheduler, so runs are bit-for-bit
//! reproducible.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{linf_diff, Matrix};
use crate::model::NetworkSpec;

/// Rounds without improvement of the eigenvector delta before the
/// harness orders an averaging round (see [`Harness::round_step`]).
const STALL_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    /// Routing rows flooded once at setup so the per-round visit-row update
    /// can run peer-locally, link-state style.
    BRowContribution,
    /// One peer's current eigenvector component (or load estimate).
    VComponent,
    /// Scalar reduction traffic: partial norms, deltas, and the control
    /// decisions flowing back down the tree.
    NormScalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Payload {
    fn is_finite(&self) -> bool {
        match self {
            Payload::Scalar(x) => x.is_finite(),
            Payload::Vector(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

/// One unit of inter-peer communication. `phase` disambiguates the several
/// reduction waves inside a round; tags strictly increase per
/// (sender, receiver, kind, phase) and never decrease per sender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: usize,
    pub round: usize,
    pub phase: u8,
    pub payload: Payload,
}

/// The state a single simulated peer owns.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerState {
    /// Peer index.
    pub id: usize,
    /// This peer's own forwarding probabilities (row of the routing matrix).
    pub routing_row: Vec<f64>,
    /// Row of the current visit-matrix iterate; entrywise non-decreasing
    /// across rounds and at least one on the diagonal after round one.
    pub b_row: Vec<f64>,
    /// Current local eigenvector component estimate.
    pub v_local: f64,
    /// Component estimate one round back, for oscillation detection and
    /// averaging rounds.
    pub v_prev: f64,
    /// Full routing matrix learned from the setup flood.
    link_state: Matrix,
}

impl PeerState {
    /// Visit-row update `b_row <- e_i + b_row R`, peer-local thanks to the
    /// link-state flood. Returns the largest entry change; entries never
    /// decrease because every term of every sum is non-decreasing.
    fn update_b_row(&mut self) -> (f64, bool) {
        let n = self.b_row.len();
        let mut next = vec![0.0; n];
        for j in 0..n {
            let mut s = if self.id == j { 1.0 } else { 0.0 };
            for m in 0..n {
                s += self.b_row[m] * self.link_state.get(m, j);
            }
            next[j] = s;
        }
        let delta = linf_diff(&next, &self.b_row);
        let monotone = next.iter().zip(&self.b_row).all(|(new, old)| new >= old);
        self.b_row = next;
        (delta, monotone)
    }

    /// Direction update: own visit row against the received components,
    /// skipping the diagonal. Sender order is fixed ascending.
    fn compute_direction(&self, inbox: &[Message]) -> Result<f64> {
        let mut t = 0.0;
        for msg in inbox {
            debug_assert!(msg.kind == MessageKind::VComponent);
            let value = match msg.payload {
                Payload::Scalar(x) => x,
                _ => return Err(Error::NonFiniteState("component message must be scalar".into())),
            };
            if msg.sender != self.id {
                t += self.b_row[msg.sender] * value;
            }
        }
        Ok(t)
    }
}

/// Per-round progress record, also exported as the CLI trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub max_b_delta: f64,
    pub max_v_delta: f64,
    pub messages: u64,
}

/// Initial eigenvector estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialVector {
    /// All ones; the deterministic default.
    Ones,
    /// Seeded positive random components, for robustness tests.
    Seeded(u64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOptions {
    pub tol: f64,
    pub max_rounds: usize,
    pub v0: InitialVector,
    /// Collect one [`RoundRecord`] per round.
    pub collect_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_rounds: 10_000, v0: InitialVector::Ones, collect_trace: false }
    }
}

/// Result of a converged run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributedRun {
    /// Assembled visit-matrix estimate (row i collected from peer i).
    pub b: Matrix,
    /// Assembled eigenvector estimate.
    pub v: Vec<f64>,
    pub rounds_used: usize,
    /// Total messages exchanged, the decentralization cost metric.
    pub message_count: u64,
    /// Rounds in which some visit row decreased somewhere; stays zero.
    pub monotone_violations: u64,
    pub trace: Vec<RoundRecord>,
}

/// The round scheduler plus the root-role control state (peer 0 acts as the
/// reduction root; its convergence bookkeeping lives here).
pub struct Harness {
    peers: Vec<PeerState>,
    round: usize,
    message_count: u64,
    tol: f64,
    converged: bool,
    average_next: bool,
    root_best_v_delta: f64,
    root_stall: usize,
    monotone_violations: u64,
    last_max_b_delta: f64,
    last_max_v_delta: f64,
    collect_trace: bool,
    trace: Vec<RoundRecord>,
    // wire-level invariant: tags strictly increase per (sender, to, kind, phase)
    last_tags: HashMap<(usize, usize, MessageKind, u8), usize>,
}

impl Harness {
    pub fn new(spec: &NetworkSpec, options: &RunOptions) -> Result<Self> {
        spec.check_dimensions()?;
        let n = spec.n;
        if n < 2 {
            return Err(Error::Degenerate("the harness needs at least two peers".into()));
        }

        let v0 = match options.v0 {
            InitialVector::Ones => vec![1.0; n],
            InitialVector::Seeded(seed) => {
                use rand::{RngExt, SeedableRng};
                let mut rng = rand_pcg::Pcg64::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(0.1..1.0)).collect()
            }
        };

        let mut peers: Vec<PeerState> = (0..n)
            .map(|i| {
                let mut b_row = vec![0.0; n];
                b_row[i] = 1.0;
                PeerState {
                    id: i,
                    routing_row: spec.routing.row(i).to_vec(),
                    b_row,
                    v_local: v0[i],
                    v_prev: v0[i],
                    link_state: Matrix::zeros(n, n),
                }
            })
            .collect();

        let mut harness = Self {
            peers,
            round: 0,
            message_count: 0,
            tol: options.tol,
            converged: false,
            average_next: false,
            root_best_v_delta: f64::INFINITY,
            root_stall: 0,
            monotone_violations: 0,
            last_max_b_delta: f64::INFINITY,
            last_max_v_delta: f64::INFINITY,
            collect_trace: options.collect_trace,
            trace: Vec::new(),
            last_tags: HashMap::new(),
        };

        // setup flood: every peer shares its routing row once, link-state
        // style, so step one of every round is peer-local afterwards
        let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); n];
        for i in 0..n {
            let row = harness.peers[i].routing_row.clone();
            for to in 0..n {
                if to != i {
                    let msg = Message {
                        kind: MessageKind::BRowContribution,
                        sender: i,
                        round: 0,
                        phase: 0,
                        payload: Payload::Vector(row.clone()),
                    };
                    harness.send(to, msg, &mut inboxes)?;
                }
            }
        }
        peers = std::mem::take(&mut harness.peers);
        for (i, peer) in peers.iter_mut().enumerate() {
            let mut link = Matrix::zeros(n, n);
            for (j, &r) in peer.routing_row.iter().enumerate() {
                link.set(i, j, r);
            }
            for msg in &inboxes[i] {
                if let Payload::Vector(row) = &msg.payload {
                    for (j, &r) in row.iter().enumerate() {
                        link.set(msg.sender, j, r);
                    }
                }
            }
            peer.link_state = link;
        }
        harness.peers = peers;
        Ok(harness)
    }

    /// Validates, tags, counts, and delivers one message.
    fn send(&mut self, to: usize, msg: Message, inboxes: &mut [Vec<Message>]) -> Result<()> {
        if !msg.payload.is_finite() {
            return Err(Error::NonFiniteState(format!(
                "peer {} emitted a non-finite payload in round {}",
                msg.sender, msg.round
            )));
        }
        let key = (msg.sender, to, msg.kind, msg.phase);
        if let Some(&prev) = self.last_tags.get(&key) {
            debug_assert!(msg.round > prev, "round tags must strictly increase per channel");
        }
        self.last_tags.insert(key, msg.round);
        self.message_count += 1;
        inboxes[to].push(msg);
        Ok(())
    }

    /// Advances every peer through one synchronous round:
    /// a peer-local visit-row update, the eigen-component exchange, an exact
    /// norm reduction over the star tree, and a control reduction carrying
    /// deltas up and the convergence/averaging decision down.
    ///
    /// When the root sees the eigenvector delta stall (periodic support
    /// graphs orbit instead of converging), it orders an averaging round: the
    /// next direction is `v + v_prev`, whose normalization collapses a
    /// period-two orbit onto the dominant eigendirection.
    pub fn round_step(&mut self) -> Result<RoundRecord> {
        let n = self.peers.len();
        let round = self.round + 1;
        let messages_before = self.message_count;
        let averaging = self.average_next;
        self.average_next = false;

        // step one: local visit-row update
        let mut b_deltas = vec![0.0; n];
        for i in 0..n {
            let (delta, monotone) = self.peers[i].update_b_row();
            if !monotone {
                self.monotone_violations += 1;
            }
            b_deltas[i] = delta;
        }

        // step two: eigenvector direction, from broadcast components unless
        // this is an averaging round (which needs only local history)
        let mut t = vec![0.0; n];
        if averaging {
            for i in 0..n {
                t[i] = self.peers[i].v_local + self.peers[i].v_prev;
            }
        } else {
            let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); n];
            for i in 0..n {
                let component = self.peers[i].v_local;
                for to in 0..n {
                    if to != i {
                        let msg = Message {
                            kind: MessageKind::VComponent,
                            sender: i,
                            round,
                            phase: 0,
                            payload: Payload::Scalar(component),
                        };
                        self.send(to, msg, &mut inboxes)?;
                    }
                }
            }
            for i in 0..n {
                t[i] = self.peers[i].compute_direction(&inboxes[i])?;
            }
        }

        // step three: exact L2 normalization over the star tree; partial
        // squares ride up with the visit-row delta, the norm rides back down
        let mut up: Vec<Vec<Message>> = vec![Vec::new(); n];
        for i in 1..n {
            let msg = Message {
                kind: MessageKind::NormScalar,
                sender: i,
                round,
                phase: 1,
                payload: Payload::Vector(vec![t[i] * t[i], b_deltas[i]]),
            };
            self.send(0, msg, &mut up)?;
        }
        let mut sum_sq = t[0] * t[0];
        let mut max_b_delta = b_deltas[0];
        for msg in &up[0] {
            if let Payload::Vector(p) = &msg.payload {
                sum_sq += p[0];
                max_b_delta = max_b_delta.max(p[1]);
            }
        }
        let norm = sum_sq.sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate(
                "eigenvector iterate collapsed to zero; routing support is degenerate".into(),
            ));
        }
        let mut down: Vec<Vec<Message>> = vec![Vec::new(); n];
        for to in 1..n {
            let msg = Message {
                kind: MessageKind::NormScalar,
                sender: 0,
                round,
                phase: 2,
                payload: Payload::Scalar(norm),
            };
            self.send(to, msg, &mut down)?;
        }

        let mut v_deltas = vec![0.0; n];
        let mut oscs = vec![0.0; n];
        for i in 0..n {
            let received_norm = if i == 0 {
                norm
            } else {
                match down[i][0].payload {
                    Payload::Scalar(x) => x,
                    _ => unreachable!("norm is a scalar"),
                }
            };
            let v_new = t[i] / received_norm;
            v_deltas[i] = (v_new - self.peers[i].v_local).abs();
            oscs[i] = (v_new - self.peers[i].v_prev).abs();
            self.peers[i].v_prev = self.peers[i].v_local;
            self.peers[i].v_local = v_new;
        }

        // step four: control reduction; the root folds the deltas and issues
        // the convergence / averaging decision
        let mut ctl_up: Vec<Vec<Message>> = vec![Vec::new(); n];
        for i in 1..n {
            let msg = Message {
                kind: MessageKind::NormScalar,
                sender: i,
                round,
                phase: 3,
                payload: Payload::Vector(vec![v_deltas[i], oscs[i]]),
            };
            self.send(0, msg, &mut ctl_up)?;
        }
        let mut max_v_delta = v_deltas[0];
        let mut max_osc = oscs[0];
        for msg in &ctl_up[0] {
            if let Payload::Vector(p) = &msg.payload {
                max_v_delta = max_v_delta.max(p[0]);
                max_osc = max_osc.max(p[1]);
            }
        }

        if max_v_delta < self.root_best_v_delta {
            self.root_best_v_delta = max_v_delta;
            self.root_stall = 0;
        } else {
            self.root_stall += 1;
        }
        let converged = max_b_delta <= self.tol && max_v_delta <= self.tol;
        let order_average = !converged
            && ((max_osc <= self.tol && max_v_delta > self.tol) || self.root_stall >= STALL_WINDOW);
        if order_average {
            self.root_stall = 0;
            self.root_best_v_delta = f64::INFINITY;
        }
        let mut ctl_down: Vec<Vec<Message>> = vec![Vec::new(); n];
        for to in 1..n {
            let msg = Message {
                kind: MessageKind::NormScalar,
                sender: 0,
                round,
                phase: 4,
                payload: Payload::Vector(vec![
                    if converged { 1.0 } else { 0.0 },
                    if order_average { 1.0 } else { 0.0 },
                ]),
            };
            self.send(to, msg, &mut ctl_down)?;
        }

        self.converged = converged;
        self.average_next = order_average;
        self.round = round;
        self.last_max_b_delta = max_b_delta;
        self.last_max_v_delta = max_v_delta;
        let record = RoundRecord {
            round,
            max_b_delta,
            max_v_delta,
            messages: self.message_count - messages_before,
        };
        if self.collect_trace {
            self.trace.push(record.clone());
        }
        Ok(record)
    }

    pub fn peers(&self) -> &[PeerState] {
        self.peers.as_slice()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn rounds(&self) -> usize {
        self.round
    }

    pub fn message_count(&self) -> u64 {
        self.message_count
    }

    /// Rounds in which some peer's visit row decreased somewhere; stays zero.
    pub fn monotone_violations(&self) -> u64 {
        self.monotone_violations
    }

    /// Visit-matrix estimate assembled from the per-peer rows.
    pub fn b_estimate(&self) -> Matrix {
        Matrix::from_rows(&self.peers.iter().map(|p| p.b_row.clone()).collect::<Vec<_>>())
    }

    /// Eigenvector estimate assembled from the per-peer components.
    pub fn v_estimate(&self) -> Vec<f64> {
        self.peers.iter().map(|p| p.v_local).collect()
    }

    fn into_run(self) -> DistributedRun {
        DistributedRun {
            b: self.b_estimate(),
            v: self.v_estimate(),
            rounds_used: self.round,
            message_count: self.message_count,
            monotone_violations: self.monotone_violations,
            trace: self.trace,
        }
    }
}

/// Runs rounds until both the eigenvector and every visit row move less than
/// `tol` (L-inf, round over round), or the budget runs out; the error for a
/// budget miss carries the last iterates.
pub fn run_until_converged(spec: &NetworkSpec, options: &RunOptions) -> Result<DistributedRun> {
    let mut harness = Harness::new(spec, options)?;
    for _ in 0..options.max_rounds {
        harness.round_step()?;
        if harness.converged() {
            return Ok(harness.into_run());
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_rounds,
        residual: harness.last_max_b_delta.max(harness.last_max_v_delta),
        last_b: Some(harness.b_estimate()),
        last_v: Some(harness.v_estimate()),
    })
}

/// Result of the distributed load computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowRoundsRun {
    pub lambda: Vec<f64>,
    pub rounds_used: usize,
    pub message_count: u64,
}

/// Distributed Jacobi iteration of the flow-balance equations: each peer
/// holds its own load estimate and pushes the forwarded share to each
/// neighbor every round.
pub fn flow_balance_rounds(
    spec: &NetworkSpec,
    tol: f64,
    max_rounds: usize,
) -> Result<FlowRoundsRun> {
    spec.check_dimensions()?;
    let n = spec.n;
    let mut lambda: Vec<f64> = spec.lambda0.clone();
    let mut message_count: u64 = 0;
    let mut last_delta = f64::INFINITY;

    for round in 1..=max_rounds {
        let mut inboxes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let r = spec.routing.get(i, j);
                if r > 0.0 {
                    let share = lambda[i] * r;
                    if !share.is_finite() {
                        return Err(Error::NonFiniteState(format!(
                            "peer {i} emitted a non-finite load share in round {round}"
                        )));
                    }
                    message_count += 1;
                    inboxes[j].push((i, share));
                }
            }
        }
        let mut delta = 0.0_f64;
        let mut next = vec![0.0; n];
        for j in 0..n {
            let mut s = spec.lambda0[j];
            for &(_, share) in &inboxes[j] {
                s += share;
            }
            next[j] = s;
            delta = delta.max((s - lambda[j]).abs());
        }
        lambda = next;
        // control reduction up and down the star tree
        message_count += 2 * (n as u64 - 1);
        last_delta = delta;
        if delta <= tol {
            return Ok(FlowRoundsRun { lambda, rounds_used: round, message_count });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_rounds,
        residual: last_delta,
        last_b: None,
        last_v: Some(lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowbalance::solve_flow_balance;
    use crate::spectral::{perron_eigenpair, PowerOptions};

    fn three_peer_spec() -> NetworkSpec {
        let routing = Matrix::from_rows(&[
            vec![0.0, 2.0 / 6.0, 3.0 / 6.0],
            vec![2.0 / 6.0, 0.0, 3.0 / 6.0],
            vec![3.0 / 6.0, 1.0 / 6.0, 0.0],
        ]);
        NetworkSpec::new(routing, vec![1.0, 2.0, 1.0], vec![8.0, 7.0, 9.0]).unwrap()
    }

    fn two_peer_symmetric() -> NetworkSpec {
        let routing = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        NetworkSpec::new(routing, vec![1.0, 1.0], vec![4.0, 4.0]).unwrap()
    }

    #[test]
    fn three_peer_harness_matches_centralized() {
        let spec = three_peer_spec();
        let run = run_until_converged(&spec, &RunOptions::default()).unwrap();

        let flow = solve_flow_balance(&spec).unwrap();
        assert!(run.b.max_abs_diff(&flow.b) < 1e-8, "B error {}", run.b.max_abs_diff(&flow.b));

        let eig = perron_eigenpair(&flow.b_tilde, &PowerOptions::default()).unwrap();
        assert!(linf_diff(&run.v, &eig.v) < 1e-6, "v error {}", linf_diff(&run.v, &eig.v));

        assert!(run.rounds_used <= 200, "took {} rounds", run.rounds_used);
    }

    #[test]
    fn b_rows_are_monotone_and_diagonal_dominates_one() {
        let spec = three_peer_spec();
        let mut harness = Harness::new(&spec, &RunOptions::default()).unwrap();
        let mut prev = harness.b_estimate();
        for _ in 0..50 {
            harness.round_step().unwrap();
            let cur = harness.b_estimate();
            for i in 0..3 {
                for j in 0..3 {
                    assert!(cur.get(i, j) >= prev.get(i, j));
                }
                assert!(cur.get(i, i) >= 1.0);
            }
            prev = cur;
        }
        assert_eq!(harness.monotone_violations(), 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = three_peer_spec();
        let opts = RunOptions { v0: InitialVector::Seeded(42), ..RunOptions::default() };
        let a = run_until_converged(&spec, &opts).unwrap();
        let b = run_until_converged(&spec, &opts).unwrap();
        assert_eq!(a.rounds_used, b.rounds_used);
        assert_eq!(a.message_count, b.message_count);
        assert_eq!(a.b, b.b);
        // bit-identical, not merely close
        for (x, y) in a.v.iter().zip(&b.v) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn two_peer_oscillation_recovers_from_zero_component() {
        // start [1, 0] orbits under the periodic two-peer support; the
        // averaging round lands it on the symmetric eigenvector
        let spec = two_peer_symmetric();
        let mut harness = Harness::new(&spec, &RunOptions::default()).unwrap();
        harness.peers[0].v_local = 1.0;
        harness.peers[0].v_prev = 1.0;
        harness.peers[1].v_local = 0.0;
        harness.peers[1].v_prev = 0.0;
        let mut rounds = 0;
        while !harness.converged() && rounds < 500 {
            harness.round_step().unwrap();
            rounds += 1;
        }
        assert!(harness.converged(), "no convergence in {rounds} rounds");
        let v = harness.v_estimate();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - inv_sqrt2).abs() < 1e-8);
        assert!((v[1] - inv_sqrt2).abs() < 1e-8);
    }

    #[test]
    fn infinite_tolerance_converges_after_one_round() {
        let spec = three_peer_spec();
        let opts = RunOptions { tol: f64::INFINITY, ..RunOptions::default() };
        let run = run_until_converged(&spec, &opts).unwrap();
        assert_eq!(run.rounds_used, 1);
    }

    #[test]
    fn zero_round_budget_fails_immediately() {
        let spec = three_peer_spec();
        let opts = RunOptions { max_rounds: 0, ..RunOptions::default() };
        match run_until_converged(&spec, &opts) {
            Err(Error::NoConvergence { iterations, last_b, last_v, .. }) => {
                assert_eq!(iterations, 0);
                assert!(last_b.is_some() && last_v.is_some());
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn trace_has_one_record_per_round() {
        let spec = three_peer_spec();
        let opts = RunOptions { collect_trace: true, ..RunOptions::default() };
        let run = run_until_converged(&spec, &opts).unwrap();
        assert_eq!(run.trace.len(), run.rounds_used);
        assert!(run.trace.iter().enumerate().all(|(k, r)| r.round == k + 1));
    }

    #[test]
    fn peer_step_depends_only_on_own_state_and_messages() {
        // isolation replay: a cloned peer fed the same messages lands in the
        // same state, so cross-peer information can only travel in messages
        let spec = three_peer_spec();
        let mut harness = Harness::new(&spec, &RunOptions::default()).unwrap();
        for _ in 0..5 {
            harness.round_step().unwrap();
        }
        let mut clone = harness.peers[1].clone();
        let mut original = harness.peers[1].clone();

        let inbox: Vec<Message> = [0usize, 2]
            .iter()
            .map(|&s| Message {
                kind: MessageKind::VComponent,
                sender: s,
                round: 99,
                phase: 0,
                payload: Payload::Scalar(harness.peers[s].v_local),
            })
            .collect();

        let (d1, m1) = original.update_b_row();
        let t1 = original.compute_direction(&inbox).unwrap();
        let (d2, m2) = clone.update_b_row();
        let t2 = clone.compute_direction(&inbox).unwrap();
        assert_eq!(original, clone);
        assert_eq!((d1.to_bits(), m1), (d2.to_bits(), m2));
        assert_eq!(t1.to_bits(), t2.to_bits());
    }

    #[test]
    fn flow_rounds_reach_the_direct_solution() {
        let spec = three_peer_spec();
        let run = flow_balance_rounds(&spec, 1e-12, 10_000).unwrap();
        let expected = [95.0 / 16.0, 81.0 / 16.0, 104.0 / 16.0];
        for (got, want) in run.lambda.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn one_jacobi_round_from_lambda0() {
        let spec = three_peer_spec();
        // tol = infinity stops after the first round, exposing lambda0 + R^T lambda0
        let run = flow_balance_rounds(&spec, f64::INFINITY, 1).unwrap();
        assert_eq!(run.rounds_used, 1);
        let rt_l0 = spec.routing.transpose().mat_vec(&spec.lambda0);
        for (got, want) in run.lambda.iter().zip([1.0 + 7.0 / 6.0, 2.5, 2.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        for i in 0..3 {
            assert!((run.lambda[i] - (spec.lambda0[i] + rt_l0[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_routing_flow_rounds_settle_immediately() {
        let spec =
            NetworkSpec::new(Matrix::zeros(3, 3), vec![1.0, 2.0, 1.0], vec![5.0, 5.0, 5.0])
                .unwrap();
        let run = flow_balance_rounds(&spec, 1e-12, 10).unwrap();
        assert_eq!(run.rounds_used, 1);
        assert_eq!(run.lambda, spec.lambda0);
    }

    #[test]
    fn flow_rounds_budget_error() {
        let spec = three_peer_spec();
        assert!(matches!(
            flow_balance_rounds(&spec, 1e-15, 0),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn overflowing_state_is_reported_not_propagated() {
        // absurd demand overflows the load estimates within two Jacobi
        // rounds; the harness must flag the first non-finite payload
        let routing = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        let huge = 0.9 * f64::MAX;
        let spec = NetworkSpec::new(routing, vec![huge, huge], vec![1.0, 1.0]).unwrap();
        match flow_balance_rounds(&spec, 1e-9, 100) {
            Err(Error::NonFiniteState(_)) => {}
            other => panic!("expected NonFiniteState, got {other:?}"),
        }
    }
}
