//! Virtual-connection control as a continuous-time Markov chain.
//!
//! A state `(i, j, k, m, n)` counts class-s, class-r and class-τ connections
//! in service (`i + j + k ≤ C`) and the class-r / class-τ overflow queues
//! (`m ≤ M`, `n ≤ N`). Class s is admitted with probability `α_s` and never
//! queues. When a connection leaves, a queued class-r request takes the freed
//! channel first, then a queued class-τ one. Departures run at
//! `θ·count·μ` with `θ = α_s + α_v(1 − α_s)`, so `α_v = 1` gives plain
//! exponential service.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::par::{map_slice, Execution};

pub const MAX_STATES: usize = 1_000_000;
/// Largest reachable chain solved with a dense LU factorisation.
pub const DENSE_LIMIT: usize = 2_500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("invalid queue spec: {0}")]
    InvalidSpec(String),
    #[error("state space has {states} states (limit {MAX_STATES})")]
    StateSpaceTooLarge { states: usize },
    #[error("stationary system is singular")]
    SingularSystem,
    #[error("iterative solver stopped at residual {residual:e}")]
    NotConverged { residual: f64 },
    #[error("class {class} has zero arrival rate; its delay is undefined")]
    ZeroArrivalRate { class: &'static str },
    #[error("unstable: service capacity {capacity} does not exceed arrival rate {arrival}")]
    Unstable { capacity: f64, arrival: f64 },
}

impl QueueError {
    pub fn code(&self) -> &'static str {
        match self {
            QueueError::InvalidSpec(_) => "E_QUEUE_SPEC",
            QueueError::StateSpaceTooLarge { .. } => "E_TOO_LARGE",
            QueueError::SingularSystem => "E_SINGULAR",
            QueueError::NotConverged { .. } => "E_NONCONVERGENCE",
            QueueError::ZeroArrivalRate { .. } => "E_ZERO_ARRIVAL",
            QueueError::Unstable { .. } => "E_UNSTABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtmcSpec {
    pub channels: usize,
    pub queue_r: usize,
    pub queue_tau: usize,
    pub lambda_s: f64,
    pub lambda_r: f64,
    pub lambda_tau: f64,
    pub mu_s: f64,
    pub mu_r: f64,
    pub mu_tau: f64,
    pub alpha_s: f64,
    pub alpha_v: f64,
}

impl Default for CtmcSpec {
    fn default() -> Self {
        CtmcSpec {
            channels: 2,
            queue_r: 2,
            queue_tau: 2,
            lambda_s: 0.5,
            lambda_r: 0.5,
            lambda_tau: 0.5,
            mu_s: 1.0,
            mu_r: 1.0,
            mu_tau: 1.0,
            alpha_s: 1.0,
            alpha_v: 1.0,
        }
    }
}

impl CtmcSpec {
    /// A single-class loss system (class r only, no queues): Erlang-B.
    pub fn erlang(channels: usize, load: f64) -> Self {
        CtmcSpec {
            channels,
            queue_r: 0,
            queue_tau: 0,
            lambda_s: 0.0,
            lambda_r: load,
            lambda_tau: 0.0,
            mu_s: 1.0,
            mu_r: 1.0,
            mu_tau: 1.0,
            alpha_s: 1.0,
            alpha_v: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), QueueError> {
        if self.channels == 0 {
            return Err(QueueError::InvalidSpec("channel count C must be at least 1".into()));
        }
        let rates = [
            ("lambda_s", self.lambda_s),
            ("lambda_r", self.lambda_r),
            ("lambda_tau", self.lambda_tau),
            ("mu_s", self.mu_s),
            ("mu_r", self.mu_r),
            ("mu_tau", self.mu_tau),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(QueueError::InvalidSpec(format!("{name} must be a finite non-negative rate, got {v}")));
            }
        }
        for (name, v) in [("alpha_s", self.alpha_s), ("alpha_v", self.alpha_v)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QueueError::InvalidSpec(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (class, lambda, mu) in
            [("s", self.lambda_s * self.alpha_s, self.mu_s), ("r", self.lambda_r, self.mu_r), ("tau", self.lambda_tau, self.mu_tau)]
        {
            if lambda > 0.0 && !(mu > 0.0) {
                return Err(QueueError::InvalidSpec(format!("class {class} arrives but has zero service rate")));
            }
        }
        Ok(())
    }

    /// Departure rate multiplier `α_s + α_v(1 − α_s)`.
    pub fn service_factor(&self) -> f64 {
        self.alpha_s + self.alpha_v * (1.0 - self.alpha_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub m: usize,
    pub n: usize,
}

impl State {
    pub fn occupancy(&self) -> usize {
        self.i + self.j + self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    states: Vec<State>,
    index: HashMap<State, usize>,
}

impl StateSpace {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }
}

fn simplex_size(c: usize) -> usize {
    (c + 1) * (c + 2) * (c + 3) / 6
}

/// All states in lexicographic `(i, j, k, m, n)` order.
pub fn enumerate_states(spec: &CtmcSpec) -> Result<StateSpace, QueueError> {
    spec.validate()?;
    let c = spec.channels;
    let size = simplex_size(c)
        .checked_mul(spec.queue_r + 1)
        .and_then(|v| v.checked_mul(spec.queue_tau + 1))
        .unwrap_or(usize::MAX);
    if size > MAX_STATES {
        return Err(QueueError::StateSpaceTooLarge { states: size });
    }
    let mut states = Vec::with_capacity(size);
    for i in 0..=c {
        for j in 0..=c - i {
            for k in 0..=c - i - j {
                for m in 0..=spec.queue_r {
                    for n in 0..=spec.queue_tau {
                        states.push(State { i, j, k, m, n });
                    }
                }
            }
        }
    }
    let index = states.iter().enumerate().map(|(p, s)| (*s, p)).collect();
    Ok(StateSpace { states, index })
}

/// Outgoing transitions of one state as `(target, rate)`.
fn transitions(spec: &CtmcSpec, s: State) -> Vec<(State, f64)> {
    let c = spec.channels;
    let full = s.occupancy() >= c;
    let theta = spec.service_factor();
    let mut out = Vec::with_capacity(6);
    let rate_s = spec.alpha_s * spec.lambda_s;
    if rate_s > 0.0 && !full {
        out.push((State { i: s.i + 1, ..s }, rate_s));
    }
    if spec.lambda_r > 0.0 {
        if !full {
            out.push((State { j: s.j + 1, ..s }, spec.lambda_r));
        } else if s.m < spec.queue_r {
            out.push((State { m: s.m + 1, ..s }, spec.lambda_r));
        }
    }
    if spec.lambda_tau > 0.0 {
        if !full {
            out.push((State { k: s.k + 1, ..s }, spec.lambda_tau));
        } else if s.n < spec.queue_tau {
            out.push((State { n: s.n + 1, ..s }, spec.lambda_tau));
        }
    }
    let promote = |mut t: State| {
        if t.m > 0 {
            t.m -= 1;
            t.j += 1;
        } else if t.n > 0 {
            t.n -= 1;
            t.k += 1;
        }
        t
    };
    if s.i > 0 {
        out.push((promote(State { i: s.i - 1, ..s }), theta * s.i as f64 * spec.mu_s));
    }
    if s.j > 0 {
        out.push((promote(State { j: s.j - 1, ..s }), theta * s.j as f64 * spec.mu_r));
    }
    if s.k > 0 {
        out.push((promote(State { k: s.k - 1, ..s }), theta * s.k as f64 * spec.mu_tau));
    }
    out.retain(|&(_, r)| r > 0.0);
    out
}

/// Sparse generator: off-diagonal rates per row plus the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub diagonal: Vec<f64>,
}

impl Generator {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return self.diagonal[from];
        }
        self.rows[from].iter().filter(|(t, _)| *t == to).map(|(_, r)| r).sum()
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.diagonal[row] + self.rows[row].iter().map(|(_, r)| r).sum::<f64>()
    }

    /// `π·Q`.
    pub fn left_mul(&self, pi: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = pi.iter().zip(&self.diagonal).map(|(p, d)| p * d).collect();
        for (from, row) in self.rows.iter().enumerate() {
            for &(to, r) in row {
                out[to] += pi[from] * r;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for (from, row) in self.rows.iter().enumerate() {
            q[(from, from)] = self.diagonal[from];
            for &(to, r) in row {
                q[(from, to)] += r;
            }
        }
        q
    }

    /// States reachable from `start`.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.rows[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

pub fn build_generator(spec: &CtmcSpec, space: &StateSpace) -> Generator {
    let mut rows = Vec::with_capacity(space.len());
    let mut diagonal = Vec::with_capacity(space.len());
    for &s in space.states() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (t, r) in transitions(spec, s) {
            let to = space.index_of(&t).expect("transition stays inside the state space");
            match row.iter_mut().find(|(x, _)| *x == to) {
                Some(e) => e.1 += r,
                None => row.push((to, r)),
            }
        }
        diagonal.push(-row.iter().map(|(_, r)| r).sum::<f64>());
        rows.push(row);
    }
    Generator { rows, diagonal }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
}

impl StationaryDistribution {
    /// `‖π·Q‖∞`.
    pub fn residual(&self, q: &Generator) -> f64 {
        q.left_mul(&self.pi).iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Solves `πQ = 0`, `Σπ = 1` on the states reachable from state 0 (the empty
/// system); every other state gets zero mass.
pub fn solve_stationary(q: &Generator) -> Result<StationaryDistribution, QueueError> {
    if q.is_empty() {
        return Err(QueueError::SingularSystem);
    }
    let reach = q.reachable_from(0);
    let map: Vec<usize> = (0..q.len()).filter(|&s| reach[s]).collect();
    let mut local = vec![usize::MAX; q.len()];
    for (p, &s) in map.iter().enumerate() {
        local[s] = p;
    }
    let n = map.len();
    let sub = if n <= DENSE_LIMIT { solve_dense(q, &map, &local)? } else { solve_iterative(q, &map, &local)? };
    let mut pi = vec![0.0; q.len()];
    for (p, &s) in map.iter().enumerate() {
        pi[s] = sub[p];
    }
    Ok(StationaryDistribution { pi })
}

fn normalise(v: &mut [f64]) -> Result<(), QueueError> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(QueueError::SingularSystem);
    }
    v.iter_mut().for_each(|x| *x /= total);
    Ok(())
}

fn solve_dense(q: &Generator, map: &[usize], local: &[usize]) -> Result<Vec<f64>, QueueError> {
    let n = map.len();
    // rows of A are the balance equations (columns of Q), last one replaced
    let mut a = DMatrix::zeros(n, n);
    for (p, &s) in map.iter().enumerate() {
        a[(p, p)] += q.diagonal[s];
        for &(to, r) in &q.rows[s] {
            let t = local[to];
            if t != usize::MAX {
                a[(t, p)] += r;
            }
        }
    }
    let scale = q.diagonal.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    a /= scale;
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(QueueError::SingularSystem)?;
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QueueError::SingularSystem);
    }
    let mut v: Vec<f64> = x.iter().copied().collect();
    normalise(&mut v)?;
    Ok(v)
}

fn solve_iterative(q: &Generator, map: &[usize], local: &[usize]) -> Result<Vec<f64>, QueueError> {
    let n = map.len();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (p, &s) in map.iter().enumerate() {
        for &(to, r) in &q.rows[s] {
            if local[to] != usize::MAX {
                incoming[local[to]].push((p, r));
            }
        }
    }
    let out_rate: Vec<f64> = map.iter().map(|&s| -q.diagonal[s]).collect();
    let mut x = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for sweep in 0..100_000 {
        for t in 0..n {
            if out_rate[t] > 0.0 {
                let inflow: f64 = incoming[t].iter().map(|&(p, r)| x[p] * r).sum();
                x[t] = inflow / out_rate[t];
            }
        }
        normalise(&mut x)?;
        if sweep % 20 == 0 {
            residual = (0..n)
                .map(|t| (incoming[t].iter().map(|&(p, r)| x[p] * r).sum::<f64>() - x[t] * out_rate[t]).abs())
                .fold(0.0, f64::max);
            if residual < 1e-12 {
                return Ok(x);
            }
        }
    }
    Err(QueueError::NotConverged { residual })
}

/// All stationary performance measures of one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMetrics {
    /// Probability an arriving class-s request finds every channel busy.
    pub pb_s: f64,
    pub pf1: f64,
    pub pf2: f64,
    pub scr1: f64,
    pub scr2: f64,
    pub utilization: f64,
    pub l1: f64,
    pub l2: f64,
    /// `None` when class r has no arrivals.
    pub d1: Option<f64>,
    /// `None` when class τ has no arrivals and nothing is interrupted.
    pub d2: Option<f64>,
    pub r_interrupt: f64,
}

impl QueueMetrics {
    pub const CSV_HEADER: &'static str = "name,pb_s,pf1,pf2,scr1,scr2,utilization,l1,l2,d1,d2,r_interrupt";

    /// One CSV row; undefined delays are written as `nan`.
    pub fn csv_row(&self, name: &str) -> String {
        let f = |x: f64| format!("{x:?}");
        let o = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), f);
        format!(
            "{name},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.pb_s),
            f(self.pf1),
            f(self.pf2),
            f(self.scr1),
            f(self.scr2),
            f(self.utilization),
            f(self.l1),
            f(self.l2),
            o(self.d1),
            o(self.d2),
            f(self.r_interrupt)
        )
    }
}

/// `i,j,k,m,n,probability` for every enumerated state.
pub fn pi_csv(space: &StateSpace, pi: &StationaryDistribution) -> String {
    let mut out = String::from("i,j,k,m,n,probability\n");
    for (s, p) in space.states().iter().zip(&pi.pi) {
        out.push_str(&format!("{},{},{},{},{},{p:?}\n", s.i, s.j, s.k, s.m, s.n));
    }
    out
}

/// `(PF1, PF2)`: the chance that an arriving class-r (class-τ) request finds
/// every channel busy and its queue full.
pub fn blocking_metrics(spec: &CtmcSpec, space: &StateSpace, pi: &StationaryDistribution) -> (f64, f64) {
    let c = spec.channels;
    let mut pf = (0.0, 0.0);
    for (s, &p) in space.states().iter().zip(&pi.pi) {
        if s.occupancy() == c {
            if s.m == spec.queue_r {
                pf.0 += p;
            }
            if s.n == spec.queue_tau {
                pf.1 += p;
            }
        }
    }
    (pf.0.clamp(0.0, 1.0), pf.1.clamp(0.0, 1.0))
}

/// Class-s blocking probability (all channels busy).
pub fn class_s_blocking(spec: &CtmcSpec, space: &StateSpace, pi: &StationaryDistribution) -> f64 {
    space.states().iter().zip(&pi.pi).filter(|(s, _)| s.occupancy() == spec.channels).map(|(_, p)| p).sum()
}

/// `(SCR1, SCR2, U)`.
pub fn completion_and_utilization(spec: &CtmcSpec, space: &StateSpace, pi: &StationaryDistribution) -> (f64, f64, f64) {
    let theta = spec.service_factor();
    let c = spec.channels as f64;
    let mut out = (0.0, 0.0, 0.0);
    for (s, &p) in space.states().iter().zip(&pi.pi) {
        out.0 += theta * s.j as f64 * spec.mu_r * p;
        out.1 += theta * s.k as f64 * spec.mu_tau * p;
        out.2 += s.occupancy() as f64 / c * p;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMetrics {
    pub l1: f64,
    pub l2: f64,
    pub d1: f64,
    pub d2: f64,
    pub r_interrupt: f64,
}

fn queue_lengths(spec: &CtmcSpec, space: &StateSpace, pi: &StationaryDistribution) -> (f64, f64, f64) {
    let c = spec.channels;
    let (mut l1, mut l2, mut ri) = (0.0, 0.0, 0.0);
    for (s, &p) in space.states().iter().zip(&pi.pi) {
        l1 += s.m as f64 * p;
        l2 += s.n as f64 * p;
        if s.occupancy() == c && s.j < c {
            ri += spec.lambda_r * s.k as f64 / (c - s.j) as f64 * p;
        }
    }
    (l1, l2, ri)
}

/// Queue lengths and waiting times. `D1` divides by the admitted class-r
/// rate `λ_r(1 − PF1)`; `D2` by `λ_τ + R_interrupt`.
pub fn delays(spec: &CtmcSpec, space: &StateSpace, pi: &StationaryDistribution) -> Result<DelayMetrics, QueueError> {
    let (l1, l2, r_interrupt) = queue_lengths(spec, space, pi);
    let (pf1, _) = blocking_metrics(spec, space, pi);
    let admitted = spec.lambda_r * (1.0 - pf1);
    if !(admitted > 0.0) {
        return Err(QueueError::ZeroArrivalRate { class: "r" });
    }
    let denom2 = spec.lambda_tau + r_interrupt;
    if !(denom2 > 0.0) {
        return Err(QueueError::ZeroArrivalRate { class: "tau" });
    }
    Ok(DelayMetrics { l1, l2, d1: l1 / admitted, d2: l2 / denom2, r_interrupt })
}

pub fn queue_metrics(spec: &CtmcSpec, space: &StateSpace, pi: &StationaryDistribution) -> QueueMetrics {
    let (pf1, pf2) = blocking_metrics(spec, space, pi);
    let (scr1, scr2, utilization) = completion_and_utilization(spec, space, pi);
    let (l1, l2, r_interrupt) = queue_lengths(spec, space, pi);
    let admitted = spec.lambda_r * (1.0 - pf1);
    let denom2 = spec.lambda_tau + r_interrupt;
    QueueMetrics {
        pb_s: class_s_blocking(spec, space, pi),
        pf1,
        pf2,
        scr1,
        scr2,
        utilization,
        l1,
        l2,
        d1: (admitted > 0.0).then(|| l1 / admitted),
        d2: (denom2 > 0.0).then(|| l2 / denom2),
        r_interrupt,
    }
}

/// Enumerates, builds, solves and summarises one spec.
pub fn analyse(spec: &CtmcSpec) -> Result<(StateSpace, StationaryDistribution, QueueMetrics), QueueError> {
    let space = enumerate_states(spec)?;
    let q = build_generator(spec, &space);
    let pi = solve_stationary(&q)?;
    let metrics = queue_metrics(spec, &space, &pi);
    Ok((space, pi, metrics))
}

/// `1/(β·μ − λ)`.
pub fn mean_response_time(beta: f64, mu: f64, lambda: f64) -> Result<f64, QueueError> {
    let capacity = beta * mu;
    if !(capacity > lambda) {
        return Err(QueueError::Unstable { capacity, arrival: lambda });
    }
    Ok(1.0 / (capacity - lambda))
}

/// Exponentially smoothed per-class arrival estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub s_hat: Vec<f64>,
    pub alpha_smooth: f64,
}

impl EstimatorState {
    pub fn new(classes: usize, alpha_smooth: f64) -> Result<Self, QueueError> {
        if !(0.0..=1.0).contains(&alpha_smooth) {
            return Err(QueueError::InvalidSpec(format!("smoothing factor must lie in [0, 1], got {alpha_smooth}")));
        }
        Ok(EstimatorState { s_hat: vec![0.0; classes], alpha_smooth })
    }
}

/// Moves class `class`'s estimate towards `observed`; other classes keep
/// their value.
pub fn estimator_update(state: &EstimatorState, class: usize, observed: f64) -> EstimatorState {
    let mut next = state.clone();
    let s = &mut next.s_hat[class];
    *s += state.alpha_smooth * (observed - *s);
    next
}

/// Time-weighted empirical state distribution from `events` simulated jumps.
pub fn simulate_ctmc(spec: &CtmcSpec, events: usize, seed: u64) -> Result<Vec<f64>, QueueError> {
    let space = enumerate_states(spec)?;
    let q = build_generator(spec, &space);
    Ok(simulate_generator(&q, events, seed))
}

fn simulate_generator(q: &Generator, events: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut time = vec![0.0; q.len()];
    let mut state = 0usize;
    for _ in 0..events {
        let out = -q.diagonal[state];
        if !(out > 0.0) {
            // absorbing: all remaining mass stays here
            time[state] += 1.0;
            break;
        }
        let u: f64 = rng.random();
        time[state] += -(1.0 - u).ln() / out;
        let mut pick = rng.random::<f64>() * out;
        let row = &q.rows[state];
        let mut next = row[row.len() - 1].0;
        for &(to, r) in row {
            if pick < r {
                next = to;
                break;
            }
            pick -= r;
        }
        state = next;
    }
    let total: f64 = time.iter().sum();
    time.iter().map(|t| t / total).collect()
}

/// Averages independent replicas seeded `seed, seed + 1, …`.
pub fn simulate_replicas(
    spec: &CtmcSpec,
    events_per_replica: usize,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>, QueueError> {
    let space = enumerate_states(spec)?;
    let q = build_generator(spec, &space);
    let seeds: Vec<u64> = (0..replicas as u64).map(|r| seed.wrapping_add(r)).collect();
    let runs = map_slice(exec, &seeds, |&s| simulate_generator(&q, events_per_replica, s));
    let mut avg = vec![0.0; q.len()];
    for run in &runs {
        for (a, v) in avg.iter_mut().zip(run) {
            *a += v / replicas as f64;
        }
    }
    Ok(avg)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Erlang-B blocking by the stable recursion `B(c) = aB(c−1)/(c + aB(c−1))`.
pub fn erlang_b(channels: usize, load: f64) -> f64 {
    (1..=channels).fold(1.0, |b, c| load * b / (c as f64 + load * b))
}

/// Mean queue length of M/M/1/K (`K` = system capacity).
pub fn mm1k_mean_queue(lambda: f64, mu: f64, k: usize) -> f64 {
    let rho = lambda / mu;
    let weights: Vec<f64> = (0..=k).map(|n| rho.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    weights.iter().enumerate().skip(1).map(|(n, w)| (n - 1) as f64 * w / z).sum()
}
