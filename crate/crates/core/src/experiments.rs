//! Instance templates, parameter sweeps over SNR, user count and backhaul
//! capacity, and their CSV output.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::RunConfig;
use crate::ee::{
    baseline_equal_power, baseline_random_power, solve_min_alpha_with, validate, EeError, InnerOptions,
    ProblemInstance, Solution, SolverOptions,
};
use crate::par::{map_slice, Execution};
use crate::radio::{db_to_linear, dbm_to_watts, Band, RadioConfig, UserChannel};
use crate::topology::{build_incidence, generate_topology, GeneratorParams, Link, Node, Topology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Ee(#[from] EeError),
}

impl ExperimentError {
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::InvalidSweep(_) => "E_SWEEP",
            ExperimentError::Topology(_) => "E_TOPOLOGY",
            ExperimentError::Ee(e) => e.code(),
        }
    }
}

/// Random-stream identifiers, one per subsystem.
pub mod stream {
    pub const TOPOLOGY: u64 = 1;
    pub const USERS: u64 = 2;
    pub const RANDOM_BASELINE: u64 = 3;
    pub const QUEUE_SIMULATION: u64 = 4;
}

/// Child seed for `stream` of `base`; distinct streams never share draws.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserParams {
    pub macro_users: usize,
    pub users_per_cell: usize,
    /// When set, this many users are dealt round-robin over the small cells
    /// and then the macro cell, replacing the per-cell counts.
    pub total_users: Option<usize>,
    pub gain_min_db: f64,
    pub gain_max_db: f64,
    /// Rescales both noise variances so that the median user's
    /// `gain·P_fair/σ²` equals this value.
    pub target_snr_db: Option<f64>,
}

impl Default for UserParams {
    fn default() -> Self {
        UserParams {
            macro_users: 2,
            users_per_cell: 2,
            total_users: None,
            gain_min_db: -110.0,
            gain_max_db: -90.0,
            target_snr_db: Some(10.0),
        }
    }
}

impl UserParams {
    /// Users per base station, indexed by node id.
    pub fn counts(&self, n_nodes: usize) -> Vec<usize> {
        match self.total_users {
            None => (0..n_nodes).map(|n| if n == 0 { self.macro_users } else { self.users_per_cell }).collect(),
            Some(total) => {
                let order: Vec<usize> = (1..n_nodes).chain(std::iter::once(0)).collect();
                let mut counts = vec![0; n_nodes];
                for u in 0..total {
                    counts[order[u % order.len()]] += 1;
                }
                counts
            }
        }
    }

    pub fn generate(&self, n_nodes: usize, seed: u64) -> Vec<UserChannel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut users = Vec::new();
        for (bs, &count) in self.counts(n_nodes).iter().enumerate() {
            for _ in 0..count {
                let gain_db = if self.gain_max_db > self.gain_min_db {
                    rng.random_range(self.gain_min_db..self.gain_max_db)
                } else {
                    self.gain_min_db
                };
                users.push(UserChannel {
                    user_id: users.len(),
                    attached_bs: bs,
                    gain_sq: db_to_linear(gain_db),
                    demand_class: 0,
                });
            }
        }
        users
    }
}

/// Base-station power budget and the per-user transmit power range.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerParams {
    pub bs_max_power_dbm: f64,
    pub tx_backoff_db: f64,
    pub sensor_power_min_w: f64,
    pub sensor_power_max_w: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams { bs_max_power_dbm: 43.0, tx_backoff_db: 1.5, sensor_power_min_w: 5.0, sensor_power_max_w: 90.0 }
    }
}

impl PowerParams {
    /// Usable budget per base station after the transmit backoff.
    pub fn budget_watts(&self) -> f64 {
        dbm_to_watts(self.bs_max_power_dbm - self.tx_backoff_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerParams {
    pub tol: f64,
    pub max_bisection_iters: usize,
    /// Newton-step cap of one inner solve.
    pub upper_iteration_bound: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams { tol: 1e-4, max_bisection_iters: 200, upper_iteration_bound: 2000 }
    }
}

impl OptimizerParams {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iterations: self.max_bisection_iters,
            inner: InnerOptions { newton_cap: self.upper_iteration_bound, force_barrier: false },
            polish: true,
        }
    }
}

/// Turns a topology and users into an instance: noise rescaled to the target
/// SNR, and rate boxes cut to what the sensor power range can reach.
pub fn assemble_instance(
    topology: Topology,
    users: Vec<UserChannel>,
    radio: &RadioConfig,
    target_snr_db: Option<f64>,
    power: &PowerParams,
) -> Result<ProblemInstance, EeError> {
    let mut radio = radio.clone();
    if let Some(snr_db) = target_snr_db {
        let mut count = vec![0usize; topology.n_nodes()];
        for u in &users {
            if u.attached_bs < count.len() {
                count[u.attached_bs] += 1;
            }
        }
        let mut snr: Vec<f64> = users
            .iter()
            .filter(|u| u.attached_bs < count.len())
            .map(|u| u.gain_sq * topology.nodes()[u.attached_bs].max_power_watts / count[u.attached_bs] as f64)
            .collect();
        snr.sort_by(f64::total_cmp);
        if let Some(&median) = snr.get(snr.len().saturating_sub(1) / 2) {
            let sigma2 = median / db_to_linear(snr_db);
            radio.noise_variance_macro_watts = sigma2;
            radio.noise_variance_small_watts = sigma2;
        }
    }
    let inst = ProblemInstance::new(topology, radio, users)?;
    let bounds = (0..inst.n_users())
        .map(|j| {
            let lo = inst.radio.y_min_bps.min(inst.rate_for_power(j, power.sensor_power_min_w));
            let hi = inst.radio.y_max_bps.min(inst.rate_for_power(j, power.sensor_power_max_w)).max(lo);
            (lo, hi)
        })
        .collect();
    inst.with_rate_bounds(bounds)
}

/// Everything needed to draw a random instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTemplate {
    pub generator: GeneratorParams,
    pub radio: RadioConfig,
    pub users: UserParams,
    pub power: PowerParams,
    /// Multiplies every derived link capacity.
    pub capacity_scale: f64,
}

impl Default for InstanceTemplate {
    fn default() -> Self {
        InstanceTemplate {
            generator: GeneratorParams::default(),
            radio: RadioConfig::default(),
            users: UserParams::default(),
            power: PowerParams::default(),
            capacity_scale: 1.0,
        }
    }
}

impl InstanceTemplate {
    pub fn build(&self, seed: u64) -> Result<ProblemInstance, ExperimentError> {
        let (topo, users) = self.draw(seed)?;
        Ok(assemble_instance(topo, users, &self.radio, self.users.target_snr_db, &self.power)?)
    }

    /// The random topology and users behind `build(seed)`.
    pub fn draw(&self, seed: u64) -> Result<(Topology, Vec<UserChannel>), ExperimentError> {
        let budget = self.power.budget_watts();
        let params = GeneratorParams { macro_power_watts: budget, small_power_watts: budget, ..self.generator.clone() };
        let mut topo = generate_topology(&params, &self.radio, derive_seed(seed, stream::TOPOLOGY))?;
        if self.capacity_scale != 1.0 {
            let scale = self.capacity_scale;
            topo = topo.with_capacities(|l| l.capacity_bps * scale)?;
        }
        let users = self.users.generate(topo.n_nodes(), derive_seed(seed, stream::USERS));
        Ok((topo, users))
    }
}

/// The Table-1 configuration.
pub fn default_config() -> RunConfig {
    RunConfig::default()
}

/// The three figure sweeps run when a configuration names none: SNR
/// 0–27 dB, 4–22 users and capacity multipliers 0.1–5, each over 20 seeds.
pub fn default_sweeps() -> Vec<(String, SweepSpec)> {
    let seeds: Vec<u64> = (1..=20).collect();
    vec![
        ("snr".into(), SweepSpec::new(SweepAxis::SnrDb, (0..10).map(|i| 3.0 * i as f64).collect(), seeds.clone())),
        (
            "user_count".into(),
            SweepSpec::new(SweepAxis::UserCount, (0..10).map(|i| 4.0 + 2.0 * i as f64).collect(), seeds.clone()),
        ),
        (
            "backhaul".into(),
            SweepSpec::new(SweepAxis::Backhaul, vec![0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 5.0], seeds),
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    UserCount,
    /// Link-capacity multiplier.
    Backhaul,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::UserCount => "user_count",
            SweepAxis::Backhaul => "backhaul",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "snr_db" => Some(SweepAxis::SnrDb),
            "user_count" => Some(SweepAxis::UserCount),
            "backhaul" => Some(SweepAxis::Backhaul),
            _ => None,
        }
    }

    /// The template at one axis value.
    pub fn apply(self, template: &InstanceTemplate, value: f64) -> InstanceTemplate {
        let mut t = template.clone();
        match self {
            SweepAxis::SnrDb => t.users.target_snr_db = Some(value),
            SweepAxis::UserCount => t.users.total_users = Some(value as usize),
            SweepAxis::Backhaul => t.capacity_scale = value,
        }
        t
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Optimized,
    EqualPower,
    RandomPower,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Optimized, Method::EqualPower, Method::RandomPower];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Optimized => "optimized",
            Method::EqualPower => "equal_power",
            Method::RandomPower => "random_power",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, seeds: Vec<u64>) -> Self {
        SweepSpec { axis, values, seeds, methods: Method::ALL.to_vec() }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSweep(m));
        if self.values.is_empty() {
            return bad("axis values are empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("axis values must be finite".into());
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return bad("axis values must be strictly monotone".into());
        }
        match self.axis {
            SweepAxis::UserCount if self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) => {
                bad("user counts must be positive integers".into())
            }
            SweepAxis::Backhaul if self.values.iter().any(|&v| v <= 0.0) => {
                bad("backhaul capacity multipliers must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowMetrics {
    pub f1_bps: f64,
    pub f2_w: f64,
    pub ee_bps_per_w: f64,
    pub max_link_util: f64,
    pub mean_link_util: f64,
    /// Sum of link capacities of the instance.
    pub backhaul_capacity_bps: f64,
}

impl RowMetrics {
    pub fn from_solution(inst: &ProblemInstance, sol: &Solution) -> Self {
        let util = sol.link_utilisation(&inst.topology);
        let n = util.len().max(1) as f64;
        RowMetrics {
            f1_bps: sol.f1(),
            f2_w: sol.f2(),
            ee_bps_per_w: sol.f1() / sol.f2(),
            max_link_util: util.iter().copied().fold(0.0, f64::max),
            mean_link_util: util.iter().sum::<f64>() / n,
            backhaul_capacity_bps: inst.topology.capacities().iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub method: Method,
    pub seed: u64,
    /// Metrics, or the error code that stopped the row.
    pub outcome: Result<RowMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn status(e: &EeError) -> String {
    match e.constraint() {
        Some(c) => format!("{}:{c}", e.code()),
        None => e.code().to_string(),
    }
}

/// Runs one method on one instance.
pub fn run_method(
    inst: &ProblemInstance,
    method: Method,
    solver: &SolverOptions,
    seed: u64,
) -> Result<RowMetrics, String> {
    let sol = match method {
        Method::Optimized => {
            let opt = solve_min_alpha_with(inst, solver).map_err(|e| status(&e))?;
            if !validate(inst, &opt.solution).all_pass() {
                return Err("E_VALIDATE".into());
            }
            opt.solution
        }
        Method::EqualPower => baseline_equal_power(inst).map_err(|e| status(&e))?.0,
        Method::RandomPower => {
            baseline_random_power(inst, derive_seed(seed, stream::RANDOM_BASELINE)).map_err(|e| status(&e))?.0
        }
    };
    Ok(RowMetrics::from_solution(inst, &sol))
}

/// Every `(axis value, method, seed)` row, ordered by axis value, then
/// method, then seed. Instance seeds depend on `run_seed` and the row seed
/// only, so one seed sees the same network at every axis value.
pub fn sweep(
    spec: &SweepSpec,
    template: &InstanceTemplate,
    solver: &SolverOptions,
    run_seed: u64,
    exec: Execution,
) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|a| (0..spec.seeds.len()).map(move |s| (a, s))).collect();
    let results = map_slice(exec, &jobs, |&(a, s)| {
        let value = spec.values[a];
        let seed = derive_seed(run_seed, spec.seeds[s]);
        match spec.axis.apply(template, value).build(seed) {
            Ok(inst) => spec.methods.iter().map(|&m| run_method(&inst, m, solver, seed)).collect::<Vec<_>>(),
            Err(e) => vec![Err(e.code().to_string()); spec.methods.len()],
        }
    });
    let mut rows = Vec::with_capacity(jobs.len() * spec.methods.len());
    for (a, &value) in spec.values.iter().enumerate() {
        for (m, &method) in spec.methods.iter().enumerate() {
            for (s, &seed) in spec.seeds.iter().enumerate() {
                let outcome = results[a * spec.seeds.len() + s][m].clone();
                rows.push(SweepRow { axis_value: value, method, seed, outcome });
            }
        }
    }
    Ok(SweepResult { axis: spec.axis, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageRow {
    pub axis_value: f64,
    pub method: Method,
    pub n_ok: usize,
    /// `None` when every row of the group failed.
    pub mean: Option<RowMetrics>,
}

impl SweepResult {
    /// Means over the successful rows of each `(axis value, method)` group.
    pub fn averages(&self) -> Vec<AverageRow> {
        let mut out: Vec<AverageRow> = Vec::new();
        for row in &self.rows {
            let fresh = out.last().is_none_or(|g| g.axis_value != row.axis_value || g.method != row.method);
            if fresh {
                out.push(AverageRow { axis_value: row.axis_value, method: row.method, n_ok: 0, mean: None });
            }
            let group = out.last_mut().expect("group pushed above");
            if let Ok(m) = &row.outcome {
                group.n_ok += 1;
                let acc = group.mean.get_or_insert(RowMetrics {
                    f1_bps: 0.0,
                    f2_w: 0.0,
                    ee_bps_per_w: 0.0,
                    max_link_util: 0.0,
                    mean_link_util: 0.0,
                    backhaul_capacity_bps: 0.0,
                });
                acc.f1_bps += m.f1_bps;
                acc.f2_w += m.f2_w;
                acc.ee_bps_per_w += m.ee_bps_per_w;
                acc.max_link_util += m.max_link_util;
                acc.mean_link_util += m.mean_link_util;
                acc.backhaul_capacity_bps += m.backhaul_capacity_bps;
            }
        }
        for g in &mut out {
            if let Some(m) = &mut g.mean {
                let n = g.n_ok as f64;
                m.f1_bps /= n;
                m.f2_w /= n;
                m.ee_bps_per_w /= n;
                m.max_link_util /= n;
                m.mean_link_util /= n;
                m.backhaul_capacity_bps /= n;
            }
        }
        out
    }

    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "axis,method,seed,f1_bps,f2_w,ee_bps_per_w,max_link_util,mean_link_util,backhaul_capacity_bps,status\n",
        );
        for r in &self.rows {
            let (metrics, status) = match &r.outcome {
                Ok(m) => (metrics_fields(m), "ok".to_string()),
                Err(code) => (",,,,,".to_string(), code.clone()),
            };
            out.push_str(&format!("{},{},{},{},{}\n", fmt_f64(r.axis_value), r.method, r.seed, metrics, status));
        }
        out
    }

    pub fn averages_csv(&self) -> String {
        let mut out = String::from(
            "axis,method,n_ok,f1_bps,f2_w,ee_bps_per_w,max_link_util,mean_link_util,backhaul_capacity_bps\n",
        );
        for g in self.averages() {
            let metrics = g.mean.as_ref().map_or(",,,,,".to_string(), metrics_fields);
            out.push_str(&format!("{},{},{},{}\n", fmt_f64(g.axis_value), g.method, g.n_ok, metrics));
        }
        out
    }
}

fn metrics_fields(m: &RowMetrics) -> String {
    [m.f1_bps, m.f2_w, m.ee_bps_per_w, m.max_link_util, m.mean_link_util, m.backhaul_capacity_bps]
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(",")
}

/// A small random instance in normalised units (`ΔB = 1 MHz`, `σ² = 1`,
/// rates in `[0.5, 4]` Mbps): at most three small cells, six links and six
/// users. Capacities and budgets are drawn so that they bind on some draws.
pub fn random_small_instance(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radio = RadioConfig {
        macro_bandwidth_hz: 1e6,
        macro_subcarriers: 1,
        small_bandwidth_hz: 1e6,
        small_subcarriers: 1,
        noise_variance_macro_watts: 1.0,
        noise_variance_small_watts: 1.0,
        y_min_bps: 0.5e6,
        y_max_bps: 4e6,
        ..RadioConfig::default()
    };
    let d = rng.random_range(1..=3usize);
    let mut pairs: Vec<(usize, usize)> = (1..=d).map(|v| (rng.random_range(0..v), v)).collect();
    let mut candidates: Vec<(usize, usize)> = (0..=d)
        .flat_map(|u| (1..=d).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && !pairs.contains(&(u, v)))
        .collect();
    let extra = rng.random_range(0..=(6 - d).min(candidates.len()));
    for _ in 0..extra {
        pairs.push(candidates.remove(rng.random_range(0..candidates.len())));
    }
    let links: Vec<Link> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(from, to))| Link {
            id: i + 1,
            from,
            to,
            band: if from == 0 { Band::Eband } else { Band::Vband },
            distance_km: 0.1,
            capacity_bps: rng.random_range(1e6..2.4e7),
            max_power_watts: rng.random_range(0.5..5.0),
        })
        .collect();

    let n_users = rng.random_range(1..=6usize);
    let users: Vec<UserChannel> = (0..n_users)
        .map(|j| UserChannel {
            user_id: j,
            attached_bs: rng.random_range(0..=d),
            gain_sq: 10f64.powf(rng.random_range(-1.0..0.5)),
            demand_class: 0,
        })
        .collect();

    // budget = factor × (access power at the midpoint rate + all outgoing backhaul at full power)
    let mid_power = |g: f64| (2f64.powf(2.25) - 1.0) / g;
    let nodes: Vec<Node> = (0..=d)
        .map(|n| {
            let access: f64 = users.iter().filter(|u| u.attached_bs == n).map(|u| mid_power(u.gain_sq)).sum();
            let backhaul: f64 = links.iter().filter(|l| l.from == n).map(|l| l.max_power_watts).sum();
            let budget = (rng.random_range(0.6..3.0) * (access + backhaul)).max(0.05);
            if n == 0 {
                Node::macro_bs(budget)
            } else {
                Node::small(n, budget)
            }
        })
        .collect();
    let topo = build_incidence(nodes, links).expect("generated topology is valid");
    ProblemInstance::new(topo, radio, users).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_template() -> InstanceTemplate {
        InstanceTemplate {
            generator: GeneratorParams { small_cells: 2, extra_links: 0, ..Default::default() },
            users: UserParams { macro_users: 1, users_per_cell: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn table_one_defaults() {
        let p = PowerParams::default();
        assert_eq!(p.bs_max_power_dbm, 43.0);
        assert!((p.budget_watts() - dbm_to_watts(41.5)).abs() < 1e-12);
        assert_eq!(OptimizerParams::default().upper_iteration_bound, 2000);
        assert_eq!(RadioConfig::default().link_margin_db, 5.0);
    }

    #[test]
    fn single_point_single_seed_gives_three_rows() {
        let spec = SweepSpec::new(SweepAxis::SnrDb, vec![10.0], vec![1]);
        let res = sweep(&spec, &quick_template(), &SolverOptions::default(), 7, Execution::Sequential).unwrap();
        assert_eq!(res.rows.len(), 3);
        let methods: Vec<_> = res.rows.iter().map(|r| r.method).collect();
        assert_eq!(methods, Method::ALL.to_vec());
        assert!(res.rows.iter().all(|r| r.outcome.is_ok()), "{:?}", res.rows);
        assert_eq!(res.averages().len(), 3);
    }

    #[test]
    fn sweep_validation() {
        let t = quick_template();
        let o = SolverOptions::default();
        for spec in [
            SweepSpec::new(SweepAxis::SnrDb, vec![], vec![1]),
            SweepSpec::new(SweepAxis::SnrDb, vec![1.0], vec![]),
            SweepSpec::new(SweepAxis::SnrDb, vec![1.0, 1.0], vec![1]),
            SweepSpec::new(SweepAxis::UserCount, vec![2.5], vec![1]),
            SweepSpec::new(SweepAxis::Backhaul, vec![0.0, 1.0], vec![1]),
        ] {
            assert!(matches!(sweep(&spec, &t, &o, 0, Execution::Sequential), Err(ExperimentError::InvalidSweep(_))));
        }
    }

    #[test]
    fn user_counts_round_robin() {
        let p = UserParams { total_users: Some(5), ..Default::default() };
        assert_eq!(p.counts(3), vec![1, 2, 2]);
        assert_eq!(UserParams::default().counts(3), vec![2, 2, 2]);
    }

    #[test]
    fn snr_target_sets_median() {
        let t = quick_template();
        let inst = t.build(3).unwrap();
        let mut snr: Vec<f64> = inst
            .users
            .iter()
            .map(|u| u.gain_sq * inst.budgets[u.attached_bs] / 1.0 / inst.radio.noise_variance_small_watts)
            .collect();
        snr.sort_by(f64::total_cmp);
        assert!((snr[1] / 10.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_are_stream_separated() {
        assert_ne!(derive_seed(1, stream::TOPOLOGY), derive_seed(1, stream::USERS));
        assert_eq!(derive_seed(9, 2), derive_seed(9, 2));
        assert_eq!(random_small_instance(4), random_small_instance(4));
    }

    #[test]
    fn random_small_instances_respect_limits() {
        for seed in 0..200 {
            let inst = random_small_instance(seed);
            assert!(inst.topology.n_small() <= 3 && inst.topology.n_links() <= 6 && inst.n_users() <= 6);
            assert_eq!(crate::topology::reachable_destinations(&inst.topology).len(), inst.topology.n_small());
        }
    }

    #[test]
    fn csv_is_shortest_roundtrip() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1e-13), "1e-13");
        assert_eq!(fmt_f64(3.0), "3.0");
    }
}
