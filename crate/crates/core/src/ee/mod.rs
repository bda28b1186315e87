//! Energy-efficiency maximisation over rates, routing and powers.
//!
//! The objective is `f1/f2` with `f1` the sum of user rates and `f2` the
//! access power plus the load-proportional backhaul power. It is solved as a
//! bisection on `α = f2/f1` where every probe asks whether some feasible
//! point has `f2 − α·f1 ≤ 0`.

mod barrier;
mod baselines;
mod bisection;
mod inner;
mod oracle;
mod validate;

use std::fmt;

use thiserror::Error;

use crate::flow::{link_loads, Demands, FlowAssignment, FlowError, LinkLoads};
use crate::radio::{access_power_for_rate, access_rate, RadioConfig, RadioError, UserChannel};
use crate::topology::{NodeKind, Topology};

pub use baselines::{baseline_equal_power, baseline_random_power, equal_power_shares};
pub use bisection::{solve_min_alpha, solve_min_alpha_with, BracketStep, Optimum, SolverOptions};
pub use inner::{feasibility_subproblem, inner_minimize, Feasibility, InnerMethod, InnerOptions, InnerResult};
pub use oracle::{brute_force_oracle, brute_force_oracle_refined, ORACLE_MAX_LINKS, ORACLE_MAX_SMALL, ORACLE_MAX_USERS};
pub use validate::{validate, ConstraintCheck, ConstraintReport};

/// Relative tolerance used for every constraint check.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// The nine constraint classes of the optimisation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// Small-cell demand equals the sum of its users' rates.
    C1,
    /// Flow conservation.
    C2,
    /// Link load is the sum of per-destination flows.
    C3,
    /// Link capacity.
    C4,
    /// Small-cell power budget.
    C5,
    /// Macro power budget.
    C6,
    /// Non-negativity.
    C7,
    /// Rate upper bound.
    C8,
    /// Rate lower bound.
    C9,
}

impl Constraint {
    pub const ALL: [Constraint; 9] = [
        Constraint::C1,
        Constraint::C2,
        Constraint::C3,
        Constraint::C4,
        Constraint::C5,
        Constraint::C6,
        Constraint::C7,
        Constraint::C8,
        Constraint::C9,
    ];

    pub fn description(self) -> &'static str {
        match self {
            Constraint::C1 => "demand aggregation",
            Constraint::C2 => "flow conservation",
            Constraint::C3 => "link load definition",
            Constraint::C4 => "link capacity",
            Constraint::C5 => "small-cell power budget",
            Constraint::C6 => "macro power budget",
            Constraint::C7 => "non-negativity",
            Constraint::C8 => "rate upper bound",
            Constraint::C9 => "rate lower bound",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("even the minimum rates violate {class} ({})", class.description())]
    RateBoxInfeasible { class: Constraint },
    #[error("instance infeasible: {class} ({}) {detail}", class.description())]
    InstanceInfeasible { class: Constraint, detail: String },
    #[error("bisection did not converge in {iterations} iterations (bracket width {width:e})")]
    NonConvergence { iterations: usize, width: f64 },
    #[error("instance too large for the exhaustive oracle: {0}")]
    TooLarge(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

impl EeError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            EeError::DimensionMismatch { .. } => "E_DIMENSION",
            EeError::InvalidInstance(_) => "E_INVALID_INSTANCE",
            EeError::DegenerateInstance(_) => "E_DEGENERATE",
            EeError::RateBoxInfeasible { .. } | EeError::InstanceInfeasible { .. } => "E_INFEASIBLE",
            EeError::NonConvergence { .. } => "E_NONCONVERGENCE",
            EeError::TooLarge(_) => "E_TOO_LARGE",
            EeError::Numerical(_) => "E_NUMERICAL",
            EeError::Flow(_) => "E_FLOW",
            EeError::Radio(_) => "E_RADIO",
        }
    }

    /// The violated constraint class, for infeasibility errors.
    pub fn constraint(&self) -> Option<Constraint> {
        match self {
            EeError::RateBoxInfeasible { class } | EeError::InstanceInfeasible { class, .. } => Some(*class),
            _ => None,
        }
    }
}

/// A complete optimisation instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub topology: Topology,
    pub radio: RadioConfig,
    pub users: Vec<UserChannel>,
    /// Per-user `(y_min, y_max)`.
    pub rate_bounds: Vec<(f64, f64)>,
    /// Per-node total power budget, indexed by node id.
    pub budgets: Vec<f64>,
    /// Per-user power floor used only by [`alpha_bounds`].
    pub power_floor: Vec<f64>,
}

impl ProblemInstance {
    /// Builds an instance with the radio's global rate box for every user,
    /// node budgets taken from the topology, and power floors at `y_min`.
    pub fn new(topology: Topology, radio: RadioConfig, users: Vec<UserChannel>) -> Result<Self, EeError> {
        let rate_bounds = vec![(radio.y_min_bps, radio.y_max_bps); users.len()];
        let budgets = topology.nodes().iter().map(|n| n.max_power_watts).collect();
        let mut inst =
            ProblemInstance { topology, radio, users, rate_bounds, budgets, power_floor: Vec::new() };
        inst.check()?;
        inst.reset_power_floor();
        Ok(inst)
    }

    /// Sets every power floor to the power needed for the user's `y_min`.
    pub fn reset_power_floor(&mut self) {
        self.power_floor = (0..self.users.len()).map(|j| self.access_power(j, self.rate_bounds[j].0)).collect();
    }

    pub fn with_rate_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self, EeError> {
        if bounds.len() != self.users.len() {
            return Err(EeError::DimensionMismatch { expected: self.users.len(), got: bounds.len() });
        }
        self.rate_bounds = bounds;
        self.check()?;
        self.reset_power_floor();
        Ok(self)
    }

    pub fn with_budgets(mut self, budgets: Vec<f64>) -> Result<Self, EeError> {
        self.budgets = budgets;
        self.check()?;
        Ok(self)
    }

    /// Checks the structural invariants.
    pub fn check(&self) -> Result<(), EeError> {
        let n = self.topology.n_nodes();
        if self.budgets.len() != n {
            return Err(EeError::DimensionMismatch { expected: n, got: self.budgets.len() });
        }
        if self.rate_bounds.len() != self.users.len() {
            return Err(EeError::DimensionMismatch { expected: self.users.len(), got: self.rate_bounds.len() });
        }
        if let Some((node, b)) = self.budgets.iter().enumerate().find(|(_, b)| !(**b > 0.0 && b.is_finite())) {
            return Err(EeError::InvalidInstance(format!("node {node} budget must be positive, got {b}")));
        }
        for (j, u) in self.users.iter().enumerate() {
            if u.attached_bs >= n {
                return Err(EeError::InvalidInstance(format!(
                    "user {} attached to unknown node {}",
                    u.user_id, u.attached_bs
                )));
            }
            if !(u.gain_sq > 0.0 && u.gain_sq.is_finite()) {
                return Err(EeError::InvalidInstance(format!("user {} gain must be positive", u.user_id)));
            }
            let (lo, hi) = self.rate_bounds[j];
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(EeError::InvalidInstance(format!(
                    "user {} rate box [{lo}, {hi}] is not a valid interval",
                    u.user_id
                )));
            }
        }
        if self.users.is_empty() {
            return Err(EeError::InvalidInstance("no users".into()));
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn is_macro_user(&self, j: usize) -> bool {
        self.users[j].attached_bs == 0
    }

    /// Sub-carrier bandwidth of user `j`'s tier.
    pub fn delta_b(&self, j: usize) -> f64 {
        if self.is_macro_user(j) {
            self.radio.delta_b_macro_hz()
        } else {
            self.radio.delta_b_small_hz()
        }
    }

    pub fn noise_variance(&self, j: usize) -> f64 {
        if self.is_macro_user(j) {
            self.radio.noise_variance_macro_watts
        } else {
            self.radio.noise_variance_small_watts
        }
    }

    /// `σ²/|h|²` for user `j`.
    pub fn noise_to_gain(&self, j: usize) -> f64 {
        self.noise_variance(j) / self.users[j].gain_sq
    }

    /// Access power for rate `y`; `y` must be non-negative.
    pub fn access_power(&self, j: usize, y: f64) -> f64 {
        access_power_for_rate(y.max(0.0), self.users[j].gain_sq, self.delta_b(j), self.noise_variance(j))
            .expect("instance parameters validated")
    }

    pub fn rate_for_power(&self, j: usize, p: f64) -> f64 {
        access_rate(p.max(0.0), self.users[j].gain_sq, self.delta_b(j), self.noise_variance(j))
            .expect("instance parameters validated")
    }

    /// Aggregate small-cell demands produced by `rates`.
    pub fn demands(&self, rates: &[f64]) -> Demands {
        let mut d = Demands::zeros(self.topology.n_nodes());
        for (u, &y) in self.users.iter().zip(rates) {
            if u.attached_bs != 0 {
                d.add(u.attached_bs, y);
            }
        }
        d
    }

    pub fn min_rates(&self) -> Vec<f64> {
        self.rate_bounds.iter().map(|b| b.0).collect()
    }

    pub fn max_rates(&self) -> Vec<f64> {
        self.rate_bounds.iter().map(|b| b.1).collect()
    }

    /// Which budget class a node's constraint belongs to.
    pub fn budget_class(&self, node: usize) -> Constraint {
        match self.topology.nodes()[node].kind {
            NodeKind::Macro => Constraint::C6,
            NodeKind::Small => Constraint::C5,
        }
    }

    /// Power drawn at each node: its users' access powers plus the backhaul
    /// power of its outgoing links.
    pub fn node_power(&self, rates: &[f64], loads: &LinkLoads) -> Vec<f64> {
        let mut out = vec![0.0; self.topology.n_nodes()];
        for (j, &y) in rates.iter().enumerate() {
            out[self.users[j].attached_bs] += self.access_power(j, y);
        }
        for (l, link) in self.topology.links().iter().enumerate() {
            out[link.from] += link.unit_cost() * loads.0[l];
        }
        out
    }
}

/// Rates, routing and powers of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub rates: Vec<f64>,
    pub flows: FlowAssignment,
    pub loads: LinkLoads,
    pub access_powers: Vec<f64>,
    pub backhaul_powers: Vec<f64>,
}

impl Solution {
    pub fn assemble(instance: &ProblemInstance, rates: Vec<f64>, flows: FlowAssignment) -> Solution {
        let loads = link_loads(&flows);
        let access_powers = (0..rates.len()).map(|j| instance.access_power(j, rates[j])).collect();
        let backhaul_powers =
            instance.topology.links().iter().zip(&loads.0).map(|(l, t)| l.unit_cost() * t).collect();
        Solution { rates, flows, loads, access_powers, backhaul_powers }
    }

    pub fn f1(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn f2(&self) -> f64 {
        self.access_powers.iter().sum::<f64>() + self.backhaul_powers.iter().sum::<f64>()
    }

    /// `f2/f1` in joules per bit.
    pub fn alpha(&self) -> f64 {
        self.f2() / self.f1()
    }

    /// Per-link `t_l / c_l`.
    pub fn link_utilisation(&self, topology: &Topology) -> Vec<f64> {
        topology.links().iter().zip(&self.loads.0).map(|(l, t)| t / l.capacity_bps).collect()
    }

    pub fn rates_csv(&self, instance: &ProblemInstance) -> String {
        let mut out = String::from("user_id,attached_bs,rate_bps,access_power_w\n");
        for (j, u) in instance.users.iter().enumerate() {
            out.push_str(&format!("{},{},{:?},{:?}\n", u.user_id, u.attached_bs, self.rates[j], self.access_powers[j]));
        }
        out
    }

    pub fn links_csv(&self, topology: &Topology) -> String {
        let mut out = String::from("link_id,from,to,load_bps,capacity_bps,utilisation,backhaul_power_w\n");
        for (l, link) in topology.links().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:?},{:?},{:?},{:?}\n",
                link.id,
                link.from,
                link.to,
                self.loads.0[l],
                link.capacity_bps,
                self.loads.0[l] / link.capacity_bps,
                self.backhaul_powers[l]
            ));
        }
        out
    }
}

/// Summary of an optimisation run or of a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct EEReport {
    pub f1_bps: f64,
    pub f2_watts: f64,
    pub ee_bps_per_watt: f64,
    pub alpha_joules_per_bit: f64,
    pub iterations: usize,
    pub bracket_width: f64,
}

impl EEReport {
    pub fn from_solution(sol: &Solution, iterations: usize, bracket_width: f64) -> EEReport {
        let (f1, f2) = (sol.f1(), sol.f2());
        EEReport {
            f1_bps: f1,
            f2_watts: f2,
            ee_bps_per_watt: f1 / f2,
            alpha_joules_per_bit: f2 / f1,
            iterations,
            bracket_width,
        }
    }
}

pub fn eval_f1(instance: &ProblemInstance, rates: &[f64]) -> Result<f64, EeError> {
    if rates.len() != instance.n_users() {
        return Err(EeError::DimensionMismatch { expected: instance.n_users(), got: rates.len() });
    }
    Ok(rates.iter().sum())
}

pub fn eval_f2(instance: &ProblemInstance, rates: &[f64], loads: &LinkLoads) -> Result<f64, EeError> {
    if rates.len() != instance.n_users() {
        return Err(EeError::DimensionMismatch { expected: instance.n_users(), got: rates.len() });
    }
    if loads.0.len() != instance.topology.n_links() {
        return Err(EeError::DimensionMismatch { expected: instance.topology.n_links(), got: loads.0.len() });
    }
    let mut total = 0.0;
    for (j, &y) in rates.iter().enumerate() {
        let u = &instance.users[j];
        total += access_power_for_rate(y, u.gain_sq, instance.delta_b(j), instance.noise_variance(j))?;
    }
    for (link, t) in instance.topology.links().iter().zip(&loads.0) {
        total += link.unit_cost() * t;
    }
    Ok(total)
}

/// Bracket `[α_lo, α_hi]` on the optimal joules per bit.
pub fn alpha_bounds(instance: &ProblemInstance) -> Result<(f64, f64), EeError> {
    let min_total: f64 = instance.rate_bounds.iter().map(|b| b.0).sum();
    if !(min_total > 0.0) || instance.rate_bounds.iter().any(|b| !(b.0 > 0.0)) {
        return Err(EeError::DegenerateInstance("a zero minimum rate leaves the upper bound unbounded".into()));
    }
    let max_total: f64 = instance.rate_bounds.iter().map(|b| b.1).sum();
    let floor: f64 = instance.power_floor.iter().sum();
    let backhaul: f64 = instance.topology.links().iter().map(|l| l.max_power_watts).sum();
    let access_max: f64 = (0..instance.n_users()).map(|j| instance.access_power(j, instance.rate_bounds[j].1)).sum();
    Ok((floor / max_total, (backhaul + access_max) / min_total))
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn f1_examples() {
        let inst = instance(&[100.0, 100.0], &[(0, 1, 1e7, 5.0)], &[(1, 1.0), (1, 1.0), (0, 1.0)]);
        assert_eq!(eval_f1(&inst, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(eval_f1(&inst, &[1e6, 2e6, 3e6]).unwrap(), 6e6);
        assert_eq!(eval_f1(&inst, &[3e6, 1e6, 2e6]).unwrap(), 6e6);
        assert!(eval_f1(&inst, &[1.0]).is_err());
    }

    #[test]
    fn f2_examples() {
        let inst = instance(&[100.0, 100.0], &[(0, 1, 2e6, 5.0)], &[(1, 1.0)]);
        assert_eq!(eval_f2(&inst, &[0.0], &LinkLoads(vec![0.0])).unwrap(), 0.0);
        let f2 = eval_f2(&inst, &[1e6], &LinkLoads(vec![1e6])).unwrap();
        assert!((f2 - 3.5).abs() < 1e-12);
        let base = eval_f2(&inst, &[0.0], &LinkLoads(vec![0.5e6])).unwrap();
        let doubled = eval_f2(&inst, &[0.0], &LinkLoads(vec![1e6])).unwrap();
        assert!((doubled - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn alpha_bounds_example() {
        // two users, y ∈ [1e6, 2e6]; floors sum to 2 W, backhaul 10 W, access max 4 W
        let mut inst = instance(&[100.0, 100.0], &[(0, 1, 1e7, 10.0)], &[(1, 1.5), (1, 1.5)])
            .with_rate_bounds(vec![(1e6, 2e6); 2])
            .unwrap();
        // σ²/g = 2/3: P(2e6) = 2 W each; floors are overridden to 1 W each
        inst.power_floor = vec![1.0, 1.0];
        let (lo, hi) = alpha_bounds(&inst).unwrap();
        assert!((lo - 5e-7).abs() < 1e-18);
        assert!((hi - 7e-6).abs() < 1e-17);

        let inst = instance(&[100.0, 100.0], &[(0, 1, 1e7, 10.0)], &[(1, 1.0)])
            .with_rate_bounds(vec![(1e6, 1e6)])
            .unwrap();
        let (lo, hi) = alpha_bounds(&inst).unwrap();
        assert!((hi - lo - 10.0 / 1e6).abs() < 1e-15);

        let zero = instance(&[100.0, 100.0], &[(0, 1, 1e7, 10.0)], &[(1, 1.0)])
            .with_rate_bounds(vec![(0.0, 1e6)])
            .unwrap();
        assert!(matches!(alpha_bounds(&zero), Err(EeError::DegenerateInstance(_))));
    }

    #[test]
    fn instance_checks() {
        let t = network(&[1.0, 1.0], &[(0, 1, 1e6, 1.0)]);
        let bad_bs = users(&[(5, 1.0)]);
        assert!(ProblemInstance::new(t.clone(), unit_radio(), bad_bs).is_err());
        let inst = ProblemInstance::new(t, unit_radio(), users(&[(1, 1.0)])).unwrap();
        assert!(inst.clone().with_rate_bounds(vec![(2.0, 1.0)]).is_err());
        assert!(inst.with_budgets(vec![1.0, 0.0]).is_err());
    }
}
