//! The parametric inner problem `min f2 − α·f1` over all feasible points.
//!
//! Given per-link unit costs, the problem separates: each small cell pays
//! `κ_d` per bps on its cheapest route, and each user minimises
//! `P_j(y) − (α − κ)·y` on its rate box in closed form. That relaxation is
//! always a lower bound and is exact when no capacity or budget binds at its
//! minimiser. Otherwise the barrier solver takes over.

use std::f64::consts::LN_2;

use super::barrier::{Barrier, BarrierOutcome};
use super::{validate, Constraint, EeError, ProblemInstance, Solution, CONSTRAINT_TOL};
use crate::flow::{decompose, marginal_route_costs, min_cost_route, FlowError};

/// Outcome of a feasibility probe at a given `α̂`.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// A point with `f2 − α̂·f1 ≤ 0` (up to the constraint tolerance).
    Feasible(Solution),
    /// The inner minimum is positive.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerMethod {
    ClosedForm,
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Cap on Newton steps inside one barrier solve.
    pub newton_cap: usize,
    /// Skip the closed form; used to cross-check the barrier solver.
    pub force_barrier: bool,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions { newton_cap: 2000, force_barrier: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// Best feasible point found, if any.
    pub solution: Option<Solution>,
    /// `f2 − α·f1` at `solution` (watts).
    pub value: f64,
    /// Certified lower bound on the inner minimum.
    pub lower_bound: f64,
    pub method: InnerMethod,
}

impl InnerResult {
    /// Feasible when the best point meets `f2 − α·f1 ≤ 1e−9·f2`.
    pub fn is_feasible(&self) -> bool {
        match &self.solution {
            Some(s) => self.value <= CONSTRAINT_TOL * s.f2(),
            None => false,
        }
    }
}

fn inner_value(sol: &Solution, alpha: f64) -> f64 {
    sol.f2() - alpha * sol.f1()
}

/// Minimiser of `P_j(y) − slope·y` on the user's rate box.
pub(crate) fn closed_form_rate(inst: &ProblemInstance, j: usize, slope: f64) -> f64 {
    let (lo, hi) = inst.rate_bounds[j];
    if slope <= 0.0 {
        return lo;
    }
    let db = inst.delta_b(j);
    let arg = slope * db / (inst.noise_to_gain(j) * LN_2);
    if arg <= 1.0 {
        return lo;
    }
    (db * arg.log2()).clamp(lo, hi)
}

/// Minimises `f2 − α·f1` over the feasible set.
pub fn inner_minimize(inst: &ProblemInstance, alpha: f64, opts: &InnerOptions) -> Result<InnerResult, EeError> {
    let topo = &inst.topology;
    let costs = topo.unit_costs();
    let kappa = marginal_route_costs(topo, &costs);
    for (j, u) in inst.users.iter().enumerate() {
        if u.attached_bs != 0 && kappa[u.attached_bs].is_none() && inst.rate_bounds[j].1 > 0.0 {
            return Err(FlowError::Unroutable { dest: u.attached_bs }.into());
        }
    }

    // separable relaxation: capacities and budgets dropped
    let mut relaxed = 0.0;
    let mut relaxed_f2 = 0.0;
    let mut rates = Vec::with_capacity(inst.n_users());
    for (j, u) in inst.users.iter().enumerate() {
        let k = if u.attached_bs == 0 { 0.0 } else { kappa[u.attached_bs].unwrap_or(0.0) };
        let y = closed_form_rate(inst, j, alpha - k);
        relaxed += inst.access_power(j, y) - (alpha - k) * y;
        relaxed_f2 += inst.access_power(j, y) + k * y;
        rates.push(y);
    }

    if !opts.force_barrier {
        // same allowance as `is_feasible`, so a point sitting exactly at the
        // optimum is not lost to round-off
        if relaxed > CONSTRAINT_TOL * relaxed_f2 {
            return Ok(InnerResult { solution: None, value: f64::INFINITY, lower_bound: relaxed, method: InnerMethod::ClosedForm });
        }
        let demands = inst.demands(&rates);
        match min_cost_route(topo, &demands, &costs, &topo.capacities()) {
            Ok(chi) => {
                let sol = Solution::assemble(inst, rates, chi);
                let route_cost: f64 = sol.backhaul_powers.iter().sum();
                let ideal: f64 = (1..topo.n_nodes()).map(|d| kappa[d].unwrap_or(0.0) * demands.get(d)).sum();
                let exact = route_cost <= ideal + 1e-9 * ideal.abs().max(f64::MIN_POSITIVE);
                if exact && validate(inst, &sol).all_pass() {
                    let value = inner_value(&sol, alpha);
                    return Ok(InnerResult {
                        solution: Some(sol),
                        value,
                        lower_bound: relaxed,
                        method: InnerMethod::ClosedForm,
                    });
                }
            }
            Err(FlowError::CapacityInfeasible { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }

    let mut barrier = Barrier::new(inst, alpha, opts.newton_cap);
    match barrier.solve()? {
        BarrierOutcome::Empty { class } => Err(EeError::RateBoxInfeasible { class }),
        BarrierOutcome::Point { rates, flows, value, gap } => {
            log::trace!("barrier: α={alpha:e} value={value:e} gap={gap:e} steps={}", barrier.newton_steps);
            let lower_bound = (value - gap).max(relaxed);
            let best = certify(inst, &rates, &flows);
            let value = best.as_ref().map_or(f64::INFINITY, |s| inner_value(s, alpha));
            Ok(InnerResult { solution: best, value, lower_bound, method: InnerMethod::Barrier })
        }
    }
}

/// Turns a barrier point into a validated solution. Rates and flows agree
/// only to round-off, which can tip a binding capacity or budget over, so
/// the rates retreat towards their minimum by a growing fraction until the
/// point checks out.
fn certify(inst: &ProblemInstance, rates: &[f64], flows: &[f64]) -> Option<Solution> {
    let topo = &inst.topology;
    let costs = topo.unit_costs();
    for eps in [0.0, 1e-9, 1e-8, 1e-7, 1e-6] {
        let y: Vec<f64> = rates
            .iter()
            .zip(&inst.rate_bounds)
            .map(|(&r, &(lo, _))| if r > lo { lo + (1.0 - eps) * (r - lo) } else { r })
            .collect();
        let demands = inst.demands(&y);
        if let Ok(chi) = min_cost_route(topo, &demands, &costs, &topo.capacities()) {
            let sol = Solution::assemble(inst, y.clone(), chi);
            if validate(inst, &sol).all_pass() {
                return Some(sol);
            }
        }
        let sol = Solution::assemble(inst, y, decompose(topo, flows, &demands));
        let report = validate(inst, &sol);
        if report.all_pass() {
            return Some(sol);
        }
        log::debug!("barrier point failed validation at retreat {eps:e}: {}", report.summary());
    }
    None
}

/// Is there a feasible point with `f2 − α̂·f1 ≤ 0`?
pub fn feasibility_subproblem(inst: &ProblemInstance, alpha_hat: f64) -> Result<Feasibility, EeError> {
    feasibility_with(inst, alpha_hat, &InnerOptions::default())
}

pub(crate) fn feasibility_with(
    inst: &ProblemInstance,
    alpha_hat: f64,
    opts: &InnerOptions,
) -> Result<Feasibility, EeError> {
    if !(alpha_hat > 0.0) {
        return Err(EeError::InvalidInstance(format!("α̂ must be positive, got {alpha_hat}")));
    }
    let r = inner_minimize(inst, alpha_hat, opts)?;
    if r.is_feasible() {
        Ok(Feasibility::Feasible(r.solution.expect("feasible result carries a point")))
    } else {
        Ok(Feasibility::Infeasible)
    }
}

/// Names the constraint class that makes the minimum-rate point infeasible,
/// or `None` when it is feasible.
pub(crate) fn min_rate_violation(inst: &ProblemInstance) -> Result<Option<Constraint>, EeError> {
    let rates = inst.min_rates();
    let topo = &inst.topology;
    let demands = inst.demands(&rates);
    let chi = match min_cost_route(topo, &demands, &topo.unit_costs(), &topo.capacities()) {
        Ok(chi) => chi,
        Err(FlowError::CapacityInfeasible { .. }) => return Ok(Some(Constraint::C4)),
        Err(e) => return Err(e.into()),
    };
    let sol = Solution::assemble(inst, rates, chi);
    let report = validate(inst, &sol);
    if report.all_pass() {
        return Ok(None);
    }
    // the routing may be repairable under budgets; ask the barrier
    let collapsed = inst
        .clone()
        .with_rate_bounds(inst.rate_bounds.iter().map(|b| (b.0, b.0)).collect())
        .expect("collapsed box is valid");
    match Barrier::new(&collapsed, 0.0, 2000).solve()? {
        BarrierOutcome::Empty { class } => Ok(Some(class)),
        BarrierOutcome::Point { .. } => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{alpha_bounds, eval_f2};
    use super::*;
    use crate::flow::LinkLoads;

    fn value_at(inst: &ProblemInstance, alpha: f64) -> InnerResult {
        inner_minimize(inst, alpha, &InnerOptions::default()).unwrap()
    }

    #[test]
    fn bounds_decide_feasibility() {
        let inst = instance(&[50.0, 50.0], &[(0, 1, 1e8, 5.0)], &[(1, 1.0), (1, 0.5)]);
        let (lo, hi) = alpha_bounds(&inst).unwrap();
        assert!(matches!(feasibility_subproblem(&inst, hi).unwrap(), Feasibility::Feasible(_)));
        assert!(matches!(feasibility_subproblem(&inst, 0.99 * lo).unwrap(), Feasibility::Infeasible));
    }

    #[test]
    fn single_user_sign_matches_grid() {
        let inst = instance(&[50.0, 50.0], &[(0, 1, 1e8, 5.0)], &[(1, 1.0)]);
        let (lo, hi) = inst.rate_bounds[0];
        for &alpha in &[1e-7, 5e-7, 1e-6, 2e-6, 4e-6] {
            let grid_min = (0..10_000)
                .map(|i| {
                    let y = lo + (hi - lo) * i as f64 / 9_999.0;
                    eval_f2(&inst, &[y], &LinkLoads(vec![y])).unwrap() - alpha * y
                })
                .fold(f64::INFINITY, f64::min);
            let r = value_at(&inst, alpha);
            let solver_min = if r.solution.is_some() { r.value } else { r.lower_bound };
            assert_eq!(grid_min <= 0.0, r.is_feasible(), "α = {alpha}");
            assert!(solver_min <= grid_min + 1e-9 * grid_min.abs());
        }
    }

    #[test]
    fn barrier_matches_closed_form_when_slack() {
        let inst = instance(
            &[500.0, 500.0, 500.0],
            &[(0, 1, 1e9, 5.0), (1, 2, 1e9, 5.0), (0, 2, 1e9, 30.0)],
            &[(1, 1.0), (2, 0.3), (0, 2.0), (2, 0.8)],
        );
        for &alpha in &[2e-6, 4e-6, 1e-5] {
            let cf = value_at(&inst, alpha);
            assert_eq!(cf.method, InnerMethod::ClosedForm);
            let opts = InnerOptions { force_barrier: true, ..Default::default() };
            let br = inner_minimize(&inst, alpha, &opts).unwrap();
            let (a, b) = (cf.solution.unwrap(), br.solution.unwrap());
            for (ya, yb) in a.rates.iter().zip(&b.rates) {
                assert!((ya - yb).abs() <= 1e-6 * ya.abs().max(1.0), "{ya} vs {yb}");
            }
        }
    }

    #[test]
    fn binding_capacity_uses_barrier() {
        // the closed form wants more than the link carries
        let inst = instance(&[500.0, 500.0], &[(0, 1, 1.5e6, 0.01)], &[(1, 4.0), (1, 4.0)]);
        let r = value_at(&inst, 5e-6);
        assert_eq!(r.method, InnerMethod::Barrier);
        let sol = r.solution.unwrap();
        assert!(sol.loads.0[0] <= 1.5e6 * (1.0 + 1e-9));
        assert!(sol.loads.0[0] >= 1.5e6 * (1.0 - 1e-6));
        assert!(r.value - r.lower_bound <= 1e-8 * sol.f2());
    }

    #[test]
    fn infeasible_minimum_rates() {
        let inst = instance(&[500.0, 500.0], &[(0, 1, 0.7e6, 0.01)], &[(1, 4.0), (1, 4.0)]);
        assert_eq!(min_rate_violation(&inst).unwrap(), Some(Constraint::C4));
        let tight = instance(&[500.0, 0.05], &[(0, 1, 1e8, 0.01)], &[(1, 1.0)]);
        assert_eq!(min_rate_violation(&tight).unwrap(), Some(Constraint::C5));
        let ok = instance(&[500.0, 500.0], &[(0, 1, 1e8, 0.01)], &[(1, 1.0)]);
        assert_eq!(min_rate_violation(&ok).unwrap(), None);
    }
}
