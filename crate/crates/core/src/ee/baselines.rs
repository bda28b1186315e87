//! Reference allocations: equal power per user and uniformly random power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{validate, Constraint, EEReport, EeError, ProblemInstance, Solution};
use crate::flow::{link_loads, min_cost_route, FlowError};

/// Per-user transmit power under the equal split: each base station's
/// budget, net of the backhaul it would spend carrying every user at `y_max`
/// along cheapest routes, divided evenly among its users.
pub fn equal_power_shares(inst: &ProblemInstance) -> Result<Vec<f64>, EeError> {
    let topo = &inst.topology;
    let demands = inst.demands(&inst.max_rates());
    let unbounded = vec![f64::INFINITY; topo.n_links()];
    let loads = link_loads(&min_cost_route(topo, &demands, &topo.unit_costs(), &unbounded)?);
    let mut share = vec![0.0; topo.n_nodes()];
    for (l, link) in topo.links().iter().enumerate() {
        share[link.from] += link.max_power_watts * (loads.0[l] / link.capacity_bps).min(1.0);
    }
    let mut count = vec![0usize; topo.n_nodes()];
    for u in &inst.users {
        count[u.attached_bs] += 1;
    }
    Ok(inst
        .users
        .iter()
        .map(|u| {
            let n = u.attached_bs;
            (inst.budgets[n] - share[n]).max(0.0) / count[n] as f64
        })
        .collect())
}

fn finish(inst: &ProblemInstance, powers: &[f64]) -> Result<(Solution, EEReport), EeError> {
    let rates: Vec<f64> = powers
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let (lo, hi) = inst.rate_bounds[j];
            inst.rate_for_power(j, p).clamp(lo, hi)
        })
        .collect();
    let topo = &inst.topology;
    let chi = match min_cost_route(topo, &inst.demands(&rates), &topo.unit_costs(), &topo.capacities()) {
        Ok(chi) => chi,
        Err(FlowError::CapacityInfeasible { .. }) => {
            return Err(EeError::InstanceInfeasible { class: Constraint::C4, detail: "baseline rates".into() })
        }
        Err(e) => return Err(e.into()),
    };
    let sol = Solution::assemble(inst, rates, chi);
    let report = validate(inst, &sol);
    if let Some(fail) = report.failures().next() {
        return Err(EeError::InstanceInfeasible { class: fail.constraint, detail: "baseline allocation".into() });
    }
    let rep = EEReport::from_solution(&sol, 0, 0.0);
    Ok((sol, rep))
}

pub fn baseline_equal_power(inst: &ProblemInstance) -> Result<(Solution, EEReport), EeError> {
    inst.check()?;
    finish(inst, &equal_power_shares(inst)?)
}

/// Each user draws its power uniformly from `[0, equal share]`.
pub fn baseline_random_power(inst: &ProblemInstance, seed: u64) -> Result<(Solution, EEReport), EeError> {
    inst.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let powers: Vec<f64> = equal_power_shares(inst)?.into_iter().map(|p| p * rng.random::<f64>()).collect();
    finish(inst, &powers)
}
