//! Exhaustive grid search over rate vectors, for verification on small
//! instances. Routing at each grid point is the min-cost flow, or the
//! path-flow linear program with per-node spend limits when the min-cost flow
//! breaks a budget.

use super::{validate, Constraint, EEReport, EeError, ProblemInstance, Solution};
use crate::flow::{min_cost_route, path_flow_oracle, NodeSpendLimit};
use crate::par::{argmax_range, Execution};

pub const ORACLE_MAX_SMALL: usize = 3;
pub const ORACLE_MAX_USERS: usize = 6;
pub const ORACLE_MAX_LINKS: usize = 6;

/// Best feasible routing for fixed rates, or `None`.
pub(crate) fn evaluate_rates(inst: &ProblemInstance, rates: &[f64]) -> Option<Solution> {
    let topo = &inst.topology;
    let demands = inst.demands(rates);
    let costs = topo.unit_costs();
    let chi = min_cost_route(topo, &demands, &costs, &topo.capacities()).ok()?;
    let sol = Solution::assemble(inst, rates.to_vec(), chi);
    let report = validate(inst, &sol);
    if report.all_pass() {
        return Some(sol);
    }
    if report.failures().any(|c| !matches!(c.constraint, Constraint::C5 | Constraint::C6)) {
        return None;
    }
    let mut access = vec![0.0; topo.n_nodes()];
    for (j, u) in inst.users.iter().enumerate() {
        access[u.attached_bs] += sol.access_powers[j];
    }
    let mut limits = Vec::new();
    for node in 0..topo.n_nodes() {
        let room = inst.budgets[node] - access[node];
        if room < -super::CONSTRAINT_TOL * inst.budgets[node] {
            return None;
        }
        if !topo.outgoing(node).is_empty() {
            limits.push(NodeSpendLimit { node, limit_watts: room.max(0.0) });
        }
    }
    let (chi, _) = path_flow_oracle(topo, &demands, &costs, &topo.capacities(), &limits).ok()?;
    let sol = Solution::assemble(inst, rates.to_vec(), chi);
    validate(inst, &sol).all_pass().then_some(sol)
}

fn check_size(inst: &ProblemInstance) -> Result<(), EeError> {
    let t = &inst.topology;
    if t.n_small() > ORACLE_MAX_SMALL || inst.n_users() > ORACLE_MAX_USERS || t.n_links() > ORACLE_MAX_LINKS {
        return Err(EeError::TooLarge(format!(
            "{} small cells, {} users, {} links (limits {ORACLE_MAX_SMALL}/{ORACLE_MAX_USERS}/{ORACLE_MAX_LINKS})",
            t.n_small(),
            inst.n_users(),
            t.n_links()
        )));
    }
    Ok(())
}

fn axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..points).map(|i| if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 }).collect()
}

fn grid_search(inst: &ProblemInstance, axes: &[Vec<f64>], exec: Execution) -> Option<(Vec<f64>, f64)> {
    let total: usize = axes.iter().map(Vec::len).product();
    let decode = |mut i: usize| -> Vec<f64> {
        axes.iter()
            .map(|a| {
                let v = a[i % a.len()];
                i /= a.len();
                v
            })
            .collect()
    };
    let (idx, ee) = argmax_range(exec, total, |i| evaluate_rates(inst, &decode(i)).map(|s| s.f1() / s.f2()))?;
    Some((decode(idx), ee))
}

/// Maximum EE over a uniform grid with `grid_points` values per user
/// (`grid_points = 1` evaluates only the minimum-rate point).
pub fn brute_force_oracle(inst: &ProblemInstance, grid_points: usize) -> Result<EEReport, EeError> {
    brute_force_oracle_refined(inst, grid_points, 1, Execution::default())
}

/// Grid search followed by `rounds − 1` zoom passes, each shrinking every
/// user's window to two grid spacings around the incumbent.
pub fn brute_force_oracle_refined(
    inst: &ProblemInstance,
    grid_points: usize,
    rounds: usize,
    exec: Execution,
) -> Result<EEReport, EeError> {
    check_size(inst)?;
    let grid_points = grid_points.max(1);
    let mut windows: Vec<(f64, f64)> = inst.rate_bounds.clone();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..rounds.max(1) {
        let axes: Vec<Vec<f64>> = windows.iter().map(|&(lo, hi)| axis(lo, hi, grid_points)).collect();
        if let Some((y, ee)) = grid_search(inst, &axes, exec) {
            if best.as_ref().is_none_or(|b| ee > b.1) {
                best = Some((y, ee));
            }
        }
        let Some((centre, _)) = &best else { break };
        if grid_points <= 1 {
            break;
        }
        windows = windows
            .iter()
            .zip(centre)
            .enumerate()
            .map(|(j, (&(lo, hi), &c))| {
                let step = (hi - lo) / (grid_points - 1) as f64;
                let (blo, bhi) = inst.rate_bounds[j];
                ((c - step).max(blo), (c + step).min(bhi))
            })
            .collect();
    }
    let (rates, _) = best.ok_or(EeError::InstanceInfeasible {
        class: Constraint::C4,
        detail: "no grid point is feasible".into(),
    })?;
    let sol = evaluate_rates(inst, &rates).expect("incumbent was feasible");
    Ok(EEReport::from_solution(&sol, rounds, 0.0))
}
