use super::inner::{feasibility_with, inner_minimize, min_rate_violation};
use super::{alpha_bounds, validate, EEReport, EeError, Feasibility, InnerOptions, ProblemInstance, Solution};
use crate::flow::min_cost_route;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative bracket width on `α` at which bisection stops.
    pub tol: f64,
    pub max_iterations: usize,
    pub inner: InnerOptions,
    /// Snap rates that sit within `1e−6` of a box edge onto it when that does
    /// not worsen the ratio.
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-4, max_iterations: 200, inner: InnerOptions::default(), polish: true }
    }
}

/// One bisection probe: the bracket before the probe and its outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketStep {
    pub lo: f64,
    pub hi: f64,
    pub probe: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub solution: Solution,
    pub report: EEReport,
    pub trace: Vec<BracketStep>,
    pub alpha_bounds: (f64, f64),
    /// Final bracket.
    pub bracket: (f64, f64),
}

/// Minimises `α = f2/f1` to relative tolerance `tol`.
pub fn solve_min_alpha(inst: &ProblemInstance, tol: f64) -> Result<(Solution, EEReport), EeError> {
    let opt = solve_min_alpha_with(inst, &SolverOptions { tol, ..Default::default() })?;
    Ok((opt.solution, opt.report))
}

pub fn solve_min_alpha_with(inst: &ProblemInstance, opts: &SolverOptions) -> Result<Optimum, EeError> {
    if !(opts.tol > 0.0) {
        return Err(EeError::InvalidInstance(format!("tolerance must be positive, got {}", opts.tol)));
    }
    inst.check()?;
    let bounds = alpha_bounds(inst)?;
    if let Some(class) = min_rate_violation(inst)? {
        return Err(EeError::InstanceInfeasible { class, detail: "even at minimum rates".into() });
    }

    let start = inner_minimize(inst, bounds.1, &opts.inner).map_err(|e| match e {
        EeError::RateBoxInfeasible { class } => EeError::InstanceInfeasible { class, detail: "no feasible point".into() },
        other => other,
    })?;
    let mut best = match (start.is_feasible(), start.solution) {
        (true, Some(s)) => s,
        _ => {
            return Err(EeError::Numerical("upper α bound was not certified feasible".into()));
        }
    };
    let (mut lo, mut hi) = (bounds.0, bounds.1.min(best.alpha()));
    let mut trace = Vec::new();
    let mut iterations = 0;
    while hi - lo > opts.tol * lo {
        if iterations >= opts.max_iterations {
            return Err(EeError::NonConvergence { iterations, width: hi - lo });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let outcome = feasibility_with(inst, mid, &opts.inner)?;
        let feasible = matches!(outcome, Feasibility::Feasible(_));
        trace.push(BracketStep { lo, hi, probe: mid, feasible });
        match outcome {
            Feasibility::Feasible(sol) => {
                // the point's own ratio is a feasible α at least as good as mid
                hi = mid.min(sol.alpha()).max(lo);
                if sol.alpha() < best.alpha() {
                    best = sol;
                }
            }
            Feasibility::Infeasible => lo = mid,
        }
        log::debug!("bisection {iterations}: [{lo:e}, {hi:e}] feasible={feasible}");
    }

    if opts.polish {
        if let Some(p) = polish(inst, &best) {
            best = p;
        }
    }
    let report = EEReport::from_solution(&best, iterations, hi - lo);
    Ok(Optimum { solution: best, report, trace, alpha_bounds: bounds, bracket: (lo, hi) })
}

fn polish(inst: &ProblemInstance, sol: &Solution) -> Option<Solution> {
    let mut rates = sol.rates.clone();
    let mut changed = false;
    for (j, y) in rates.iter_mut().enumerate() {
        let (lo, hi) = inst.rate_bounds[j];
        let eps = 1e-6 * (hi - lo);
        if *y != lo && *y - lo <= eps {
            *y = lo;
            changed = true;
        } else if *y != hi && hi - *y <= eps {
            *y = hi;
            changed = true;
        }
    }
    if !changed {
        return None;
    }
    let topo = &inst.topology;
    let chi = min_cost_route(topo, &inst.demands(&rates), &topo.unit_costs(), &topo.capacities()).ok()?;
    let cand = Solution::assemble(inst, rates, chi);
    (validate(inst, &cand).all_pass() && cand.alpha() <= sol.alpha()).then_some(cand)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{brute_force_oracle_refined, feasibility_subproblem};
    use super::super::Constraint;
    use super::*;
    use crate::par::Execution;

    #[test]
    fn single_user_matches_oracle() {
        let inst = instance(&[50.0, 50.0], &[(0, 1, 1e8, 5.0)], &[(1, 1.0)]);
        let (_, rep) = solve_min_alpha(&inst, 1e-4).unwrap();
        let oracle = brute_force_oracle_refined(&inst, 41, 12, Execution::Sequential).unwrap();
        let rel = (rep.ee_bps_per_watt - oracle.ee_bps_per_watt).abs() / oracle.ee_bps_per_watt;
        assert!(rel < 1e-3, "solver {} oracle {}", rep.ee_bps_per_watt, oracle.ee_bps_per_watt);
        assert!((rep.ee_bps_per_watt * rep.alpha_joules_per_bit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collapsed_box_is_closed_form() {
        let inst = instance(&[50.0, 50.0, 50.0], &[(0, 1, 1e8, 5.0), (1, 2, 1e8, 2.0)], &[(2, 1.0), (1, 2.0)])
            .with_rate_bounds(vec![(1e6, 1e6), (2e6, 2e6)])
            .unwrap();
        let (sol, rep) = solve_min_alpha(&inst, 1e-6).unwrap();
        let expected_f2 = inst.access_power(0, 1e6) + inst.access_power(1, 2e6) + 3e6 * 5.0 / 1e8 + 1e6 * 2.0 / 1e8;
        assert!((rep.f2_watts - expected_f2).abs() < 1e-12 * expected_f2);
        assert_eq!(sol.rates, vec![1e6, 2e6]);
    }

    #[test]
    fn bracket_contract() {
        let inst = instance(
            &[50.0, 1.5, 50.0],
            &[(0, 1, 3e6, 5.0), (1, 2, 2e6, 2.0), (0, 2, 1.2e6, 1.0)],
            &[(1, 2.0), (2, 1.0), (2, 0.5), (0, 0.2)],
        );
        let opt = solve_min_alpha_with(&inst, &SolverOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for step in &opt.trace {
            let w = step.hi - step.lo;
            assert!(w <= prev / 2.0 * (1.0 + 1e-12) || prev.is_infinite());
            prev = w;
            assert!(step.lo >= opt.alpha_bounds.0 && step.hi <= opt.alpha_bounds.1);
        }
        let a = opt.report.alpha_joules_per_bit;
        assert!(matches!(feasibility_subproblem(&inst, a).unwrap(), Feasibility::Feasible(_)));
        assert!(matches!(feasibility_subproblem(&inst, a * (1.0 - 2e-4)).unwrap(), Feasibility::Infeasible));
        assert!(validate(&inst, &opt.solution).all_pass());
    }

    #[test]
    fn infeasible_instance_is_reported_up_front() {
        let inst = instance(&[50.0, 50.0], &[(0, 1, 0.3e6, 5.0)], &[(1, 1.0)]);
        match solve_min_alpha(&inst, 1e-4) {
            Err(EeError::InstanceInfeasible { class, .. }) => assert_eq!(class, Constraint::C4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let inst = instance(&[50.0, 50.0], &[(0, 1, 1e8, 5.0)], &[(1, 1.0)]);
        assert!(solve_min_alpha(&inst, 0.0).is_err());
        let tight = SolverOptions { tol: 1e-300, max_iterations: 5, ..Default::default() };
        assert!(matches!(solve_min_alpha_with(&inst, &tight), Err(EeError::NonConvergence { .. })));
    }
}
