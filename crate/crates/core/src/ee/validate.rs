use std::fmt::Write as _;

use super::{Constraint, ProblemInstance, Solution, CONSTRAINT_TOL};
use crate::topology::NodeKind;

/// Result of checking one constraint class. `worst_residual` is the largest
/// violation found (0 when every instance of the class holds exactly).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub passed: bool,
    pub worst_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, c: Constraint) -> &ConstraintCheck {
        self.checks.iter().find(|k| k.constraint == c).expect("every class is checked")
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<24} {} worst_residual={:e}",
                c.constraint,
                c.constraint.description(),
                if c.passed { "pass" } else { "FAIL" },
                c.worst_residual
            );
        }
        out
    }
}

struct Acc {
    worst: f64,
    passed: bool,
}

impl Acc {
    fn new() -> Self {
        Acc { worst: 0.0, passed: true }
    }

    /// Records a violation `excess` against an allowance `tol`.
    fn add(&mut self, excess: f64, tol: f64) {
        if excess.is_nan() {
            self.passed = false;
            self.worst = f64::INFINITY;
            return;
        }
        if excess > self.worst {
            self.worst = excess;
        }
        if excess > tol {
            self.passed = false;
        }
    }
}

/// Checks every constraint class at relative tolerance `1e−9`. Flow balances
/// are measured against the total routed demand.
pub fn validate(inst: &ProblemInstance, sol: &Solution) -> ConstraintReport {
    let topo = &inst.topology;
    let n = topo.n_nodes();
    let mut acc: Vec<Acc> = (0..9).map(|_| Acc::new()).collect();
    let idx = |c: Constraint| c as usize;

    let shapes_ok = sol.rates.len() == inst.n_users()
        && sol.flows.n_links() == topo.n_links()
        && sol.flows.n_dest() == topo.n_small()
        && sol.loads.0.len() == topo.n_links();
    if !shapes_ok {
        for a in &mut acc {
            a.add(f64::NAN, 0.0);
        }
        return finish(acc);
    }

    let demands = inst.demands(&sol.rates);
    let scale = demands.total().max(1.0);
    let flow_tol = CONSTRAINT_TOL * scale;

    for d in 1..n {
        let mut net = vec![0.0; n];
        for (l, link) in topo.links().iter().enumerate() {
            let f = sol.flows.flow(l, d);
            net[link.from] += f;
            net[link.to] -= f;
            acc[idx(Constraint::C7)].add(-f, flow_tol);
        }
        let s = demands.get(d);
        acc[idx(Constraint::C1)].add((-net[d] - s).abs(), flow_tol);
        for (v, &r) in net.iter().enumerate() {
            if v == d {
                continue;
            }
            let expected = if v == 0 { s } else { 0.0 };
            acc[idx(Constraint::C2)].add((r - expected).abs(), flow_tol);
        }
    }

    for (l, link) in topo.links().iter().enumerate() {
        let sum: f64 = sol.flows.rows()[l].iter().sum();
        let t = sol.loads.0[l];
        acc[idx(Constraint::C3)].add((t - sum).abs(), flow_tol);
        acc[idx(Constraint::C4)].add(t - link.capacity_bps, CONSTRAINT_TOL * link.capacity_bps);
    }

    for (node, &p) in inst.node_power(&sol.rates, &sol.loads).iter().enumerate() {
        let b = inst.budgets[node];
        let class = match topo.nodes()[node].kind {
            NodeKind::Macro => Constraint::C6,
            NodeKind::Small => Constraint::C5,
        };
        acc[idx(class)].add(p - b, CONSTRAINT_TOL * b);
    }

    for (j, &y) in sol.rates.iter().enumerate() {
        let (lo, hi) = inst.rate_bounds[j];
        acc[idx(Constraint::C7)].add(-y, 0.0);
        acc[idx(Constraint::C8)].add(y - hi, CONSTRAINT_TOL * hi);
        acc[idx(Constraint::C9)].add(lo - y, CONSTRAINT_TOL * lo);
    }
    for &p in sol.access_powers.iter().chain(&sol.backhaul_powers) {
        acc[idx(Constraint::C7)].add(-p, 0.0);
    }

    finish(acc)
}

fn finish(acc: Vec<Acc>) -> ConstraintReport {
    ConstraintReport {
        checks: Constraint::ALL
            .iter()
            .zip(acc)
            .map(|(&constraint, a)| ConstraintCheck { constraint, passed: a.passed, worst_residual: a.worst })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{Constraint, Solution};
    use super::*;
    use crate::flow::FlowAssignment;

    fn one_link() -> ProblemInstance {
        instance(&[500.0, 500.0], &[(0, 1, 2e6, 1.0)], &[(1, 1.0)])
    }

    #[test]
    fn valid_point_passes() {
        let inst = one_link();
        let chi = FlowAssignment::from_rows(vec![vec![1e6]], 1).unwrap();
        let sol = Solution::assemble(&inst, vec![1e6], chi);
        let r = validate(&inst, &sol);
        assert!(r.all_pass(), "{}", r.summary());
    }

    #[test]
    fn capacity_violation_reports_residual() {
        let inst = instance(&[500.0, 500.0], &[(0, 1, 3e6 - 1.0, 1.0)], &[(1, 1.0)]);
        let chi = FlowAssignment::from_rows(vec![vec![3e6]], 1).unwrap();
        let sol = Solution::assemble(&inst, vec![3e6], chi);
        let r = validate(&inst, &sol);
        let c4 = r.get(Constraint::C4);
        assert!(!c4.passed);
        assert_eq!(c4.worst_residual, 1.0);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn rate_box_violation() {
        let inst = instance(&[500.0, 500.0], &[(0, 1, 1e8, 1.0)], &[(1, 1.0)]);
        let y = inst.rate_bounds[0].1 + 1.0;
        let chi = FlowAssignment::from_rows(vec![vec![y]], 1).unwrap();
        let r = validate(&inst, &Solution::assemble(&inst, vec![y], chi));
        assert!(!r.get(Constraint::C8).passed);
        assert!(r.get(Constraint::C9).passed);
    }

    #[test]
    fn conservation_and_budget_violations() {
        let inst = instance(&[500.0, 0.1], &[(0, 1, 1e8, 1.0)], &[(1, 1.0)]);
        let chi = FlowAssignment::from_rows(vec![vec![0.5e6]], 1).unwrap();
        let r = validate(&inst, &Solution::assemble(&inst, vec![1e6], chi));
        assert!(!r.get(Constraint::C1).passed);
        assert!(!r.get(Constraint::C2).passed);
        assert!(!r.get(Constraint::C5).passed);
        assert!(r.get(Constraint::C6).passed);
    }
}
