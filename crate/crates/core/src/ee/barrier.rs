//! Log-barrier interior-point method for the inner problem
//! `min f2 − α·f1` when capacities or budgets bind.
//!
//! Routing enters only through the aggregate single-source flow `x`, which is
//! exact because every commodity leaves node 0. Variables are scaled to the
//! unit box: `y_j = lo_j + span_j·u_j` and `x_l = σ_l·v_l`.

use nalgebra::{DMatrix, DVector};

use super::{Constraint, EeError, ProblemInstance};
use crate::flow::{min_cost_route, Demands};

const MU: f64 = 20.0;
const GAP_TOL: f64 = 1e-11;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) enum BarrierOutcome {
    /// A strictly feasible point, its objective and a bound on its distance
    /// from the optimum, both in watts.
    Point { rates: Vec<f64>, flows: Vec<f64>, value: f64, gap: f64 },
    /// No point satisfies capacities and budgets.
    Empty { class: Constraint },
}

struct BudgetRow {
    node: usize,
    inv_b: f64,
    constant: f64,
    users: Vec<usize>,
    links: Vec<(usize, f64)>,
}

enum Kind {
    Lower(usize),
    Upper(usize, f64),
    Budget(usize),
}

/// LU solve with two rounds of iterative refinement; near the boundary the
/// Hessian block dwarfs the equality rows and plain LU drifts off them.
fn solve_refined(k: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = k.clone().lu();
    let mut x = lu.solve(rhs)?;
    for _ in 0..2 {
        let r = rhs - k * &x;
        x += lu.solve(&r)?;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) struct Barrier<'a> {
    inst: &'a ProblemInstance,
    alpha: f64,
    /// Free user indices; variable `k` is user `free[k]`.
    free: Vec<usize>,
    base: Vec<f64>,
    span: Vec<f64>,
    /// Useful link indices; variable `nf + k` is link `links[k]`.
    links: Vec<usize>,
    lscale: Vec<f64>,
    budgets: Vec<BudgetRow>,
    constraints: Vec<Kind>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    obj_scale: f64,
    n: usize,
    pub(crate) newton_steps: usize,
    newton_cap: usize,
}

impl<'a> Barrier<'a> {
    pub(crate) fn new(inst: &'a ProblemInstance, alpha: f64, newton_cap: usize) -> Self {
        let topo = &inst.topology;
        let n_nodes = topo.n_nodes();
        let free: Vec<usize> = (0..inst.n_users()).filter(|&j| inst.rate_bounds[j].1 > inst.rate_bounds[j].0).collect();
        let base: Vec<f64> = inst.rate_bounds.iter().map(|b| b.0).collect();
        let span: Vec<f64> = free.iter().map(|&j| inst.rate_bounds[j].1 - inst.rate_bounds[j].0).collect();

        let mut has_demand = vec![false; n_nodes];
        for (j, u) in inst.users.iter().enumerate() {
            if u.attached_bs != 0 && inst.rate_bounds[j].1 > 0.0 {
                has_demand[u.attached_bs] = true;
            }
        }
        let reach = topo.reachable_from_macro();
        // nodes that can reach a demand node (reverse search)
        let mut to_demand = has_demand.clone();
        let mut stack: Vec<usize> = (0..n_nodes).filter(|&v| has_demand[v]).collect();
        while let Some(v) = stack.pop() {
            for &l in topo.incoming(v) {
                let u = topo.links()[l].from;
                if !to_demand[u] {
                    to_demand[u] = true;
                    stack.push(u);
                }
            }
        }
        let links: Vec<usize> = (0..topo.n_links())
            .filter(|&l| {
                let lk = &topo.links()[l];
                reach[lk.from] && to_demand[lk.to] && lk.to != 0
            })
            .collect();
        let y_total: f64 = inst.rate_bounds.iter().map(|b| b.1).sum::<f64>().max(1.0);
        let lscale: Vec<f64> = links.iter().map(|&l| topo.links()[l].capacity_bps.min(y_total)).collect();
        let nf = free.len();
        let n = nf + links.len();

        let mut constraints = Vec::new();
        for k in 0..nf {
            constraints.push(Kind::Lower(k));
            constraints.push(Kind::Upper(k, 1.0));
        }
        for (k, &l) in links.iter().enumerate() {
            constraints.push(Kind::Lower(nf + k));
            constraints.push(Kind::Upper(nf + k, topo.links()[l].capacity_bps / lscale[k]));
        }

        let mut budgets = Vec::new();
        for node in 0..n_nodes {
            let mut row = BudgetRow {
                node,
                inv_b: 1.0 / inst.budgets[node],
                constant: 0.0,
                users: Vec::new(),
                links: Vec::new(),
            };
            for (j, u) in inst.users.iter().enumerate() {
                if u.attached_bs == node {
                    match free.iter().position(|&f| f == j) {
                        Some(k) => row.users.push(k),
                        None => row.constant += inst.access_power(j, base[j]),
                    }
                }
            }
            for (k, &l) in links.iter().enumerate() {
                let lk = &topo.links()[l];
                if lk.from == node {
                    row.links.push((nf + k, lk.unit_cost() * lscale[k]));
                }
            }
            if !row.users.is_empty() || !row.links.is_empty() || row.constant > 0.0 {
                constraints.push(Kind::Budget(budgets.len()));
                budgets.push(row);
            }
        }

        let row_nodes: Vec<usize> = (1..n_nodes)
            .filter(|&v| {
                has_demand[v] || links.iter().any(|&l| topo.links()[l].from == v || topo.links()[l].to == v)
            })
            .collect();
        let mut a = DMatrix::zeros(row_nodes.len(), n);
        let mut b = DVector::zeros(row_nodes.len());
        for (r, &v) in row_nodes.iter().enumerate() {
            for (k, &l) in links.iter().enumerate() {
                let lk = &topo.links()[l];
                if lk.to == v {
                    a[(r, nf + k)] += lscale[k] / y_total;
                }
                if lk.from == v {
                    a[(r, nf + k)] -= lscale[k] / y_total;
                }
            }
            for (j, u) in inst.users.iter().enumerate() {
                if u.attached_bs == v {
                    b[r] += base[j] / y_total;
                    if let Some(k) = free.iter().position(|&f| f == j) {
                        a[(r, k)] -= span[k] / y_total;
                    }
                }
            }
        }

        let obj_scale = (0..inst.n_users()).map(|j| inst.access_power(j, inst.rate_bounds[j].1)).sum::<f64>()
            + topo.links().iter().map(|l| l.max_power_watts).sum::<f64>();

        Barrier {
            inst,
            alpha,
            free,
            base,
            span,
            links,
            lscale,
            budgets,
            constraints,
            a,
            b,
            obj_scale: obj_scale.max(f64::MIN_POSITIVE),
            n,
            newton_steps: 0,
            newton_cap,
        }
    }

    fn rates(&self, z: &[f64]) -> Vec<f64> {
        let mut y = self.base.clone();
        for (k, &j) in self.free.iter().enumerate() {
            let (lo, hi) = self.inst.rate_bounds[j];
            y[j] = (lo + self.span[k] * z[k]).clamp(lo, hi);
        }
        y
    }

    /// `(P, P', P'')` of user `j` at rate `y`.
    fn power_derivs(&self, j: usize, y: f64) -> (f64, f64, f64) {
        let a = self.inst.noise_to_gain(j);
        let k = std::f64::consts::LN_2 / self.inst.delta_b(j);
        let e = (y * k).exp();
        (a * (y * k).exp_m1(), a * k * e, a * k * k * e)
    }

    fn constraint_value(&self, c: &Kind, z: &[f64]) -> f64 {
        match *c {
            Kind::Lower(k) => -z[k],
            Kind::Upper(k, ub) => z[k] - ub,
            Kind::Budget(r) => {
                let row = &self.budgets[r];
                let mut p = row.constant;
                for &k in &row.users {
                    let j = self.free[k];
                    p += self.power_derivs(j, self.base[j] + self.span[k] * z[k]).0;
                }
                for &(k, c) in &row.links {
                    p += c * z[k];
                }
                p * row.inv_b - 1.0
            }
        }
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let mut f = 0.0;
        for j in 0..self.inst.n_users() {
            if !self.free.contains(&j) {
                f += self.inst.access_power(j, self.base[j]) - self.alpha * self.base[j];
            }
        }
        for (k, &j) in self.free.iter().enumerate() {
            let y = self.base[j] + self.span[k] * z[k];
            f += self.power_derivs(j, y).0 - self.alpha * y;
        }
        let nf = self.free.len();
        for (k, &l) in self.links.iter().enumerate() {
            f += self.inst.topology.links()[l].unit_cost() * self.lscale[k] * z[nf + k];
        }
        f / self.obj_scale
    }

    /// Barrier value only; `None` outside the strict interior.
    fn value(&self, z: &[f64], t: f64, phase1: bool) -> Option<f64> {
        let s = if phase1 { z[self.n] } else { 0.0 };
        let mut f = if phase1 { t * s } else { t * self.objective(z) };
        for c in &self.constraints {
            let h = self.constraint_value(c, z) - s;
            if !(h < 0.0) {
                return None;
            }
            f -= (-h).ln();
        }
        Some(f)
    }

    fn eval(&self, z: &[f64], t: f64, phase1: bool) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let nt = self.n + usize::from(phase1);
        let nf = self.free.len();
        let mut g = DVector::zeros(nt);
        let mut hess = DMatrix::zeros(nt, nt);
        let s = if phase1 { z[self.n] } else { 0.0 };
        let mut f;
        if phase1 {
            f = t * s;
            g[self.n] = t;
        } else {
            f = t * self.objective(z);
            for (k, &j) in self.free.iter().enumerate() {
                let (_, d1, d2) = self.power_derivs(j, self.base[j] + self.span[k] * z[k]);
                g[k] += t * (d1 - self.alpha) * self.span[k] / self.obj_scale;
                hess[(k, k)] += t * d2 * self.span[k] * self.span[k] / self.obj_scale;
            }
            for (k, &l) in self.links.iter().enumerate() {
                g[nf + k] += t * self.inst.topology.links()[l].unit_cost() * self.lscale[k] / self.obj_scale;
            }
        }

        let mut grad: Vec<(usize, f64)> = Vec::new();
        let mut curv: Vec<(usize, f64)> = Vec::new();
        for c in &self.constraints {
            grad.clear();
            curv.clear();
            let h = self.constraint_value(c, z) - s;
            if !(h < 0.0) {
                return None;
            }
            match *c {
                Kind::Lower(k) => grad.push((k, -1.0)),
                Kind::Upper(k, _) => grad.push((k, 1.0)),
                Kind::Budget(r) => {
                    let row = &self.budgets[r];
                    for &k in &row.users {
                        let j = self.free[k];
                        let (_, d1, d2) = self.power_derivs(j, self.base[j] + self.span[k] * z[k]);
                        grad.push((k, d1 * self.span[k] * row.inv_b));
                        curv.push((k, d2 * self.span[k] * self.span[k] * row.inv_b));
                    }
                    for &(k, coef) in &row.links {
                        grad.push((k, coef * row.inv_b));
                    }
                }
            }
            if phase1 {
                grad.push((self.n, -1.0));
            }
            let d = -h;
            f -= d.ln();
            for &(i, gi) in &grad {
                g[i] += gi / d;
                for &(k, gk) in &grad {
                    hess[(i, k)] += gi * gk / (d * d);
                }
            }
            for &(i, ci) in &curv {
                hess[(i, i)] += ci / d;
            }
        }
        Some((f, g, hess))
    }

    /// Equality-constrained Newton centring. Returns the final Newton
    /// decrement squared.
    fn centre(&mut self, z: &mut [f64], t: f64, phase1: bool) -> Result<f64, EeError> {
        let nt = self.n + usize::from(phase1);
        let m = self.a.nrows();
        let mut lambda_sq = f64::INFINITY;
        loop {
            if phase1 && z[self.n] < 0.0 {
                return Ok(lambda_sq);
            }
            if self.newton_steps >= self.newton_cap {
                return Err(EeError::Numerical(format!("Newton step cap {} reached", self.newton_cap)));
            }
            self.newton_steps += 1;
            let (f, g, h) = self
                .eval(z, t, phase1)
                .ok_or_else(|| EeError::Numerical("iterate left the barrier domain".into()))?;
            let mut kkt = DMatrix::zeros(nt + m, nt + m);
            kkt.view_mut((0, 0), (nt, nt)).copy_from(&h);
            kkt.view_mut((nt, 0), (m, self.n)).copy_from(&self.a);
            kkt.view_mut((0, nt), (self.n, m)).copy_from(&self.a.transpose());
            let mut rhs = DVector::zeros(nt + m);
            rhs.rows_mut(0, nt).copy_from(&(-&g));
            let zv = DVector::from_column_slice(&z[..self.n]);
            rhs.rows_mut(nt, m).copy_from(&(&self.b - &self.a * zv));
            let sol = solve_refined(&kkt, &rhs)
                .or_else(|| {
                    for i in 0..nt {
                        kkt[(i, i)] += 1e-12 * (1.0 + h[(i, i)].abs());
                    }
                    solve_refined(&kkt, &rhs)
                })
                .ok_or_else(|| EeError::Numerical("singular Newton system".into()))?;
            let dz = sol.rows(0, nt).into_owned();
            let slope = g.dot(&dz);
            lambda_sq = -slope;
            // below this the decrement is lost in the rounding of f itself
            if lambda_sq / 2.0 <= NEWTON_TOL + 1e-14 * f.abs() {
                return Ok(lambda_sq);
            }
            let mut step = 1.0;
            let mut trial = vec![0.0; nt];
            let accepted = loop {
                for i in 0..nt {
                    trial[i] = z[i] + step * dz[i];
                }
                if let Some(ft) = self.value(&trial, t, phase1) {
                    if ft <= f + 0.25 * step * slope.min(0.0) {
                        break ft;
                    }
                }
                step *= 0.5;
                if step < 1e-14 {
                    return Ok(lambda_sq);
                }
            };
            // a steep barrier can keep the decrement up after the barrier
            // value has stopped moving
            if !(accepted < f) {
                return Ok(lambda_sq);
            }
            self.project(&mut trial);
            // near the centre a Newton step should bank about λ²/2; when
            // round-off (often in the projection) eats that, stepping on only
            // cycles. Stopping costs about λ²/2t, well inside the factor 2 the
            // reported gap carries.
            let kept = self.value(&trial, t, phase1).map_or(f64::NEG_INFINITY, |v| f - v);
            if lambda_sq <= 0.2 * self.constraints.len() as f64 && kept < 1e-2 * lambda_sq {
                return Ok(lambda_sq);
            }
            z.copy_from_slice(&trial);
        }
    }

    /// Removes the equality residual that damped steps and round-off leave
    /// behind, keeping the old point if the correction leaves the interior.
    fn project(&self, z: &mut [f64]) {
        let zv = DVector::from_column_slice(&z[..self.n]);
        let r = &self.b - &self.a * zv;
        if r.amax() == 0.0 {
            return;
        }
        // only the flow columns move; rates often sit against their bounds
        let nf = self.free.len();
        let ax = self.a.columns(nf, self.n - nf);
        let Some(w) = (&ax * ax.transpose()).lu().solve(&r) else { return };
        let dx = ax.transpose() * w;
        let mut cand = z.to_vec();
        for i in 0..self.n - nf {
            cand[nf + i] += dx[i];
        }
        let phase1 = z.len() > self.n;
        if self.value(&cand, 1.0, phase1).is_some() {
            z.copy_from_slice(&cand);
        }
    }

    fn initial_point(&self) -> Result<Vec<f64>, EeError> {
        let nf = self.free.len();
        let mut z = vec![0.5; self.n];
        let rates = self.rates(&z);
        let demands: Demands = self.inst.demands(&rates);
        let topo = &self.inst.topology;
        let unbounded = vec![f64::INFINITY; topo.n_links()];
        let chi = min_cost_route(topo, &demands, &topo.unit_costs(), &unbounded)?;
        let loads = crate::flow::link_loads(&chi);
        for (k, &l) in self.links.iter().enumerate() {
            z[nf + k] = loads.0[l] / self.lscale[k];
        }
        Ok(z)
    }

    fn worst_class(&self, z: &[f64]) -> Constraint {
        let mut worst = (f64::NEG_INFINITY, Constraint::C4);
        for c in &self.constraints {
            let h = self.constraint_value(c, z);
            let class = match *c {
                Kind::Budget(r) => self.inst.budget_class(self.budgets[r].node),
                _ => Constraint::C4,
            };
            if h > worst.0 {
                worst = (h, class);
            }
        }
        worst.1
    }

    pub(crate) fn solve(&mut self) -> Result<BarrierOutcome, EeError> {
        let m = self.constraints.len() as f64;
        for r in &self.budgets {
            if r.users.is_empty() && r.links.is_empty() && r.constant * r.inv_b > 1.0 {
                return Ok(BarrierOutcome::Empty { class: self.inst.budget_class(r.node) });
            }
        }
        let mut z = self.initial_point()?;

        let worst = self.constraints.iter().map(|c| self.constraint_value(c, &z)).fold(f64::NEG_INFINITY, f64::max);
        if worst >= 0.0 {
            // phase I: minimise s subject to h_i(z) < s
            let class_hint = self.worst_class(&z);
            z.push(worst + 1.0);
            let mut t = 1.0;
            loop {
                self.centre(&mut z, t, true)?;
                if z[self.n] < 0.0 {
                    break;
                }
                let gap = m / t;
                if z[self.n] - gap > 0.0 || gap < 1e-13 {
                    let class = self.worst_class(&z[..self.n]);
                    log::debug!("barrier phase I: no interior point (s = {:e}, hint {class_hint})", z[self.n]);
                    return Ok(BarrierOutcome::Empty { class });
                }
                t *= MU;
            }
            z.truncate(self.n);
        }

        let mut t = m;
        loop {
            self.centre(&mut z, t, false)?;
            let gap = 2.0 * m / t;
            let value = self.objective(&z);
            if value - gap > 0.0 || gap <= GAP_TOL {
                let nf = self.free.len();
                let mut flows = vec![0.0; self.inst.topology.n_links()];
                for (k, &l) in self.links.iter().enumerate() {
                    flows[l] = (self.lscale[k] * z[nf + k]).max(0.0);
                }
                return Ok(BarrierOutcome::Point {
                    rates: self.rates(&z),
                    flows,
                    value: value * self.obj_scale,
                    gap: gap * self.obj_scale,
                });
            }
            t *= MU;
        }
    }
}
