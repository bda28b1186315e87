//! Multi-commodity flow bookkeeping and minimum-cost backhaul routing.
//!
//! Every commodity originates at the macro cell (node 0) and terminates at one
//! small cell, so the commodities interact only through link capacities. The
//! router therefore solves a single min-cost flow towards a super sink with
//! successive shortest paths and then splits the aggregate into per-destination
//! flows by path decomposition.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lp::{LinearProgram, LpOutcome, Sense};
use crate::topology::{reachable_destinations, Topology};

/// Relative tolerance on flow feasibility (conservation, capacity).
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("destination {dest} has demand but is not reachable from the macro cell")]
    Unroutable { dest: usize },
    #[error("link capacities admit only {routed} of {required} bps")]
    CapacityInfeasible { routed: f64, required: f64 },
    #[error("demand at node {node} is invalid: {value}")]
    InvalidDemand { node: usize, value: f64 },
    #[error("path enumeration exceeded {limit} paths")]
    TooLarge { limit: usize },
}

/// Aggregate demand `s_d` of every small cell, indexed by node id. The
/// macro entry is always zero; its injection is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct Demands(Vec<f64>);

impl Demands {
    pub fn zeros(n_nodes: usize) -> Self {
        Demands(vec![0.0; n_nodes])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self, FlowError> {
        for (node, &v) in values.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) || (node == 0 && v != 0.0) {
                return Err(FlowError::InvalidDemand { node, value: v });
            }
        }
        Ok(Demands(values))
    }

    pub fn get(&self, node: usize) -> f64 {
        self.0[node]
    }

    pub fn add(&mut self, node: usize, amount: f64) {
        debug_assert!(node != 0);
        self.0[node] += amount;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Total injected at node 0.
    pub fn source_injection(&self) -> f64 {
        self.total()
    }

    pub fn scaled(&self, factor: f64) -> Demands {
        Demands(self.0.iter().map(|v| v * factor).collect())
    }
}

/// `χ_l^(d)`: L rows, one column per small cell (`column d - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    chi: Vec<Vec<f64>>,
    n_dest: usize,
}

impl FlowAssignment {
    pub fn zeros(n_links: usize, n_dest: usize) -> Self {
        FlowAssignment { chi: vec![vec![0.0; n_dest]; n_links], n_dest }
    }

    pub fn from_rows(chi: Vec<Vec<f64>>, n_dest: usize) -> Result<Self, FlowError> {
        if let Some(bad) = chi.iter().find(|r| r.len() != n_dest) {
            return Err(FlowError::DimensionMismatch { expected: n_dest, got: bad.len() });
        }
        Ok(FlowAssignment { chi, n_dest })
    }

    pub fn n_links(&self) -> usize {
        self.chi.len()
    }

    pub fn n_dest(&self) -> usize {
        self.n_dest
    }

    /// Flow on link index `link` towards small cell `dest` (node id ≥ 1).
    pub fn flow(&self, link: usize, dest: usize) -> f64 {
        self.chi[link][dest - 1]
    }

    pub fn flow_mut(&mut self, link: usize, dest: usize) -> &mut f64 {
        &mut self.chi[link][dest - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.chi
    }

    /// `Σ_l cost_l·t_l`.
    pub fn cost(&self, unit_costs: &[f64]) -> f64 {
        link_loads(self).0.iter().zip(unit_costs).map(|(t, w)| t * w).sum()
    }

    /// CSV export: `link_id,dest_id,flow_bps`, non-zero entries only.
    pub fn to_csv(&self, topology: &Topology) -> String {
        let mut out = String::from("link_id,dest_id,flow_bps\n");
        for (l, row) in self.chi.iter().enumerate() {
            for (c, &f) in row.iter().enumerate() {
                if f != 0.0 {
                    let _ = writeln!(out, "{},{},{f:?}", topology.links()[l].id, c + 1);
                }
            }
        }
        out
    }
}

/// `t_l = Σ_d χ_l^(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLoads(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityViolation {
    pub link_id: usize,
    pub load: f64,
    pub capacity: f64,
    pub excess: f64,
}

/// `A·χ^(d) − s^(d)` for every destination, as a `D × N` array.
pub fn conservation_residual(
    topology: &Topology,
    chi: &FlowAssignment,
    demands: &Demands,
) -> Result<Vec<Vec<f64>>, FlowError> {
    check_shapes(topology, chi)?;
    if demands.as_slice().len() != topology.n_nodes() {
        return Err(FlowError::DimensionMismatch { expected: topology.n_nodes(), got: demands.as_slice().len() });
    }
    let n = topology.n_nodes();
    let mut out = Vec::with_capacity(n - 1);
    for d in 1..n {
        let mut r = vec![0.0; n];
        for (l, link) in topology.links().iter().enumerate() {
            let f = chi.flow(l, d);
            r[link.from] += f;
            r[link.to] -= f;
        }
        r[0] -= demands.get(d);
        r[d] += demands.get(d);
        out.push(r);
    }
    Ok(out)
}

pub fn link_loads(chi: &FlowAssignment) -> LinkLoads {
    LinkLoads(chi.chi.iter().map(|row| row.iter().sum()).collect())
}

/// Links whose load exceeds capacity by more than the relative tolerance.
pub fn check_capacity(loads: &LinkLoads, capacities: &[f64]) -> Result<Vec<CapacityViolation>, FlowError> {
    if loads.0.len() != capacities.len() {
        return Err(FlowError::DimensionMismatch { expected: capacities.len(), got: loads.0.len() });
    }
    Ok(loads
        .0
        .iter()
        .zip(capacities)
        .enumerate()
        .filter(|&(_, (&t, &c))| t > c + FLOW_TOL * c)
        .map(|(l, (&t, &c))| CapacityViolation { link_id: l + 1, load: t, capacity: c, excess: t - c })
        .collect())
}

fn check_shapes(topology: &Topology, chi: &FlowAssignment) -> Result<(), FlowError> {
    if chi.n_links() != topology.n_links() {
        return Err(FlowError::DimensionMismatch { expected: topology.n_links(), got: chi.n_links() });
    }
    if chi.n_dest() != topology.n_small() {
        return Err(FlowError::DimensionMismatch { expected: topology.n_small(), got: chi.n_dest() });
    }
    Ok(())
}

fn check_inputs(topology: &Topology, demands: &Demands, per_link: &[&[f64]]) -> Result<(), FlowError> {
    if demands.as_slice().len() != topology.n_nodes() {
        return Err(FlowError::DimensionMismatch { expected: topology.n_nodes(), got: demands.as_slice().len() });
    }
    for v in per_link {
        if v.len() != topology.n_links() {
            return Err(FlowError::DimensionMismatch { expected: topology.n_links(), got: v.len() });
        }
    }
    let reach = topology.reachable_from_macro();
    for d in 1..topology.n_nodes() {
        if demands.get(d) > 0.0 && !reach[d] {
            return Err(FlowError::Unroutable { dest: d });
        }
    }
    Ok(())
}

/// Cheapest 0 → `node` path cost for every node (`None` when unreachable).
/// Costs must be non-negative.
pub fn marginal_route_costs(topology: &Topology, unit_costs: &[f64]) -> Vec<Option<f64>> {
    let n = topology.n_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&v| !done[v] && dist[v].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[u] = true;
        for &l in topology.outgoing(u) {
            let v = topology.links()[l].to;
            let nd = dist[u] + unit_costs[l];
            if nd < dist[v] {
                dist[v] = nd;
            }
        }
    }
    dist.into_iter().map(|d| d.is_finite().then_some(d)).collect()
}

/// `κ_d`: cost per bps of the cheapest directed path from the macro cell to
/// `dest`.
pub fn marginal_route_cost(topology: &Topology, unit_costs: &[f64], dest: usize) -> Result<f64, FlowError> {
    if unit_costs.len() != topology.n_links() {
        return Err(FlowError::DimensionMismatch { expected: topology.n_links(), got: unit_costs.len() });
    }
    if dest == 0 {
        return Ok(0.0);
    }
    marginal_route_costs(topology, unit_costs)
        .get(dest)
        .copied()
        .flatten()
        .ok_or(FlowError::Unroutable { dest })
}

/// Minimum `Σ_l cost_l·t_l` routing of `demands` under link capacities.
///
/// Successive shortest paths with Bellman-Ford on the residual graph; ties go
/// to the lowest link id so outputs are deterministic. Zero-demand
/// destinations carry no flow.
pub fn min_cost_route(
    topology: &Topology,
    demands: &Demands,
    unit_costs: &[f64],
    capacities: &[f64],
) -> Result<FlowAssignment, FlowError> {
    check_inputs(topology, demands, &[unit_costs, capacities])?;
    let n = topology.n_nodes();
    let links = topology.links();
    let required = demands.total();
    let mut x = vec![0.0; links.len()];
    let mut sink = vec![0.0; n];
    if required <= 0.0 {
        return Ok(FlowAssignment::zeros(links.len(), n - 1));
    }
    let tol = 1e-13 * required;

    // Residual arcs: 2l = forward on link l, 2l+1 = backward; then one arc per
    // destination into the super sink `n`.
    #[derive(Clone, Copy)]
    enum Arc {
        Fwd(usize),
        Bwd(usize),
        Sink(usize),
    }
    let mut remaining = required;
    let mut guard = 0usize;
    while remaining > tol {
        guard += 1;
        if guard > 10 * (links.len() + n) * (links.len() + n) + 100 {
            log::warn!("min_cost_route: augmentation limit reached");
            break;
        }
        let mut dist = vec![f64::INFINITY; n + 1];
        let mut pred: Vec<Option<Arc>> = vec![None; n + 1];
        dist[0] = 0.0;
        for _ in 0..=n {
            let mut changed = false;
            for (l, link) in links.iter().enumerate() {
                let c = unit_costs[l];
                if capacities[l] - x[l] > tol && dist[link.from].is_finite() {
                    let nd = dist[link.from] + c;
                    if improves(nd, dist[link.to]) {
                        dist[link.to] = nd;
                        pred[link.to] = Some(Arc::Fwd(l));
                        changed = true;
                    }
                }
                if x[l] > tol && dist[link.to].is_finite() {
                    let nd = dist[link.to] - c;
                    if improves(nd, dist[link.from]) {
                        dist[link.from] = nd;
                        pred[link.from] = Some(Arc::Bwd(l));
                        changed = true;
                    }
                }
            }
            for d in 1..n {
                if demands.get(d) - sink[d] > tol && dist[d].is_finite() && improves(dist[d], dist[n]) {
                    dist[n] = dist[d];
                    pred[n] = Some(Arc::Sink(d));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[n].is_finite() {
            return Err(FlowError::CapacityInfeasible { routed: required - remaining, required });
        }

        let mut path = Vec::new();
        let mut v = n;
        while v != 0 {
            let arc = pred[v].expect("predecessor chain");
            path.push(arc);
            v = match arc {
                Arc::Fwd(l) => links[l].from,
                Arc::Bwd(l) => links[l].to,
                Arc::Sink(d) => d,
            };
            if path.len() > 2 * (n + links.len()) + 2 {
                unreachable!("cycle in shortest-path tree");
            }
        }
        let bottleneck = path
            .iter()
            .map(|&a| match a {
                Arc::Fwd(l) => capacities[l] - x[l],
                Arc::Bwd(l) => x[l],
                Arc::Sink(d) => demands.get(d) - sink[d],
            })
            .fold(f64::INFINITY, f64::min);
        for &a in &path {
            match a {
                Arc::Fwd(l) => x[l] += bottleneck,
                Arc::Bwd(l) => x[l] = (x[l] - bottleneck).max(0.0),
                Arc::Sink(d) => sink[d] += bottleneck,
            }
        }
        remaining -= bottleneck;
    }

    Ok(decompose(topology, &x, demands))
}

fn improves(candidate: f64, current: f64) -> bool {
    candidate < current - 1e-12 * candidate.abs().max(current.abs()).min(f64::MAX)
}

/// Splits an aggregate single-source flow `x` into per-destination flows.
/// Circulations are dropped; each destination's column is rescaled so it
/// delivers exactly its demand.
pub(crate) fn decompose(topology: &Topology, x: &[f64], demands: &Demands) -> FlowAssignment {
    let n = topology.n_nodes();
    let links = topology.links();
    let mut rem = x.to_vec();
    let mut want: Vec<f64> = demands.as_slice().to_vec();
    want[0] = 0.0;
    let total = demands.total();
    let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
    let mut out = FlowAssignment::zeros(links.len(), n - 1);
    let mut delivered = vec![0.0; n];

    let max_walks = 4 * (links.len() + n) * (links.len() + n) + 16;
    for _ in 0..max_walks {
        if want.iter().all(|&w| w <= tol) {
            break;
        }
        // walk from 0 until a node with outstanding demand is reached
        let mut on_path = vec![usize::MAX; n];
        let mut path: Vec<usize> = Vec::new();
        let mut u = 0usize;
        on_path[0] = 0;
        let mut end = None;
        loop {
            if u != 0 && want[u] > tol {
                end = Some(u);
                break;
            }
            let Some(&l) = topology.outgoing(u).iter().find(|&&l| rem[l] > tol) else {
                break;
            };
            let v = links[l].to;
            if on_path[v] != usize::MAX {
                // cancel the circulation v → … → u → v
                let start = on_path[v];
                let mut cyc: Vec<usize> = path[start..].to_vec();
                cyc.push(l);
                let amt = cyc.iter().map(|&c| rem[c]).fold(f64::INFINITY, f64::min);
                for &c in &cyc {
                    rem[c] -= amt;
                }
                end = None;
                path.clear();
                break;
            }
            path.push(l);
            on_path[v] = path.len();
            u = v;
        }
        match end {
            Some(d) => {
                let amt = path.iter().map(|&l| rem[l]).fold(want[d], f64::min);
                for &l in &path {
                    rem[l] -= amt;
                    *out.flow_mut(l, d) += amt;
                }
                want[d] -= amt;
                delivered[d] += amt;
            }
            None if path.is_empty() && u == 0 && topology.outgoing(0).iter().all(|&l| rem[l] <= tol) => break,
            None => {
                if !path.is_empty() {
                    // dead end from rounding: discard the stub
                    let amt = path.iter().map(|&l| rem[l]).fold(f64::INFINITY, f64::min);
                    for &l in &path {
                        rem[l] -= amt;
                    }
                }
            }
        }
    }

    for d in 1..n {
        let s = demands.get(d);
        if delivered[d] > 0.0 && delivered[d] != s {
            let k = s / delivered[d];
            for l in 0..links.len() {
                *out.flow_mut(l, d) *= k;
            }
        }
    }
    out
}

/// Caps the backhaul spend `Σ_{l∈O(node)} (P_max_l/c_l)·t_l` of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpendLimit {
    pub node: usize,
    pub limit_watts: f64,
}

const PATH_LIMIT: usize = 20_000;

/// Every simple directed path from node 0 to `dest`, as link indices.
pub fn simple_paths(topology: &Topology, dest: usize) -> Result<Vec<Vec<usize>>, FlowError> {
    fn dfs(
        t: &Topology,
        u: usize,
        dest: usize,
        seen: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<(), FlowError> {
        if u == dest {
            out.push(path.clone());
            if out.len() > PATH_LIMIT {
                return Err(FlowError::TooLarge { limit: PATH_LIMIT });
            }
            return Ok(());
        }
        for &l in t.outgoing(u) {
            let v = t.links()[l].to;
            if !seen[v] {
                seen[v] = true;
                path.push(l);
                dfs(t, v, dest, seen, path, out)?;
                path.pop();
                seen[v] = false;
            }
        }
        Ok(())
    }
    let mut seen = vec![false; topology.n_nodes()];
    seen[0] = true;
    let mut out = Vec::new();
    dfs(topology, 0, dest, &mut seen, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Exact small-instance routing by enumerating every simple path and solving
/// the path-flow linear program. Independent of [`min_cost_route`]; used to
/// verify it and to route under per-node backhaul spend limits.
pub fn path_flow_oracle(
    topology: &Topology,
    demands: &Demands,
    unit_costs: &[f64],
    capacities: &[f64],
    spend_limits: &[NodeSpendLimit],
) -> Result<(FlowAssignment, f64), FlowError> {
    check_inputs(topology, demands, &[unit_costs, capacities])?;
    let links = topology.links();
    let n = topology.n_nodes();
    let dests: Vec<usize> = (1..n).filter(|&d| demands.get(d) > 0.0).collect();
    if dests.is_empty() {
        return Ok((FlowAssignment::zeros(links.len(), n - 1), 0.0));
    }
    let mut paths: Vec<(usize, Vec<usize>)> = Vec::new();
    for &d in &dests {
        for p in simple_paths(topology, d)? {
            paths.push((d, p));
        }
        if paths.len() > PATH_LIMIT {
            return Err(FlowError::TooLarge { limit: PATH_LIMIT });
        }
    }

    let flow_scale = dests.iter().map(|&d| demands.get(d)).fold(0.0, f64::max);
    let cost_scale = unit_costs.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let objective: Vec<f64> =
        paths.iter().map(|(_, p)| p.iter().map(|&l| unit_costs[l]).sum::<f64>() / cost_scale).collect();
    let mut lp = LinearProgram::new(objective);
    for &d in &dests {
        let row = paths.iter().map(|(pd, _)| if *pd == d { 1.0 } else { 0.0 }).collect();
        lp.add_row(row, Sense::Eq, demands.get(d) / flow_scale);
    }
    for (l, &c) in capacities.iter().enumerate() {
        if c.is_finite() && paths.iter().any(|(_, p)| p.contains(&l)) {
            let row = paths.iter().map(|(_, p)| if p.contains(&l) { 1.0 } else { 0.0 }).collect();
            lp.add_row(row, Sense::Le, c / flow_scale);
        }
    }
    for lim in spend_limits {
        let coeffs: Vec<f64> = paths
            .iter()
            .map(|(_, p)| {
                p.iter().filter(|&&l| links[l].from == lim.node).map(|&l| links[l].unit_cost() * flow_scale).sum()
            })
            .collect();
        let scale = coeffs.iter().copied().fold(0.0, f64::max);
        if scale > 0.0 {
            lp.add_row(coeffs.iter().map(|c| c / scale).collect(), Sense::Le, lim.limit_watts / scale);
        }
    }

    match lp.solve() {
        LpOutcome::Optimal { x, .. } => {
            let mut out = FlowAssignment::zeros(links.len(), n - 1);
            for ((d, p), f) in paths.iter().zip(&x) {
                for &l in p {
                    *out.flow_mut(l, *d) += f * flow_scale;
                }
            }
            let cost = out.cost(unit_costs);
            Ok((out, cost))
        }
        LpOutcome::Infeasible | LpOutcome::Unbounded => {
            let reach = reachable_destinations(topology);
            if let Some(&d) = dests.iter().find(|d| !reach.contains(d)) {
                return Err(FlowError::Unroutable { dest: d });
            }
            Err(FlowError::CapacityInfeasible { routed: f64::NAN, required: demands.total() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Band;
    use crate::topology::{build_incidence, Link, Node};

    pub(crate) fn graph(n: usize, edges: &[(usize, usize, f64, f64)]) -> Topology {
        let nodes = (0..n).map(|i| if i == 0 { Node::macro_bs(10.0) } else { Node::small(i, 10.0) }).collect();
        let links = edges
            .iter()
            .enumerate()
            .map(|(i, &(from, to, cap, pmax))| Link {
                id: i + 1,
                from,
                to,
                band: Band::Vband,
                distance_km: 0.1,
                capacity_bps: cap,
                max_power_watts: pmax,
            })
            .collect();
        build_incidence(nodes, links).unwrap()
    }

    fn demands(v: &[f64]) -> Demands {
        Demands::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn residual_examples() {
        let t = graph(2, &[(0, 1, 10.0, 1.0)]);
        let mut chi = FlowAssignment::zeros(1, 1);
        *chi.flow_mut(0, 1) = 5.0;
        let r = conservation_residual(&t, &chi, &demands(&[0.0, 5.0])).unwrap();
        assert_eq!(r, vec![vec![0.0, 0.0]]);
        *chi.flow_mut(0, 1) = 4.0;
        let r = conservation_residual(&t, &chi, &demands(&[0.0, 5.0])).unwrap();
        assert_eq!(r, vec![vec![-1.0, 1.0]]);

        let chain = graph(3, &[(0, 1, 10.0, 1.0), (1, 2, 10.0, 1.0)]);
        let chi = FlowAssignment::from_rows(vec![vec![3.0, 2.0], vec![0.0, 2.0]], 2).unwrap();
        let r = conservation_residual(&chain, &chi, &demands(&[0.0, 3.0, 2.0])).unwrap();
        assert!(r.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(link_loads(&chi).0, vec![5.0, 2.0]);

        let wrong = FlowAssignment::zeros(3, 2);
        assert!(matches!(
            conservation_residual(&chain, &wrong, &demands(&[0.0, 3.0, 2.0])),
            Err(FlowError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loads_examples() {
        assert_eq!(link_loads(&FlowAssignment::zeros(3, 2)).0, vec![0.0; 3]);
        let one = FlowAssignment::from_rows(vec![vec![1.5], vec![2.5]], 1).unwrap();
        assert_eq!(link_loads(&one).0, vec![1.5, 2.5]);
    }

    #[test]
    fn capacity_examples() {
        let t = LinkLoads(vec![5.0, 2.0]);
        assert!(check_capacity(&t, &[10.0, 10.0]).unwrap().is_empty());
        let v = check_capacity(&t, &[4.0, 10.0]).unwrap();
        assert_eq!(v, vec![CapacityViolation { link_id: 1, load: 5.0, capacity: 4.0, excess: 1.0 }]);
        assert!(check_capacity(&t, &[5.0, 2.0]).unwrap().is_empty());
        assert!(check_capacity(&t, &[5.0]).is_err());
    }

    // 0→1 (cost 1), 1→2 (cost 1), 0→2 (cost 3)
    fn triangle(cap01: f64) -> (Topology, Vec<f64>) {
        let t = graph(3, &[(0, 1, cap01, 1.0), (1, 2, 100.0, 1.0), (0, 2, 100.0, 1.0)]);
        (t, vec![1.0, 1.0, 3.0])
    }

    #[test]
    fn routing_examples() {
        let (t, w) = triangle(100.0);
        let caps = t.capacities();
        let chi = min_cost_route(&t, &demands(&[0.0, 0.0, 5.0]), &w, &caps).unwrap();
        assert_eq!(chi.cost(&w), 10.0);
        assert_eq!(link_loads(&chi).0, vec![5.0, 5.0, 0.0]);

        let (t, w) = triangle(3.0);
        let caps = t.capacities();
        let chi = min_cost_route(&t, &demands(&[0.0, 0.0, 5.0]), &w, &caps).unwrap();
        assert!((chi.cost(&w) - 12.0).abs() < 1e-12);
        assert_eq!(link_loads(&chi).0, vec![3.0, 3.0, 2.0]);

        let chi = min_cost_route(&t, &demands(&[0.0, 0.0, 0.0]), &w, &caps).unwrap();
        assert_eq!(chi.cost(&w), 0.0);
    }

    #[test]
    fn split_point_enumeration_agrees() {
        // direct enumeration over how much goes two-hop
        let (t, w) = triangle(3.0);
        let best = (0..=5000)
            .map(|k| 5.0 * k as f64 / 5000.0)
            .filter(|&a| a <= 3.0)
            .map(|a| 2.0 * a + 3.0 * (5.0 - a))
            .fold(f64::INFINITY, f64::min);
        let chi = min_cost_route(&t, &demands(&[0.0, 0.0, 5.0]), &w, &t.capacities()).unwrap();
        assert!((chi.cost(&w) - best).abs() < 1e-9);
        let (_, oracle) = path_flow_oracle(&t, &demands(&[0.0, 0.0, 5.0]), &w, &t.capacities(), &[]).unwrap();
        assert!((oracle - best).abs() < 1e-9);
    }

    #[test]
    fn routing_errors() {
        let t = graph(3, &[(1, 2, 10.0, 1.0)]);
        assert_eq!(
            min_cost_route(&t, &demands(&[0.0, 0.0, 1.0]), &[1.0], &[10.0]),
            Err(FlowError::Unroutable { dest: 2 })
        );
        let (t, w) = triangle(3.0);
        let caps = vec![3.0, 100.0, 1.0];
        assert!(matches!(
            min_cost_route(&t, &demands(&[0.0, 0.0, 5.0]), &w, &caps),
            Err(FlowError::CapacityInfeasible { .. })
        ));
    }

    #[test]
    fn marginal_cost_examples() {
        let (t, w) = triangle(100.0);
        assert_eq!(marginal_route_cost(&t, &w, 2).unwrap(), 2.0);
        let single = graph(2, &[(0, 1, 1.0, 1.0)]);
        assert_eq!(marginal_route_cost(&single, &[7.0], 1).unwrap(), 7.0);
        // relabelled copy of the triangle
        let t2 = graph(3, &[(0, 2, 100.0, 1.0), (1, 2, 100.0, 1.0), (0, 1, 100.0, 1.0)]);
        assert_eq!(marginal_route_cost(&t2, &[3.0, 1.0, 1.0], 2).unwrap(), 2.0);
        let iso = graph(3, &[(1, 2, 1.0, 1.0)]);
        assert_eq!(marginal_route_cost(&iso, &[1.0], 2), Err(FlowError::Unroutable { dest: 2 }));
    }

    #[test]
    fn relay_demands_and_cycles() {
        // demand at a relay and behind it, plus a back link
        let t = graph(4, &[(0, 1, 10.0, 1.0), (1, 2, 10.0, 1.0), (2, 1, 10.0, 1.0), (0, 3, 10.0, 1.0), (3, 2, 4.0, 1.0)]);
        let w = vec![1.0, 1.0, 0.5, 2.0, 0.1];
        let d = demands(&[0.0, 4.0, 9.0, 1.0]);
        let chi = min_cost_route(&t, &d, &w, &t.capacities()).unwrap();
        let res = conservation_residual(&t, &chi, &d).unwrap();
        assert!(res.iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(check_capacity(&link_loads(&chi), &t.capacities()).unwrap().is_empty());
        let (_, oracle) = path_flow_oracle(&t, &d, &w, &t.capacities(), &[]).unwrap();
        assert!((chi.cost(&w) - oracle).abs() < 1e-9 * oracle);
    }

    #[test]
    fn spend_limits_shift_routing() {
        // two parallel routes; node 0's direct link is cheaper but its spend is capped
        let t = graph(3, &[(0, 2, 10.0, 5.0), (0, 1, 10.0, 1.0), (1, 2, 10.0, 1.0)]);
        let w = t.unit_costs();
        let d = demands(&[0.0, 0.0, 4.0]);
        let (free, _) = path_flow_oracle(&t, &d, &w, &t.capacities(), &[]).unwrap();
        let lim = [NodeSpendLimit { node: 1, limit_watts: 0.2 }];
        let (capped, _) = path_flow_oracle(&t, &d, &w, &t.capacities(), &lim).unwrap();
        let spend1 = link_loads(&capped).0[2] * w[2];
        assert!(spend1 <= 0.2 + 1e-12);
        assert_ne!(link_loads(&free).0, link_loads(&capped).0);
    }
}
