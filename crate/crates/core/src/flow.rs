//! Min-cost flow and max-flow on bipartite transportation networks.
//!
//! The network is `s → row_i → col_j → t`: source arcs carry the row
//! capacities, sink arcs the column capacities, and every allowed
//! `row_i → col_j` arc has unbounded capacity and cost `C_ij`. Capacities
//! and flow values are real numbers.
//!
//! [`min_cost_flow`] runs successive shortest augmenting paths. Each path is
//! found by Dijkstra on reduced costs `c_uv + π_u - π_v`, which stay
//! nonnegative on every residual arc. The potentials `π` left at the end are
//! an optimal dual solution; the solvers turn them into Kantorovich
//! potentials.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{CostMatrix, Costs};

/// Augmentations smaller than this fraction of the required flow count as zero.
pub const AUGMENT_TOLERANCE: f64 = 1e-13;
/// A flow falling short of the required value by more than this is infeasible.
pub const SHORTFALL_TOLERANCE: f64 = 1e-9;

/// Boolean `n × m` mask of usable row→column arcs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl EdgeMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        EdgeMask {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        EdgeMask {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(f(i, j));
            }
        }
        EdgeMask { rows, cols, bits }
    }

    pub fn set(&mut self, i: usize, j: usize, allowed: bool) {
        self.bits[i * self.cols + j] = allowed;
    }

    #[inline]
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|i| (0..self.cols).filter(|&j| self.allows(i, j)).collect())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TransportNetwork<C = CostMatrix> {
    pub source_caps: Vec<f64>,
    pub sink_caps: Vec<f64>,
    pub costs: C,
    pub required_flow: f64,
    pub allowed: Option<EdgeMask>,
}

impl<C: Costs> TransportNetwork<C> {
    pub fn new(source_caps: Vec<f64>, sink_caps: Vec<f64>, costs: C, required_flow: f64) -> Self {
        TransportNetwork {
            source_caps,
            sink_caps,
            costs,
            required_flow,
            allowed: None,
        }
    }

    pub fn with_mask(mut self, mask: EdgeMask) -> Self {
        self.allowed = Some(mask);
        self
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.source_caps.len(), self.sink_caps.len());
        if n == 0 || m == 0 {
            return Err(Error::invalid("network needs at least one row and one column"));
        }
        if self.costs.n_rows() != n || self.costs.n_cols() != m {
            return Err(Error::invalid(format!(
                "costs are {}x{}, capacities {}x{}",
                self.costs.n_rows(),
                self.costs.n_cols(),
                n,
                m
            )));
        }
        if let Some(mask) = &self.allowed {
            if mask.rows != n || mask.cols != m {
                return Err(Error::invalid("edge mask shape does not match the network"));
            }
        }
        let caps_ok = |c: &f64| c.is_finite() && *c >= 0.0;
        if !self.source_caps.iter().all(caps_ok) || !self.sink_caps.iter().all(caps_ok) {
            return Err(Error::invalid("capacities must be finite and nonnegative"));
        }
        if !(self.required_flow >= 0.0) || !self.required_flow.is_finite() {
            return Err(Error::invalid("required flow must be finite and nonnegative"));
        }
        Ok(())
    }

    fn check_costs(&self) -> Result<()> {
        for i in 0..self.source_caps.len() {
            for j in 0..self.sink_caps.len() {
                let c = self.costs.cost(i, j);
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::invalid(format!("cost ({i},{j}) = {c} is not a finite nonnegative number")));
                }
            }
        }
        Ok(())
    }

    fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed.as_ref().is_none_or(|m| m.allows(i, j))
    }

    /// JSON dump of the network for failure triage.
    ///
    /// Schema: `{"sourceCaps": [..], "sinkCaps": [..], "requiredFlow": x,
    /// "costs": [[..], ..], "allowed": [[bool, ..], ..] | null}`.
    pub fn debug_json(&self) -> String {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Dump<'a> {
            source_caps: &'a [f64],
            sink_caps: &'a [f64],
            required_flow: f64,
            costs: Vec<Vec<f64>>,
            allowed: Option<Vec<Vec<bool>>>,
        }
        let (n, m) = (self.source_caps.len(), self.sink_caps.len());
        let dump = Dump {
            source_caps: &self.source_caps,
            sink_caps: &self.sink_caps,
            required_flow: self.required_flow,
            costs: (0..n)
                .map(|i| (0..m).map(|j| self.costs.cost(i, j)).collect())
                .collect(),
            allowed: self
                .allowed
                .as_ref()
                .map(|mask| (0..n).map(|i| (0..m).map(|j| mask.allows(i, j)).collect()).collect()),
        };
        serde_json::to_string(&dump).expect("network serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowStatus {
    Optimal,
    Infeasible,
}

/// Result of a flow computation.
///
/// `flow` lists the positive arc flows `(row, col, amount)` sorted by
/// `(row, col)`. The potentials satisfy `C_ij + π_row[i] - π_col[j] >= 0` on
/// every arc and equality on arcs carrying flow (up to rounding).
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub flow: Vec<(usize, usize, f64)>,
    pub total_cost: f64,
    pub flow_value: f64,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub source_potential: f64,
    pub sink_potential: f64,
    pub status: FlowStatus,
}

impl FlowSolution {
    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for &(i, _, f) in &self.flow {
            s[i] += f;
        }
        s
    }

    pub fn col_sums(&self, m: usize) -> Vec<f64> {
        let mut s = vec![0.0; m];
        for &(_, j, f) in &self.flow {
            s[j] += f;
        }
        s
    }

    /// Value of the flow LP dual built from the node potentials.
    ///
    /// With `u_i = max(0, π_i - π_s)`, `v_j = max(0, π_t - π_j)` and
    /// `T = π_t - π_s`, the dual objective is
    /// `T·F - Σ u_i·cap_i - Σ v_j·cap_j`.
    pub fn dual_value<C>(&self, net: &TransportNetwork<C>) -> f64 {
        let t = self.sink_potential - self.source_potential;
        let mut val = t * net.required_flow;
        for (pi, cap) in self.row_potentials.iter().zip(&net.source_caps) {
            val -= (pi - self.source_potential).max(0.0) * cap;
        }
        for (pj, cap) in self.col_potentials.iter().zip(&net.sink_caps) {
            val -= (self.sink_potential - pj).max(0.0) * cap;
        }
        val
    }

    /// Largest violation of dual feasibility or complementary slackness.
    pub fn max_reduced_cost_violation<C: Costs>(&self, net: &TransportNetwork<C>) -> f64 {
        let mut worst: f64 = 0.0;
        let n = net.source_caps.len();
        let m = net.sink_caps.len();
        for i in 0..n {
            for j in 0..m {
                if net.allows(i, j) {
                    let rc = net.costs.cost(i, j) + self.row_potentials[i] - self.col_potentials[j];
                    worst = worst.max(-rc);
                }
            }
        }
        for &(i, j, _) in &self.flow {
            let rc = net.costs.cost(i, j) + self.row_potentials[i] - self.col_potentials[j];
            worst = worst.max(rc.abs());
        }
        worst
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, node)
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost flow of value `required_flow` by successive shortest paths.
///
/// Ties between equally short paths resolve toward the lowest node index
/// (rows `0..n`, then columns `n..n+m`). When the required value cannot be
/// routed the solution carries `FlowStatus::Infeasible` together with the
/// largest flow found.
///
/// Large unmasked instances are first solved on a sparse candidate arc set
/// (nearest columns of each row and nearest rows of each column). Arcs whose
/// reduced cost is negative under the resulting potentials are added and the
/// problem is re-solved until the potentials price out every arc, so the
/// result is optimal for the full network.
pub fn min_cost_flow<C: Costs>(net: &TransportNetwork<C>) -> Result<FlowSolution> {
    net.validate()?;
    net.check_costs()?;
    let n = net.source_caps.len();
    let m = net.sink_caps.len();
    if let Some(mask) = &net.allowed {
        let adj = mask.adjacency();
        return ssp(net, Some(&adj));
    }
    if n * m <= CANDIDATE_THRESHOLD {
        return ssp(net, None);
    }

    let mut k = CANDIDATE_DEGREE.min(m);
    let mut adj = nearest_candidates(net, k);
    let scale = net.costs.max_cost().max(f64::MIN_POSITIVE);
    loop {
        let sol = ssp(net, Some(&adj))?;
        if sol.status == FlowStatus::Infeasible {
            if k >= m.max(n) {
                return ssp(net, None);
            }
            k = (2 * k).min(m.max(n));
            adj = nearest_candidates(net, k);
            continue;
        }
        let mut added = 0usize;
        for (i, row_adj) in adj.iter_mut().enumerate() {
            let pi = sol.row_potentials[i];
            let before = row_adj.len();
            for j in 0..m {
                if net.costs.cost(i, j) + pi - sol.col_potentials[j] < -PRICING_TOLERANCE * scale
                    && row_adj[..before].binary_search(&j).is_err()
                {
                    row_adj.push(j);
                }
            }
            if row_adj.len() != before {
                row_adj.sort_unstable();
                added += row_adj.len() - before;
            }
        }
        if added == 0 {
            return Ok(sol);
        }
    }
}

const CANDIDATE_THRESHOLD: usize = 160_000;
const CANDIDATE_DEGREE: usize = 24;
const PRICING_TOLERANCE: f64 = 1e-12;

fn nearest_candidates<C: Costs>(net: &TransportNetwork<C>, k: usize) -> Vec<Vec<usize>> {
    let n = net.source_caps.len();
    let m = net.sink_caps.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut buf: Vec<(f64, usize)> = Vec::with_capacity(m.max(n));
    for (i, row_adj) in adj.iter_mut().enumerate() {
        buf.clear();
        buf.extend((0..m).map(|j| (net.costs.cost(i, j), j)));
        let kk = k.min(m);
        if kk < m {
            buf.select_nth_unstable_by(kk, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        row_adj.extend(buf[..kk].iter().map(|&(_, j)| j));
    }
    for j in 0..m {
        buf.clear();
        buf.extend((0..n).map(|i| (net.costs.cost(i, j), i)));
        let kk = k.min(n);
        if kk < n {
            buf.select_nth_unstable_by(kk, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        for &(_, i) in &buf[..kk] {
            adj[i].push(j);
        }
    }
    for (i, j) in corner_arcs(net) {
        adj[i].push(j);
    }
    for row_adj in &mut adj {
        row_adj.sort_unstable();
        row_adj.dedup();
    }
    adj
}

/// Arcs of a north-west corner plan along a projected ordering of rows and
/// columns. The plan routes the required flow, so the candidate set always
/// admits a feasible flow even when nearest-neighbour arcs all cluster in
/// the region where the two supports meet.
fn corner_arcs<C: Costs>(net: &TransportNetwork<C>) -> Vec<(usize, usize)> {
    let n = net.source_caps.len();
    let m = net.sink_caps.len();
    let c = |i: usize, j: usize| net.costs.cost(i, j);
    let argmax = |len: usize, f: &dyn Fn(usize) -> f64| (0..len).max_by(|&a, &b| f(a).total_cmp(&f(b))).unwrap_or(0);
    let argmin = |len: usize, f: &dyn Fn(usize) -> f64| (0..len).min_by(|&a, &b| f(a).total_cmp(&f(b))).unwrap_or(0);
    // two far-apart columns, and the rows closest to each, span an axis
    let ja = argmax(m, &|j| c(0, j));
    let far = argmax(n, &|i| c(i, ja));
    let jb = argmax(m, &|j| c(far, j));
    let (ia, ib) = (argmin(n, &|i| c(i, ja)), argmin(n, &|i| c(i, jb)));
    let mut rows: Vec<(f64, usize)> = (0..n).map(|i| (c(i, ja) - c(i, jb), i)).collect();
    let mut cols: Vec<(f64, usize)> = (0..m).map(|j| (c(ia, j) - c(ib, j), j)).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cols.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut arcs = Vec::with_capacity(n + m);
    let (mut r, mut k) = (0, 0);
    let mut rs = rows.first().map_or(0.0, |&(_, i)| net.source_caps[i]);
    let mut cs = cols.first().map_or(0.0, |&(_, j)| net.sink_caps[j]);
    let mut left = net.required_flow;
    while r < n && k < m && left > 0.0 {
        let (i, j) = (rows[r].1, cols[k].1);
        let take = rs.min(cs).min(left);
        arcs.push((i, j));
        left -= take;
        rs -= take;
        cs -= take;
        if rs <= cs {
            r += 1;
            rs = rows.get(r).map_or(0.0, |&(_, i)| net.source_caps[i]);
        } else {
            k += 1;
            cs = cols.get(k).map_or(0.0, |&(_, j)| net.sink_caps[j]);
        }
    }
    arcs
}

fn ssp<C: Costs>(net: &TransportNetwork<C>, adjacency: Option<&[Vec<usize>]>) -> Result<FlowSolution> {
    let n = net.source_caps.len();
    let m = net.sink_caps.len();
    let cost = |i: usize, j: usize| net.costs.cost(i, j);

    let tol = AUGMENT_TOLERANCE * net.required_flow.max(f64::MIN_POSITIVE);
    let mut res_src: Vec<f64> = net.source_caps.clone();
    let mut res_sink: Vec<f64> = net.sink_caps.clone();
    // per column: (row, flow) for arcs carrying flow
    let mut col_flow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];

    // Row reduction gives valid starting potentials: π_row = -min_j C_ij.
    let mut pot_row = vec![0.0; n];
    for (i, pr) in pot_row.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        match adjacency {
            Some(adj) => {
                for &j in &adj[i] {
                    best = best.min(cost(i, j));
                }
            }
            None => {
                for j in 0..m {
                    best = best.min(cost(i, j));
                }
            }
        }
        if best.is_finite() {
            *pr = -best;
        }
    }
    let mut pot_col = vec![0.0; m];
    let mut pot_s = 0.0;
    let pot_t = 0.0;

    let mut dist_row = vec![f64::INFINITY; n];
    let mut dist_col = vec![f64::INFINITY; m];
    let mut done_row = vec![false; n];
    let mut done_col = vec![false; m];
    let mut pred_row: Vec<Option<usize>> = vec![None; n];
    let mut pred_col = vec![usize::MAX; m];
    let mut touched_rows: Vec<usize> = Vec::new();
    let mut touched_cols: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    let sink_node = n + m;

    let mut remaining = net.required_flow;
    let max_rounds = 64 * (n + m) + 10_000;
    let mut rounds = 0usize;

    while remaining > tol {
        rounds += 1;
        if rounds > max_rounds {
            return Err(Error::Numeric(format!(
                "min-cost flow did not terminate after {max_rounds} augmentations"
            )));
        }
        for &i in &touched_rows {
            dist_row[i] = f64::INFINITY;
            done_row[i] = false;
            pred_row[i] = None;
        }
        for &j in &touched_cols {
            dist_col[j] = f64::INFINITY;
            done_col[j] = false;
            pred_col[j] = usize::MAX;
        }
        touched_rows.clear();
        touched_cols.clear();
        heap.clear();

        for i in 0..n {
            if res_src[i] > tol {
                let d = (pot_s - pot_row[i]).max(0.0);
                dist_row[i] = d;
                touched_rows.push(i);
                heap.push(HeapItem { dist: d, node: i });
            }
        }
        let mut dist_t = f64::INFINITY;
        let mut pred_t = usize::MAX;
        let mut settled_rows: Vec<usize> = Vec::new();
        let mut settled_cols: Vec<usize> = Vec::new();

        while let Some(HeapItem { dist: d, node }) = heap.pop() {
            if node == sink_node {
                break;
            }
            if node < n {
                let i = node;
                if done_row[i] || d > dist_row[i] {
                    continue;
                }
                done_row[i] = true;
                settled_rows.push(i);
                let base = d + pot_row[i];
                let mut relax = |j: usize| {
                    if done_col[j] {
                        return;
                    }
                    let nd = (base + cost(i, j) - pot_col[j]).max(d);
                    if nd < dist_col[j] {
                        if dist_col[j] == f64::INFINITY {
                            touched_cols.push(j);
                        }
                        dist_col[j] = nd;
                        pred_col[j] = i;
                        heap.push(HeapItem { dist: nd, node: n + j });
                    }
                };
                match adjacency {
                    Some(adj) => adj[i].iter().for_each(|&j| relax(j)),
                    None => (0..m).for_each(relax),
                }
            } else {
                let j = node - n;
                if done_col[j] || d > dist_col[j] {
                    continue;
                }
                done_col[j] = true;
                settled_cols.push(j);
                for &(i, f) in &col_flow[j] {
                    if f <= tol || done_row[i] {
                        continue;
                    }
                    let nd = (d - cost(i, j) + pot_col[j] - pot_row[i]).max(d);
                    if nd < dist_row[i] {
                        if dist_row[i] == f64::INFINITY {
                            touched_rows.push(i);
                        }
                        dist_row[i] = nd;
                        pred_row[i] = Some(j);
                        heap.push(HeapItem { dist: nd, node: i });
                    }
                }
                if res_sink[j] > tol {
                    let nd = (d + pot_col[j] - pot_t).max(d);
                    if nd < dist_t {
                        dist_t = nd;
                        pred_t = j;
                        heap.push(HeapItem { dist: nd, node: sink_node });
                    }
                }
            }
        }

        if pred_t == usize::MAX {
            break;
        }

        // π(v) += dist(v) - D on settled nodes; the others keep π (a uniform shift by -D).
        let big_d = dist_t;
        for &i in &settled_rows {
            pot_row[i] += dist_row[i] - big_d;
        }
        for &j in &settled_cols {
            pot_col[j] += dist_col[j] - big_d;
        }
        pot_s -= big_d;

        // bottleneck
        let mut delta = remaining.min(res_sink[pred_t]);
        let mut j = pred_t;
        loop {
            let i = pred_col[j];
            match pred_row[i] {
                None => {
                    delta = delta.min(res_src[i]);
                    break;
                }
                Some(jb) => {
                    let f = col_flow[jb]
                        .iter()
                        .find(|(r, _)| *r == i)
                        .map(|(_, f)| *f)
                        .unwrap_or(0.0);
                    delta = delta.min(f);
                    j = jb;
                }
            }
        }

        // push delta along the path
        res_sink[pred_t] -= delta;
        let mut j = pred_t;
        loop {
            let i = pred_col[j];
            add_flow(&mut col_flow[j], i, delta, tol);
            match pred_row[i] {
                None => {
                    res_src[i] -= delta;
                    break;
                }
                Some(jb) => {
                    add_flow(&mut col_flow[jb], i, -delta, tol);
                    j = jb;
                }
            }
        }
        remaining -= delta;
    }

    let mut flow: Vec<(usize, usize, f64)> = Vec::new();
    for (j, entries) in col_flow.iter().enumerate() {
        for &(i, f) in entries {
            if f > 0.0 {
                flow.push((i, j, f));
            }
        }
    }
    flow.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let total_cost = flow.iter().map(|&(i, j, f)| f * cost(i, j)).sum();
    let flow_value = net.required_flow - remaining.max(0.0);
    let status = if remaining > SHORTFALL_TOLERANCE {
        FlowStatus::Infeasible
    } else {
        FlowStatus::Optimal
    };
    Ok(FlowSolution {
        flow,
        total_cost,
        flow_value,
        row_potentials: pot_row,
        col_potentials: pot_col,
        source_potential: pot_s,
        sink_potential: pot_t,
        status,
    })
}

fn add_flow(entries: &mut Vec<(usize, f64)>, row: usize, delta: f64, tol: f64) {
    if let Some(pos) = entries.iter().position(|(r, _)| *r == row) {
        entries[pos].1 += delta;
        if entries[pos].1 <= tol {
            entries.swap_remove(pos);
        }
    } else if delta > tol {
        entries.push((row, delta));
    }
}

/// Maximum flow on the allowed arcs (costs ignored), by Dinic's algorithm.
///
/// Returns the flow value and the positive arc flows.
pub fn max_flow<C: Costs>(net: &TransportNetwork<C>) -> Result<(f64, Vec<(usize, usize, f64)>)> {
    net.validate()?;
    let n = net.source_caps.len();
    let m = net.sink_caps.len();
    let target = net.required_flow;
    let tol = AUGMENT_TOLERANCE * target.max(f64::MIN_POSITIVE);

    // nodes: 0 = s, 1..=n rows, n+1..=n+m cols, n+m+1 = t
    let s = 0;
    let t = n + m + 1;
    let mut g = Dinic::new(n + m + 2);
    for (i, &c) in net.source_caps.iter().enumerate() {
        g.add_edge(s, 1 + i, c);
    }
    let mut middle = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if net.allows(i, j) {
                middle.push((i, j, g.add_edge(1 + i, 1 + n + j, f64::INFINITY)));
            }
        }
    }
    for (j, &c) in net.sink_caps.iter().enumerate() {
        g.add_edge(1 + n + j, t, c);
    }
    let value = g.run(s, t, target, tol);
    let flows = middle
        .into_iter()
        .filter_map(|(i, j, e)| {
            let f = g.flow_on(e);
            (f > tol).then_some((i, j, f))
        })
        .collect();
    Ok((value, flows))
}

/// True iff a flow of value `required_flow` fits the capacities and mask.
pub fn max_flow_feasible<C: Costs>(net: &TransportNetwork<C>) -> bool {
    match max_flow(net) {
        Ok((value, _)) => value >= net.required_flow - SHORTFALL_TOLERANCE,
        Err(_) => false,
    }
}

struct Dinic {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    orig: Vec<f64>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(nodes: usize) -> Self {
        Dinic {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            orig: Vec::new(),
            level: vec![-1; nodes],
            iter: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) -> usize {
        let e = self.to.len();
        self.head[u].push(e);
        self.to.push(v);
        self.cap.push(c);
        self.orig.push(c);
        self.head[v].push(e + 1);
        self.to.push(u);
        self.cap.push(0.0);
        self.orig.push(0.0);
        e
    }

    fn flow_on(&self, e: usize) -> f64 {
        self.cap[e ^ 1]
    }

    fn bfs(&mut self, s: usize, tol: f64) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut q = VecDeque::new();
        self.level[s] = 0;
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > tol && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    q.push_back(v);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64, tol: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.iter[u] < self.head[u].len() {
            let e = self.head[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e] > tol && self.level[v] == self.level[u] + 1 {
                let got = self.dfs(v, t, pushed.min(self.cap[e]), tol);
                if got > tol {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn run(&mut self, s: usize, t: usize, limit: f64, tol: f64) -> f64 {
        let mut total = 0.0;
        while total < limit - tol {
            self.bfs(s, tol);
            if self.level[t] < 0 {
                break;
            }
            self.iter.iter_mut().for_each(|x| *x = 0);
            loop {
                let f = self.dfs(s, t, limit - total, tol);
                if f <= tol {
                    break;
                }
                total += f;
                if total >= limit - tol {
                    break;
                }
            }
        }
        let _ = &self.orig;
        total
    }
}

/// Min-cost flow for `|x - y|` costs between atoms on a line.
///
/// Row `i` sits at `xs[i]` and may ship `source_caps[i]`; column `j` sits at
/// `ys[j]` and may receive `sink_caps[j]`. Any such transport decomposes
/// into flow across the gaps between consecutive atoms, so the problem is a
/// min-cost flow on a path with `n + m` nodes. Successive shortest paths on
/// that path graph give the kept masses. The monotone coupling of those
/// masses attains their `W_1` distance, so it is returned as the plan.
///
/// Returns `(flow, total_cost)` with `flow` sorted by `(i, j)`.
pub fn line_transport(
    xs: &[f64],
    ys: &[f64],
    source_caps: &[f64],
    sink_caps: &[f64],
    required_flow: f64,
) -> Result<(Vec<(usize, usize, f64)>, f64)> {
    if xs.len() != source_caps.len() || ys.len() != sink_caps.len() {
        return Err(Error::invalid("positions and capacities differ in length"));
    }
    if xs.iter().chain(ys).any(|x| !x.is_finite()) {
        return Err(Error::invalid("atom positions must be finite"));
    }
    let caps_ok = |c: &[f64]| c.iter().all(|&x| x >= 0.0 && x.is_finite());
    if !caps_ok(source_caps) || !caps_ok(sink_caps) || !(required_flow >= 0.0) {
        return Err(Error::invalid("capacities and flow value must be finite and nonnegative"));
    }
    let (n, m) = (xs.len(), ys.len());
    // line nodes in position order; node k is row `at[k]` if `at[k] < n`, else column `at[k] - n`
    let mut at: Vec<usize> = (0..n + m).collect();
    let pos = |a: usize| if a < n { xs[a] } else { ys[a - n] };
    at.sort_by(|&a, &b| pos(a).total_cmp(&pos(b)).then(a.cmp(&b)));
    let len = at.len();
    let gap: Vec<f64> = at.windows(2).map(|w| pos(w[1]) - pos(w[0])).collect();

    let tol = AUGMENT_TOLERANCE * required_flow.max(f64::MIN_POSITIVE);
    let mut residual: Vec<f64> = at.iter().map(|&a| if a < n { source_caps[a] } else { sink_caps[a - n] }).collect();
    // net rightward flow across gap k
    let mut across = vec![0.0; len.saturating_sub(1)];
    let mut pot = vec![0.0f64; len];
    let mut pot_s = 0.0f64;
    let mut dist = vec![f64::INFINITY; len];
    let mut done = vec![false; len];
    // predecessor: usize::MAX for the source, otherwise the previous line node
    let mut pred = vec![usize::MAX; len];
    let mut touched: Vec<usize> = Vec::new();
    let mut remaining = required_flow;
    let max_rounds = 64 * (len + 1) + 10_000;
    let mut rounds = 0usize;

    // cost of stepping from node k to its neighbour; cancelling opposite flow is negative
    let step = |across: &[f64], k: usize, right: bool| -> f64 {
        if right {
            if across[k] < -tol { -gap[k] } else { gap[k] }
        } else if across[k - 1] > tol {
            -gap[k - 1]
        } else {
            gap[k - 1]
        }
    };

    while remaining > tol {
        rounds += 1;
        if rounds > max_rounds {
            return Err(Error::Numeric(format!("line transport did not terminate after {max_rounds} augmentations")));
        }
        for &k in &touched {
            dist[k] = f64::INFINITY;
            done[k] = false;
            pred[k] = usize::MAX;
        }
        touched.clear();
        let mut start = Vec::new();
        for k in 0..len {
            if at[k] < n && residual[k] > tol {
                dist[k] = (pot_s - pot[k]).max(0.0);
                touched.push(k);
                start.push(HeapItem { dist: dist[k], node: k });
            }
        }
        let mut heap = BinaryHeap::from(start);
        let mut settled = Vec::new();
        // node `len` is the sink, entered from columns with spare capacity
        let (mut sink_dist, mut sink_pred) = (f64::INFINITY, usize::MAX);
        let mut end: Option<(usize, f64)> = None;
        while let Some(HeapItem { dist: d, node: k }) = heap.pop() {
            if k == len {
                end = Some((sink_pred, d));
                break;
            }
            if done[k] || d > dist[k] {
                continue;
            }
            done[k] = true;
            settled.push(k);
            if at[k] >= n && residual[k] > tol {
                let nd = (d + pot[k]).max(d);
                if nd < sink_dist {
                    sink_dist = nd;
                    sink_pred = k;
                    heap.push(HeapItem { dist: nd, node: len });
                }
            }
            for (nb, right) in [(k + 1, true), (k.wrapping_sub(1), false)] {
                if nb >= len || done[nb] {
                    continue;
                }
                let nd = (d + step(&across, k, right) + pot[k] - pot[nb]).max(d);
                if nd < dist[nb] {
                    if dist[nb] == f64::INFINITY {
                        touched.push(nb);
                    }
                    dist[nb] = nd;
                    pred[nb] = k;
                    heap.push(HeapItem { dist: nd, node: nb });
                }
            }
        }
        let Some((last, big_d)) = end else {
            break;
        };
        for &k in &settled {
            if dist[k] < big_d {
                pot[k] += dist[k] - big_d;
            }
        }
        pot_s -= big_d;

        let mut delta = remaining.min(residual[last]);
        let mut k = last;
        while pred[k] != usize::MAX {
            let prev = pred[k];
            let g = prev.min(k);
            let right = k > prev;
            if (right && across[g] < -tol) || (!right && across[g] > tol) {
                delta = delta.min(across[g].abs());
            }
            k = prev;
        }
        delta = delta.min(residual[k]);

        residual[last] -= delta;
        let mut k = last;
        while pred[k] != usize::MAX {
            let prev = pred[k];
            let g = prev.min(k);
            across[g] += if k > prev { delta } else { -delta };
            if across[g].abs() <= tol {
                across[g] = 0.0;
            }
            k = prev;
        }
        residual[k] -= delta;
        remaining -= delta;
    }
    if remaining > SHORTFALL_TOLERANCE {
        return Err(Error::invalid(format!("capacities route only {} of {required_flow}", required_flow - remaining)));
    }

    // monotone coupling of the kept masses
    let mut rows: Vec<(usize, f64)> = Vec::new();
    let mut cols: Vec<(usize, f64)> = Vec::new();
    for k in 0..len {
        let a = at[k];
        if a < n {
            let kept = source_caps[a] - residual[k];
            if kept > tol {
                rows.push((a, kept));
            }
        } else {
            let kept = sink_caps[a - n] - residual[k];
            if kept > tol {
                cols.push((a - n, kept));
            }
        }
    }
    let mut flow = Vec::with_capacity(rows.len() + cols.len());
    let (mut r, mut c) = (0, 0);
    let mut rs = rows.first().map_or(0.0, |e| e.1);
    let mut cs = cols.first().map_or(0.0, |e| e.1);
    while r < rows.len() && c < cols.len() {
        let take = rs.min(cs);
        if take > 0.0 {
            flow.push((rows[r].0, cols[c].0, take));
        }
        rs -= take;
        cs -= take;
        if rs <= cs {
            r += 1;
            rs = rows.get(r).map_or(0.0, |e| e.1);
        } else {
            c += 1;
            cs = cols.get(c).map_or(0.0, |e| e.1);
        }
    }
    flow.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let total_cost = flow.iter().map(|&(i, j, f)| f * (xs[i] - ys[j]).abs()).sum();
    Ok((flow, total_cost))
}
