//! Exact L¹ optimal transport between finitely supported probability measures.
//!
//! The solver is a primal network simplex on the complete bipartite graph
//! between the two supports, started from an artificial star rooted at an
//! extra node. The spanning tree is kept strongly feasible and the leaving arc
//! is the last blocking arc met when walking the pivot cycle from its apex,
//! which rules out cycling on degenerate pivots. Entering arcs are found by
//! block search with a persistent cursor, so results are deterministic.
//!
//! Every call returns a primal plan together with a 1-Lipschitz dual potential
//! (the c-transform of the solver's sink potentials) and fails loudly if the
//! two do not certify each other.

use thiserror::Error;

use crate::metric::FiniteMetricSpace;

/// Tolerance on total mass of a [`Distribution`].
pub const MASS_TOL: f64 = 1e-12;
/// Slack on the 1-Lipschitz constraint of returned dual potentials.
pub const LIPSCHITZ_TOL: f64 = 1e-10;
/// Relative primal-dual gap allowed on every call.
pub const DUALITY_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("infeasible transport problem: {0}")]
    Infeasible(String),
    #[error("duality certificate failed: primal {primal} vs dual {dual}")]
    DualityGap { primal: f64, dual: f64 },
    #[error("dual potential is not 1-Lipschitz between points {0} and {1} (excess {2})")]
    DualNotLipschitz(usize, usize, f64),
}

/// Probability vector over the points of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, TransportError> {
        if weights.is_empty() {
            return Err(TransportError::InvalidDistribution("no weights".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(TransportError::InvalidDistribution(format!(
                "weight {w} at point {i}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(TransportError::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Ok(Distribution { weights })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self, TransportError> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(TransportError::InvalidDistribution(format!(
                "cannot normalise total mass {total}"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Distribution { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Distribution {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn from_sparse(n: usize, atoms: &[(usize, f64)]) -> Result<Self, TransportError> {
        let mut weights = vec![0.0; n];
        for &(i, w) in atoms {
            if i >= n {
                return Err(TransportError::InvalidDistribution(format!(
                    "point {i} out of range"
                )));
            }
            weights[i] += w;
        }
        Self::new(weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Atoms with positive mass, in point order.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.weights
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, w)| *w > 0.0)
            .collect()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean = self.expectation(f);
        self.weights
            .iter()
            .zip(f)
            .map(|(w, v)| w * (v - mean) * (v - mean))
            .sum()
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Sparse primal transport plan: `(source point, target point, mass)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplingPlan {
    pub entries: Vec<(usize, usize, f64)>,
}

impl CouplingPlan {
    pub fn cost(&self, space: &FiniteMetricSpace) -> f64 {
        self.entries
            .iter()
            .map(|&(a, b, m)| m * space.dist(a, b))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// 1-Lipschitz potential on the union of both supports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualPotential {
    pub values: Vec<(usize, f64)>,
}

impl DualPotential {
    pub fn get(&self, point: usize) -> Option<f64> {
        self.values
            .binary_search_by_key(&point, |&(p, _)| p)
            .ok()
            .map(|k| self.values[k].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub cost: f64,
    pub plan: CouplingPlan,
    pub dual: DualPotential,
}

/// W₁ distance between two distributions on `space`, with plan and dual certificate.
pub fn w1(
    mu: &Distribution,
    nu: &Distribution,
    space: &FiniteMetricSpace,
) -> Result<Transport, TransportError> {
    if mu.len() != space.len() || nu.len() != space.len() {
        return Err(TransportError::Infeasible(format!(
            "distribution lengths {} and {} do not match space size {}",
            mu.len(),
            nu.len(),
            space.len()
        )));
    }
    w1_sparse(&mu.support(), &nu.support(), space)
}

/// W₁ between sparse measures given as `(point, mass)` atoms.
///
/// Atoms need not be sorted or merged; nonpositive masses are dropped. Total
/// masses must agree with each other and with 1 to within 1e-9.
pub fn w1_sparse(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    space: &FiniteMetricSpace,
) -> Result<Transport, TransportError> {
    let mu = merge_atoms(mu, space.len())?;
    let nu = merge_atoms(nu, space.len())?;
    let tm: f64 = mu.iter().map(|a| a.1).sum();
    let tn: f64 = nu.iter().map(|a| a.1).sum();
    if (tm - 1.0).abs() > 1e-9 || (tn - 1.0).abs() > 1e-9 {
        return Err(TransportError::Infeasible(format!(
            "masses {tm} and {tn} are not both 1"
        )));
    }

    let plan = if mu.len() == 1 || nu.len() == 1 {
        star_plan(&mu, &nu)
    } else {
        NetworkSimplex::new(&mu, &nu, space).solve()?
    };
    let cost = plan.cost(space);
    let dual = certificate(&mu, &nu, &plan, space)?;
    Ok(Transport { cost, plan, dual })
}

/// Transport cost only.
pub fn w1_cost(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    space: &FiniteMetricSpace,
) -> Result<f64, TransportError> {
    w1_sparse(mu, nu, space).map(|t| t.cost)
}

fn merge_atoms(atoms: &[(usize, f64)], n: usize) -> Result<Vec<(usize, f64)>, TransportError> {
    let mut v: Vec<(usize, f64)> = Vec::with_capacity(atoms.len());
    for &(p, w) in atoms {
        if p >= n {
            return Err(TransportError::Infeasible(format!(
                "point {p} outside space of size {n}"
            )));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(TransportError::Infeasible(format!("mass {w} at point {p}")));
        }
        if w > 0.0 {
            v.push((p, w));
        }
    }
    v.sort_by_key(|a| a.0);
    v.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    if v.is_empty() {
        return Err(TransportError::Infeasible("empty support".into()));
    }
    Ok(v)
}

/// Only one coupling exists when either side is a single atom.
fn star_plan(mu: &[(usize, f64)], nu: &[(usize, f64)]) -> CouplingPlan {
    let entries = if mu.len() == 1 {
        nu.iter().map(|&(j, w)| (mu[0].0, j, w)).collect()
    } else {
        mu.iter().map(|&(i, w)| (i, nu[0].0, w)).collect()
    };
    CouplingPlan { entries }
}

/// Builds the dual potential as the c-transform of the plan's optimal sink
/// potentials and checks it against the primal cost.
fn certificate(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    plan: &CouplingPlan,
    space: &FiniteMetricSpace,
) -> Result<DualPotential, TransportError> {
    let sinks = sink_potentials(mu, nu, plan, space);
    let mut points: Vec<usize> = mu.iter().chain(nu).map(|a| a.0).collect();
    points.sort_unstable();
    points.dedup();
    let values: Vec<(usize, f64)> = points
        .iter()
        .map(|&z| {
            let f = nu
                .iter()
                .zip(&sinks)
                .map(|(&(y, _), &v)| space.dist(z, y) - v)
                .fold(f64::INFINITY, f64::min);
            (z, f)
        })
        .collect();
    // shift so the potential vanishes at the first point; differences are unchanged
    let base = values[0].1;
    let values: Vec<(usize, f64)> = values.into_iter().map(|(p, f)| (p, f - base)).collect();

    for (a, &(p, fp)) in values.iter().enumerate() {
        for &(q, fq) in &values[a + 1..] {
            let excess = (fp - fq).abs() - space.dist(p, q);
            if excess > LIPSCHITZ_TOL {
                return Err(TransportError::DualNotLipschitz(p, q, excess));
            }
        }
    }
    let dual = DualPotential { values };
    let primal = plan.cost(space);
    let objective: f64 = mu
        .iter()
        .map(|&(p, w)| w * dual.get(p).unwrap())
        .sum::<f64>()
        - nu.iter()
            .map(|&(p, w)| w * dual.get(p).unwrap())
            .sum::<f64>();
    if (primal - objective).abs() > DUALITY_GAP_TOL * primal.max(1.0) {
        return Err(TransportError::DualityGap {
            primal,
            dual: objective,
        });
    }
    Ok(dual)
}

/// Sink potentials v with u_i + v_j ≤ c_ij, tight on the plan's support.
///
/// Recomputed from the plan alone (rather than trusted from the solver) by
/// Bellman–Ford on the residual graph, so the certificate is independent of
/// the simplex bookkeeping.
fn sink_potentials(
    mu: &[(usize, f64)],
    nu: &[(usize, f64)],
    plan: &CouplingPlan,
    space: &FiniteMetricSpace,
) -> Vec<f64> {
    let (m, n) = (mu.len(), nu.len());
    let src_pos = |p: usize| mu.binary_search_by_key(&p, |a| a.0).unwrap();
    let snk_pos = |p: usize| nu.binary_search_by_key(&p, |a| a.0).unwrap();
    let mut used = vec![false; m * n];
    for &(a, b, mass) in &plan.entries {
        if mass > 0.0 {
            used[src_pos(a) * n + snk_pos(b)] = true;
        }
    }
    // Residual graph: forward i→j costs c_ij, backward j→i costs −c_ij on used
    // cells. Shortest distances from a virtual source give feasible potentials.
    let mut pot = vec![0.0f64; m + n];
    for _ in 0..(m + n + 1) {
        let mut changed = false;
        for i in 0..m {
            for j in 0..n {
                let c = space.dist(mu[i].0, nu[j].0);
                if pot[i] + c < pot[m + j] {
                    pot[m + j] = pot[i] + c;
                    changed = true;
                }
                if used[i * n + j] && pot[m + j] - c < pot[i] {
                    pot[i] = pot[m + j] - c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    // d(j) ≤ d(i) + c_ij, so v_j = d(j), u_i = −d(i) is dual feasible.
    pot[m..].to_vec()
}

struct NetworkSimplex {
    m: usize,
    n: usize,
    root: usize,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    cursor: usize,
    block: usize,
    eps: f64,
    sources: Vec<usize>,
    sinks: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl NetworkSimplex {
    fn new(mu: &[(usize, f64)], nu: &[(usize, f64)], space: &FiniteMetricSpace) -> Self {
        let (m, n) = (mu.len(), nu.len());
        let regular = m * n;
        let arcs = regular + m + n;
        let mut cost = Vec::with_capacity(arcs);
        let mut max_cost: f64 = 0.0;
        for &(x, _) in mu {
            for &(y, _) in nu {
                let c = space.dist(x, y);
                max_cost = max_cost.max(c);
                cost.push(c);
            }
        }
        let art = (max_cost + 1.0) * (m + n + 1) as f64;
        cost.extend(std::iter::repeat_n(art, m + n));
        let mut flow = vec![0.0; arcs];
        let mut in_tree = vec![false; arcs];
        let root = m + n;
        let mut adj = vec![Vec::new(); m + n + 1];
        for (u, &(_, w)) in mu.iter().enumerate() {
            flow[regular + u] = w;
        }
        for (j, &(_, w)) in nu.iter().enumerate() {
            flow[regular + m + j] = w;
        }
        for (a, t) in in_tree.iter_mut().enumerate().skip(regular) {
            *t = true;
            let u = a - regular;
            adj[u].push(a);
            adj[root].push(a);
        }
        let block = ((arcs as f64).sqrt().ceil() as usize).max(10).min(arcs);
        let mut s = NetworkSimplex {
            m,
            n,
            root,
            cost,
            flow,
            in_tree,
            adj,
            parent: vec![NONE; m + n + 1],
            parent_arc: vec![NONE; m + n + 1],
            depth: vec![0; m + n + 1],
            pi: vec![0.0; m + n + 1],
            cursor: 0,
            block,
            eps: 1e-12 * (1.0 + max_cost),
            sources: mu.iter().map(|a| a.0).collect(),
            sinks: nu.iter().map(|a| a.0).collect(),
        };
        s.rebuild_tree();
        s
    }

    #[inline]
    fn ends(&self, a: usize) -> (usize, usize) {
        let regular = self.m * self.n;
        if a < regular {
            (a / self.n, self.m + a % self.n)
        } else {
            let u = a - regular;
            if u < self.m {
                (u, self.root)
            } else {
                (self.root, u)
            }
        }
    }

    #[inline]
    fn reduced_cost(&self, a: usize) -> f64 {
        let (s, t) = self.ends(a);
        self.cost[a] + self.pi[s] - self.pi[t]
    }

    fn rebuild_tree(&mut self) {
        let nodes = self.m + self.n + 1;
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.parent[self.root] = self.root;
        self.depth[self.root] = 0;
        self.pi[self.root] = 0.0;
        let mut stack = vec![self.root];
        let mut visited = 1;
        while let Some(u) = stack.pop() {
            for k in 0..self.adj[u].len() {
                let a = self.adj[u][k];
                let (s, t) = self.ends(a);
                let v = if s == u { t } else { s };
                if self.parent[v] != NONE {
                    continue;
                }
                self.parent[v] = u;
                self.parent_arc[v] = a;
                self.depth[v] = self.depth[u] + 1;
                self.pi[v] = if s == u {
                    self.pi[u] + self.cost[a]
                } else {
                    self.pi[u] - self.cost[a]
                };
                visited += 1;
                stack.push(v);
            }
        }
        debug_assert_eq!(visited, nodes, "basis is not a spanning tree");
    }

    fn find_entering(&mut self) -> Option<usize> {
        let arcs = self.cost.len();
        let mut best = NONE;
        let mut best_rc = -self.eps;
        let mut scanned = 0;
        let mut in_block = 0;
        while scanned < arcs {
            let a = self.cursor;
            self.cursor = if a + 1 == arcs { 0 } else { a + 1 };
            scanned += 1;
            in_block += 1;
            if !self.in_tree[a] {
                let rc = self.reduced_cost(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            if in_block == self.block {
                if best != NONE {
                    return Some(best);
                }
                in_block = 0;
            }
        }
        (best != NONE).then_some(best)
    }

    fn pivot(&mut self, entering: usize) -> Result<(), TransportError> {
        let (s, t) = self.ends(entering);
        // Walk both endpoints up to the apex.
        let (mut a, mut b) = (s, t);
        let mut s_side = Vec::new(); // nodes whose parent arc lies on the s → apex path
        let mut t_side = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                s_side.push(a);
                a = self.parent[a];
            } else {
                t_side.push(b);
                b = self.parent[b];
            }
        }
        // Cycle orientation: s → t along the entering arc, t up to the apex, apex down to s.
        // Backward arcs: on the t side (traversed child → parent) the arc points
        // parent → child; on the s side (traversed parent → child) it points child → parent.
        let mut theta = f64::INFINITY;
        for &v in &t_side {
            let arc = self.parent_arc[v];
            if self.ends(arc).0 != v {
                theta = theta.min(self.flow[arc]);
            }
        }
        for &v in &s_side {
            let arc = self.parent_arc[v];
            if self.ends(arc).0 == v {
                theta = theta.min(self.flow[arc]);
            }
        }
        if !theta.is_finite() {
            return Err(TransportError::Infeasible("unbounded pivot cycle".into()));
        }
        // Last blocking arc in orientation order starting at the apex: the t side
        // is visited last, nearest-the-apex first in reverse, so scan it from the apex end.
        let mut leaving = NONE;
        for &v in t_side.iter().rev() {
            let arc = self.parent_arc[v];
            if self.ends(arc).0 != v && self.flow[arc] == theta {
                leaving = arc;
                break;
            }
        }
        if leaving == NONE {
            for &v in &s_side {
                let arc = self.parent_arc[v];
                if self.ends(arc).0 == v && self.flow[arc] == theta {
                    leaving = arc;
                    break;
                }
            }
        }
        debug_assert!(leaving != NONE);

        if theta > 0.0 {
            self.flow[entering] += theta;
            for &v in &t_side {
                let arc = self.parent_arc[v];
                if self.ends(arc).0 == v {
                    self.flow[arc] += theta;
                } else {
                    self.flow[arc] -= theta;
                }
            }
            for &v in &s_side {
                let arc = self.parent_arc[v];
                if self.ends(arc).0 == v {
                    self.flow[arc] -= theta;
                } else {
                    self.flow[arc] += theta;
                }
            }
        }
        self.flow[leaving] = 0.0;

        self.in_tree[leaving] = false;
        self.in_tree[entering] = true;
        let (ls, lt) = self.ends(leaving);
        self.adj[ls].retain(|&x| x != leaving);
        self.adj[lt].retain(|&x| x != leaving);
        self.adj[s].push(entering);
        self.adj[t].push(entering);
        self.rebuild_tree();
        Ok(())
    }

    fn solve(mut self) -> Result<CouplingPlan, TransportError> {
        let max_pivots = 50 * (self.m + self.n) * (self.m * self.n).max(4);
        let mut pivots = 0;
        while let Some(e) = self.find_entering() {
            self.pivot(e)?;
            pivots += 1;
            if pivots > max_pivots {
                return Err(TransportError::Infeasible("pivot limit exceeded".into()));
            }
        }
        let regular = self.m * self.n;
        let residual: f64 = self.flow[regular..].iter().sum();
        if residual > 1e-9 {
            return Err(TransportError::Infeasible(format!(
                "artificial flow {residual} remains"
            )));
        }
        let mut entries = Vec::new();
        for i in 0..self.m {
            for j in 0..self.n {
                let f = self.flow[i * self.n + j];
                if f > 0.0 {
                    entries.push((self.sources[i], self.sinks[j], f));
                }
            }
        }
        Ok(CouplingPlan { entries })
    }
}
