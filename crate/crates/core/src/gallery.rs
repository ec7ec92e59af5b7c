//! Example chains, mixtures and products of chains, and discretized
//! continuous-time rate matrices.

use std::sync::Arc;

use thiserror::Error;

use crate::chain::{
    build_chain, build_chain_shared, invariant_distribution, Chain, ChainError, Row,
};
use crate::metric::{numbered_points, FiniteMetricSpace, MetricError};

/// Default bound on the invariant mass lost beyond a truncation point.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;
/// Default for presets whose point is a heavy tail.
pub const HEAVY_TAIL_TOL: f64 = 1e-3;
/// Largest product space built by [`tensorize`].
pub const PRODUCT_CAP: usize = 2048;
/// Largest Glauber graph (2^16 configurations).
pub const GLAUBER_VERTEX_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GalleryError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invariant mass beyond the truncation point is {tail:e}, above tolerance {tol:e}")]
    TruncationTooAggressive { tail: f64, tol: f64 },
    #[error("chains do not share one space")]
    SpaceMismatch,
    #[error("bad mixture weights: {0}")]
    BadWeights(String),
    #[error("product has {0} states, above the cap of {PRODUCT_CAP}")]
    ProductTooLarge(usize),
    #[error("negative rate {rate} from {from} to {to}")]
    RatesNegative { from: usize, to: usize, rate: f64 },
    #[error("dt·(max exit rate) = {0} exceeds 1/2")]
    DtTooLarge(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// A finite interaction graph for Glauber dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn cycle(n: usize) -> Graph {
        let edges = if n < 3 {
            Graph::path(n).edges
        } else {
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        };
        Graph { vertices: n, edges }
    }

    pub fn path(n: usize) -> Graph {
        Graph {
            vertices: n,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn complete(n: usize) -> Graph {
        Graph {
            vertices: n,
            edges: (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        }
    }

    pub fn star(leaves: usize) -> Graph {
        Graph {
            vertices: leaves + 1,
            edges: (1..=leaves).map(|i| (0, i)).collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0; self.vertices];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Parses `cycle:N`, `path:N`, `complete:N` or `star:L`.
    pub fn parse(spec: &str) -> Result<Graph, GalleryError> {
        let (kind, n) = spec
            .split_once(':')
            .ok_or_else(|| GalleryError::InvalidParams(format!("graph `{spec}` is not KIND:N")))?;
        let n: usize = n
            .parse()
            .map_err(|_| GalleryError::InvalidParams(format!("graph size `{n}`")))?;
        match kind {
            "cycle" => Ok(Graph::cycle(n)),
            "path" => Ok(Graph::path(n)),
            "complete" => Ok(Graph::complete(n)),
            "star" => Ok(Graph::star(n)),
            _ => Err(GalleryError::InvalidParams(format!(
                "unknown graph kind `{kind}`"
            ))),
        }
    }
}

/// The example chains. Chains on ℕ carry their truncation point `k`;
/// continuous-time ones carry an optional time step (a default is chosen
/// when absent).
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// Lazy walk on the Hamming cube {0,1}ⁿ.
    Cube { n: usize },
    /// Lazy walk on {−n..n} with linear drift to 0.
    DiscreteOu { n: usize },
    /// n balls in d+1 boxes; one ball is moved to a uniform box per step.
    Multinomial { n: usize, d: usize },
    /// Number of ones when a uniform bit of n is resampled as Bernoulli(p).
    Binomial { n: usize, p: f64 },
    /// Heat-bath dynamics for the Ising model on a graph.
    Glauber { graph: Graph, beta: f64, h: f64 },
    /// Nearest-neighbour walk on {0..k} stepping left with probability p.
    GeometricReflect { p: f64, k: usize },
    /// Jump to 0 with probability α, else step right.
    GeometricReset { alpha: f64, k: usize },
    /// Occupancy of an M/M/∞ queue.
    MmInfty {
        lambda: f64,
        mu: f64,
        dt: Option<f64>,
        k: usize,
    },
    /// Birth rate (k+1)α, death rate kβ.
    LinearRates {
        alpha: f64,
        beta: f64,
        dt: Option<f64>,
        k: usize,
    },
    /// Birth rate a(k+1)², death rate a(k+1)² + bk.
    QuadraticRates {
        a: f64,
        b: f64,
        dt: Option<f64>,
        k: usize,
    },
    /// k ↦ 1 w.p. 1 − 1/4k², k ↦ 2k w.p. 1/4k², on {1..2^j}.
    Pow2Jump { j: u32 },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Cube { .. } => "cube",
            Preset::DiscreteOu { .. } => "discrete_ou",
            Preset::Multinomial { .. } => "multinomial",
            Preset::Binomial { .. } => "binomial",
            Preset::Glauber { .. } => "glauber",
            Preset::GeometricReflect { .. } => "geometric_reflect",
            Preset::GeometricReset { .. } => "geometric_reset",
            Preset::MmInfty { .. } => "mm_infty",
            Preset::LinearRates { .. } => "linear_rates",
            Preset::QuadraticRates { .. } => "quadratic_rates",
            Preset::Pow2Jump { .. } => "pow2_jump",
        }
    }

    /// Binomial chain with p = λ/n.
    pub fn binomial_lambda(n: usize, lambda: f64) -> Preset {
        Preset::Binomial {
            n,
            p: lambda / n as f64,
        }
    }

    /// Whether the chain truncates an infinite state space.
    pub fn is_truncated(&self) -> bool {
        matches!(
            self,
            Preset::GeometricReflect { .. }
                | Preset::GeometricReset { .. }
                | Preset::MmInfty { .. }
                | Preset::LinearRates { .. }
                | Preset::QuadraticRates { .. }
                | Preset::Pow2Jump { .. }
        )
    }

    pub fn default_tail_tol(&self) -> f64 {
        match self {
            Preset::QuadraticRates { .. } | Preset::Pow2Jump { .. } => HEAVY_TAIL_TOL,
            _ => DEFAULT_TAIL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub chain: Chain,
    /// Estimated invariant mass of the untruncated chain beyond the cut.
    pub tail_mass: Option<f64>,
}

/// Builds a preset with its default truncation tolerance.
pub fn generate(preset: &Preset) -> Result<Chain, GalleryError> {
    generate_with(preset, None).map(|g| g.chain)
}

/// Builds a preset, failing if the truncated tail exceeds `tail_tol`.
pub fn generate_with(preset: &Preset, tail_tol: Option<f64>) -> Result<Generated, GalleryError> {
    let chain = match preset {
        Preset::Cube { n } => cube(*n)?,
        Preset::DiscreteOu { n } => discrete_ou(*n)?,
        Preset::Multinomial { n, d } => multinomial(*n, *d)?,
        Preset::Binomial { n, p } => binomial(*n, *p)?,
        Preset::Glauber { graph, beta, h } => glauber(graph, *beta, *h)?,
        Preset::GeometricReflect { p, k } => geometric_reflect(*p, *k)?,
        Preset::GeometricReset { alpha, k } => geometric_reset(*alpha, *k)?,
        Preset::MmInfty { lambda, mu, dt, k } => {
            positive(&[("lambda", *lambda), ("mu", *mu)])?;
            birth_death(*k, *dt, |_| *lambda, |i| i * mu)?
        }
        Preset::LinearRates { alpha, beta, dt, k } => {
            positive(&[("alpha", *alpha), ("beta", *beta)])?;
            birth_death(*k, *dt, |i| (i + 1.0) * alpha, |i| i * beta)?
        }
        Preset::QuadraticRates { a, b, dt, k } => {
            positive(&[("a", *a), ("b", *b)])?;
            birth_death(
                *k,
                *dt,
                |i| a * (i + 1.0) * (i + 1.0),
                |i| {
                    if i > 0.0 {
                        a * (i + 1.0) * (i + 1.0) + b * i
                    } else {
                        0.0
                    }
                },
            )?
        }
        Preset::Pow2Jump { j } => pow2_jump(*j)?,
    };
    let tail_mass = if preset.is_truncated() {
        Some(tail_estimate(preset, &chain)?)
    } else {
        None
    };
    if let Some(tail) = tail_mass {
        let tol = tail_tol.unwrap_or_else(|| preset.default_tail_tol());
        if tail > tol {
            return Err(GalleryError::TruncationTooAggressive { tail, tol });
        }
    }
    Ok(Generated { chain, tail_mass })
}

fn positive(params: &[(&str, f64)]) -> Result<(), GalleryError> {
    for (name, v) in params {
        if !(v.is_finite() && *v > 0.0) {
            return Err(GalleryError::InvalidParams(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

fn probability(name: &str, p: f64) -> Result<(), GalleryError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(GalleryError::InvalidParams(format!(
            "{name} must lie in (0, 1), got {p}"
        )))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), GalleryError> {
    if v >= min {
        Ok(())
    } else {
        Err(GalleryError::InvalidParams(format!(
            "{name} must be at least {min}, got {v}"
        )))
    }
}

fn line_space(positions: impl Iterator<Item = i64>) -> Result<FiniteMetricSpace, GalleryError> {
    let pos: Vec<i64> = positions.collect();
    let ids = pos.iter().map(|p| p.to_string()).collect();
    Ok(FiniteMetricSpace::line(ids, &pos)?)
}

fn cube(n: usize) -> Result<Chain, GalleryError> {
    at_least("n", n, 1)?;
    if n > 11 {
        return Err(GalleryError::InvalidParams(format!(
            "cube dimension {n} exceeds 11"
        )));
    }
    let size = 1usize << n;
    let bit = |x: usize, i: usize| (x >> (n - 1 - i)) & 1;
    let ids = (0..size)
        .map(|x| {
            (0..n)
                .map(|i| if bit(x, i) == 1 { '1' } else { '0' })
                .collect()
        })
        .collect();
    let coords = (0..size)
        .map(|x| (0..n).map(|i| bit(x, i) as i64).collect())
        .collect();
    let space = FiniteMetricSpace::from_lattice(ids, coords, 1.0, Some(1.0))?;
    let q = 1.0 / (2.0 * n as f64);
    let rows = (0..size)
        .map(|x| {
            let mut r = vec![(x, 0.5)];
            r.extend((0..n).map(|i| (x ^ (1 << (n - 1 - i)), q)));
            r
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn discrete_ou(n: usize) -> Result<Chain, GalleryError> {
    at_least("n", n, 1)?;
    let ni = n as i64;
    let space = line_space(-ni..=ni)?;
    let rows = (-ni..=ni)
        .map(|k| {
            let idx = (k + ni) as usize;
            let kf = k as f64 / (4.0 * n as f64);
            let mut r = vec![(idx, 0.5)];
            if k < ni {
                r.push((idx + 1, 0.25 - kf));
            }
            if k > -ni {
                r.push((idx - 1, 0.25 + kf));
            }
            r
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn multinomial(n: usize, d: usize) -> Result<Chain, GalleryError> {
    at_least("n", n, 1)?;
    at_least("d", d, 1)?;
    let states = compositions(n, d + 1);
    if states.len() > 20_000 {
        return Err(GalleryError::InvalidParams(format!(
            "{} states is too many",
            states.len()
        )));
    }
    let ids: Vec<String> = states
        .iter()
        .map(|s| {
            format!(
                "({})",
                s.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        })
        .collect();
    let index: std::collections::HashMap<&Vec<usize>, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let coords = states
        .iter()
        .map(|s| s.iter().map(|&v| v as i64).collect())
        .collect();
    let space = FiniteMetricSpace::from_lattice(ids, coords, 0.5, Some(1.0))?;
    let denom = (n * (d + 1)) as f64;
    let rows = states
        .iter()
        .map(|s| {
            let mut r = Vec::new();
            for i in 0..=d {
                if s[i] == 0 {
                    continue;
                }
                for j in 0..=d {
                    let mut t = s.clone();
                    t[i] -= 1;
                    t[j] += 1;
                    r.push((index[&t], s[i] as f64 / denom));
                }
            }
            r
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn binomial(n: usize, p: f64) -> Result<Chain, GalleryError> {
    at_least("n", n, 1)?;
    probability("p", p)?;
    let space = line_space(0..=n as i64)?;
    let nf = n as f64;
    let rows = (0..=n)
        .map(|k| {
            let kf = k as f64;
            let up = p * (1.0 - kf / nf);
            let down = (1.0 - p) * kf / nf;
            let mut r = vec![(k, p * kf / nf + (1.0 - p) * (1.0 - kf / nf))];
            if k < n {
                r.push((k + 1, up));
            }
            if k > 0 {
                r.push((k - 1, down));
            }
            r
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn glauber(graph: &Graph, beta: f64, h: f64) -> Result<Chain, GalleryError> {
    let g = graph.vertices;
    at_least("graph vertices", g, 1)?;
    if g > GLAUBER_VERTEX_CAP {
        return Err(GalleryError::InvalidParams(format!(
            "graph has {g} vertices, cap is {GLAUBER_VERTEX_CAP}"
        )));
    }
    if !(beta.is_finite() && beta >= 0.0) || !h.is_finite() {
        return Err(GalleryError::InvalidParams(format!(
            "beta = {beta}, h = {h}"
        )));
    }
    let mut nbrs = vec![Vec::new(); g];
    for &(a, b) in &graph.edges {
        if a >= g || b >= g || a == b {
            return Err(GalleryError::InvalidParams(format!("bad edge ({a}, {b})")));
        }
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let size = 1usize << g;
    let mask = |v: usize| 1usize << (g - 1 - v);
    let spin = |s: usize, v: usize| if s & mask(v) != 0 { 1.0 } else { -1.0 };
    let ids = (0..size)
        .map(|s| {
            (0..g)
                .map(|v| if spin(s, v) > 0.0 { '+' } else { '-' })
                .collect()
        })
        .collect();
    let coords = (0..size)
        .map(|s| (0..g).map(|v| spin(s, v) as i64).collect())
        .collect();
    let space = FiniteMetricSpace::from_lattice(ids, coords, 0.5, Some(1.0))?;
    let w = 1.0 / g as f64;
    let rows = (0..size)
        .map(|s| {
            let mut r = Vec::with_capacity(2 * g);
            for (v, nb) in nbrs.iter().enumerate() {
                let field: f64 = nb.iter().map(|&u| spin(s, u)).sum::<f64>() + h;
                let p_plus = 1.0 / (1.0 + (-2.0 * beta * field).exp());
                r.push((s | mask(v), w * p_plus));
                r.push((s & !mask(v), w * (1.0 - p_plus)));
            }
            r
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn geometric_reflect(p: f64, k: usize) -> Result<Chain, GalleryError> {
    probability("p", p)?;
    at_least("k", k, 1)?;
    let space = line_space(0..=k as i64)?;
    let rows = (0..=k)
        .map(|n| {
            let left = if n == 0 { 0 } else { n - 1 };
            let right = if n == k { k } else { n + 1 };
            vec![(left, p), (right, 1.0 - p)]
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn geometric_reset(alpha: f64, k: usize) -> Result<Chain, GalleryError> {
    probability("alpha", alpha)?;
    at_least("k", k, 1)?;
    let space = line_space(0..=k as i64)?;
    let rows = (0..=k)
        .map(|n| vec![(0, alpha), ((n + 1).min(k), 1.0 - alpha)])
        .collect();
    Ok(build_chain(space, rows, None)?)
}

fn pow2_jump(j: u32) -> Result<Chain, GalleryError> {
    if !(1..=12).contains(&j) {
        return Err(GalleryError::InvalidParams(format!(
            "j must lie in 1..=12, got {j}"
        )));
    }
    let top = 1usize << j;
    let space = line_space(1..=top as i64)?;
    let rows = (1..=top)
        .map(|k| {
            let up = 1.0 / (4.0 * (k * k) as f64);
            let target = if 2 * k <= top { 2 * k } else { k };
            vec![(0, 1.0 - up), (target - 1, up)]
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

/// Birth–death chain on {0..k} from rates, truncated by dropping the birth
/// rate at k, discretized with `dt` (default: half the inverse of the largest
/// exit rate, capped at 1e-3).
fn birth_death(
    k: usize,
    dt: Option<f64>,
    up: impl Fn(f64) -> f64,
    down: impl Fn(f64) -> f64,
) -> Result<Chain, GalleryError> {
    at_least("k", k, 1)?;
    let mut q: Vec<Row> = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let x = i as f64;
        let mut r = Vec::new();
        if i < k {
            r.push((i + 1, up(x)));
        }
        if i > 0 {
            r.push((i - 1, down(x)));
        }
        q.push(r);
    }
    let max_exit = q
        .iter()
        .map(|r| r.iter().map(|e| e.1).sum::<f64>())
        .fold(0.0, f64::max);
    let dt = dt.unwrap_or_else(|| (0.5 / max_exit).min(1e-3));
    let space = line_space(0..=k as i64)?;
    discretize_rates(space, &q, dt)
}

/// m_x = δ_x + dt·Q_x for off-diagonal rate rows `rates`.
pub fn discretize_rates(
    space: FiniteMetricSpace,
    rates: &[Row],
    dt: f64,
) -> Result<Chain, GalleryError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GalleryError::InvalidParams(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if rates.len() != space.len() {
        return Err(GalleryError::InvalidParams(format!(
            "{} rate rows for {} points",
            rates.len(),
            space.len()
        )));
    }
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(rates.len());
    for (x, r) in rates.iter().enumerate() {
        let mut exit = 0.0;
        let mut row = Vec::with_capacity(r.len() + 1);
        for &(y, rate) in r {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(GalleryError::RatesNegative {
                    from: x,
                    to: y,
                    rate,
                });
            }
            if y != x {
                exit += rate;
                row.push((y, rate * dt));
            }
        }
        worst = worst.max(exit * dt);
        row.push((x, 1.0 - exit * dt));
        rows.push(row);
    }
    if worst > 0.5 {
        return Err(GalleryError::DtTooLarge(worst));
    }
    Ok(build_chain(space, rows, Some(dt))?)
}

/// Σ αᵢ m⁽ⁱ⁾ on a common space.
pub fn superpose(chains: &[Chain], alphas: &[f64]) -> Result<Chain, GalleryError> {
    check_weights(chains.len(), alphas)?;
    let first = &chains[0];
    if chains.iter().any(|c| c.space() != first.space()) {
        return Err(GalleryError::SpaceMismatch);
    }
    let dt = first.dt();
    let rows = (0..first.len())
        .map(|x| {
            chains
                .iter()
                .zip(alphas)
                .filter(|(_, &a)| a > 0.0)
                .flat_map(|(c, &a)| c.row(x).iter().map(move |&(y, p)| (y, a * p)))
                .collect()
        })
        .collect();
    Ok(build_chain_shared(first.shared_space(), rows, dt)?)
}

fn check_weights(count: usize, alphas: &[f64]) -> Result<(), GalleryError> {
    if count == 0 {
        return Err(GalleryError::BadWeights("no chains".into()));
    }
    if alphas.len() != count {
        return Err(GalleryError::BadWeights(format!(
            "{} weights for {count} chains",
            alphas.len()
        )));
    }
    if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(GalleryError::BadWeights(
            "weights must be nonnegative".into(),
        ));
    }
    let s: f64 = alphas.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(GalleryError::BadWeights(format!("weights sum to {s}")));
    }
    Ok(())
}

/// Product chain on ∏Xᵢ with the ℓ¹ metric: a component i is chosen with
/// probability αᵢ and moved by its own kernel. States are ordered
/// lexicographically with the first component slowest.
pub fn tensorize(chains: &[Chain], alphas: &[f64]) -> Result<Chain, GalleryError> {
    check_weights(chains.len(), alphas)?;
    if chains.len() == 1 {
        return Ok(chains[0].clone());
    }
    let sizes: Vec<usize> = chains.iter().map(Chain::len).collect();
    let total = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .unwrap_or(usize::MAX);
    if total > PRODUCT_CAP {
        return Err(GalleryError::ProductTooLarge(total));
    }
    // stride of component i in the flat index
    let mut strides = vec![1usize; sizes.len()];
    for i in (0..sizes.len() - 1).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    let digits = |x: usize| -> Vec<usize> {
        (0..sizes.len())
            .map(|i| (x / strides[i]) % sizes[i])
            .collect()
    };
    let ids = (0..total)
        .map(|x| {
            let parts: Vec<&str> = digits(x)
                .iter()
                .zip(chains)
                .map(|(&d, c)| c.space().point(d))
                .collect();
            format!("({})", parts.join(","))
        })
        .collect();
    let matrix = (0..total)
        .map(|x| {
            let dx = digits(x);
            (0..total)
                .map(|y| {
                    let dy = digits(y);
                    (0..sizes.len())
                        .map(|i| chains[i].space().dist(dx[i], dy[i]))
                        .sum()
                })
                .collect()
        })
        .collect();
    let space = FiniteMetricSpace::from_matrix(ids, matrix)?;
    let rows = (0..total)
        .map(|x| {
            let dx = digits(x);
            let mut r = Vec::new();
            for (i, c) in chains.iter().enumerate() {
                if alphas[i] == 0.0 {
                    continue;
                }
                for &(y, p) in c.row(dx[i]) {
                    r.push((x - dx[i] * strides[i] + y * strides[i], alphas[i] * p));
                }
            }
            r
        })
        .collect();
    Ok(build_chain(space, rows, None)?)
}

/// Invariant mass the untruncated chain would put beyond the cut.
fn tail_estimate(preset: &Preset, chain: &Chain) -> Result<f64, GalleryError> {
    let nu = invariant_distribution(chain)?.nu;
    let last = chain.len() - 1;
    let nk = nu.weight(last);
    // Mass beyond the cut relative to ν(last), from the untruncated recursion.
    let relative = match preset {
        Preset::GeometricReflect { p, .. } => {
            let r = (1.0 - p) / p;
            if r >= 1.0 {
                f64::INFINITY
            } else {
                r / (1.0 - r)
            }
        }
        Preset::GeometricReset { alpha, .. } => {
            // Exact law α(1−α)ⁿ: everything from the last state on, minus its own share.
            let exact_tail = (1.0 - alpha).powi(last as i32 + 1);
            return Ok(exact_tail);
        }
        Preset::MmInfty { lambda, mu, .. } => birth_death_tail(last, |_| *lambda, |i| i * mu),
        Preset::LinearRates { alpha, beta, .. } => {
            birth_death_tail(last, |i| (i + 1.0) * alpha, |i| i * beta)
        }
        Preset::QuadraticRates { a, b, .. } => birth_death_tail(
            last,
            |i| a * (i + 1.0) * (i + 1.0),
            |i| a * (i + 1.0) * (i + 1.0) + b * i,
        ),
        Preset::Pow2Jump { .. } => {
            // 2k is entered only from k, which sends it mass 1/4k² per visit.
            let top = chain.len() as f64;
            let mut rel = 0.0;
            let mut term = 1.0;
            let mut k = top;
            for _ in 0..64 {
                term /= 4.0 * k * k;
                rel += term;
                k *= 2.0;
                if term < 1e-300 {
                    break;
                }
            }
            rel
        }
        _ => 0.0,
    };
    let t = nk * relative;
    Ok(if t.is_finite() { t / (1.0 + t) } else { 1.0 })
}

/// Σ_{i>k} ν(i)/ν(k) for a birth–death chain, with a power-law remainder
/// past 64k.
fn birth_death_tail(k: usize, up: impl Fn(f64) -> f64, down: impl Fn(f64) -> f64) -> f64 {
    let mut ratio = 1.0;
    let mut sum = 0.0;
    let end = 64 * k.max(1);
    let mut i = k;
    while i < end {
        let next = up(i as f64) / down(i as f64 + 1.0);
        ratio *= next;
        sum += ratio;
        i += 1;
        if ratio < 1e-300 || (ratio < 1e-18 * sum && next < 0.5) {
            return sum;
        }
    }
    // ν(i+1)/ν(i) ≈ 1 − s/i: the remainder behaves like ∫ (x/end)^{-s} dx.
    let next = up(i as f64) / down(i as f64 + 1.0);
    let s = (1.0 - next) * i as f64;
    if s > 1.0 {
        sum + ratio * i as f64 / (s - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Point ids 0..n−1 as a line, for tests and small constructions.
pub fn integer_line(n: usize) -> Result<FiniteMetricSpace, MetricError> {
    FiniteMetricSpace::line(numbered_points(n), &(0..n as i64).collect::<Vec<_>>())
}

/// The 2-point chain sending both points to (1 − p, p).
pub fn two_point_mixing(p: f64) -> Result<Chain, GalleryError> {
    probability("p", p)?;
    let space = integer_line(2)?;
    Ok(build_chain(
        space,
        vec![vec![(0, 1.0 - p), (1, p)], vec![(0, 1.0 - p), (1, p)]],
        None,
    )?)
}

/// Shares the space `Arc` of another chain.
pub fn with_rows(template: &Chain, rows: Vec<Row>) -> Result<Chain, GalleryError> {
    Ok(build_chain_shared(
        Arc::clone(&template.shared_space()),
        rows,
        template.dt(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_counts() {
        assert_eq!(generate(&Preset::Cube { n: 4 }).unwrap().len(), 16);
        assert_eq!(
            generate(&Preset::Multinomial { n: 4, d: 2 }).unwrap().len(),
            15
        );
        assert_eq!(generate(&Preset::DiscreteOu { n: 3 }).unwrap().len(), 7);
        assert_eq!(generate(&Preset::Pow2Jump { j: 3 }).unwrap().len(), 8);
    }

    #[test]
    fn cube_rows() {
        let c = generate(&Preset::Cube { n: 3 }).unwrap();
        assert_eq!(c.space().point(5), "101");
        assert_eq!(c.prob(5, 5), 0.5);
        assert_eq!(c.prob(5, 1), 1.0 / 6.0);
        assert_eq!(c.prob(5, 7), 1.0 / 6.0);
        assert_eq!(c.prob(5, 6), 0.0);
    }

    #[test]
    fn bad_params() {
        assert!(matches!(
            generate(&Preset::Binomial { n: 5, p: 1.5 }),
            Err(GalleryError::InvalidParams(_))
        ));
        assert!(matches!(
            generate(&Preset::GeometricReflect { p: 0.3, k: 10 }),
            Err(GalleryError::TruncationTooAggressive { .. })
        ));
        let q = vec![vec![(1, 1.0)], vec![(0, -1.0)]];
        assert!(matches!(
            discretize_rates(integer_line(2).unwrap(), &q, 0.1),
            Err(GalleryError::RatesNegative { .. })
        ));
        let q = vec![vec![(1, 10.0)], vec![(0, 1.0)]];
        assert!(matches!(
            discretize_rates(integer_line(2).unwrap(), &q, 0.1),
            Err(GalleryError::DtTooLarge(_))
        ));
    }

    #[test]
    fn mixture_weights() {
        let c = two_point_mixing(0.5).unwrap();
        assert_eq!(superpose(std::slice::from_ref(&c), &[1.0]).unwrap(), c);
        assert!(matches!(
            superpose(std::slice::from_ref(&c), &[0.5]),
            Err(GalleryError::BadWeights(_))
        ));
        let far = FiniteMetricSpace::line(numbered_points(2), &[0, 2]).unwrap();
        let other = build_chain(far, vec![vec![(0, 1.0)], vec![(1, 1.0)]], None).unwrap();
        assert!(matches!(
            superpose(&[c, other], &[0.5, 0.5]),
            Err(GalleryError::SpaceMismatch)
        ));
    }

    #[test]
    fn product_cap() {
        let c = generate(&Preset::Cube { n: 6 }).unwrap();
        assert!(matches!(
            tensorize(&[c.clone(), c], &[0.5, 0.5]),
            Err(GalleryError::ProductTooLarge(4096))
        ));
    }

    #[test]
    fn graph_parsing() {
        assert_eq!(Graph::parse("cycle:5").unwrap().edges.len(), 5);
        assert_eq!(Graph::parse("star:4").unwrap().max_degree(), 4);
        assert!(Graph::parse("wheel:4").is_err());
        assert!(Graph::parse("cycle").is_err());
    }
}
