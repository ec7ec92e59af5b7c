//! Markov kernels on finite metric spaces.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::lipschitz::{max_var_lipschitz, LipschitzError, MaxVarMode, VarCertificate};
use crate::metric::FiniteMetricSpace;
use crate::transport::Distribution;

/// Allowed deviation of a row sum from 1.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Tolerance for invariance (total variation) and detailed balance.
pub const INVARIANCE_TOL: f64 = 1e-10;
/// Largest class solved by direct elimination; bigger classes use iteration.
pub const DENSE_INVARIANT_CAP: usize = 2000;

const POWER_ITERATION_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("row of point {point} sums to {sum}")]
    RowNotStochastic { point: usize, sum: f64 },
    #[error("negative probability {value} from point {point} to point {target}")]
    NegativeProbability {
        point: usize,
        target: usize,
        value: f64,
    },
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("expected {expected} rows, got {got}")]
    RowCount { expected: usize, got: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("invariant distribution did not converge: {0}")]
    NoConvergence(String),
    #[error(transparent)]
    Lipschitz(#[from] LipschitzError),
}

pub type Row = Vec<(usize, f64)>;

/// A Markov kernel x ↦ mₓ on a finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    space: Arc<FiniteMetricSpace>,
    rows: Vec<Row>,
    dt: Option<f64>,
}

/// Validates rows (indexed by point) and builds a chain. Duplicate targets
/// are merged, zero entries dropped, and each row sorted by target.
pub fn build_chain(
    space: FiniteMetricSpace,
    rows: Vec<Row>,
    dt: Option<f64>,
) -> Result<Chain, ChainError> {
    build_chain_shared(Arc::new(space), rows, dt)
}

pub fn build_chain_shared(
    space: Arc<FiniteMetricSpace>,
    rows: Vec<Row>,
    dt: Option<f64>,
) -> Result<Chain, ChainError> {
    let n = space.len();
    if rows.len() != n {
        return Err(ChainError::RowCount {
            expected: n,
            got: rows.len(),
        });
    }
    if let Some(t) = dt {
        if !(t.is_finite() && t > 0.0) {
            return Err(ChainError::InvalidDt(t));
        }
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(x, row)| normalize_row(x, row, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Chain { space, rows, dt })
}

fn normalize_row(x: usize, mut row: Row, n: usize) -> Result<Row, ChainError> {
    for &(y, p) in &row {
        if y >= n {
            return Err(ChainError::UnknownPoint(format!("index {y} in row {x}")));
        }
        if !p.is_finite() || p < 0.0 {
            return Err(ChainError::NegativeProbability {
                point: x,
                target: y,
                value: p,
            });
        }
    }
    row.sort_by_key(|e| e.0);
    row.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    row.retain(|e| e.1 > 0.0);
    let sum: f64 = row.iter().map(|e| e.1).sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(ChainError::RowNotStochastic { point: x, sum });
    }
    Ok(row)
}

impl Chain {
    /// Builds a chain from rows keyed by point id.
    pub fn from_named_rows(
        space: FiniteMetricSpace,
        rows: &[(String, Vec<(String, f64)>)],
        dt: Option<f64>,
    ) -> Result<Chain, ChainError> {
        let n = space.len();
        let mut indexed: Vec<Option<Row>> = vec![None; n];
        for (name, row) in rows {
            let x = space
                .index_of(name)
                .ok_or_else(|| ChainError::UnknownPoint(name.clone()))?;
            let r = row
                .iter()
                .map(|(t, p)| {
                    space
                        .index_of(t)
                        .map(|y| (y, *p))
                        .ok_or_else(|| ChainError::UnknownPoint(t.clone()))
                })
                .collect::<Result<Row, _>>()?;
            indexed[x] = Some(r);
        }
        if let Some(x) = indexed.iter().position(Option::is_none) {
            return Err(ChainError::UnknownPoint(format!(
                "no row for point {}",
                space.point(x)
            )));
        }
        build_chain(space, indexed.into_iter().map(Option::unwrap).collect(), dt)
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<FiniteMetricSpace> {
        Arc::clone(&self.space)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    /// mₓ(y).
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        let r = &self.rows[x];
        r.binary_search_by_key(&y, |e| e.0)
            .map(|k| r[k].1)
            .unwrap_or(0.0)
    }

    pub fn row_distribution(&self, x: usize) -> Distribution {
        let mut w = vec![0.0; self.len()];
        for &(y, p) in &self.rows[x] {
            w[y] = p;
        }
        Distribution::normalized(w).expect("rows are validated")
    }

    /// Row-major dense kernel.
    pub fn dense_kernel(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|r| {
                let mut v = vec![0.0; n];
                for &(y, p) in r {
                    v[y] = p;
                }
                v
            })
            .collect()
    }

    /// μ ↦ μ∗m, the law after one step started from μ.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (x, r) in self.rows.iter().enumerate() {
            if mu[x] != 0.0 {
                for &(y, p) in r {
                    out[y] += mu[x] * p;
                }
            }
        }
        out
    }

    /// Composes this kernel with `other` (this step first).
    fn compose(&self, other: &Chain) -> Chain {
        let n = self.len();
        let rows = self
            .rows
            .par_iter()
            .map(|r| {
                let mut acc = vec![0.0; n];
                for &(z, p) in r {
                    for &(y, q) in &other.rows[z] {
                        acc[y] += p * q;
                    }
                }
                acc.into_iter().enumerate().filter(|e| e.1 > 0.0).collect()
            })
            .collect();
        Chain {
            space: Arc::clone(&self.space),
            rows,
            dt: self.dt,
        }
    }
}

/// The n-step kernel m*ⁿ.
pub fn n_step(chain: &Chain, n: usize) -> Chain {
    assert!(n >= 1, "n_step needs n ≥ 1");
    let mut out = chain.clone();
    for _ in 1..n {
        out = out.compose(chain);
    }
    out
}

/// (Mf)(x) = Σ_y mₓ(y) f(y).
pub fn averaging(chain: &Chain, f: &[f64]) -> Vec<f64> {
    chain
        .rows
        .iter()
        .map(|r| r.iter().map(|&(y, p)| p * f[y]).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub nu: Distribution,
    pub reversible: bool,
    pub unique: bool,
}

/// Invariant distribution, detailed balance and uniqueness.
///
/// The invariant law is unique exactly when the kernel has a single closed
/// communicating class. When it is not unique, ν is the invariant law of the
/// closed class containing the lowest-indexed point.
pub fn invariant_distribution(chain: &Chain) -> Result<Invariant, ChainError> {
    let n = chain.len();
    let classes = closed_classes(chain);
    let unique = classes.len() == 1;
    let class = &classes[0];
    let local = if class.len() <= DENSE_INVARIANT_CAP {
        gth(chain, class)
    } else {
        power_iteration(chain, class)?
    };
    let mut w = vec![0.0; n];
    for (&x, &v) in class.iter().zip(&local) {
        w[x] = v;
    }
    let pushed = chain.push_forward(&w);
    let tv = 0.5
        * pushed
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    if tv > INVARIANCE_TOL {
        return Err(ChainError::NoConvergence(format!(
            "residual total variation {tv}"
        )));
    }
    let reversible = chain.rows.iter().enumerate().all(|(x, r)| {
        r.iter()
            .all(|&(y, p)| (w[x] * p - w[y] * chain.prob(y, x)).abs() <= INVARIANCE_TOL)
    });
    let nu = Distribution::normalized(w).map_err(|e| ChainError::NoConvergence(e.to_string()))?;
    Ok(Invariant {
        nu,
        reversible,
        unique,
    })
}

/// Closed communicating classes, each sorted, ordered by smallest member.
fn closed_classes(chain: &Chain) -> Vec<Vec<usize>> {
    let n = chain.len();
    // Iterative Tarjan.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            let row = &chain.rows[v];
            if *k < row.len() {
                let w = row[*k].0;
                *k += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    let mut closed = vec![true; ncomp];
    for (x, r) in chain.rows.iter().enumerate() {
        if r.iter().any(|&(y, _)| comp[y] != comp[x]) {
            closed[comp[x]] = false;
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for x in 0..n {
        members[comp[x]].push(x);
    }
    let mut out: Vec<Vec<usize>> = members
        .into_iter()
        .enumerate()
        .filter(|(c, _)| closed[*c])
        .map(|(_, m)| m)
        .collect();
    out.sort_by_key(|m| m[0]);
    out
}

/// Grassmann–Taksar–Heyman elimination on an irreducible closed class.
fn gth(chain: &Chain, class: &[usize]) -> Vec<f64> {
    let k = class.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut pos = vec![usize::MAX; chain.len()];
    for (i, &x) in class.iter().enumerate() {
        pos[x] = i;
    }
    let mut p = vec![0.0; k * k];
    for (i, &x) in class.iter().enumerate() {
        for &(y, q) in &chain.rows[x] {
            p[i * k + pos[y]] = q;
        }
    }
    for m in (1..k).rev() {
        let s: f64 = p[m * k..m * k + m].iter().sum();
        for i in 0..m {
            p[i * k + m] /= s;
        }
        for i in 0..m {
            let a = p[i * k + m];
            if a == 0.0 {
                continue;
            }
            for j in 0..m {
                p[i * k + j] += a * p[m * k + j];
            }
        }
    }
    let mut pi = vec![0.0; k];
    pi[0] = 1.0;
    for j in 1..k {
        pi[j] = (0..j).map(|i| pi[i] * p[i * k + j]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter().map(|v| v / total).collect()
}

/// Iterates the lazy kernel (I + P)/2, which shares P's invariant law and is
/// aperiodic, until the total-variation change drops below tolerance.
fn power_iteration(chain: &Chain, class: &[usize]) -> Result<Vec<f64>, ChainError> {
    let n = chain.len();
    let mut v = vec![0.0; n];
    for &x in class {
        v[x] = 1.0 / class.len() as f64;
    }
    for _ in 0..POWER_ITERATION_CAP {
        let pushed = chain.push_forward(&v);
        let next: Vec<f64> = v.iter().zip(&pushed).map(|(a, b)| 0.5 * (a + b)).collect();
        let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if change < 1e-14 {
            return Ok(class.iter().map(|&x| v[x]).collect());
        }
    }
    Err(ChainError::NoConvergence(format!(
        "no convergence after {POWER_ITERATION_CAP} iterations"
    )))
}

/// Local statistics of mₓ: jump, spread, support radius and local dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    pub point: usize,
    pub jump: f64,
    pub sigma2: f64,
    pub sigma_inf: f64,
    /// sup of Var_{mₓ} f over 1-Lipschitz f; equals σ(x)²/nₓ.
    pub max_var: f64,
    /// σ(x)²/max_var; `None` when mₓ is a Dirac mass.
    pub n_x: Option<f64>,
    pub certificate: VarCertificate,
    /// σ(x)²/(nₓκ), filled in by the bounds computations.
    pub d2: Option<f64>,
}

impl LocalStats {
    /// σ(x)²/nₓ, taken as 0 at Dirac rows.
    pub fn sigma2_over_n(&self) -> f64 {
        if self.n_x.is_some() {
            self.max_var
        } else {
            0.0
        }
    }
}

pub fn local_stats(chain: &Chain, x: usize, mode: MaxVarMode) -> Result<LocalStats, ChainError> {
    let s = chain.space();
    let row = chain.row(x);
    let jump = row.iter().map(|&(y, p)| p * s.dist(x, y)).sum();
    let mut sigma2 = 0.0;
    let mut diam: f64 = 0.0;
    for &(y, p) in row {
        for &(z, q) in row {
            let d = s.dist(y, z);
            sigma2 += p * q * d * d;
            diam = diam.max(d);
        }
    }
    sigma2 *= 0.5;
    let mv = max_var_lipschitz(s, &chain.row_distribution(x), mode)?;
    let n_x = (row.len() > 1 && mv.value > 0.0).then(|| sigma2 / mv.value);
    Ok(LocalStats {
        point: x,
        jump,
        sigma2,
        sigma_inf: 0.5 * diam,
        max_var: mv.value,
        n_x,
        certificate: mv.certificate,
        d2: None,
    })
}

/// Local statistics at every point, computed in parallel.
pub fn all_local_stats(chain: &Chain, mode: MaxVarMode) -> Result<Vec<LocalStats>, ChainError> {
    (0..chain.len())
        .into_par_iter()
        .map(|x| local_stats(chain, x, mode))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::numbered_points;

    fn two_point(p: f64) -> Chain {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        build_chain(
            s,
            vec![vec![(0, 1.0 - p), (1, p)], vec![(0, 1.0 - p), (1, p)]],
            None,
        )
        .unwrap()
    }

    fn flip() -> Chain {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        build_chain(s, vec![vec![(1, 1.0)], vec![(0, 1.0)]], None).unwrap()
    }

    #[test]
    fn validation() {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        let e = build_chain(s.clone(), vec![vec![(0, 0.99)], vec![(1, 1.0)]], None);
        assert!(matches!(
            e,
            Err(ChainError::RowNotStochastic { point: 0, .. })
        ));
        let e = build_chain(
            s.clone(),
            vec![vec![(0, 1.5), (1, -0.5)], vec![(1, 1.0)]],
            None,
        );
        assert!(matches!(e, Err(ChainError::NegativeProbability { .. })));
        let e = build_chain(s.clone(), vec![vec![(5, 1.0)], vec![(1, 1.0)]], None);
        assert!(matches!(e, Err(ChainError::UnknownPoint(_))));
        let e = build_chain(s.clone(), vec![vec![(0, 1.0)], vec![(1, 1.0)]], Some(0.0));
        assert!(matches!(e, Err(ChainError::InvalidDt(_))));
        assert!(build_chain(s, vec![vec![(0, 1.0)], vec![(1, 1.0)]], None).is_ok());
    }

    #[test]
    fn named_rows() {
        let s = FiniteMetricSpace::line(vec!["a".into(), "b".into()], &[0, 1]).unwrap();
        let rows = vec![
            ("b".to_string(), vec![("a".to_string(), 1.0)]),
            (
                "a".to_string(),
                vec![("a".to_string(), 0.5), ("b".to_string(), 0.5)],
            ),
        ];
        let c = Chain::from_named_rows(s.clone(), &rows, None).unwrap();
        assert_eq!(c.prob(1, 0), 1.0);
        let bad = vec![("a".to_string(), vec![("zz".to_string(), 1.0)])];
        assert!(matches!(
            Chain::from_named_rows(s, &bad, None),
            Err(ChainError::UnknownPoint(_))
        ));
    }

    #[test]
    fn flip_squared_is_identity() {
        let c = n_step(&flip(), 2);
        assert_eq!(c.rows(), &[vec![(0, 1.0)], vec![(1, 1.0)]]);
        assert_eq!(n_step(&flip(), 1), flip());
    }

    #[test]
    fn averaging_two_point() {
        let c = two_point(0.3);
        assert_eq!(averaging(&c, &[1.0, 1.0]), vec![1.0, 1.0]);
        let m = averaging(&c, &[0.0, 1.0]);
        assert!(m.iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn two_point_local_stats() {
        let c = two_point(0.3);
        let st = local_stats(&c, 0, MaxVarMode::Exact).unwrap();
        assert!((st.sigma2 - 0.21).abs() < 1e-15);
        assert!((st.n_x.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(st.jump, 0.3);
        assert_eq!(st.sigma_inf, 0.5);
    }

    #[test]
    fn dirac_row_has_undefined_dimension() {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        let c = build_chain(s, vec![vec![(0, 1.0)], vec![(1, 1.0)]], None).unwrap();
        let st = local_stats(&c, 0, MaxVarMode::Exact).unwrap();
        assert_eq!((st.jump, st.sigma2, st.sigma_inf), (0.0, 0.0, 0.0));
        assert_eq!(st.n_x, None);
        assert_eq!(st.sigma2_over_n(), 0.0);
    }

    #[test]
    fn invariant_of_flip_and_disjoint_copies() {
        let inv = invariant_distribution(&flip()).unwrap();
        assert!(inv.unique && inv.reversible);
        assert!((inv.nu.weight(0) - 0.5).abs() < 1e-15);
        let s = FiniteMetricSpace::line(numbered_points(4), &[0, 1, 10, 11]).unwrap();
        let c = build_chain(
            s,
            vec![
                vec![(0, 0.5), (1, 0.5)],
                vec![(0, 0.5), (1, 0.5)],
                vec![(2, 0.5), (3, 0.5)],
                vec![(2, 0.5), (3, 0.5)],
            ],
            None,
        )
        .unwrap();
        assert!(!invariant_distribution(&c).unwrap().unique);
    }

    #[test]
    fn transient_states_get_no_mass() {
        let s = FiniteMetricSpace::line(numbered_points(3), &[0, 1, 2]).unwrap();
        let c = build_chain(
            s,
            vec![
                vec![(1, 1.0)],
                vec![(1, 0.5), (2, 0.5)],
                vec![(1, 0.5), (2, 0.5)],
            ],
            None,
        )
        .unwrap();
        let inv = invariant_distribution(&c).unwrap();
        assert!(inv.unique);
        assert_eq!(inv.nu.weight(0), 0.0);
        assert!((inv.nu.weight(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_iteration_agrees_with_elimination() {
        let n = 7;
        let s = FiniteMetricSpace::line(numbered_points(n), &(0..n as i64).collect::<Vec<_>>())
            .unwrap();
        let rows = (0..n)
            .map(|k| {
                let up = if k + 1 < n { 0.3 } else { 0.0 };
                let down = if k > 0 { 0.2 } else { 0.0 };
                let mut r = vec![(k, 1.0 - up - down)];
                if up > 0.0 {
                    r.push((k + 1, up));
                }
                if down > 0.0 {
                    r.push((k - 1, down));
                }
                r
            })
            .collect();
        let c = build_chain(s, rows, None).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let a = gth(&c, &all);
        let b = power_iteration(&c, &all).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
