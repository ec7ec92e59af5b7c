//! Coarse Ricci curvature κ(x, y) = 1 − W₁(mₓ, m_y)/d(x, y) and friends.

use rayon::prelude::*;
use thiserror::Error;

use crate::chain::Chain;
use crate::metric::MetricError;
use crate::transport::{w1_sparse, CouplingPlan, Distribution, TransportError};

/// Slack allowed in the one-step contraction check.
pub const CONTRACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("curvature needs two distinct points, got {0} twice")]
    SamePoint(usize),
    #[error("delta must be finite and nonnegative, got {0}")]
    InvalidDelta(f64),
    #[error("space is not {eps}-geodesic (witness pair {x}, {y})")]
    NotGeodesic { eps: f64, x: usize, y: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairMode {
    AllPairs,
    /// Only pairs at distance ≤ eps; needs an eps-geodesic space.
    Geodesic(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCurvature {
    pub x: usize,
    pub y: usize,
    pub dist: f64,
    pub w1: f64,
    pub kappa: f64,
    /// κ up to the report's δ; equals `kappa` when δ = 0.
    pub kappa_delta: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    /// κ₋/κ on the canonical plan; `None` when κ ≤ 0.
    pub unstability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub pairs: Vec<PairCurvature>,
    /// Minimum of `kappa_delta` over the reported pairs.
    pub global_kappa: f64,
    pub mode: PairMode,
    pub delta: f64,
}

impl CurvatureReport {
    pub fn pair(&self, x: usize, y: usize) -> Option<&PairCurvature> {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        self.pairs.iter().find(|p| p.x == a && p.y == b)
    }

    /// Largest unstability over pairs, if every pair has positive κ.
    pub fn max_unstability(&self) -> Option<f64> {
        self.pairs
            .iter()
            .map(|p| p.unstability)
            .try_fold(0.0f64, |acc, u| u.map(|u| acc.max(u)))
    }
}

fn transport_rows(
    chain: &Chain,
    x: usize,
    y: usize,
) -> Result<(f64, CouplingPlan), CurvatureError> {
    if x == y {
        return Err(CurvatureError::SamePoint(x));
    }
    let t = w1_sparse(chain.row(x), chain.row(y), chain.space())?;
    Ok((t.cost, t.plan))
}

fn check_delta(delta: f64) -> Result<(), CurvatureError> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(CurvatureError::InvalidDelta(delta))
    }
}

fn kappa_from_w1(w1: f64, d: f64, delta: f64) -> f64 {
    1.0 - (w1 - delta).max(0.0) / d
}

/// κ(x, y), or κ up to δ when `delta > 0`.
pub fn kappa(chain: &Chain, x: usize, y: usize, delta: f64) -> Result<f64, CurvatureError> {
    check_delta(delta)?;
    let (w1, _) = transport_rows(chain, x, y)?;
    Ok(kappa_from_w1(w1, chain.space().dist(x, y), delta))
}

/// (κ₊, κ₋, U) integrated over the canonical optimal plan.
pub fn kappa_decomposition(
    chain: &Chain,
    x: usize,
    y: usize,
) -> Result<(f64, f64, Option<f64>), CurvatureError> {
    Ok(pair_curvature(chain, x, y, 0.0)?.split())
}

impl PairCurvature {
    fn split(&self) -> (f64, f64, Option<f64>) {
        (self.kappa_plus, self.kappa_minus, self.unstability)
    }
}

pub fn pair_curvature(
    chain: &Chain,
    x: usize,
    y: usize,
    delta: f64,
) -> Result<PairCurvature, CurvatureError> {
    check_delta(delta)?;
    let (w1, plan) = transport_rows(chain, x, y)?;
    let s = chain.space();
    let d = s.dist(x, y);
    let (mut plus, mut minus) = (0.0, 0.0);
    for &(a, b, mass) in &plan.entries {
        let change = d - s.dist(a, b);
        if change > 0.0 {
            plus += mass * change;
        } else {
            minus -= mass * change;
        }
    }
    let kappa = 1.0 - w1 / d;
    Ok(PairCurvature {
        x: x.min(y),
        y: x.max(y),
        dist: d,
        w1,
        kappa,
        kappa_delta: kappa_from_w1(w1, d, delta),
        kappa_plus: plus / d,
        kappa_minus: minus / d,
        unstability: (kappa > 0.0).then(|| minus / d / kappa),
    })
}

/// Curvature over all pairs, or over nearby pairs of an eps-geodesic space.
pub fn kappa_global(
    chain: &Chain,
    mode: PairMode,
    delta: f64,
) -> Result<CurvatureReport, CurvatureError> {
    check_delta(delta)?;
    let s = chain.space();
    let n = chain.len();
    if let PairMode::Geodesic(eps) = mode {
        let check = s.check_epsilon_geodesic(eps)?;
        if !check.holds {
            let (x, y) = check.violation.unwrap_or((0, 0));
            return Err(CurvatureError::NotGeodesic { eps, x, y });
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            (x + 1..n)
                .filter(move |&y| match mode {
                    PairMode::AllPairs => true,
                    PairMode::Geodesic(eps) => s.dist(x, y) <= eps,
                })
                .map(move |y| (x, y))
        })
        .collect();
    let pairs: Vec<PairCurvature> = pairs
        .into_par_iter()
        .map(|(x, y)| pair_curvature(chain, x, y, delta))
        .collect::<Result<_, _>>()?;
    let global_kappa = pairs
        .iter()
        .map(|p| p.kappa_delta)
        .fold(f64::INFINITY, f64::min);
    Ok(CurvatureReport {
        pairs,
        global_kappa,
        mode,
        delta,
    })
}

/// Geodesic mode at the space's natural step when it applies, else all pairs.
pub fn default_mode(chain: &Chain) -> PairMode {
    let s = chain.space();
    match s.geodesic_hint() {
        Some(eps)
            if s.check_epsilon_geodesic(eps)
                .map(|c| c.holds)
                .unwrap_or(false) =>
        {
            PairMode::Geodesic(eps)
        }
        _ => PairMode::AllPairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks W₁(μ∗m, ν∗m) ≤ (1 − κ)·W₁(μ, ν).
pub fn contraction_check(
    chain: &Chain,
    global_kappa: f64,
    mu: &Distribution,
    nu: &Distribution,
) -> Result<Contraction, CurvatureError> {
    let s = chain.space();
    let sparse = |w: &[f64]| -> Vec<(usize, f64)> {
        w.iter()
            .copied()
            .enumerate()
            .filter(|e| e.1 > 0.0)
            .collect()
    };
    let base = w1_sparse(&mu.support(), &nu.support(), s)?.cost;
    let pm = sparse(&chain.push_forward(mu.weights()));
    let pn = sparse(&chain.push_forward(nu.weights()));
    let lhs = w1_sparse(&pm, &pn, s)?.cost;
    let rhs = (1.0 - global_kappa) * base;
    Ok(Contraction {
        lhs,
        rhs,
        holds: lhs <= rhs + CONTRACTION_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::metric::{numbered_points, FiniteMetricSpace};

    fn cycle_walk(n: usize) -> Chain {
        let edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        let s = FiniteMetricSpace::from_edges(numbered_points(n), &edges).unwrap();
        let rows = (0..n)
            .map(|i| vec![((i + n - 1) % n, 0.5), ((i + 1) % n, 0.5)])
            .collect();
        build_chain(s, rows, None).unwrap()
    }

    #[test]
    fn translation_invariant_cycle_is_flat() {
        let c = cycle_walk(12);
        assert!(kappa(&c, 3, 4, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn same_point_rejected() {
        let c = cycle_walk(5);
        assert!(matches!(
            kappa(&c, 1, 1, 0.0),
            Err(CurvatureError::SamePoint(1))
        ));
        assert!(matches!(
            kappa(&c, 0, 1, -1.0),
            Err(CurvatureError::InvalidDelta(_))
        ));
    }

    #[test]
    fn flip_decomposition() {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        let c = build_chain(s, vec![vec![(1, 1.0)], vec![(0, 1.0)]], None).unwrap();
        let p = pair_curvature(&c, 0, 1, 0.0).unwrap();
        assert_eq!(
            (p.kappa, p.kappa_plus, p.kappa_minus, p.unstability),
            (0.0, 0.0, 0.0, None)
        );
    }

    #[test]
    fn delta_relaxes_curvature() {
        let c = cycle_walk(8);
        let k0 = kappa(&c, 0, 2, 0.0).unwrap();
        let k1 = kappa(&c, 0, 2, 0.5).unwrap();
        let big = kappa(&c, 0, 2, 100.0).unwrap();
        assert!(k0 <= k1 && k1 <= big);
        assert_eq!(big, 1.0);
    }

    #[test]
    fn geodesic_mode_requires_geodesic_space() {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 3]).unwrap();
        let c = build_chain(s, vec![vec![(0, 1.0)], vec![(1, 1.0)]], None).unwrap();
        assert!(matches!(
            kappa_global(&c, PairMode::Geodesic(1.0), 0.0),
            Err(CurvatureError::NotGeodesic { .. })
        ));
        assert!(kappa_global(&c, PairMode::Geodesic(3.0), 0.0).is_ok());
    }

    #[test]
    fn contraction_of_identical_measures() {
        let c = cycle_walk(6);
        let mu = Distribution::uniform(6);
        let r = contraction_check(&c, 0.0, &mu, &mu).unwrap();
        assert!(r.holds && r.lhs.abs() < 1e-15 && r.rhs == 0.0);
    }
}
