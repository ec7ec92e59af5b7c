//! Gaussian-then-exponential concentration of Lipschitz functions under ν.

use crate::chain::averaging;
use crate::lipschitz::lipschitz_constant;

use super::{Analysis, BoundsError, CHECK_TOL};

const GRID_POINTS: usize = 50;
const GRID_EXTRA: usize = 5;
/// Slack when comparing an exact tail to its bound, and when deciding which
/// points lie in a tail.
const TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub t: f64,
    /// ν({f ≥ t + E_ν f}).
    pub exact: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    /// E_ν D²ₓ.
    pub d2: f64,
    /// Lipschitz constant of x ↦ D²ₓ.
    pub c: f64,
    pub sigma_inf: f64,
    pub t_max: f64,
    pub mean: f64,
    pub rows: Vec<TailRow>,
    pub holds: bool,
}

impl ConcentrationReport {
    /// Upper bound on ν({f ≥ t + E_ν f}) for t ≥ 0.
    pub fn bound(&self, t: f64) -> f64 {
        tail_bound(t, self.d2, self.t_max, self.c, self.sigma_inf)
    }
}

fn tail_bound(t: f64, d2: f64, t_max: f64, c: f64, sigma_inf: f64) -> f64 {
    if t <= t_max {
        (-t * t / (6.0 * d2)).exp()
    } else {
        (-t_max * t_max / (6.0 * d2) - (t - t_max) / (2.0 * c).max(3.0 * sigma_inf)).exp()
    }
}

/// Tabulates exact tails of a 1-Lipschitz `f` against the bound.
pub fn gaussian_concentration(a: &Analysis, f: &[f64]) -> Result<ConcentrationReport, BoundsError> {
    a.require_positive()?;
    a.require_unique()?;
    let space = a.chain.space();
    if f.len() != space.len() {
        return Err(BoundsError::InvalidArgument(format!(
            "function has {} values for {} points",
            f.len(),
            space.len()
        )));
    }
    let lip = lipschitz_constant(space, f);
    if lip > 1.0 + CHECK_TOL {
        return Err(BoundsError::NotLipschitz(lip));
    }
    let profile = a.d2_profile()?;
    let nu = &a.invariant.nu;
    let d2 = nu.expectation(&profile);
    let c = lipschitz_constant(space, &profile);
    let sigma_inf = a.sigma_inf;
    let t_max = 2.0 * d2 / (2.0 * c).max(3.0 * sigma_inf);
    let mean = nu.expectation(f);
    let step = 1.5 * t_max / (GRID_POINTS - 1) as f64;
    let grid = (0..GRID_POINTS)
        .map(|i| i as f64 * step)
        .chain((1..=GRID_EXTRA).map(|j| 1.5 * t_max + j as f64 * t_max / 2.0));
    let rows: Vec<TailRow> = grid
        .map(|t| {
            let exact = f
                .iter()
                .zip(nu.weights())
                .filter(|(v, _)| **v >= t + mean - TAIL_TOL)
                .map(|(_, w)| w)
                .sum();
            TailRow {
                t,
                exact,
                bound: tail_bound(t, d2, t_max, c, sigma_inf),
            }
        })
        .collect();
    let holds = rows.iter().all(|r| r.exact <= r.bound + TAIL_TOL);
    Ok(ConcentrationReport {
        d2,
        c,
        sigma_inf,
        t_max,
        mean,
        rows,
        holds,
    })
}

/// Σ_{i=1..k} (1−κ/2)^{2(i−1)} (M^{k−i} g)(x) with g = σ²/n.
pub fn finite_time_variance(a: &Analysis, x: usize, k: usize) -> Result<f64, BoundsError> {
    let kappa = a.require_positive()?;
    if k == 0 {
        return Err(BoundsError::InvalidArgument("k must be at least 1".into()));
    }
    if x >= a.chain.len() {
        return Err(BoundsError::InvalidArgument(format!(
            "point {x} out of range"
        )));
    }
    let q = (1.0 - kappa / 2.0).powi(2);
    // powers[j] = M^j g
    let mut powers = vec![a.g()];
    for _ in 1..k {
        let next = averaging(a.chain, powers.last().unwrap());
        powers.push(next);
    }
    Ok((1..=k)
        .map(|i| q.powi(i as i32 - 1) * powers[k - i][x])
        .sum())
}
