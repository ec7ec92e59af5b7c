//! The λ-range gradient, its commutation with M, and the log-Sobolev
//! inequalities built on it.

use rayon::prelude::*;

use crate::chain::averaging;
use crate::lipschitz::lipschitz_constant;
use crate::metric::FiniteMetricSpace;

use super::{Analysis, BoundsError, CHECK_TOL};

/// V series is cut once its geometric tail bound drops below this.
const V_TAIL_TOL: f64 = 1e-12;
const V_MAX_TERMS: usize = 20_000_000;

/// (Df)(x) = sup over y ≠ y' of |f(y) − f(y')|/d(y, y') · e^{−λ(d(x,y) + d(x,y'))}.
pub fn range_gradient(space: &FiniteMetricSpace, f: &[f64], lambda: f64) -> Vec<f64> {
    let n = space.len();
    let mut slopes = Vec::new();
    for y in 0..n {
        for z in y + 1..n {
            let q = (f[y] - f[z]).abs() / space.dist(y, z);
            if q > 0.0 {
                slopes.push((y, z, q));
            }
        }
    }
    (0..n)
        .into_par_iter()
        .map(|x| {
            slopes
                .iter()
                .map(|&(y, z, q)| q * (-lambda * (space.dist(x, y) + space.dist(x, z))).exp())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Whether g(x) ≤ e^{rate·d(x,y)} g(y) for all x, y.
pub fn is_log_lipschitz(space: &FiniteMetricSpace, g: &[f64], rate: f64) -> bool {
    let n = space.len();
    (0..n).all(|x| {
        (0..n).all(|y| g[x] <= g[y] * (rate * space.dist(x, y)).exp() * (1.0 + 1e-12) + 1e-300)
    })
}

/// The largest λ allowed: 1/(24σ∞(1+U)).
pub fn admissible_lambda(a: &Analysis) -> Result<f64, BoundsError> {
    a.require_positive()?;
    let u = a
        .curvature
        .max_unstability()
        .ok_or(BoundsError::UndefinedUnstability)?;
    Ok(1.0 / (24.0 * a.sigma_inf * (1.0 + u)))
}

fn check_lambda(a: &Analysis, lambda: f64) -> Result<(), BoundsError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let max = admissible_lambda(a)?;
    if lambda > max * (1.0 + 1e-12) {
        return Err(BoundsError::LambdaTooLarge { lambda, max });
    }
    Ok(())
}

/// Points where D(Mf)(x) ≤ (1 − κ/2)·M(Df)(x) fails, as (x, lhs, rhs).
pub fn commutation_check(
    a: &Analysis,
    f: &[f64],
    lambda: f64,
) -> Result<Vec<(usize, f64, f64)>, BoundsError> {
    check_lambda(a, lambda)?;
    let space = a.chain.space();
    let lhs = range_gradient(space, &averaging(a.chain, f), lambda);
    let rhs: Vec<f64> = averaging(a.chain, &range_gradient(space, f, lambda))
        .into_iter()
        .map(|v| (1.0 - a.kappa / 2.0) * v)
        .collect();
    Ok((0..space.len())
        .filter(|&x| lhs[x] > rhs[x] * (1.0 + CHECK_TOL) + CHECK_TOL)
        .map(|x| (x, lhs[x], rhs[x]))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogSobolevReport {
    /// sup over x of 4σ(x)²/(κnₓ).
    pub constant: f64,
    pub var_lhs: f64,
    pub var_rhs: f64,
    pub ent_lhs: f64,
    pub ent_rhs: f64,
    /// V(x), for reversible chains.
    pub v_profile: Option<Vec<f64>>,
    pub v_var_rhs: Option<f64>,
    pub v_ent_rhs: Option<f64>,
    /// (4/κ)∫σ²/n dν + 2C·J(x)/κ with C the Lipschitz constant of σ²/(nκ).
    pub v_envelope: Option<Vec<f64>>,
    pub v_envelope_holds: Option<bool>,
    pub holds: bool,
}

fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + CHECK_TOL) + CHECK_TOL
}

pub fn log_sobolev_check(
    a: &Analysis,
    f: &[f64],
    lambda: f64,
) -> Result<LogSobolevReport, BoundsError> {
    let kappa = a.require_positive()?;
    a.require_unique()?;
    check_lambda(a, lambda)?;
    if let Some((point, &value)) = f.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
        return Err(BoundsError::NonPositiveF { point, value });
    }
    let space = a.chain.space();
    let nu = &a.invariant.nu;
    let g = a.g();
    let constant = g.iter().map(|v| 4.0 * v / kappa).fold(0.0, f64::max);
    let df = range_gradient(space, f, lambda);
    let df2: Vec<f64> = df.iter().map(|v| v * v).collect();
    let df2_over_f: Vec<f64> = df2.iter().zip(f).map(|(d, v)| d / v).collect();
    let var_lhs = nu.variance(f);
    let var_rhs = constant * nu.expectation(&df2);
    let ent_lhs = entropy(nu.weights(), f);
    let ent_rhs = constant * nu.expectation(&df2_over_f);
    let mut holds = le(var_lhs, var_rhs) && le(ent_lhs, ent_rhs);

    let (mut v_profile, mut v_var_rhs, mut v_ent_rhs, mut v_envelope, mut v_envelope_holds) =
        (None, None, None, None, None);
    if a.invariant.reversible {
        let v = v_series(a, &g, kappa)?;
        let vr: f64 = nu
            .weights()
            .iter()
            .zip(&v)
            .zip(&df2)
            .map(|((w, v), d)| w * v * d)
            .sum();
        let er: f64 = nu
            .weights()
            .iter()
            .zip(&v)
            .zip(&df2_over_f)
            .map(|((w, v), d)| w * v * d)
            .sum();
        holds &= le(var_lhs, vr) && le(ent_lhs, er);
        let c = lipschitz_constant(space, &g) / kappa;
        let mean_g = nu.expectation(&g);
        let env: Vec<f64> = a
            .stats
            .iter()
            .map(|s| 4.0 * mean_g / kappa + 2.0 * c * s.jump / kappa)
            .collect();
        v_envelope_holds = Some(v.iter().zip(&env).all(|(v, e)| le(*v, *e)));
        v_profile = Some(v);
        v_var_rhs = Some(vr);
        v_ent_rhs = Some(er);
        v_envelope = Some(env);
    }
    Ok(LogSobolevReport {
        constant,
        var_lhs,
        var_rhs,
        ent_lhs,
        ent_rhs,
        v_profile,
        v_var_rhs,
        v_ent_rhs,
        v_envelope,
        v_envelope_holds,
        holds,
    })
}

/// ∫f ln f dν − (∫f dν) ln(∫f dν).
pub fn entropy(nu: &[f64], f: &[f64]) -> f64 {
    let mean: f64 = nu.iter().zip(f).map(|(w, v)| w * v).sum();
    let raw: f64 = nu
        .iter()
        .zip(f)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w * v * v.ln())
        .sum();
    (raw - mean * mean.ln()).max(0.0)
}

/// V(x) = 2 Σ_{t≥0} (1−κ/2)^{2t} (M^{t+1} g)(x).
fn v_series(a: &Analysis, g: &[f64], kappa: f64) -> Result<Vec<f64>, BoundsError> {
    let q = (1.0 - kappa / 2.0).powi(2);
    let sup_g = g.iter().copied().fold(0.0, f64::max);
    let mut acc = vec![0.0; g.len()];
    let mut power = averaging(a.chain, g);
    let mut weight = 1.0;
    for _ in 0..V_MAX_TERMS {
        for (s, p) in acc.iter_mut().zip(&power) {
            *s += 2.0 * weight * p;
        }
        weight *= q;
        // M is a Markov operator, so every remaining term is at most weight·sup g.
        if 2.0 * weight * sup_g / (1.0 - q) < V_TAIL_TOL {
            return Ok(acc);
        }
        power = averaging(a.chain, &power);
    }
    Err(BoundsError::InvalidArgument(format!(
        "V series did not reach tail {V_TAIL_TOL} in {V_MAX_TERMS} terms"
    )))
}
