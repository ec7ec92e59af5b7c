//! Bounds driven by an attracting point o: exponential concentration under
//! non-negative curvature, and the average L² Bonnet–Myers estimate.

use crate::curvature::CurvatureError;

use super::{Analysis, BoundsError, CHECK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpConcentrationReport {
    pub o: usize,
    pub r: f64,
    pub s: f64,
    /// inf over the annulus r ≤ d(o,x) < 2r of d(x,o) − T₁(mₓ, δ_o).
    pub rho: f64,
    /// Where `rho` is attained.
    pub rho_point: usize,
    /// Decay distance s²/ρ.
    pub d: f64,
    /// r + 2s²/ρ + ρ(1 + J(o)²/4s²).
    pub m: f64,
    /// ∫e^{d(x,o)/D} dν.
    pub lhs: f64,
    /// (4 + J(o)²/s²)e^{m/D}.
    pub rhs: f64,
    /// Points with d(x,o) ≥ r where T₁(mₓ, δ_o) > d(x,o) − ρ, as (x, T₁, d(x,o) − ρ).
    pub lemma_violations: Vec<(usize, f64, f64)>,
    pub holds: bool,
}

/// T₁(mₓ, δ_o) = ∫d(y, o) dmₓ(y).
fn pull(a: &Analysis, x: usize, o: usize) -> f64 {
    let s = a.chain.space();
    a.chain.row(x).iter().map(|&(y, p)| p * s.dist(y, o)).sum()
}

fn check_radius(a: &Analysis, o: usize, r: f64) -> Result<(), BoundsError> {
    if o >= a.chain.len() {
        return Err(BoundsError::InvalidArgument(format!(
            "origin index {o} out of range"
        )));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "radius must be positive, got {r}"
        )));
    }
    if !a
        .chain
        .space()
        .is_epsilon_geodesic(r)
        .map_err(CurvatureError::from)?
        .holds
    {
        return Err(BoundsError::NotRGeodesic(r));
    }
    Ok(())
}

fn annulus<'a>(a: &'a Analysis, o: usize, r: f64) -> impl Iterator<Item = usize> + 'a {
    let s = a.chain.space();
    (0..s.len()).filter(move |&x| {
        let d = s.dist(o, x);
        d >= r && d < 2.0 * r
    })
}

/// Exponential concentration around `o` with decay distance s²/ρ; `s`
/// defaults to 2σ∞.
pub fn exponential_concentration(
    a: &Analysis,
    o: usize,
    r: f64,
    s: Option<f64>,
) -> Result<ExpConcentrationReport, BoundsError> {
    if let Some(p) = a.curvature.pairs.iter().find(|p| p.kappa < -CHECK_TOL) {
        return Err(BoundsError::NegativeCurvatureSomewhere {
            x: p.x,
            y: p.y,
            kappa: p.kappa,
        });
    }
    check_radius(a, o, r)?;
    let s = s.unwrap_or(2.0 * a.sigma_inf);
    if !(s.is_finite() && s > 0.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "s must be positive, got {s}"
        )));
    }
    let space = a.chain.space();
    let (rho, rho_point) = annulus(a, o, r)
        .map(|x| (space.dist(x, o) - pull(a, x, o), x))
        .min_by(|p, q| p.0.total_cmp(&q.0))
        .ok_or(BoundsError::EmptyAnnulus)?;
    if rho <= 0.0 {
        return Err(BoundsError::NonPositiveRho { rho, x: rho_point });
    }
    let j_o = a.stats[o].jump;
    let d = s * s / rho;
    let m = r + 2.0 * s * s / rho + rho * (1.0 + j_o * j_o / (4.0 * s * s));
    let lhs: f64 = a
        .nu()
        .iter()
        .enumerate()
        .map(|(x, w)| w * (space.dist(x, o) / d).exp())
        .sum();
    let rhs = (4.0 + j_o * j_o / (s * s)) * (m / d).exp();
    let lemma_violations: Vec<_> = (0..space.len())
        .filter(|&x| space.dist(x, o) >= r)
        .map(|x| (x, pull(a, x, o), space.dist(x, o) - rho))
        .filter(|&(_, t, b)| t > b + CHECK_TOL)
        .collect();
    Ok(ExpConcentrationReport {
        o,
        r,
        s,
        rho,
        rho_point,
        d,
        m,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + CHECK_TOL) && lemma_violations.is_empty(),
        lemma_violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageL2Report {
    /// ∫d(o,x) dν.
    pub lhs: f64,
    /// √((1/κ)∫σ(x)²/nₓ dν) + 5r.
    pub rhs: f64,
    pub holds: bool,
}

/// Average distance to `o` under ν, given that o attracts every point of the
/// annulus r ≤ d(o,x) < 2r.
pub fn average_l2_bonnet_myers(
    a: &Analysis,
    o: usize,
    r: f64,
) -> Result<AverageL2Report, BoundsError> {
    check_radius(a, o, r)?;
    let kappa = a.require_positive()?;
    let space = a.chain.space();
    for x in annulus(a, o, r) {
        let (lhs, rhs) = (pull(a, x, o), space.dist(o, x));
        if lhs > rhs + 1e-12 {
            return Err(BoundsError::HypothesisFails { x, lhs, rhs });
        }
    }
    let nu = a.nu();
    let lhs: f64 = nu
        .iter()
        .enumerate()
        .map(|(x, w)| w * space.dist(o, x))
        .sum();
    let g: f64 = nu.iter().zip(a.g()).map(|(w, g)| w * g).sum();
    let rhs = (g / kappa).sqrt() + 5.0 * r;
    Ok(AverageL2Report {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + CHECK_TOL) + CHECK_TOL,
    })
}
