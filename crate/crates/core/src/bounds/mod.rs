//! Quantitative consequences of positive curvature, each checked against the
//! exactly computed invariant distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{
    all_local_stats, invariant_distribution, Chain, ChainError, Invariant, LocalStats,
};
use crate::curvature::{default_mode, kappa_global, CurvatureError, CurvatureReport, PairMode};
use crate::lipschitz::{max_var_lipschitz, LipschitzError, MaxVarMode, VarCertificate};
use crate::transport::{Distribution, TransportError};

mod attracting;
mod concentration;
mod log_sobolev;
mod spectral;

pub use attracting::{
    average_l2_bonnet_myers, exponential_concentration, AverageL2Report, ExpConcentrationReport,
};
pub use concentration::{
    finite_time_variance, gaussian_concentration, ConcentrationReport, TailRow,
};
pub use log_sobolev::{
    admissible_lambda, commutation_check, entropy, is_log_lipschitz, log_sobolev_check,
    range_gradient, LogSobolevReport,
};
pub use spectral::{spectral_report, PoincareCheck, SpectralReport};

/// Slack on every checked inequality.
pub const CHECK_TOL: f64 = 1e-9;
/// Chains up to this size get curvature over all pairs.
pub const ALL_PAIRS_CAP: usize = 512;
/// Seed for the random test functions used inside the checks.
pub const CHECK_SEED: u64 = 0x00c0_ffee;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("curvature {0:e} is not positive")]
    NonPositiveCurvature(f64),
    #[error("function is {0}-Lipschitz, expected at most 1")]
    NotLipschitz(f64),
    #[error("invariant distribution is not unique")]
    NotUnique,
    #[error("lambda {lambda} exceeds the admissible {max}")]
    LambdaTooLarge { lambda: f64, max: f64 },
    #[error("function must be positive, got {value} at point {point}")]
    NonPositiveF { point: usize, value: f64 },
    #[error("negative curvature {kappa} between points {x} and {y}")]
    NegativeCurvatureSomewhere { x: usize, y: usize, kappa: f64 },
    #[error("space is not {0}-geodesic")]
    NotRGeodesic(f64),
    #[error("no point lies at distance in [r, 2r) from the origin")]
    EmptyAnnulus,
    #[error("attraction rho = {rho} is not positive (attained at point {x})")]
    NonPositiveRho { rho: f64, x: usize },
    #[error("hypothesis fails at point {x}: {lhs} > {rhs}")]
    HypothesisFails { x: usize, lhs: f64, rhs: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("chain with {0} states is too large for this computation")]
    TooLarge(usize),
    #[error("unstability is undefined: some pair has curvature ≤ 0")]
    UndefinedUnstability,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Lipschitz(#[from] LipschitzError),
}

/// Everything the bounds share: curvature, ν, and local statistics.
#[derive(Debug, Clone)]
pub struct Analysis<'a> {
    pub chain: &'a Chain,
    pub curvature: CurvatureReport,
    pub invariant: Invariant,
    pub stats: Vec<LocalStats>,
    pub kappa: f64,
    /// sup over x of σ∞(x).
    pub sigma_inf: f64,
}

impl<'a> Analysis<'a> {
    /// Curvature over all pairs for small chains, otherwise over nearby
    /// pairs of a geodesic space.
    pub fn new(chain: &'a Chain) -> Result<Self, BoundsError> {
        let mode = if chain.len() <= ALL_PAIRS_CAP {
            PairMode::AllPairs
        } else {
            default_mode(chain)
        };
        let curvature = kappa_global(chain, mode, 0.0)?;
        Self::with_curvature(chain, curvature)
    }

    pub fn with_curvature(
        chain: &'a Chain,
        curvature: CurvatureReport,
    ) -> Result<Self, BoundsError> {
        let invariant = invariant_distribution(chain)?;
        let stats = conservative_stats(chain)?;
        let sigma_inf = stats.iter().map(|s| s.sigma_inf).fold(0.0, f64::max);
        Ok(Analysis {
            chain,
            kappa: curvature.global_kappa,
            curvature,
            invariant,
            stats,
            sigma_inf,
        })
    }

    pub fn nu(&self) -> &[f64] {
        self.invariant.nu.weights()
    }

    pub(crate) fn require_positive(&self) -> Result<f64, BoundsError> {
        if self.kappa > 0.0 {
            Ok(self.kappa)
        } else {
            Err(BoundsError::NonPositiveCurvature(self.kappa))
        }
    }

    pub(crate) fn require_unique(&self) -> Result<(), BoundsError> {
        if self.invariant.unique {
            Ok(())
        } else {
            Err(BoundsError::NotUnique)
        }
    }

    /// g(x) = σ(x)²/nₓ, taken as 0 on Dirac rows.
    pub fn g(&self) -> Vec<f64> {
        self.stats.iter().map(LocalStats::sigma2_over_n).collect()
    }

    /// D²ₓ = σ(x)²/(nₓκ).
    pub fn d2_profile(&self) -> Result<Vec<f64>, BoundsError> {
        let k = self.require_positive()?;
        Ok(self.g().iter().map(|g| g / k).collect())
    }

    /// κ/dt for discretized continuous-time chains, κ otherwise.
    pub fn rate_kappa(&self) -> f64 {
        self.kappa / self.chain.dt().unwrap_or(1.0)
    }
}

/// Exact local statistics where the support allows, otherwise the certified
/// upper bound maxVar ≤ σ² (that is, nₓ ≥ 1).
pub fn conservative_stats(chain: &Chain) -> Result<Vec<LocalStats>, BoundsError> {
    match all_local_stats(chain, MaxVarMode::Exact) {
        Ok(s) => Ok(s),
        Err(ChainError::Lipschitz(LipschitzError::SupportTooLarge { .. })) => {
            let mut out = Vec::with_capacity(chain.len());
            for x in 0..chain.len() {
                out.push(
                    match crate::chain::local_stats(chain, x, MaxVarMode::Exact) {
                        Ok(s) => s,
                        Err(ChainError::Lipschitz(LipschitzError::SupportTooLarge { .. })) => {
                            let mut s = crate::chain::local_stats(chain, x, MaxVarMode::Heuristic)?;
                            s.max_var = s.sigma2;
                            s.n_x = Some(1.0);
                            s.certificate = VarCertificate::UpperBound;
                            s
                        }
                        Err(e) => return Err(e.into()),
                    },
                );
            }
            Ok(out)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonnetMyersReport {
    pub kappa: f64,
    pub diam_bound: f64,
    pub diam_actual: f64,
    /// (x, y, d(x,y), (J(x)+J(y))/κ(x,y)) over the curvature report's pairs.
    pub per_pair: Vec<(usize, usize, f64, f64)>,
    /// (x, ∫d(x,y)dν(y), J(x)/κ).
    pub per_point: Vec<(usize, f64, f64)>,
    pub mean_distance: f64,
    pub mean_distance_bound: f64,
    pub holds: bool,
}

/// Diameter and mean-distance bounds from J and κ.
pub fn bonnet_myers(a: &Analysis) -> Result<BonnetMyersReport, BoundsError> {
    let kappa = a.require_positive()?;
    let s = a.chain.space();
    let nu = a.nu();
    let jump: Vec<f64> = a.stats.iter().map(|st| st.jump).collect();
    let sup_j = jump.iter().copied().fold(0.0, f64::max);
    let inf_j = jump.iter().copied().fold(f64::INFINITY, f64::min);
    let per_pair: Vec<_> = a
        .curvature
        .pairs
        .iter()
        .map(|p| (p.x, p.y, p.dist, (jump[p.x] + jump[p.y]) / p.kappa))
        .collect();
    let avg = |x: usize| (0..s.len()).map(|y| nu[y] * s.dist(x, y)).sum::<f64>();
    let per_point: Vec<_> = (0..s.len()).map(|x| (x, avg(x), jump[x] / kappa)).collect();
    let mean_distance: f64 = (0..s.len()).map(|x| nu[x] * avg(x)).sum();
    let diam_bound = 2.0 * sup_j / kappa;
    let diam_actual = s.diameter();
    let mean_distance_bound = 2.0 * inf_j / kappa;
    let holds = diam_actual <= diam_bound * (1.0 + CHECK_TOL) + CHECK_TOL
        && per_pair
            .iter()
            .all(|&(_, _, d, b)| b.is_nan() || d <= b * (1.0 + CHECK_TOL) + CHECK_TOL)
        && per_point.iter().all(|&(_, l, r)| l <= r + CHECK_TOL)
        && mean_distance <= mean_distance_bound + CHECK_TOL;
    Ok(BonnetMyersReport {
        kappa,
        diam_bound,
        diam_actual,
        per_pair,
        per_point,
        mean_distance,
        mean_distance_bound,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    /// ∫σ(x)² dν.
    pub sigma2: f64,
    /// inf over non-Dirac x of nₓ.
    pub n: f64,
    pub kappa: f64,
    /// σ²/(nκ(2−κ)).
    pub bound: f64,
    /// ∫σ(x)²/nₓ dν / (κ(2−κ)), never larger than `bound`.
    pub pointwise_bound: f64,
    pub extremal_var: f64,
    pub extremal_certificate: VarCertificate,
    /// A maximiser of the variance under ν.
    pub witness: Vec<f64>,
    pub statdim: f64,
    pub holds: bool,
}

/// Largest variance of a 1-Lipschitz function under ν against σ²/(nκ(2−κ)).
pub fn variance_bound(a: &Analysis) -> Result<VarianceReport, BoundsError> {
    let kappa = a.require_positive()?;
    a.require_unique()?;
    let nu = a.nu();
    let sigma2: f64 = a.stats.iter().map(|s| nu[s.point] * s.sigma2).sum();
    let n = a
        .stats
        .iter()
        .filter_map(|s| s.n_x)
        .fold(f64::INFINITY, f64::min);
    let n = if n.is_finite() { n } else { 1.0 };
    let denom = kappa * (2.0 - kappa);
    let bound = sigma2 / (n * denom);
    let pointwise_bound = a
        .stats
        .iter()
        .map(|s| nu[s.point] * s.sigma2_over_n())
        .sum::<f64>()
        / denom;
    let space = a.chain.space();
    let mv = match max_var_lipschitz(space, &a.invariant.nu, MaxVarMode::Exact) {
        Err(LipschitzError::SupportTooLarge { .. }) => {
            max_var_lipschitz(space, &a.invariant.nu, MaxVarMode::Heuristic)?
        }
        r => r?,
    };
    let spread: f64 = {
        let support = a.invariant.nu.support();
        let mut acc = 0.0;
        for &(x, p) in &support {
            for &(y, q) in &support {
                let d = space.dist(x, y);
                acc += p * q * d * d;
            }
        }
        0.5 * acc
    };
    let statdim = if mv.value > 0.0 {
        spread / mv.value
    } else {
        f64::NAN
    };
    Ok(VarianceReport {
        sigma2,
        n,
        kappa,
        bound,
        pointwise_bound,
        extremal_var: mv.value,
        extremal_certificate: mv.certificate,
        witness: mv.f,
        statdim,
        holds: mv.value <= bound + CHECK_TOL,
    })
}

/// Random test functions with a fixed seed, scaled by `scale`.
pub fn random_functions(n: usize, count: usize, salt: u64, scale: f64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution as _, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ salt);
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                })
                .collect()
        })
        .collect()
}

/// Random probability vectors, each spread over at most `atoms` points.
pub fn random_distributions(n: usize, count: usize, atoms: usize, salt: u64) -> Vec<Distribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED ^ salt.rotate_left(32));
    (0..count)
        .map(|_| {
            let mut w = vec![0.0; n];
            for _ in 0..atoms.max(1) {
                w[rng.random_range(0..n)] += rng.random::<f64>() + 1e-3;
            }
            Distribution::normalized(w).expect("positive mass")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::gallery::{generate, generate_with, two_point_mixing, Preset};
    use crate::metric::{numbered_points, FiniteMetricSpace};

    fn swap_chain() -> Chain {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        build_chain(
            s,
            vec![vec![(0, 0.3), (1, 0.7)], vec![(0, 0.7), (1, 0.3)]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn two_point_spectrum() {
        let c = swap_chain();
        let a = Analysis::new(&c).unwrap();
        assert!((a.kappa - 0.6).abs() < 1e-12);
        let r = spectral_report(&a).unwrap();
        assert_eq!(r.eigenvalue_moduli.len(), 1);
        assert!((r.spectral_radius - 0.4).abs() < 1e-12);
        assert_eq!(r.radius_holds, Some(true));
        assert!(r.poincare.unwrap().holds);
    }

    #[test]
    fn mixing_chain_has_zero_radius() {
        let c = two_point_mixing(0.3).unwrap();
        let a = Analysis::new(&c).unwrap();
        assert!(spectral_report(&a).unwrap().spectral_radius < 1e-12);
        assert!((admissible_lambda(&a).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn cube_diameter_bound_is_sharp() {
        let c = generate(&Preset::Cube { n: 3 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let r = bonnet_myers(&a).unwrap();
        assert!((r.kappa - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.diam_bound - 3.0).abs() < 1e-9);
        assert_eq!(r.diam_actual, 3.0);
        assert!(r.holds);
    }

    #[test]
    fn range_gradient_of_two_point_step() {
        let s = FiniteMetricSpace::line(numbered_points(2), &[0, 1]).unwrap();
        let df = range_gradient(&s, &[0.0, 1.0], 0.1);
        for v in df {
            assert!((v - (-0.1f64).exp()).abs() < 1e-15);
        }
        assert!(range_gradient(&s, &[2.0, 2.0], 0.1)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn log_sobolev_mixing_constant() {
        let p = 0.3;
        let c = two_point_mixing(p).unwrap();
        let a = Analysis::new(&c).unwrap();
        let r = log_sobolev_check(&a, &[1.0, 1.0], 0.05).unwrap();
        assert!((r.constant - 4.0 * p * (1.0 - p)).abs() < 1e-12);
        assert!(r.var_lhs.abs() < 1e-15 && r.ent_lhs.abs() < 1e-15 && r.holds);
        let r = log_sobolev_check(&a, &[1.0, 3.0], 0.05).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(matches!(
            log_sobolev_check(&a, &[0.0, 1.0], 0.05),
            Err(BoundsError::NonPositiveF { point: 0, .. })
        ));
        assert!(matches!(
            log_sobolev_check(&a, &[1.0, 1.0], 1.0),
            Err(BoundsError::LambdaTooLarge { .. })
        ));
    }

    #[test]
    fn cube_commutes_with_range_gradient() {
        let c = generate(&Preset::Cube { n: 3 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let lambda = admissible_lambda(&a).unwrap();
        for f in random_functions(c.len(), 5, 1, 1.0) {
            assert!(commutation_check(&a, &f, lambda).unwrap().is_empty());
        }
    }

    #[test]
    fn reflected_walk_pull() {
        let c = generate(&Preset::GeometricReflect { p: 0.7, k: 200 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let r = exponential_concentration(&a, 0, 1.0, None).unwrap();
        assert!((r.s - 2.0).abs() < 1e-12);
        assert!((r.rho - 0.4).abs() < 1e-12);
        assert!((r.d - 10.0).abs() < 1e-9);
        assert!(r.holds);

        // No invariant law on the full half-line, so the truncation check is waived.
        let c = generate_with(&Preset::GeometricReflect { p: 0.4, k: 200 }, Some(1.0))
            .unwrap()
            .chain;
        let a = Analysis::new(&c).unwrap();
        assert!(matches!(
            exponential_concentration(&a, 0, 1.0, None),
            Err(BoundsError::NonPositiveRho { .. })
        ));
    }

    #[test]
    fn reset_walk_pull_depends_on_radius() {
        let c = generate(&Preset::GeometricReset { alpha: 0.5, k: 60 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        assert!(matches!(
            exponential_concentration(&a, 0, 1.0, None),
            Err(BoundsError::NonPositiveRho { .. })
        ));
        let r = exponential_concentration(&a, 0, 2.0, None).unwrap();
        assert!((r.rho - 0.5).abs() < 1e-12 && r.holds);
    }

    #[test]
    fn ou_attracts_but_cube_does_not() {
        let c = generate(&Preset::DiscreteOu { n: 10 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let o = c.space().index_of("0").unwrap();
        let r = average_l2_bonnet_myers(&a, o, 1.0).unwrap();
        assert!(r.holds && r.lhs < 20.0);

        let c = generate(&Preset::Cube { n: 3 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        assert!(matches!(
            average_l2_bonnet_myers(&a, 0, 1.0),
            Err(BoundsError::HypothesisFails { .. })
        ));
    }

    #[test]
    fn finite_time_variance_first_step_is_local() {
        let c = generate(&Preset::Cube { n: 2 }).unwrap();
        let a = Analysis::new(&c).unwrap();
        let g = a.g();
        assert!((finite_time_variance(&a, 0, 1).unwrap() - g[0]).abs() < 1e-15);
        assert!(finite_time_variance(&a, 0, 0).is_err());
    }
}
