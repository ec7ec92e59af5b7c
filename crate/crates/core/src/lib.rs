//! Coarse Ricci curvature of Markov chains on finite metric spaces, with the
//! spectral, concentration and diameter bounds it implies.

pub mod bounds;
pub mod chain;
pub mod curvature;
pub mod gallery;
pub mod lipschitz;
pub mod metric;
pub mod transport;

pub use chain::{
    averaging, build_chain, invariant_distribution, local_stats, n_step, Chain, ChainError,
    LocalStats,
};
pub use curvature::{
    contraction_check, kappa, kappa_decomposition, kappa_global, CurvatureReport, PairMode,
};
pub use gallery::{generate, superpose, tensorize, Preset};
pub use lipschitz::{lipschitz_constant, max_var_lipschitz, MaxVarMode, VarCertificate};
pub use metric::{FiniteMetricSpace, MetricError, MetricSource};
pub use transport::{
    w1, w1_sparse, CouplingPlan, Distribution, DualPotential, Transport, TransportError,
};
