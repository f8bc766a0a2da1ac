//! Numerical evaluation of coverage probabilities, n-point functions,
//! variance constants, expansions and bounds.

pub mod general;
pub mod homogeneous;
pub mod limits;
pub mod moments;

pub use general::{
    a_gap, j_general, mean_anchored_count, mean_clone_count, r_one_point, r_two_point, TwoPoint,
};
pub use homogeneous::{
    j_hom, rbar, rho_hom, variance_constants, variance_exact, HomogeneousEvaluator,
    HomogeneousParams, RbarValues, VarianceConstants,
};
pub use limits::{
    inhomogeneous_bounds, isolated_island_slope, limit_asymptotics, mixing_bound, nu_vanishing,
    phi, tau_bound, InhomogeneousBounds, InhomogeneousRanges, LimitAsymptotics, MixingBound,
};
pub use moments::{moment_qmc, third_moment, QmcConfig, QmcEstimate};
