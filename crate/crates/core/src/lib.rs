//! Noise-injected linear network dynamics, the OLS topology-inference attack
//! against them, and exact-moment privacy metrics for the injected noise.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below fix the common double-precision case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod inference;
pub mod metrics;
pub mod moments;
pub mod noise;
pub mod scalar;
mod serde_matrix;

pub use dynamics::{deviation_series, simulate, TrajectoryBundle};
pub use error::{Error, Result};
pub use graph::{has_spanning_tree, laplacian_weights, random_digraph, spectral_summary, Adjacency, SpectralSummary, TopologyMatrix};
pub use inference::{inference_error, ols_estimate, InferenceResult};
pub use metrics::{
    fit_decay_exponent, fit_exponential_rate, general_rate, optimal_alpha, predicted_rate, r_theta, r_xi, RateFit,
    RatePrediction, RatioInterval, RatioValue, Regime,
};
pub use moments::{
    exact_dependent_moments, exact_independent_moments, exact_state_deviation, DependentMoments, IndependentMoments,
    MomentReport,
};
pub use noise::{
    derive_dependent, sample_independent, validate_lag_coeffs, variance_at, Distribution, LagCoefficients,
    NoiseKind, NoiseMatrix, NoiseSchedule, Profile,
};
pub use scalar::Real;

pub type TopologyMatrixF64 = TopologyMatrix<f64>;
pub type TopologyMatrixF32 = TopologyMatrix<f32>;
pub type NoiseScheduleF64 = NoiseSchedule<f64>;
pub type NoiseScheduleF32 = NoiseSchedule<f32>;
pub type NoiseMatrixF64 = NoiseMatrix<f64>;
pub type NoiseMatrixF32 = NoiseMatrix<f32>;
pub type LagCoefficientsF64 = LagCoefficients<f64>;
pub type LagCoefficientsF32 = LagCoefficients<f32>;
pub type TrajectoryBundleF64 = TrajectoryBundle<f64>;
pub type TrajectoryBundleF32 = TrajectoryBundle<f32>;
pub type InferenceResultF64 = InferenceResult<f64>;
pub type InferenceResultF32 = InferenceResult<f32>;
pub type MomentReportF64 = MomentReport<f64>;
pub type MomentReportF32 = MomentReport<f32>;
pub type RatioIntervalF64 = RatioInterval<f64>;
pub type RatioIntervalF32 = RatioInterval<f32>;
