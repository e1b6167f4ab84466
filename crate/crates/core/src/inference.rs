//! Ordinary-least-squares recovery of `W` from observed states.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryBundle;
use crate::error::{Error, Result};
use crate::graph::TopologyMatrix;
use crate::scalar::Real;

/// Gram matrices with a larger condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct InferenceResult<T: Real> {
    #[serde(with = "crate::serde_matrix")]
    pub w_hat: DMatrix<T>,
    pub error_spectral: T,
    pub error_frobenius: T,
    pub gram_condition: T,
    pub t_used: usize,
}

/// `Ŵ = X⁺Xᵀ(XXᵀ)⁻¹` for the trajectory, scored against its true `W`.
pub fn ols_estimate<T: Real>(traj: &TrajectoryBundle<T>) -> Result<InferenceResult<T>> {
    ols_from_states(traj.x(), traj.x_plus(), traj.w())
}

/// OLS on explicit `X` and `X⁺` (both `n × T`).
///
/// Solves `(XXᵀ) Ŵᵀ = (X⁺Xᵀ)ᵀ` by Cholesky after checking the Gram
/// condition number from its symmetric eigenvalues.
pub fn ols_from_states<T: Real>(
    x: DMatrixView<'_, T>,
    x_plus: DMatrixView<'_, T>,
    w: &TopologyMatrix<T>,
) -> Result<InferenceResult<T>> {
    let n = w.n();
    if x.nrows() != n || x_plus.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "states are {}x{} and {}x{}, W is {n}x{n}",
            x.nrows(),
            x.ncols(),
            x_plus.nrows(),
            x_plus.ncols()
        )));
    }
    let w_hat = ols_solve(x, x_plus)?;
    let gram_condition = gram_condition(&(x * x.transpose()));
    let (error_spectral, error_frobenius) = inference_error(&w_hat, w)?;
    Ok(InferenceResult { w_hat, error_spectral, error_frobenius, gram_condition, t_used: x.ncols() })
}

/// `κ(G) = λ_max / λ_min` for a symmetric positive semidefinite `G`;
/// infinite when `λ_min ≤ 0`.
pub fn gram_condition<T: Real>(gram: &DMatrix<T>) -> T {
    let eig = gram.clone().symmetric_eigenvalues();
    let hi = eig.max();
    let lo = eig.min();
    if lo > T::zero() && hi.is_finite() {
        hi / lo
    } else {
        T::lit(f64::INFINITY)
    }
}

fn ols_solve<T: Real>(x: DMatrixView<'_, T>, x_plus: DMatrixView<'_, T>) -> Result<DMatrix<T>> {
    let gram = x * x.transpose();
    let condition = gram_condition(&gram);
    if !(condition <= T::lit(MAX_GRAM_CONDITION)) {
        return Err(Error::SingularGram { condition: condition.as_f64() });
    }
    let cross_t = x * x_plus.transpose();
    let chol = gram
        .cholesky()
        .ok_or(Error::SingularGram { condition: condition.as_f64() })?;
    Ok(chol.solve(&cross_t).transpose())
}

/// `(‖Ŵ − W‖₂, ‖Ŵ − W‖_F)`.
pub fn inference_error<T: Real>(w_hat: &DMatrix<T>, w: &TopologyMatrix<T>) -> Result<(T, T)> {
    if w_hat.shape() != w.weights().shape() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {}x{}, W is {}x{}",
            w_hat.nrows(),
            w_hat.ncols(),
            w.n(),
            w.n()
        )));
    }
    let diff = w_hat - w.weights();
    let spectral = diff.clone().try_svd(false, false, T::default_epsilon(), 0)
        .ok_or(Error::EigenFailure)?
        .singular_values
        .max();
    Ok((spectral, diff.norm()))
}
