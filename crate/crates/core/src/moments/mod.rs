//! Exact expectations and variances of the trace quantities behind the
//! privacy metrics.
//!
//! Two routes compute the same numbers. [`exact_independent_moments`] and
//! [`exact_dependent_moments`] work with the impulse responses of the
//! dynamics and scale to long horizons. [`build_blocks`] materializes the
//! stacked-vector matrices and feeds them to [`quadratic_form_moments`]; it
//! is the small-instance oracle for the first route.

mod blocks;
mod structured;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TopologyMatrix;
use crate::scalar::Real;

pub use blocks::{
    build_blocks, dense_dependent_moments, dense_independent_moments, diagonal_variance_sum, BlockMatrices,
    MAX_BLOCK_DIM,
};
pub use structured::{
    exact_dependent_moments, exact_independent_moments, exact_state_deviation, exact_state_deviation_curve,
    impulse_responses,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependentMoments<T> {
    /// `tr(𝔻[ΘXᵀ])`, the summed variances of the diagonal of `ΘXᵀ`.
    pub trace_var_theta_x: T,
    /// `tr(𝔼[XXᵀ])`.
    pub trace_mean_xx: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependentMoments<T> {
    /// `𝔼[tr(ΞX_ξᵀ)]`.
    pub mean_trace_xi_x: T,
    /// `𝔻[tr(ΞX_ξᵀ)]`.
    pub var_trace_xi_x: T,
    /// `𝔼[tr(X_ξX_ξᵀ)]`.
    pub mean_trace_xixi: T,
}

/// All trace moments for one `(W, schedule, T)` instance, with `x₀ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct MomentReport<T> {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub independent: Option<IndependentMoments<T>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dependent: Option<DependentMoments<T>>,
}

/// Mean and variance of `z = θᵀQθ` for independent zero-mean `θ` with
/// variances `v` and fourth moments `m4`.
///
/// `var z = Σ_l Q_ll²(m4_l − v_l²) + Σ_{l<l'} (Q_ll' + Q_l'l)² v_l v_l'`.
/// When `Q_ll' Q_l'l = 0` for all `l ≠ l'` the cross term equals
/// `Σ_{l≠l'} Q_ll'² v_l v_l'`.
pub fn quadratic_form_moments<T: Real>(q: &DMatrix<T>, variances: &[T], fourth_moments: &[T]) -> Result<(T, T)> {
    let m = q.nrows();
    if q.ncols() != m || variances.len() != m || fourth_moments.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, got {} variances and {} fourth moments",
            q.nrows(),
            q.ncols(),
            variances.len(),
            fourth_moments.len()
        )));
    }
    for (l, (&v, &m4)) in variances.iter().zip(fourth_moments).enumerate() {
        let v_sq = v * v;
        if !(v > T::zero()) || m4 < v_sq * (T::one() - T::tolerance(1e-12)) {
            return Err(Error::InvalidMoment { index: l, fourth: m4.as_f64(), variance_sq: v_sq.as_f64() });
        }
    }
    let mut mean = T::zero();
    let mut var = T::zero();
    for l in 0..m {
        let d = q[(l, l)];
        mean += d * variances[l];
        var += d * d * (fourth_moments[l] - variances[l] * variances[l]);
    }
    for l2 in 0..m {
        let v2 = variances[l2];
        let mut col = T::zero();
        for l1 in 0..l2 {
            let s = q[(l1, l2)] + q[(l2, l1)];
            col += s * s * variances[l1];
        }
        var += col * v2;
    }
    Ok((mean, var))
}

/// `‖W^m‖_F²` for `m = 0..count`, by repeated multiplication.
pub fn power_frobenius<T: Real>(w: &TopologyMatrix<T>, count: usize) -> Vec<T> {
    let n = w.n();
    let mut out = Vec::with_capacity(count);
    let mut p = DMatrix::<T>::identity(n, n);
    for m in 0..count {
        out.push(p.norm_squared());
        if m + 1 < count {
            p = w.weights() * &p;
        }
    }
    out
}

/// `tr(Γ_t)` and `tr(Γ*_t)` for `t = 1..=T`, where
/// `Γ_t = Σ_{m<t} Wᵐ(Wᵐ)ᵀ` and `Γ*_t = Σ_{m<t} (Wᵐ)ᵀWᵐ`.
pub fn gamma_traces<T: Real>(w: &TopologyMatrix<T>, t_len: usize) -> (Vec<T>, Vec<T>) {
    let f = power_frobenius(w, t_len);
    let mut acc = T::zero();
    let traces: Vec<T> = f
        .iter()
        .map(|&v| {
            acc += v;
            acc
        })
        .collect();
    (traces.clone(), traces)
}
