use nalgebra::DMatrix;

use super::{quadratic_form_moments, DependentMoments, IndependentMoments};
use crate::error::{Error, Result};
use crate::graph::TopologyMatrix;
use crate::noise::{variance_at, LagCoefficients, NoiseSchedule};
use crate::scalar::Real;

/// Largest stacked dimension `nT` that [`build_blocks`] materializes.
pub const MAX_BLOCK_DIM: usize = 5000;

/// Dense stacked-vector operators, indexed `t·n + i`.
///
/// `W̃` maps the stacked noise `θ_{0:T−1}` to the stacked states
/// `x_{0:T−1}` (with `x₀ = 0`); `H` maps `θ` to the lag-combined `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrices<T: Real> {
    pub n: usize,
    pub t_len: usize,
    /// Block `(t₁, t₂)` is `W^{t₁−t₂−1}` for `t₁ > t₂`.
    pub w_tilde: DMatrix<T>,
    /// `W̃ᵀW̃`.
    pub q_w: DMatrix<T>,
    /// Block `(t₁, t₂)` is `p_{t₁−t₂} I` for `0 ≤ t₁−t₂ ≤ k`.
    pub h: DMatrix<T>,
    /// `HᵀW̃H`.
    pub q: DMatrix<T>,
    /// `HᵀW̃ᵀW̃H`.
    pub q_tilde: DMatrix<T>,
}

pub fn build_blocks<T: Real>(w: &TopologyMatrix<T>, t_len: usize, p: &LagCoefficients<T>) -> Result<BlockMatrices<T>> {
    let n = w.n();
    let m = n * t_len;
    if m > MAX_BLOCK_DIM {
        return Err(Error::TooLarge { size: m, limit: MAX_BLOCK_DIM });
    }
    if t_len == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let mut powers = Vec::with_capacity(t_len);
    powers.push(DMatrix::<T>::identity(n, n));
    for d in 1..t_len {
        let next = w.weights() * &powers[d - 1];
        powers.push(next);
    }
    let mut w_tilde = DMatrix::zeros(m, m);
    for t1 in 1..t_len {
        for t2 in 0..t1 {
            w_tilde.view_mut((t1 * n, t2 * n), (n, n)).copy_from(&powers[t1 - t2 - 1]);
        }
    }
    let mut h = DMatrix::zeros(m, m);
    for (l, &pl) in p.coeffs().iter().enumerate() {
        for t2 in 0..t_len.saturating_sub(l) {
            let t1 = t2 + l;
            for i in 0..n {
                h[(t1 * n + i, t2 * n + i)] = pl;
            }
        }
    }
    let q_w = w_tilde.transpose() * &w_tilde;
    let wh = &w_tilde * &h;
    let q = h.transpose() * &wh;
    let q_tilde = wh.transpose() * &wh;
    Ok(BlockMatrices { n, t_len, w_tilde, q_w, h, q, q_tilde })
}

fn stacked_moments<T: Real>(sched: &NoiseSchedule<T>, n: usize, t_len: usize) -> (Vec<T>, Vec<T>) {
    let kappa = sched.kurtosis_factor();
    let mut v = Vec::with_capacity(n * t_len);
    let mut m4 = Vec::with_capacity(n * t_len);
    for t in 0..t_len {
        let s = variance_at(sched, t);
        for _ in 0..n {
            v.push(s);
            m4.push(kappa * s * s);
        }
    }
    (v, m4)
}

/// `Σ_i Var(θᵀ Lᵀ P_i R θ)`, with `P_i` selecting node `i` in every block.
fn node_variance_sum<T: Real>(
    left: &DMatrix<T>,
    right: &DMatrix<T>,
    n: usize,
    v: &[T],
    m4: &[T],
) -> Result<T> {
    let m = right.nrows();
    let mut total = T::zero();
    for i in 0..n {
        let mut selected = DMatrix::zeros(m, m);
        for t in 0..m / n {
            selected.set_row(t * n + i, &right.row(t * n + i));
        }
        let qi = left.transpose() * selected;
        total += quadratic_form_moments(&qi, v, m4)?.1;
    }
    Ok(total)
}

/// Independent-noise moments through `W̃` and `Q_w`.
pub fn dense_independent_moments<T: Real>(blocks: &BlockMatrices<T>, sched: &NoiseSchedule<T>) -> Result<IndependentMoments<T>> {
    let (v, m4) = stacked_moments(sched, blocks.n, blocks.t_len);
    let identity = DMatrix::identity(v.len(), v.len());
    let trace_var_theta_x = node_variance_sum(&identity, &blocks.w_tilde, blocks.n, &v, &m4)?;
    let trace_mean_xx = quadratic_form_moments(&blocks.q_w, &v, &m4)?.0;
    Ok(IndependentMoments { trace_var_theta_x, trace_mean_xx })
}

/// Dependent-noise moments through `Q` and `Q̃`.
pub fn dense_dependent_moments<T: Real>(blocks: &BlockMatrices<T>, sched: &NoiseSchedule<T>) -> Result<DependentMoments<T>> {
    let (v, m4) = stacked_moments(sched, blocks.n, blocks.t_len);
    let (mean_trace_xi_x, var_trace_xi_x) = quadratic_form_moments(&blocks.q, &v, &m4)?;
    let mean_trace_xixi = quadratic_form_moments(&blocks.q_tilde, &v, &m4)?.0;
    Ok(DependentMoments { mean_trace_xi_x, var_trace_xi_x, mean_trace_xixi })
}

/// `Σ_i Var((ΞX_ξᵀ)_ii)`: the summed variances of the diagonal entries.
///
/// Equals `𝔻[tr(ΞX_ξᵀ)]` for independent and one-lag noise, where the
/// diagonal entries are uncorrelated; longer lags break that.
pub fn diagonal_variance_sum<T: Real>(blocks: &BlockMatrices<T>, sched: &NoiseSchedule<T>) -> Result<T> {
    let (v, m4) = stacked_moments(sched, blocks.n, blocks.t_len);
    let wh = &blocks.w_tilde * &blocks.h;
    node_variance_sum(&blocks.h, &wh, blocks.n, &v, &m4)
}
