use nalgebra::DMatrix;

use super::{power_frobenius, DependentMoments, IndependentMoments};
use crate::error::{Error, Result};
use crate::graph::TopologyMatrix;
use crate::noise::{LagCoefficients, NoiseSchedule};
use crate::scalar::Real;

fn require_horizon(t_len: usize, min: usize) -> Result<()> {
    if t_len < min {
        Err(Error::InvalidParameter(format!("horizon must be at least {min}, got {t_len}")))
    } else {
        Ok(())
    }
}

/// `G_0, …, G_{count−1}` with `G_0 = 0` and
/// `G_d = Σ_{ℓ=0}^{min(k, d−1)} p_ℓ W^{d−ℓ−1}`, so that
/// `x_{ξ,t} − x*_t = Σ_{s<t} G_{t−s} θ_s`.
pub fn impulse_responses<T: Real>(w: &TopologyMatrix<T>, p: &LagCoefficients<T>, count: usize) -> Vec<DMatrix<T>> {
    let n = w.n();
    let mut powers: Vec<DMatrix<T>> = Vec::with_capacity(count);
    if count > 1 {
        powers.push(DMatrix::identity(n, n));
    }
    for d in 1..count.saturating_sub(1) {
        let next = w.weights() * &powers[d - 1];
        powers.push(next);
    }
    let coeffs = p.coeffs();
    (0..count)
        .map(|d| {
            let mut g = DMatrix::zeros(n, n);
            if d >= 1 {
                for (l, &pl) in coeffs.iter().enumerate().take(p.k().min(d - 1) + 1) {
                    g += &powers[d - l - 1] * pl;
                }
            }
            g
        })
        .collect()
}

/// Independent-noise trace moments with `x₀ = 0`:
///
/// `tr(𝔻[ΘXᵀ]) = Σ_{t=1}^{T−1} σ_t² Σ_{s<t} σ_s² ‖W^{t−s−1}‖_F²` and
/// `tr(𝔼[XXᵀ]) = Σ_{t=1}^{T−1} σ_{t−1}² tr(Γ*_{T−t})`.
pub fn exact_independent_moments<T: Real>(
    w: &TopologyMatrix<T>,
    sched: &NoiseSchedule<T>,
    t_len: usize,
) -> Result<IndependentMoments<T>> {
    require_horizon(t_len, 2)?;
    let f = power_frobenius(w, t_len);
    let v = sched.variances(t_len);
    let mut gamma = vec![T::zero(); t_len + 1];
    for m in 0..t_len {
        gamma[m + 1] = gamma[m] + f[m];
    }
    let mut trace_mean_xx = T::zero();
    for t in 1..t_len {
        trace_mean_xx += v[t - 1] * gamma[t_len - t];
    }
    let mut trace_var_theta_x = T::zero();
    for t in 1..t_len {
        let mut inner = T::zero();
        for s in 0..t {
            inner += v[s] * f[t - s - 1];
        }
        trace_var_theta_x += v[t] * inner;
    }
    Ok(IndependentMoments { trace_var_theta_x, trace_mean_xx })
}

/// `F(δ, r) = Σ_{ℓ=max(0,1−δ)}^{r} p_ℓ G_{δ+ℓ}`: block `(u, u−δ)` of the
/// quadratic form `tr(ΞX_ξᵀ) = θᵀQθ` for a row with `r = min(k, T−1−u)`.
fn lag_block<T: Real>(g: &[DMatrix<T>], p: &[T], delta: isize, r: usize, n: usize) -> DMatrix<T> {
    let mut out = DMatrix::zeros(n, n);
    let start = if delta >= 1 { 0 } else { (1 - delta) as usize };
    for (l, &pl) in p.iter().enumerate().take(r + 1).skip(start) {
        out += &g[(delta + l as isize) as usize] * pl;
    }
    out
}

/// Contribution of a diagonal block: `(κ₄−1)Σ_i F_ii² + Σ_{i<j}(F_ij+F_ji)²`.
fn diagonal_block_weight<T: Real>(f: &DMatrix<T>, kappa: T) -> T {
    let n = f.nrows();
    let mut acc = T::zero();
    for i in 0..n {
        acc += (kappa - T::one()) * f[(i, i)] * f[(i, i)];
        for j in 0..i {
            let s = f[(i, j)] + f[(j, i)];
            acc += s * s;
        }
    }
    acc
}

/// Dependent-noise trace moments with `x₀ = 0`, from the block-Toeplitz
/// structure of `Q = HᵀW̃H` without materializing it.
pub fn exact_dependent_moments<T: Real>(
    w: &TopologyMatrix<T>,
    sched: &NoiseSchedule<T>,
    t_len: usize,
    p: &LagCoefficients<T>,
) -> Result<DependentMoments<T>> {
    require_horizon(t_len, 2)?;
    let n = w.n();
    let k = p.k();
    let coeffs = p.coeffs();
    let kappa = sched.kurtosis_factor();
    let g = impulse_responses(w, p, t_len);
    let v = sched.variances(t_len);
    let r_of = |u: usize| k.min(t_len - 1 - u);

    let diag_blocks: Vec<DMatrix<T>> = (0..=k.min(t_len - 1)).map(|r| lag_block(&g, coeffs, 0, r, n)).collect();
    let mut mean_trace_xi_x = T::zero();
    let mut var_trace_xi_x = T::zero();
    let diag_weights: Vec<T> = diag_blocks.iter().map(|f| diagonal_block_weight(f, kappa)).collect();
    for (u, &vu) in v.iter().enumerate().take(t_len) {
        let r = r_of(u);
        mean_trace_xi_x += diag_blocks[r].trace() * vu;
        var_trace_xi_x += diag_weights[r] * vu * vu;
    }

    // Off-diagonal pairs (u, s), s < u, with both rows carrying all k lags.
    let interior_end = t_len as isize - 1 - k as isize;
    if interior_end >= 1 {
        let interior_end = interior_end as usize;
        for delta in 1..=interior_end {
            let lower = lag_block(&g, coeffs, delta as isize, k, n);
            let upper = lag_block(&g, coeffs, -(delta as isize), k, n);
            let c = (lower + upper.transpose()).norm_squared();
            if c == T::zero() {
                continue;
            }
            let mut pair_sum = T::zero();
            for u in delta..=interior_end {
                pair_sum += v[u] * v[u - delta];
            }
            var_trace_xi_x += c * pair_sum;
        }
    }
    // Rows near the end of the horizon keep fewer lags.
    let boundary_start = (interior_end + 1).max(1) as usize;
    for u in boundary_start..t_len {
        for s in 0..u {
            let delta = (u - s) as isize;
            let lower = lag_block(&g, coeffs, delta, r_of(u), n);
            let upper = lag_block(&g, coeffs, -delta, r_of(s), n);
            var_trace_xi_x += (lower + upper.transpose()).norm_squared() * v[u] * v[s];
        }
    }

    let g_norms: Vec<T> = g.iter().map(DMatrix::norm_squared).collect();
    let mut cumulative = vec![T::zero(); t_len];
    for d in 1..t_len {
        cumulative[d] = cumulative[d - 1] + g_norms[d];
    }
    let mut mean_trace_xixi = T::zero();
    for s in 0..t_len - 1 {
        mean_trace_xixi += v[s] * cumulative[t_len - 1 - s];
    }
    Ok(DependentMoments { mean_trace_xi_x, var_trace_xi_x, mean_trace_xixi })
}

/// `𝔼‖x_{ξ,t} − x*_t‖² = Σ_{s<t} σ_s² ‖G_{t−s}‖_F²`.
pub fn exact_state_deviation<T: Real>(
    w: &TopologyMatrix<T>,
    sched: &NoiseSchedule<T>,
    t: usize,
    p: &LagCoefficients<T>,
) -> Result<T> {
    require_horizon(t, 1)?;
    Ok(*exact_state_deviation_curve(w, sched, t, p)?.last().expect("non-empty curve"))
}

/// [`exact_state_deviation`] for every `t = 0..=t_max` (entry 0 is zero).
pub fn exact_state_deviation_curve<T: Real>(
    w: &TopologyMatrix<T>,
    sched: &NoiseSchedule<T>,
    t_max: usize,
    p: &LagCoefficients<T>,
) -> Result<Vec<T>> {
    require_horizon(t_max, 1)?;
    let g_norms: Vec<T> = impulse_responses(w, p, t_max + 1).iter().map(DMatrix::norm_squared).collect();
    let v = sched.variances(t_max);
    let mut out = vec![T::zero(); t_max + 1];
    for (t, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = T::zero();
        for s in 0..t {
            acc += v[s] * g_norms[t - s];
        }
        *slot = acc;
    }
    Ok(out)
}
