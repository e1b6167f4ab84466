//! Preservation metrics, their asymptotic rate predictions, and empirical
//! rate fits.

mod fit;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TopologyMatrix;
use crate::moments::{exact_dependent_moments, exact_independent_moments, DependentMoments, IndependentMoments};
use crate::noise::{LagCoefficients, NoiseSchedule};
use crate::scalar::Real;

pub use fit::{curve_to_csv, fit_decay_exponent, fit_exponential_rate, RateFit, DEFAULT_BURN_IN};
pub use quadrature::adaptive_simpson;

/// Default tail parameter for the dependent-noise interval.
pub const DEFAULT_C_SIGMA: f64 = 3.0;

/// Relative tolerance of [`general_rate`]'s quadrature.
pub const QUADRATURE_RTOL: f64 = 1e-8;

/// Variance-expectation ratio `√tr(𝔻[ΘXᵀ]) / tr(𝔼[XXᵀ])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioValue<T> {
    pub value: T,
}

/// Expectation-expectation ratio interval `center ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioInterval<T> {
    pub center: T,
    pub half_width: T,
    pub c_sigma: T,
}

impl<T: Real> RatioInterval<T> {
    pub fn lower(&self) -> T {
        self.center - self.half_width
    }

    pub fn upper(&self) -> T {
        self.center + self.half_width
    }
}

pub fn ratio_from_moments<T: Real>(m: &IndependentMoments<T>) -> RatioValue<T> {
    RatioValue { value: m.trace_var_theta_x.sqrt() / m.trace_mean_xx }
}

pub fn interval_from_moments<T: Real>(m: &DependentMoments<T>, c_sigma: T) -> RatioInterval<T> {
    RatioInterval {
        center: m.mean_trace_xi_x / m.mean_trace_xixi,
        half_width: c_sigma * m.var_trace_xi_x.sqrt() / m.mean_trace_xixi,
        c_sigma,
    }
}

/// `R_θ(T)` from the exact independent-noise moments (`x₀ = 0`).
pub fn r_theta<T: Real>(w: &TopologyMatrix<T>, sched: &NoiseSchedule<T>, t_len: usize) -> Result<RatioValue<T>> {
    Ok(ratio_from_moments(&exact_independent_moments(w, sched, t_len)?))
}

/// `R_ξ(T)` interval from the exact dependent-noise moments (`x₀ = 0`).
pub fn r_xi<T: Real>(
    w: &TopologyMatrix<T>,
    sched: &NoiseSchedule<T>,
    t_len: usize,
    p: &LagCoefficients<T>,
    c_sigma: T,
) -> Result<RatioInterval<T>> {
    if !(c_sigma >= T::one()) {
        return Err(Error::InvalidParameter(format!("c_sigma must be at least 1, got {c_sigma}")));
    }
    Ok(interval_from_moments(&exact_dependent_moments(w, sched, t_len, p)?, c_sigma))
}

/// `h = Σ_{t<T} σ₀²/(t+1)^α` and `F = ∫₁ᵀ σ₀²/y^α dy`.
pub fn harmonic_power_sum(alpha: f64, sigma0_sq: f64, t_len: usize) -> Result<(f64, f64)> {
    if t_len < 2 || !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("need T >= 2 and alpha >= 0, got T={t_len}, alpha={alpha}")));
    }
    let h = sigma0_sq * (1..=t_len).map(|t| (t as f64).powf(-alpha)).sum::<f64>();
    let t = t_len as f64;
    let f = if alpha == 1.0 {
        sigma0_sq * t.ln()
    } else {
        sigma0_sq * (t.powf(1.0 - alpha) - 1.0) / (1.0 - alpha)
    };
    Ok((h, f))
}

/// `α* = (1 + ln 2) / ln 2`, the maximizer of [`c_alpha`].
pub fn optimal_alpha() -> f64 {
    (1.0 + std::f64::consts::LN_2) / std::f64::consts::LN_2
}

/// `C_α = (α − 1) / 2^α`.
pub fn c_alpha(alpha: f64) -> f64 {
    (alpha - 1.0) / 2f64.powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "regime")]
pub enum Regime {
    /// i.i.d. noise, `ρ(W) < 1`.
    IidStable,
    /// i.i.d. noise, `ρ(W) = 1`.
    IidMarginal,
    /// i.i.d. noise, `ρ(W) > 1`.
    IidExplosive { rho: f64 },
    /// Independent noise with variance decaying like `(t+1)^{-α}`, `ρ(W) = 1`.
    IndepDecay { alpha: f64 },
    /// One-lag or k-lag dependent noise with decaying variance.
    DepDecay { alpha: f64 },
}

/// Asymptotic behaviour of a metric or error curve as `T` grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RatePrediction {
    /// Power-law exponent of the dominant term.
    pub exponent: Option<f64>,
    /// Weaker power-law term reported alongside the dominant one.
    pub secondary_exponent: Option<f64>,
    /// Value behaves like `base^{−T}`.
    pub exponential_base: Option<f64>,
    /// A logarithmic correction multiplies the power law.
    pub log_factor: bool,
    /// Constant `α`-dependent weight of the rate.
    pub constant: Option<f64>,
    /// The center does not vanish: the curve tends to a positive constant.
    pub floor: bool,
    /// Power-law exponent of the interval half-width around the floor.
    pub width_exponent: Option<f64>,
}

pub fn predicted_rate(regime: Regime) -> RatePrediction {
    let base = RatePrediction::default();
    match regime {
        Regime::IidStable => RatePrediction { exponent: Some(-0.5), ..base },
        Regime::IidMarginal => RatePrediction { exponent: Some(-1.0), ..base },
        Regime::IidExplosive { rho } => RatePrediction { exponential_base: Some(rho), ..base },
        Regime::IndepDecay { alpha } if alpha < 1.0 => RatePrediction {
            exponent: Some(-1.0),
            secondary_exponent: (alpha > 0.0).then(|| -(3.0 - alpha) / 2.0),
            ..base
        },
        Regime::IndepDecay { alpha: 1.0 } => {
            RatePrediction { exponent: Some(-1.0), log_factor: true, ..base }
        }
        Regime::IndepDecay { alpha } => {
            RatePrediction { exponent: Some(-1.0), constant: Some(c_alpha(alpha).sqrt()), ..base }
        }
        Regime::DepDecay { alpha } if alpha < 1.0 => {
            RatePrediction { floor: true, width_exponent: Some(-(1.0 - alpha) / 2.0), ..base }
        }
        Regime::DepDecay { alpha: 1.0 } => {
            RatePrediction { floor: true, width_exponent: Some(0.0), log_factor: true, ..base }
        }
        Regime::DepDecay { alpha } => RatePrediction {
            floor: true,
            width_exponent: Some(0.0),
            constant: Some(c_alpha(alpha).sqrt()),
            ..base
        },
    }
}

/// `√(∫₁^{T−1} g(y₂) ∫₀^{y₂−1} g(y₁) dy₁ dy₂) / (T ∫₀^{T−2} g(y) dy)`.
///
/// `g` must be non-increasing and positive on `[0, T]`; the derivative
/// condition under which this tracks `R_θ(T)` is the caller's to check.
pub fn general_rate<G: Fn(f64) -> f64>(g: G, t_len: usize) -> Result<f64> {
    if t_len < 3 {
        return Err(Error::InvalidParameter(format!("general_rate needs T >= 3, got {t_len}")));
    }
    let t = t_len as f64;
    let inner = |y2: f64| -> f64 {
        adaptive_simpson(&g, 0.0, y2 - 1.0, QUADRATURE_RTOL).unwrap_or(f64::NAN)
    };
    let outer = adaptive_simpson(&|y2: f64| g(y2) * inner(y2), 1.0, t - 1.0, QUADRATURE_RTOL)?;
    let denom = adaptive_simpson(&g, 0.0, t - 2.0, QUADRATURE_RTOL)?;
    if !(outer >= 0.0 && denom > 0.0) {
        return Err(Error::QuadratureFailure(format!("degenerate integrals {outer}, {denom}")));
    }
    Ok(outer.sqrt() / (t * denom))
}
