//! Variance schedules and the independent / lag-dependent noise matrices
//! injected into the dynamics.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance on `Σ p_ℓ = 0` for lag coefficients.
pub const LAG_SUM_TOLERANCE: f64 = 1e-12;

/// Significant bits kept in every sampled entry.
///
/// Two draws with at most 26 significant bits whose magnitudes differ by
/// less than 2^26 have an exactly representable f64 difference, which makes
/// one-lag telescoping sums reproduce the last draw bit for bit.
pub const SAMPLE_SIGNIFICANT_BITS: i32 = 26;

/// Continuous variance profile `g` with `g(0) = 1`, evaluated at real `t`.
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Profile<T> {
    /// `g(t) = (t + 1)^{-α}`.
    PolynomialDecay { alpha: T },
    /// Arbitrary non-increasing `g` with `g(0) = 1`.
    GeneralG { g: ProfileFn, label: String },
}

impl<T: fmt::Debug> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::PolynomialDecay { alpha } => {
                f.debug_struct("PolynomialDecay").field("alpha", alpha).finish()
            }
            Profile::GeneralG { label, .. } => f.debug_struct("GeneralG").field("label", label).finish(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Gaussian,
    /// Uniform on `[-a, a]` with `a = σ√3`.
    UniformSymmetric,
}

impl Distribution {
    /// `κ₄` with `E[θ⁴] = κ₄ σ⁴`.
    pub fn kurtosis_factor(self) -> f64 {
        match self {
            Distribution::Gaussian => 3.0,
            Distribution::UniformSymmetric => 9.0 / 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSchedule<T> {
    sigma0_sq: T,
    profile: Profile<T>,
    distribution: Distribution,
}

impl<T: Real> NoiseSchedule<T> {
    pub fn polynomial(sigma0_sq: T, alpha: T) -> Result<Self> {
        check_sigma0(sigma0_sq)?;
        if !(alpha >= T::zero() && alpha.is_finite()) {
            return Err(Error::InvalidSchedule(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(Self { sigma0_sq, profile: Profile::PolynomialDecay { alpha }, distribution: Distribution::Gaussian })
    }

    /// Schedule `σ_t² = σ₀² g(t)`. Only `g(0) = 1` is checked here;
    /// monotonicity is checked over the sampled horizon by [`sample_independent`].
    pub fn general(sigma0_sq: T, label: impl Into<String>, g: ProfileFn) -> Result<Self> {
        check_sigma0(sigma0_sq)?;
        let g0 = g(0.0);
        if (g0 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSchedule(format!("g(0) must equal 1, got {g0}")));
        }
        Ok(Self {
            sigma0_sq,
            profile: Profile::GeneralG { g, label: label.into() },
            distribution: Distribution::Gaussian,
        })
    }

    /// `g(t) = qᵗ`, `0 < q ≤ 1`.
    pub fn geometric(sigma0_sq: T, q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidSchedule(format!("geometric ratio must lie in (0, 1], got {q}")));
        }
        Self::general(sigma0_sq, format!("geometric({q})"), Arc::new(move |t: f64| q.powf(t)))
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn sigma0_sq(&self) -> T {
        self.sigma0_sq
    }

    pub fn profile(&self) -> &Profile<T> {
        &self.profile
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn kurtosis_factor(&self) -> T {
        T::lit(self.distribution.kurtosis_factor())
    }

    /// `α` for polynomial schedules.
    pub fn alpha(&self) -> Option<T> {
        match &self.profile {
            Profile::PolynomialDecay { alpha } => Some(*alpha),
            Profile::GeneralG { .. } => None,
        }
    }

    /// Normalized profile `g(y)` at real `y ≥ 0`, in f64.
    pub fn g(&self, y: f64) -> f64 {
        match &self.profile {
            Profile::PolynomialDecay { alpha } => (y + 1.0).powf(-alpha.as_f64()),
            Profile::GeneralG { g, .. } => g(y),
        }
    }

    /// Variances `σ_0², …, σ_{T−1}²`.
    pub fn variances(&self, t_len: usize) -> Vec<T> {
        (0..t_len).map(|t| variance_at(self, t)).collect()
    }

    fn check_horizon(&self, t_len: usize) -> Result<()> {
        if let Profile::GeneralG { g, label } = &self.profile {
            let mut prev = g(0.0);
            for t in 1..t_len {
                let cur = g(t as f64);
                if !(cur >= 0.0 && cur <= prev) {
                    return Err(Error::InvalidSchedule(format!(
                        "profile {label} is not non-increasing and nonnegative at t = {t}"
                    )));
                }
                prev = cur;
            }
        }
        Ok(())
    }
}

fn check_sigma0<T: Real>(sigma0_sq: T) -> Result<()> {
    if sigma0_sq > T::zero() && sigma0_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("sigma0_sq must be positive, got {sigma0_sq}")))
    }
}

/// `σ_t²`: `σ₀²/(t+1)^α` or `σ₀² g(t)`.
pub fn variance_at<T: Real>(sched: &NoiseSchedule<T>, t: usize) -> T {
    match &sched.profile {
        Profile::PolynomialDecay { alpha } => {
            if *alpha == T::zero() {
                sched.sigma0_sq
            } else {
                sched.sigma0_sq * T::from_count(t + 1).powf(-*alpha)
            }
        }
        Profile::GeneralG { g, .. } => sched.sigma0_sq * T::lit(g(t as f64)),
    }
}

/// Validated lag coefficients `(p₀, …, p_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCoefficients<T> {
    p: Vec<T>,
}

impl<T: Real> LagCoefficients<T> {
    /// `p = (1)`: independent noise.
    pub fn independent() -> Self {
        Self { p: vec![T::one()] }
    }

    /// `p = (1, −1)`: `ξ_t = θ_t − θ_{t−1}`.
    pub fn one_lag() -> Self {
        Self { p: vec![T::one(), -T::one()] }
    }

    pub fn k(&self) -> usize {
        self.p.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.p
    }

    pub fn is_independent(&self) -> bool {
        self.p.len() == 1
    }

    /// `p̄ = max_ℓ |p_ℓ|`.
    pub fn bound(&self) -> T {
        self.p.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

pub fn validate_lag_coeffs<T: Real>(p: &[T]) -> Result<LagCoefficients<T>> {
    if p.is_empty() {
        return Err(Error::InvalidLag("coefficient list is empty".into()));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLag("coefficients must be finite".into()));
    }
    if p[0] == T::zero() {
        return Err(Error::LeadingZero);
    }
    if p.len() > 1 {
        let sum = p.iter().fold(T::zero(), |a, &b| a + b);
        if sum.abs() > T::tolerance(LAG_SUM_TOLERANCE) {
            return Err(Error::ZeroSumViolated { sum: sum.as_f64() });
        }
    }
    Ok(LagCoefficients { p: p.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind<T> {
    Independent,
    Dependent(LagCoefficients<T>),
}

/// `n × T` noise, column `t` injected at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix<T: Real> {
    values: DMatrix<T>,
    kind: NoiseKind<T>,
    seed: u64,
}

impl<T: Real> NoiseMatrix<T> {
    /// Wraps explicit values as independent noise.
    pub fn from_values(values: DMatrix<T>, seed: u64) -> Self {
        Self { values, kind: NoiseKind::Independent, seed }
    }

    pub fn zeros(n: usize, t_len: usize) -> Self {
        Self::from_values(DMatrix::zeros(n, t_len), 0)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn kind(&self) -> &NoiseKind<T> {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The first `t_len` columns, keeping kind and seed.
    pub fn prefix(&self, t_len: usize) -> Self {
        let t_len = t_len.min(self.len());
        Self { values: self.values.columns(0, t_len).into_owned(), kind: self.kind.clone(), seed: self.seed }
    }

    /// Multiplies every entry by `c`, keeping kind and seed.
    pub fn scaled(&self, c: T) -> Self {
        Self { values: &self.values * c, kind: self.kind.clone(), seed: self.seed }
    }

    /// CSV with one row per time step: `t,node_0,…`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.n() {
            out.push_str(&format!(",node_{i}"));
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&t.to_string());
            for i in 0..self.n() {
                out.push_str(&format!(",{:e}", self.values[(i, t)]));
            }
            out.push('\n');
        }
        out
    }
}

fn round_significand(x: f64, bits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log2().floor() as i32;
    let scale = 2f64.powi(bits - 1 - e);
    (x * scale).round() / scale
}

/// Independent zero-mean noise with column variances `σ_t²`.
///
/// Entries are drawn t-major (all nodes at `t = 0`, then `t = 1`, …) from a
/// ChaCha8 stream seeded with `seed`, and rounded to
/// [`SAMPLE_SIGNIFICANT_BITS`] significant bits.
pub fn sample_independent<T: Real>(
    sched: &NoiseSchedule<T>,
    n: usize,
    t_len: usize,
    seed: u64,
) -> Result<NoiseMatrix<T>> {
    if n == 0 || t_len == 0 {
        return Err(Error::DimensionMismatch(format!("noise shape must be positive, got {n}x{t_len}")));
    }
    sched.check_horizon(t_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(n, t_len);
    for t in 0..t_len {
        let sigma = variance_at(sched, t).as_f64().sqrt();
        for i in 0..n {
            let draw = match sched.distribution {
                Distribution::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
                Distribution::UniformSymmetric => {
                    let u: f64 = rng.random();
                    (2.0 * u - 1.0) * sigma * 3f64.sqrt()
                }
            };
            values[(i, t)] = T::lit(round_significand(draw, SAMPLE_SIGNIFICANT_BITS));
        }
    }
    Ok(NoiseMatrix { values, kind: NoiseKind::Independent, seed })
}

/// `ξ_t = Σ_{ℓ=0}^{min(k,t)} p_ℓ θ_{t−ℓ}`, accumulated in increasing `ℓ`.
pub fn derive_dependent<T: Real>(theta: &NoiseMatrix<T>, p: &LagCoefficients<T>) -> Result<NoiseMatrix<T>> {
    if theta.kind != NoiseKind::Independent {
        return Err(Error::InvalidLag("lag transform applies to independent noise only".into()));
    }
    let revalidated = validate_lag_coeffs(p.coeffs())?;
    let (n, t_len) = theta.values.shape();
    let mut values = DMatrix::zeros(n, t_len);
    let coeffs = revalidated.coeffs();
    for t in 0..t_len {
        for i in 0..n {
            let mut acc = coeffs[0] * theta.values[(i, t)];
            for (l, &pl) in coeffs.iter().enumerate().take(revalidated.k().min(t) + 1).skip(1) {
                acc += pl * theta.values[(i, t - l)];
            }
            values[(i, t)] = acc;
        }
    }
    Ok(NoiseMatrix { values, kind: NoiseKind::Dependent(revalidated), seed: theta.seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn variance_examples() {
        let iid = NoiseSchedule::polynomial(2.5, 0.0).unwrap();
        for t in [0, 1, 17, 4000] {
            assert_eq!(variance_at(&iid, t), 2.5);
        }
        let harmonic = NoiseSchedule::polynomial(1.0, 1.0).unwrap();
        assert!((variance_at(&harmonic, 9) - 0.1f64).abs() < 1e-15);
        let quad = NoiseSchedule::polynomial(3.0, 2.0).unwrap();
        assert_eq!(variance_at(&quad, 0), 3.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(NoiseSchedule::polynomial(0.0, 1.0).is_err());
        assert!(NoiseSchedule::polynomial(1.0, -0.5).is_err());
        assert!(NoiseSchedule::<f64>::general(1.0, "bad", Arc::new(|t| 2.0 - t)).is_err());
        let rising = NoiseSchedule::<f64>::general(1.0, "rising", Arc::new(|t| 1.0 + t.min(3.0))).unwrap();
        assert!(matches!(sample_independent(&rising, 2, 5, 0), Err(Error::InvalidSchedule(_))));
        let geo = NoiseSchedule::<f64>::geometric(2.0, 0.5).unwrap();
        assert!((variance_at(&geo, 3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kurtosis_factors() {
        let s = NoiseSchedule::<f64>::polynomial(1.0, 0.0).unwrap();
        assert_eq!(s.kurtosis_factor(), 3.0);
        assert_eq!(s.with_distribution(Distribution::UniformSymmetric).kurtosis_factor(), 1.8);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = NoiseSchedule::polynomial(1.0, 0.5).unwrap();
        let a = sample_independent::<f64>(&s, 4, 30, 77).unwrap();
        let b = sample_independent::<f64>(&s, 4, 30, 77).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_independent::<f64>(&s, 4, 30, 78).unwrap());
    }

    #[test]
    fn sampling_is_t_major() {
        // A longer horizon extends, never reshuffles, the earlier columns.
        let s = NoiseSchedule::polynomial(1.0, 1.0).unwrap();
        let short = sample_independent::<f64>(&s, 3, 10, 5).unwrap();
        let long = sample_independent::<f64>(&s, 3, 25, 5).unwrap();
        assert_eq!(short.values(), &long.values().columns(0, 10).into_owned());
    }

    #[test]
    fn column_mean_and_variance() {
        for dist in [Distribution::Gaussian, Distribution::UniformSymmetric] {
            let s = NoiseSchedule::polynomial(2.0, 1.0).unwrap().with_distribution(dist);
            let m = sample_independent::<f64>(&s, 100_000, 4, 9).unwrap();
            for t in 0..4 {
                let col = m.values().column(t);
                let mean = col.mean();
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
                let target = variance_at(&s, t);
                assert!(mean.abs() < 5.0 * target.sqrt() / (1e5f64).sqrt(), "{dist:?} t={t} mean={mean}");
                assert!((var / target - 1.0).abs() < 0.05, "{dist:?} t={t} var={var}");
            }
        }
    }

    #[test]
    fn lag_validation_examples() {
        assert!(validate_lag_coeffs(&[1.0, -1.0]).is_ok());
        assert!(validate_lag_coeffs(&[0.5, 0.5, -1.0]).is_ok());
        assert_eq!(validate_lag_coeffs(&[1.0, -0.5]), Err(Error::ZeroSumViolated { sum: 0.5 }));
        assert_eq!(validate_lag_coeffs(&[0.0, 1.0, -1.0]), Err(Error::LeadingZero));
        assert!(validate_lag_coeffs::<f64>(&[]).is_err());
        assert!(validate_lag_coeffs(&[3.0]).is_ok());
    }

    #[test]
    fn derive_examples() {
        let theta = NoiseMatrix::from_values(dmatrix![1.0, 2.0, 7.0; -3.0, 0.5, 4.0], 0);
        let passthrough = derive_dependent(&theta, &LagCoefficients::independent()).unwrap();
        assert_eq!(passthrough.values(), theta.values());

        let two_lag = validate_lag_coeffs(&[1.0, 0.0, -1.0]).unwrap();
        let xi = derive_dependent(&theta, &two_lag).unwrap();
        assert_eq!(xi.values(), &dmatrix![1.0, 2.0, 6.0; -3.0, 0.5, 7.0]);
        assert!(matches!(xi.kind(), NoiseKind::Dependent(_)));
        assert!(derive_dependent(&xi, &two_lag).is_err());
    }

    #[test]
    fn one_lag_telescopes_bit_exactly() {
        let s = NoiseSchedule::polynomial(1.0, 1.0).unwrap();
        for seed in 0..50 {
            let theta = sample_independent::<f64>(&s, 7, 500, seed).unwrap();
            let xi = derive_dependent(&theta, &LagCoefficients::one_lag()).unwrap();
            for i in 0..7 {
                let sum = xi.values().row(i).iter().fold(0.0, |a, b| a + b);
                assert_eq!(sum, theta.values()[(i, 499)], "seed {seed} node {i}");
            }
        }
    }

    #[test]
    fn rounding_keeps_requested_bits() {
        let x = round_significand(std::f64::consts::PI, 26);
        assert!((x - std::f64::consts::PI).abs() <= 2f64.powi(-24));
        assert_eq!((x * 2f64.powi(24)).fract(), 0.0);
        assert_eq!(round_significand(0.0, 26), 0.0);
    }

    proptest! {
        #[test]
        fn variance_non_increasing(alpha in 0.0f64..6.0, s0 in 0.01f64..10.0, t in 0usize..10_000) {
            let s = NoiseSchedule::polynomial(s0, alpha).unwrap();
            prop_assert!(variance_at(&s, t + 1) <= variance_at(&s, t));
            prop_assert!(variance_at(&s, t) > 0.0);
        }

        #[test]
        fn derive_is_linear(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            seed in 0u64..1000,
            p1 in -2.0f64..2.0,
        ) {
            let p = validate_lag_coeffs(&[1.0, p1, -1.0 - p1]).unwrap();
            let s = NoiseSchedule::polynomial(1.0, 0.5).unwrap();
            let t1 = sample_independent::<f64>(&s, 3, 12, seed).unwrap();
            let t2 = sample_independent::<f64>(&s, 3, 12, seed + 1).unwrap();
            let combo = NoiseMatrix::from_values(t1.values() * a + t2.values() * b, 0);
            let lhs = derive_dependent(&combo, &p).unwrap();
            let rhs = derive_dependent(&t1, &p).unwrap().values() * a
                + derive_dependent(&t2, &p).unwrap().values() * b;
            prop_assert!((lhs.values() - rhs).amax() < 1e-12);
        }

        #[test]
        fn one_lag_telescopes_for_any_seed(seed in any::<u64>(), alpha in 0.0f64..4.0) {
            let s = NoiseSchedule::polynomial(1.0, alpha).unwrap();
            let theta = sample_independent::<f64>(&s, 2, 64, seed).unwrap();
            let xi = derive_dependent(&theta, &LagCoefficients::one_lag()).unwrap();
            for i in 0..2 {
                let sum = xi.values().row(i).iter().fold(0.0, |acc, v| acc + v);
                prop_assert_eq!(sum, theta.values()[(i, 63)]);
            }
        }
    }
}
