//! Noise-driven state evolution `x_{t+1} = W x_t + noise_t`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::TopologyMatrix;
use crate::noise::NoiseMatrix;
use crate::scalar::Real;

/// Any state magnitude above this aborts a simulation.
pub const OVERFLOW_LIMIT: f64 = 1e100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle<T: Real> {
    w: TopologyMatrix<T>,
    x0: DVector<T>,
    states: DMatrix<T>,
    ideal: DMatrix<T>,
    noise: NoiseMatrix<T>,
}

impl<T: Real> TrajectoryBundle<T> {
    /// Number of transitions `T`.
    pub fn horizon(&self) -> usize {
        self.states.ncols() - 1
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn w(&self) -> &TopologyMatrix<T> {
        &self.w
    }

    pub fn x0(&self) -> &DVector<T> {
        &self.x0
    }

    pub fn noise(&self) -> &NoiseMatrix<T> {
        &self.noise
    }

    /// `x_0, …, x_T` as columns.
    pub fn states(&self) -> &DMatrix<T> {
        &self.states
    }

    /// `x*_0, …, x*_T` with `x*_t = Wᵗ x_0`.
    pub fn ideal(&self) -> &DMatrix<T> {
        &self.ideal
    }

    /// `X = [x_0, …, x_{T−1}]`.
    pub fn x(&self) -> DMatrixView<'_, T> {
        self.states.columns(0, self.horizon())
    }

    /// `X⁺ = [x_1, …, x_T]`.
    pub fn x_plus(&self) -> DMatrixView<'_, T> {
        self.states.columns(1, self.horizon())
    }

    /// The first `t_len` transitions, identical to simulating with horizon `t_len`.
    pub fn prefix(&self, t_len: usize) -> Result<Self> {
        if t_len < 2 || t_len > self.horizon() {
            return Err(Error::DimensionMismatch(format!(
                "prefix {t_len} outside [2, {}]",
                self.horizon()
            )));
        }
        let noise = self.noise.prefix(t_len);
        Ok(Self {
            w: self.w.clone(),
            x0: self.x0.clone(),
            states: self.states.columns(0, t_len + 1).into_owned(),
            ideal: self.ideal.columns(0, t_len + 1).into_owned(),
            noise,
        })
    }

    /// CSV with columns `t,node_0..node_{n−1},ideal_0..ideal_{n−1}` for `t = 0..=T`.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",node_{i}");
        }
        for i in 0..n {
            let _ = write!(out, ",ideal_{i}");
        }
        out.push('\n');
        for t in 0..=self.horizon() {
            let _ = write!(out, "{t}");
            for i in 0..n {
                let _ = write!(out, ",{:e}", self.states[(i, t)]);
            }
            for i in 0..n {
                let _ = write!(out, ",{:e}", self.ideal[(i, t)]);
            }
            out.push('\n');
        }
        out
    }
}

/// States and ideal trajectory read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable<T: Real> {
    pub states: DMatrix<T>,
    pub ideal: DMatrix<T>,
}

pub fn parse_trajectory_csv<T: Real>(text: &str) -> Result<TrajectoryTable<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty trajectory CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 3 || !(cols.len() - 1).is_multiple_of(2) {
        return Err(Error::Parse(format!("unexpected trajectory header '{header}'")));
    }
    let n = (cols.len() - 1) / 2;
    for i in 0..n {
        if cols[1 + i] != format!("node_{i}") || cols[1 + n + i] != format!("ideal_{i}") {
            return Err(Error::Parse(format!("unexpected trajectory header '{header}'")));
        }
    }
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(Error::Parse(format!("row {k} has {} cells, expected {}", cells.len(), cols.len())));
        }
        if cells[0].parse::<usize>().ok() != Some(k) {
            return Err(Error::Parse(format!("row {k} has time index '{}'", cells[0])));
        }
        let vals = cells[1..]
            .iter()
            .map(|c| c.parse::<f64>().map(T::lit).map_err(|_| Error::Parse(format!("bad value '{c}'"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    if rows.len() < 2 {
        return Err(Error::Parse("trajectory needs at least two time steps".into()));
    }
    let steps = rows.len();
    Ok(TrajectoryTable {
        states: DMatrix::from_fn(n, steps, |i, t| rows[t][i]),
        ideal: DMatrix::from_fn(n, steps, |i, t| rows[t][n + i]),
    })
}

/// `x_0 ~ U[0, 1]ⁿ` from a ChaCha8 stream.
pub fn uniform_initial_state<T: Real>(n: usize, seed: u64) -> DVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| T::lit(rng.random::<f64>()))
}

fn matvec_into<T: Real>(w: &DMatrix<T>, x: &[T], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (j, &xj) in x.iter().enumerate() {
            acc += w[(i, j)] * xj;
        }
        *o = acc;
    }
}

/// Runs `T` steps of the recursion and the noise-free reference.
///
/// `W x` is accumulated left to right over `j`, then the noise is added, so
/// replays are bit-identical.
pub fn simulate<T: Real>(
    w: &TopologyMatrix<T>,
    x0: &DVector<T>,
    noise: &NoiseMatrix<T>,
    t_len: usize,
) -> Result<TrajectoryBundle<T>> {
    let n = w.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("x0 has length {}, W is {n}x{n}", x0.len())));
    }
    if noise.n() != n || noise.len() < t_len {
        return Err(Error::DimensionMismatch(format!(
            "noise is {}x{}, need {n} rows and at least {t_len} columns",
            noise.n(),
            noise.len()
        )));
    }
    if t_len < 2 {
        return Err(Error::DimensionMismatch(format!("horizon must be at least 2, got {t_len}")));
    }
    let limit = T::lit(OVERFLOW_LIMIT);
    let wm = w.weights();
    let mut states = DMatrix::zeros(n, t_len + 1);
    let mut ideal = DMatrix::zeros(n, t_len + 1);
    states.set_column(0, x0);
    ideal.set_column(0, x0);
    let mut cur: Vec<T> = x0.iter().copied().collect();
    let mut cur_ideal = cur.clone();
    let mut next = vec![T::zero(); n];
    for t in 0..t_len {
        matvec_into(wm, &cur, &mut next);
        for i in 0..n {
            let v = next[i] + noise.values()[(i, t)];
            if !(v.abs() <= limit) {
                return Err(Error::Overflow { step: t + 1, limit: OVERFLOW_LIMIT });
            }
            states[(i, t + 1)] = v;
            cur[i] = v;
        }
        matvec_into(wm, &cur_ideal, &mut next);
        for i in 0..n {
            ideal[(i, t + 1)] = next[i];
            cur_ideal[i] = next[i];
        }
    }
    let noise = noise.prefix(t_len);
    Ok(TrajectoryBundle { w: w.clone(), x0: x0.clone(), states, ideal, noise })
}

/// `‖x_t − x*_t‖²` for `t = 0..=T`.
pub fn deviation_series<T: Real>(traj: &TrajectoryBundle<T>) -> Vec<T> {
    (0..=traj.horizon())
        .map(|t| (traj.states.column(t) - traj.ideal.column(t)).norm_squared())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian_weights, random_digraph};
    use crate::noise::{derive_dependent, sample_independent, LagCoefficients, NoiseSchedule};
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn seven_node() -> TopologyMatrix<f64> {
        laplacian_weights(&random_digraph(7, 0.4, 42).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn zero_noise_matches_ideal() {
        let w = seven_node();
        let x0 = uniform_initial_state(7, 1);
        let traj = simulate(&w, &x0, &NoiseMatrix::zeros(7, 40), 40).unwrap();
        assert_eq!(traj.states(), traj.ideal());
        assert!(deviation_series(&traj).iter().all(|&d| d == 0.0));
        let product = w.weights() * traj.x();
        assert!((product - traj.x_plus()).amax() < 1e-15);
    }

    #[test]
    fn scalar_accumulation() {
        let w = TopologyMatrix::from_weights(dmatrix![1.0]).unwrap();
        let noise = NoiseMatrix::from_values(DMatrix::from_element(1, 8, 0.25), 0);
        let traj = simulate(&w, &dvector![3.0], &noise, 8).unwrap();
        assert_eq!(traj.states()[(0, 8)], 3.0 + 8.0 * 0.25);
    }

    #[test]
    fn first_step_deviation_is_first_noise() {
        let w = seven_node();
        let s = NoiseSchedule::polynomial(1.0, 1.0).unwrap();
        let theta = sample_independent(&s, 7, 20, 3).unwrap();
        let xi = derive_dependent(&theta, &LagCoefficients::one_lag()).unwrap();
        let x0 = uniform_initial_state(7, 2);
        for noise in [&theta, &xi] {
            let traj = simulate(&w, &x0, noise, 20).unwrap();
            let d1 = traj.states().column(1) - traj.ideal().column(1);
            assert!((d1 - theta.values().column(0)).amax() < 1e-15);
            let dev = deviation_series(&traj);
            assert_eq!(dev[0], 0.0);
            assert!((dev[1] - theta.values().column(0).norm_squared()).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_and_overflow_errors() {
        let w = seven_node();
        let x0 = DVector::zeros(7);
        assert!(simulate(&w, &DVector::zeros(3), &NoiseMatrix::zeros(7, 5), 5).is_err());
        assert!(simulate(&w, &x0, &NoiseMatrix::zeros(7, 4), 5).is_err());
        assert!(simulate(&w, &x0, &NoiseMatrix::zeros(7, 5), 1).is_err());
        let blow = w.scaled(1e30);
        let err = simulate(&blow, &DVector::from_element(7, 1.0), &NoiseMatrix::zeros(7, 10), 10).unwrap_err();
        assert_eq!(err, Error::Overflow { step: 4, limit: OVERFLOW_LIMIT });
    }

    #[test]
    fn prefix_matches_shorter_run() {
        let w = seven_node();
        let s = NoiseSchedule::polynomial(1.0, 0.5).unwrap();
        let noise = sample_independent(&s, 7, 60, 8).unwrap();
        let x0 = uniform_initial_state(7, 4);
        let long = simulate(&w, &x0, &noise, 60).unwrap();
        let short_noise = sample_independent(&s, 7, 25, 8).unwrap();
        let short = simulate(&w, &x0, &short_noise, 25).unwrap();
        assert_eq!(long.prefix(25).unwrap().states(), short.states());
        assert_eq!(long.prefix(25).unwrap().noise().values(), short.noise().values());
    }

    #[test]
    fn consensus_spread_shrinks() {
        let w = seven_node();
        let traj = simulate(&w, &uniform_initial_state(7, 11), &NoiseMatrix::zeros(7, 400), 400).unwrap();
        let spread = |t: usize| {
            let c = traj.ideal().column(t);
            c.max() - c.min()
        };
        for t in 0..400 {
            assert!(spread(t + 1) <= spread(t) + 1e-15);
        }
        assert!(spread(400) < 1e-6 * spread(0));
    }

    #[test]
    fn csv_round_trip() {
        let w = seven_node();
        let s = NoiseSchedule::polynomial(1.0, 0.0).unwrap();
        let noise = sample_independent(&s, 7, 12, 1).unwrap();
        let traj = simulate(&w, &uniform_initial_state(7, 1), &noise, 12).unwrap();
        let table: TrajectoryTable<f64> = parse_trajectory_csv(&traj.to_csv()).unwrap();
        assert_eq!(&table.states, traj.states());
        assert_eq!(&table.ideal, traj.ideal());
        assert!(parse_trajectory_csv::<f64>("t,node_0\n0,1\n").is_err());
    }

    proptest! {
        #[test]
        fn replay_is_bit_identical(seed in any::<u64>(), alpha in 0.0f64..3.0) {
            let w = seven_node();
            let s = NoiseSchedule::polynomial(1.0, alpha).unwrap();
            let noise = sample_independent(&s, 7, 30, seed).unwrap();
            let x0 = uniform_initial_state(7, seed ^ 0xabc);
            let a = simulate(&w, &x0, &noise, 30).unwrap();
            let b = simulate(&w, &x0, &noise, 30).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn recursion_holds_columnwise(seed in any::<u64>()) {
            let w = seven_node();
            let s = NoiseSchedule::polynomial(1.0, 0.0).unwrap();
            let noise = sample_independent(&s, 7, 15, seed).unwrap();
            let traj = simulate(&w, &DVector::zeros(7), &noise, 15).unwrap();
            let resid = traj.x_plus() - w.weights() * traj.x() - noise.values();
            prop_assert!(resid.amax() < 1e-13);
        }
    }
}
