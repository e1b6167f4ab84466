use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use topopreserve::dynamics::uniform_initial_state;
use topopreserve::inference::ols_from_states;
use topopreserve::metrics::{fit_decay_exponent, fit_exponential_rate, r_theta, r_xi, RateFit};
use topopreserve::moments::MAX_BLOCK_DIM;
use topopreserve::{
    derive_dependent, deviation_series, laplacian_weights, random_digraph, sample_independent, simulate,
    spectral_summary, validate_lag_coeffs, Error as CoreError, LagCoefficientsF64, NoiseScheduleF64, TopologyMatrixF64,
};

use crate::config::{log_spaced, ExperimentConfig, GraphSource, ProfileKind, X0Mode};
use crate::error::{HarnessError, Result};

/// A cell is invalid when more than this fraction of its trials failed.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

/// Offset applied to the trial seed for the `uniform01` initial state, so
/// it is not drawn from the noise stream.
const X0_SEED_OFFSET: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleValue {
    RTheta { value: f64 },
    RXi { center: f64, half_width: f64, lower: f64, upper: f64 },
}

/// Trial statistics of `‖Ŵ(T) − W‖₂` for one `(α, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t: usize,
    /// Mean over the successful trials; absent when all failed.
    pub mean_error: Option<f64>,
    pub stderr_error: Option<f64>,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub valid: bool,
    pub oracle: Option<OracleValue>,
}

/// Trial-averaged `‖x_t − x*_t‖²` over the longest horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub alpha: f64,
    pub horizon: usize,
    pub trials_used: usize,
    pub peak: f64,
    pub peak_t: usize,
    pub final_value: f64,
    /// `(t, mean deviation)` at log-spaced `t` and at every grid `T`.
    pub samples: Vec<(usize, f64)>,
}

impl DeviationSummary {
    pub fn at(&self, t: usize) -> Option<f64> {
        self.samples.iter().find(|s| s.0 == t).map(|s| s.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub alpha: f64,
    /// Log-log slope of the mean error.
    pub error: Option<RateFit>,
    /// Slope of the log mean error against `T`.
    pub error_exponential: Option<RateFit>,
    /// Log-log slope of the oracle `R_θ`, when available.
    pub oracle: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub base_seed: u64,
    /// Trial `k` uses seed `base_seed + k`.
    pub trial_seeds: Vec<u64>,
    pub n: usize,
    pub spectral_radius: f64,
    pub dependent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: Metadata,
    pub cells: Vec<Cell>,
    pub deviations: Vec<DeviationSummary>,
    pub fits: Vec<CurveFit>,
}

impl ExperimentReport {
    pub fn empty(config_hash: String) -> Self {
        ExperimentReport {
            metadata: Metadata {
                config_hash,
                base_seed: 0,
                trial_seeds: Vec::new(),
                n: 0,
                spectral_radius: 0.0,
                dependent: false,
            },
            cells: Vec::new(),
            deviations: Vec::new(),
            fits: Vec::new(),
        }
    }

    pub fn invalid_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.valid).count()
    }

    pub fn cell(&self, alpha: f64, t: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.t == t)
    }

    pub fn curve(&self, alpha: f64) -> Vec<(f64, f64)> {
        self.cells
            .iter()
            .filter(|c| c.alpha == alpha && c.valid)
            .filter_map(|c| c.mean_error.map(|m| (c.t as f64, m)))
            .collect()
    }

    pub fn deviation(&self, alpha: f64) -> Option<&DeviationSummary> {
        self.deviations.iter().find(|d| d.alpha == alpha)
    }

    pub fn fit(&self, alpha: f64) -> Option<&CurveFit> {
        self.fits.iter().find(|f| f.alpha == alpha)
    }
}

pub fn build_topology(cfg: &ExperimentConfig) -> Result<TopologyMatrixF64> {
    let w = match &cfg.graph {
        GraphSource::Random { n, edge_prob, gamma, seed } => {
            laplacian_weights(&random_digraph(*n, *edge_prob, *seed)?, *gamma)?
        }
        GraphSource::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            TopologyMatrixF64::from_csv_lenient(&text)?
        }
    };
    Ok(match cfg.spectral_scale {
        Some(s) => w.scaled(s),
        None => w,
    })
}

pub fn build_schedule(cfg: &ExperimentConfig, param: f64) -> Result<NoiseScheduleF64> {
    let sched = match cfg.profile {
        ProfileKind::Polynomial => NoiseScheduleF64::polynomial(cfg.sigma0_sq, param)?,
        ProfileKind::Geometric => NoiseScheduleF64::geometric(cfg.sigma0_sq, param)?,
    };
    Ok(sched.with_distribution(cfg.distribution))
}

fn initial_state(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<DVector<f64>> {
    match &cfg.x0 {
        X0Mode::Zero => Ok(DVector::zeros(n)),
        X0Mode::Uniform01 => Ok(uniform_initial_state(n, seed.wrapping_add(X0_SEED_OFFSET))),
        X0Mode::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            let values: Vec<f64> = text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| HarnessError::ConfigInvalid(format!("x0_file: bad value {s:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != n {
                return Err(HarnessError::ConfigInvalid(format!("x0_file has {} values, need {n}", values.len())));
            }
            Ok(DVector::from_vec(values))
        }
    }
}

/// Outcome of one simulated trajectory: one error per grid `T` and the
/// deviation series, or `None` for a trial lost to overflow.
struct TrialOutcome {
    errors: Vec<Option<f64>>,
    deviation: Option<Vec<f64>>,
}

fn is_trial_failure(e: &CoreError) -> bool {
    matches!(e, CoreError::SingularGram { .. } | CoreError::Overflow { .. })
}

fn run_trial(
    cfg: &ExperimentConfig,
    w: &TopologyMatrixF64,
    sched: &NoiseScheduleF64,
    lag: &LagCoefficientsF64,
    x0: &DVector<f64>,
    seed: u64,
) -> Result<TrialOutcome> {
    let t_max = cfg.t_max();
    let theta = sample_independent(sched, w.n(), t_max, seed)?;
    let noise = if lag.is_independent() { theta } else { derive_dependent(&theta, lag)? };
    let traj = match simulate(w, x0, &noise, t_max) {
        Ok(t) => t,
        Err(e) if is_trial_failure(&e) => {
            log::debug!("trial seed {seed}: {e}");
            return Ok(TrialOutcome { errors: vec![None; cfg.t_grid.len()], deviation: None });
        }
        Err(e) => return Err(e.into()),
    };
    let states = traj.states();
    let mut errors = Vec::with_capacity(cfg.t_grid.len());
    for &t in &cfg.t_grid {
        match ols_from_states(states.columns(0, t), states.columns(1, t), w) {
            Ok(r) if r.error_spectral.is_finite() => errors.push(Some(r.error_spectral)),
            Ok(_) => errors.push(None),
            Err(e) if is_trial_failure(&e) => {
                log::debug!("trial seed {seed}, T={t}: {e}");
                errors.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(TrialOutcome { errors, deviation: Some(deviation_series(&traj)) })
}

fn mean_and_stderr(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let stderr = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(stderr))
}

fn oracle_value(
    cfg: &ExperimentConfig,
    w: &TopologyMatrixF64,
    sched: &NoiseScheduleF64,
    lag: &LagCoefficientsF64,
    t: usize,
) -> Option<OracleValue> {
    if !cfg.oracle || w.n() * t > MAX_BLOCK_DIM {
        return None;
    }
    let value = if lag.is_independent() {
        r_theta(w, sched, t).map(|r| OracleValue::RTheta { value: r.value })
    } else {
        r_xi(w, sched, t, lag, cfg.c_sigma).map(|iv| OracleValue::RXi {
            center: iv.center,
            half_width: iv.half_width,
            lower: iv.lower(),
            upper: iv.upper(),
        })
    };
    value.map_err(|e| log::warn!("oracle at T={t} unavailable: {e}")).ok()
}

fn summarize_deviation(cfg: &ExperimentConfig, alpha: f64, series: &[&Vec<f64>]) -> DeviationSummary {
    let horizon = cfg.t_max();
    let mut mean = vec![0.0; horizon + 1];
    for s in series {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v;
        }
    }
    if !series.is_empty() {
        let k = series.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
    }
    let (peak_t, peak) = mean
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (t, v)| if v > best.1 { (t, v) } else { best });
    let mut ts = log_spaced(1, horizon, cfg.deviation_points);
    ts.push(0);
    ts.extend(cfg.t_grid.iter().copied());
    ts.sort_unstable();
    ts.dedup();
    DeviationSummary {
        alpha,
        horizon,
        trials_used: series.len(),
        peak: if series.is_empty() { 0.0 } else { peak },
        peak_t,
        final_value: mean[horizon],
        samples: ts.into_iter().map(|t| (t, mean[t])).collect(),
    }
}

fn fit_or_none(result: topopreserve::Result<RateFit>) -> Option<RateFit> {
    result.ok()
}

/// Runs every `(α, trial)` simulation, attacks each prefix `T` of the grid
/// with OLS and aggregates. A length-`T` run equals the prefix of the
/// longest run, since noise is drawn time-major from the trial seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let w = build_topology(cfg)?;
    let n = w.n();
    let lag = validate_lag_coeffs(&cfg.lag)?;
    let schedules: Vec<NoiseScheduleF64> = cfg.alphas.iter().map(|&a| build_schedule(cfg, a)).collect::<Result<_>>()?;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|k| cfg.base_seed.wrapping_add(k)).collect();
    let x0s: Vec<DVector<f64>> = seeds.iter().map(|&s| initial_state(cfg, n, s)).collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.alphas.len()).flat_map(|a| (0..cfg.trials).map(move |k| (a, k))).collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(a, k)| run_trial(cfg, &w, &schedules[a], &lag, &x0s[k], seeds[k]))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut deviations = Vec::new();
    let mut fits = Vec::new();
    for (a, &alpha) in cfg.alphas.iter().enumerate() {
        let trials = &outcomes[a * cfg.trials..(a + 1) * cfg.trials];
        let oracles: Vec<Option<OracleValue>> = cfg
            .t_grid
            .par_iter()
            .map(|&t| oracle_value(cfg, &w, &schedules[a], &lag, t))
            .collect();
        for (j, (&t, oracle)) in cfg.t_grid.iter().zip(oracles).enumerate() {
            let ok: Vec<f64> = trials.iter().filter_map(|o| o.errors[j]).collect();
            let failed = cfg.trials - ok.len();
            let (mean_error, stderr_error) = mean_and_stderr(&ok);
            let valid = !ok.is_empty() && failed as f64 <= MAX_FAILED_FRACTION * cfg.trials as f64;
            cells.push(Cell { alpha, t, mean_error, stderr_error, trials_ok: ok.len(), trials_failed: failed, valid, oracle });
        }
        let series: Vec<&Vec<f64>> = trials.iter().filter_map(|o| o.deviation.as_ref()).collect();
        deviations.push(summarize_deviation(cfg, alpha, &series));

        let curve: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.alpha == alpha && c.valid)
            .filter_map(|c| c.mean_error.map(|m| (c.t as f64, m)))
            .collect();
        let oracle_curve: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.alpha == alpha)
            .filter_map(|c| match c.oracle {
                Some(OracleValue::RTheta { value }) => Some((c.t as f64, value)),
                _ => None,
            })
            .collect();
        fits.push(CurveFit {
            alpha,
            error: fit_or_none(fit_decay_exponent(&curve, cfg.burn_in)),
            error_exponential: fit_or_none(fit_exponential_rate(&curve, cfg.burn_in)),
            oracle: fit_or_none(fit_decay_exponent(&oracle_curve, cfg.burn_in)),
        });
    }

    let spectral_radius = spectral_summary(&w).map(|s| s.spectral_radius).unwrap_or(f64::NAN);
    Ok(ExperimentReport {
        metadata: Metadata {
            config_hash: cfg.hash(),
            base_seed: cfg.base_seed,
            trial_seeds: seeds,
            n,
            spectral_radius,
            dependent: cfg.is_dependent(),
        },
        cells,
        deviations,
        fits,
    })
}

/// Mean errors per `(α, T)` with the maximizing `α` at each `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub alphas: Vec<f64>,
    #[serde(rename = "T")]
    pub t_values: Vec<usize>,
    /// `mean_error[a][j]` for `alphas[a]` at `t_values[j]`.
    pub mean_error: Vec<Vec<Option<f64>>>,
    /// Maximizing `α` per `T` among valid cells.
    pub argmax: Vec<Option<f64>>,
}

pub fn sweep_table(report: &ExperimentReport, alphas: &[f64], t_values: &[usize]) -> SweepTable {
    let mean_error: Vec<Vec<Option<f64>>> = alphas
        .iter()
        .map(|&a| {
            t_values
                .iter()
                .map(|&t| report.cell(a, t).filter(|c| c.valid).and_then(|c| c.mean_error))
                .collect()
        })
        .collect();
    let argmax = (0..t_values.len())
        .map(|j| {
            alphas
                .iter()
                .zip(&mean_error)
                .filter_map(|(&a, row)| row[j].map(|m| (a, m)))
                .fold(None, |best: Option<(f64, f64)>, (a, m)| match best {
                    Some((_, bm)) if bm >= m => best,
                    _ => Some((a, m)),
                })
                .map(|(a, _)| a)
        })
        .collect();
    SweepTable { alphas: alphas.to_vec(), t_values: t_values.to_vec(), mean_error, argmax }
}

/// [`run_experiment`] over an `α` grid with at least five distinct points,
/// minimum 0 and maximum at least 6.
pub fn sweep_alpha(cfg: &ExperimentConfig) -> Result<(ExperimentReport, SweepTable)> {
    let mut distinct = cfg.alphas.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if cfg.profile != ProfileKind::Polynomial {
        return Err(HarnessError::ConfigInvalid("sweep needs profile = polynomial".into()));
    }
    if distinct.len() < 5 || distinct[0] != 0.0 || distinct[distinct.len() - 1] < 6.0 {
        return Err(HarnessError::ConfigInvalid(format!(
            "sweep grid needs at least 5 distinct alpha values spanning [0, 6], got {:?}",
            cfg.alphas
        )));
    }
    let report = run_experiment(cfg)?;
    let table = sweep_table(&report, &cfg.alphas, &cfg.t_grid);
    Ok((report, table))
}
