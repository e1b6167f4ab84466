//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, list values are comma
//! separated. Unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use topopreserve::{validate_lag_coeffs, Distribution};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphSource {
    Random { n: usize, edge_prob: f64, gamma: f64, seed: u64 },
    File { path: PathBuf },
}

/// Variance profile; the curve parameter is `α` for `Polynomial` and
/// the ratio `q` for `Geometric`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Polynomial,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum X0Mode {
    Zero,
    Uniform01,
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    /// Multiplies `W` after construction; the structural checks are
    /// skipped for the scaled matrix.
    pub spectral_scale: Option<f64>,
    pub sigma0_sq: f64,
    pub profile: ProfileKind,
    /// Curve parameters, one curve each.
    pub alphas: Vec<f64>,
    pub distribution: Distribution,
    /// Lag coefficients `p`; `[1]` is independent noise.
    pub lag: Vec<f64>,
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub x0: X0Mode,
    pub c_sigma: f64,
    pub output_dir: PathBuf,
    pub base_seed: u64,
    pub burn_in: f64,
    pub oracle: bool,
    pub deviation_points: usize,
}

const KEYS: &[&str] = &[
    "n",
    "edge_prob",
    "gamma",
    "graph_seed",
    "w_file",
    "spectral_scale",
    "sigma0_sq",
    "profile",
    "alpha",
    "geometric_q",
    "distribution",
    "lag",
    "t_grid",
    "t_min",
    "t_max",
    "t_points",
    "trials",
    "x0",
    "x0_file",
    "c_sigma",
    "output_dir",
    "base_seed",
    "burn_in",
    "oracle",
    "deviation_points",
];

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid(msg.into())
}

/// `points` integers log-spaced over `[lo, hi]`, rounded and deduplicated.
pub fn log_spaced(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if points <= 1 || lo >= hi {
        return vec![hi.max(lo)];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<V: std::str::FromStr>(&mut self, key: &str) -> Result<Option<V>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| invalid(format!("{key}: cannot parse {raw:?}"))),
        }
    }

    fn list<V: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<V>>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| invalid(format!("{key}: cannot parse {s:?}"))))
                .collect::<Result<Vec<V>>>()
                .map(Some),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(invalid(format!("line {}: unknown key {key:?}", lineno + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(invalid(format!("line {}: repeated key {key:?}", lineno + 1)));
            }
        }
        Self::from_entries(Entries { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    fn from_entries(mut e: Entries) -> Result<Self> {
        let base_seed = e.parse("base_seed")?.unwrap_or(1);
        let w_file: Option<PathBuf> = e.take("w_file").map(PathBuf::from);
        let n: Option<usize> = e.parse("n")?;
        let edge_prob: Option<f64> = e.parse("edge_prob")?;
        let gamma: Option<f64> = e.parse("gamma")?;
        let graph_seed: Option<u64> = e.parse("graph_seed")?;
        let graph = match w_file {
            Some(path) => {
                if n.is_some() || edge_prob.is_some() || gamma.is_some() || graph_seed.is_some() {
                    return Err(invalid("w_file excludes n, edge_prob, gamma and graph_seed"));
                }
                GraphSource::File { path }
            }
            None => GraphSource::Random {
                n: n.ok_or_else(|| invalid("either n or w_file is required"))?,
                edge_prob: edge_prob.unwrap_or(0.4),
                gamma: gamma.unwrap_or(0.5),
                seed: graph_seed.unwrap_or(base_seed),
            },
        };
        let profile = match e.take("profile").as_deref() {
            None | Some("polynomial") => ProfileKind::Polynomial,
            Some("geometric") => ProfileKind::Geometric,
            Some(other) => return Err(invalid(format!("profile: unknown value {other:?}"))),
        };
        let alpha: Option<Vec<f64>> = e.list("alpha")?;
        let q: Option<Vec<f64>> = e.list("geometric_q")?;
        let alphas = match (profile, alpha, q) {
            (ProfileKind::Polynomial, a, None) => a.unwrap_or_else(|| vec![0.0]),
            (ProfileKind::Geometric, None, Some(q)) => q,
            (ProfileKind::Polynomial, _, Some(_)) => return Err(invalid("geometric_q needs profile = geometric")),
            (ProfileKind::Geometric, _, _) => return Err(invalid("profile = geometric needs geometric_q and no alpha")),
        };
        let distribution = match e.take("distribution").as_deref() {
            None | Some("gaussian") => Distribution::Gaussian,
            Some("uniform") => Distribution::UniformSymmetric,
            Some(other) => return Err(invalid(format!("distribution: unknown value {other:?}"))),
        };
        let t_list: Option<Vec<usize>> = e.list("t_grid")?;
        let t_min: Option<usize> = e.parse("t_min")?;
        let t_max: Option<usize> = e.parse("t_max")?;
        let t_points: Option<usize> = e.parse("t_points")?;
        let t_grid = match (t_list, t_min, t_max) {
            (Some(list), None, None) if t_points.is_none() => list,
            (None, Some(lo), Some(hi)) => log_spaced(lo, hi, t_points.unwrap_or(16)),
            (None, None, None) if t_points.is_none() => log_spaced(100, 10_000, 16),
            _ => return Err(invalid("give either t_grid or t_min and t_max (with optional t_points)")),
        };
        let x0_file: Option<PathBuf> = e.take("x0_file").map(PathBuf::from);
        let x0 = match (e.take("x0").as_deref(), x0_file) {
            (None | Some("uniform01"), None) => X0Mode::Uniform01,
            (Some("zero"), None) => X0Mode::Zero,
            (Some("file"), Some(path)) => X0Mode::File { path },
            (Some("file"), None) => return Err(invalid("x0 = file needs x0_file")),
            (_, Some(_)) => return Err(invalid("x0_file needs x0 = file")),
            (Some(other), None) => return Err(invalid(format!("x0: unknown value {other:?}"))),
        };
        let oracle = match e.take("oracle").as_deref() {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => return Err(invalid(format!("oracle: expected true or false, got {other:?}"))),
        };
        let cfg = ExperimentConfig {
            graph,
            spectral_scale: e.parse("spectral_scale")?,
            sigma0_sq: e.parse("sigma0_sq")?.unwrap_or(1.0),
            profile,
            alphas,
            distribution,
            lag: e.list("lag")?.unwrap_or_else(|| vec![1.0]),
            t_grid,
            trials: e.parse("trials")?.unwrap_or(20),
            x0,
            c_sigma: e.parse("c_sigma")?.unwrap_or(topopreserve::metrics::DEFAULT_C_SIGMA),
            output_dir: e.take("output_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
            base_seed,
            burn_in: e.parse("burn_in")?.unwrap_or(topopreserve::metrics::DEFAULT_BURN_IN),
            oracle,
            deviation_points: e.parse("deviation_points")?.unwrap_or(64),
        };
        debug_assert!(e.map.is_empty(), "unconsumed keys {:?}", e.map.keys());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.t_grid.is_empty() {
            return Err(invalid("T grid is empty"));
        }
        if self.t_grid[0] < 2 {
            return Err(invalid("every T must be at least 2"));
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!("T grid must be strictly increasing: {:?}", self.t_grid)));
        }
        if self.alphas.is_empty() {
            return Err(invalid("no curve parameters"));
        }
        match self.profile {
            ProfileKind::Polynomial if self.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) => {
                return Err(invalid(format!("alpha values must be finite and >= 0: {:?}", self.alphas)));
            }
            ProfileKind::Geometric if self.alphas.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) => {
                return Err(invalid(format!("geometric_q values must lie in (0, 1]: {:?}", self.alphas)));
            }
            _ => {}
        }
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) {
            return Err(invalid("sigma0_sq must be positive"));
        }
        if !(self.c_sigma >= 1.0) {
            return Err(invalid("c_sigma must be at least 1"));
        }
        if let Some(s) = self.spectral_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("spectral_scale must be positive"));
            }
        }
        if let GraphSource::Random { n, edge_prob, gamma, .. } = self.graph {
            if n == 0 {
                return Err(invalid("n must be positive"));
            }
            if !(edge_prob > 0.0 && edge_prob <= 1.0) || !(gamma > 0.0 && gamma <= 1.0) {
                return Err(invalid("edge_prob and gamma must lie in (0, 1]"));
            }
        }
        validate_lag_coeffs(&self.lag).map_err(|e| invalid(format!("lag: {e}")))?;
        Ok(())
    }

    pub fn is_dependent(&self) -> bool {
        self.lag.len() > 1
    }

    pub fn t_max(&self) -> usize {
        *self.t_grid.last().expect("validated grid is non-empty")
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        fn join<V: ToString>(v: &[V]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        match &self.graph {
            GraphSource::Random { n, edge_prob, gamma, seed } => {
                let _ = writeln!(s, "n = {n}\nedge_prob = {edge_prob}\ngamma = {gamma}\ngraph_seed = {seed}");
            }
            GraphSource::File { path } => {
                let _ = writeln!(s, "w_file = {}", path.display());
            }
        }
        if let Some(scale) = self.spectral_scale {
            let _ = writeln!(s, "spectral_scale = {scale}");
        }
        let _ = writeln!(s, "sigma0_sq = {}", self.sigma0_sq);
        match self.profile {
            ProfileKind::Polynomial => {
                let _ = writeln!(s, "profile = polynomial\nalpha = {}", join(&self.alphas));
            }
            ProfileKind::Geometric => {
                let _ = writeln!(s, "profile = geometric\ngeometric_q = {}", join(&self.alphas));
            }
        }
        let dist = match self.distribution {
            Distribution::Gaussian => "gaussian",
            Distribution::UniformSymmetric => "uniform",
        };
        let _ = writeln!(s, "distribution = {dist}\nlag = {}", join(&self.lag));
        let _ = writeln!(s, "t_grid = {}\ntrials = {}", join(&self.t_grid), self.trials);
        match &self.x0 {
            X0Mode::Zero => s.push_str("x0 = zero\n"),
            X0Mode::Uniform01 => s.push_str("x0 = uniform01\n"),
            X0Mode::File { path } => {
                let _ = writeln!(s, "x0 = file\nx0_file = {}", path.display());
            }
        }
        let _ = writeln!(
            s,
            "c_sigma = {}\noutput_dir = {}\nbase_seed = {}\nburn_in = {}\noracle = {}\ndeviation_points = {}",
            self.c_sigma,
            self.output_dir.display(),
            self.base_seed,
            self.burn_in,
            self.oracle,
            self.deviation_points
        );
        s
    }

    /// SHA-256 of [`Self::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Named presets for the figure reproductions.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "fig1" => "n = 7\nalpha = 0, 0.5, 1, 1.5, 2, 2.443, 4\nt_min = 100\nt_max = 10000\nt_points = 16\noutput_dir = out/fig1\n",
        "fig2" => "n = 7\nalpha = 0, 1, 2, 2.443, 3, 4, 5, 6\nt_grid = 200, 500, 1000\noutput_dir = out/fig2\n",
        "fig4" => "n = 7\nalpha = 0, 0.25, 0.5, 0.75, 1\nlag = 1, -1\nt_min = 100\nt_max = 10000\nt_points = 16\noutput_dir = out/fig4\n",
        other => return Err(invalid(format!("unknown preset {other:?} (expected fig1, fig2 or fig4)"))),
    };
    ExperimentConfig::parse(text)
}
