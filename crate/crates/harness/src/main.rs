use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use topopreserve::dynamics::{parse_trajectory_csv, uniform_initial_state};
use topopreserve::inference::ols_from_states;
use topopreserve::metrics::{r_theta, r_xi, DEFAULT_C_SIGMA};
use topopreserve::{
    derive_dependent, laplacian_weights, random_digraph, sample_independent, simulate, spectral_summary,
    validate_lag_coeffs, Distribution, NoiseScheduleF64, TopologyMatrixF64,
};
use topopreserve_harness::output::{emit_sweep, emit_timing, Timing, ALL_FORMATS};
use topopreserve_harness::{emit_outputs, preset, run_experiment, sweep_alpha, ExperimentConfig, ExperimentReport, Format, HarnessError, Result};

#[derive(Parser)]
#[command(name = "topopreserve", version, about = "Topology-inference experiments on noisy consensus dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random digraph with a spanning tree and write its adjacency and W.
    GenGraph {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.4)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Simulate one noisy trajectory and write it as CSV.
    Simulate {
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        noise: NoiseArgs,
        /// `zero` or `uniform01`.
        #[arg(long, default_value = "uniform01")]
        x0: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the OLS attack on a trajectory CSV and print the result as JSON.
    Infer {
        #[arg(long)]
        trajectory: PathBuf,
        /// True W, used to score the estimate.
        #[arg(long)]
        w: PathBuf,
    },
    /// Print the exact preservation metric for W and a noise schedule.
    Metric {
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = DEFAULT_C_SIGMA)]
        c_sigma: f64,
    },
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sweep alpha per a config file and report the maximizing alpha per T.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a named preset: fig1, fig2 or fig4.
    Reproduce {
        preset: String,
        /// Override the preset's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(clap::Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma0_sq: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// `gaussian` or `uniform`.
    #[arg(long, default_value = "gaussian")]
    distribution: String,
    /// Comma-separated lag coefficients; `1` is independent noise.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    lag: String,
}

#[derive(clap::Args)]
struct OutArgs {
    /// Overrides the config's output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated subset of csv, json, svg.
    #[arg(long, default_value = "csv,json,svg")]
    formats: String,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid(msg.into())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn print_json<V: Serialize>(value: &V) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_w(path: &Path) -> Result<TopologyMatrixF64> {
    Ok(TopologyMatrixF64::from_csv_lenient(&read(path)?)?)
}

impl NoiseArgs {
    fn schedule(&self) -> Result<NoiseScheduleF64> {
        let dist = match self.distribution.as_str() {
            "gaussian" => Distribution::Gaussian,
            "uniform" => Distribution::UniformSymmetric,
            other => return Err(config_err(format!("unknown distribution {other:?}"))),
        };
        Ok(NoiseScheduleF64::polynomial(self.sigma0_sq, self.alpha)?.with_distribution(dist))
    }

    fn lag(&self) -> Result<topopreserve::LagCoefficientsF64> {
        let coeffs: Vec<f64> = self
            .lag
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| config_err(format!("bad lag coefficient {s:?}"))))
            .collect::<Result<_>>()?;
        Ok(validate_lag_coeffs(&coeffs)?)
    }
}

impl OutArgs {
    fn formats(&self) -> Result<Vec<Format>> {
        if self.formats == "all" {
            return Ok(ALL_FORMATS.to_vec());
        }
        self.formats.split(',').map(|s| s.trim().parse()).collect()
    }
}

fn finish(cfg: &ExperimentConfig, report: &ExperimentReport, out: &OutArgs, started: Instant) -> Result<PathBuf> {
    let dir = out.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let written = emit_outputs(report, &out.formats()?, &dir)?;
    write(&dir.join("config.txt"), &cfg.to_text())?;
    emit_timing(&Timing { config_hash: cfg.hash(), wall_seconds: started.elapsed().as_secs_f64() }, &dir)?;
    for path in written {
        log::info!("wrote {}", path.display());
    }
    for fit in &report.fits {
        if let Some(f) = &fit.error {
            println!("alpha={} fitted exponent {:.4} (stderr {:.4}, R^2 {:.4})", fit.alpha, f.exponent, f.stderr, f.r_squared);
        }
    }
    let invalid = report.invalid_cells();
    if invalid > 0 {
        return Err(HarnessError::NumericalFailure { invalid, total: report.cells.len() });
    }
    Ok(dir)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph { n, edge_prob, gamma, seed, out_dir } => {
            let adj = random_digraph(n, edge_prob, seed)?;
            let w = laplacian_weights::<f64>(&adj, gamma)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| HarnessError::io(&out_dir, e))?;
            write(&out_dir.join("adjacency.txt"), &adj.to_edge_list())?;
            write(&out_dir.join("w.csv"), &w.to_csv())?;
            let spec = spectral_summary(&w)?;
            print_json(&serde_json::json!({
                "n": n,
                "edges": adj.edges().len(),
                "d_max": w.d_max(),
                "spectral_radius": spec.spectral_radius,
                "leading_is_simple": spec.leading_is_simple,
            }))
        }
        Command::Simulate { w, t, seed, noise, x0, out } => {
            let w = load_w(&w)?;
            let sched = noise.schedule()?;
            let lag = noise.lag()?;
            let x0 = match x0.as_str() {
                "zero" => nalgebra::DVector::zeros(w.n()),
                "uniform01" => uniform_initial_state(w.n(), seed),
                other => return Err(config_err(format!("unknown x0 mode {other:?}"))),
            };
            let theta = sample_independent(&sched, w.n(), t, seed)?;
            let noise = if lag.is_independent() { theta } else { derive_dependent(&theta, &lag)? };
            let csv = simulate(&w, &x0, &noise, t)?.to_csv();
            match out {
                Some(path) => write(&path, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Infer { trajectory, w } => {
            let w = load_w(&w)?;
            let table = parse_trajectory_csv::<f64>(&read(&trajectory)?)?;
            let steps = table.states.ncols();
            if steps < 2 {
                return Err(config_err("trajectory needs at least two rows"));
            }
            let t = steps - 1;
            print_json(&ols_from_states(table.states.columns(0, t), table.states.columns(1, t), &w)?)
        }
        Command::Metric { w, t, noise, c_sigma } => {
            let w = load_w(&w)?;
            let sched = noise.schedule()?;
            let lag = noise.lag()?;
            if lag.is_independent() {
                let r = r_theta(&w, &sched, t)?;
                print_json(&serde_json::json!({ "metric": "r_theta", "T": t, "value": r.value }))
            } else {
                let iv = r_xi(&w, &sched, t, &lag, c_sigma)?;
                print_json(&serde_json::json!({
                    "metric": "r_xi",
                    "T": t,
                    "center": iv.center,
                    "half_width": iv.half_width,
                    "c_sigma": iv.c_sigma,
                    "lower": iv.lower(),
                    "upper": iv.upper(),
                }))
            }
        }
        Command::Run { config, out } => {
            let started = Instant::now();
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            finish(&cfg, &report, &out, started).map(|_| ())
        }
        Command::Sweep { config, out } => {
            let started = Instant::now();
            let cfg = ExperimentConfig::load(&config)?;
            let (report, table) = sweep_alpha(&cfg)?;
            let dir = out.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
            emit_sweep(&table, &dir)?;
            for (t, a) in table.t_values.iter().zip(&table.argmax) {
                println!("T={t} argmax alpha={}", a.map(|a| a.to_string()).unwrap_or_else(|| "none".into()));
            }
            finish(&cfg, &report, &out, started).map(|_| ())
        }
        Command::Reproduce { preset: name, trials, out } => {
            let started = Instant::now();
            let mut cfg = preset(&name)?;
            if let Some(k) = trials {
                cfg.trials = k;
                cfg.validate()?;
            }
            if name == "fig2" {
                let (report, table) = sweep_alpha(&cfg)?;
                let dir = out.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
                emit_sweep(&table, &dir)?;
                for (t, a) in table.t_values.iter().zip(&table.argmax) {
                    println!("T={t} argmax alpha={}", a.map(|a| a.to_string()).unwrap_or_else(|| "none".into()));
                }
                finish(&cfg, &report, &out, started).map(|_| ())
            } else {
                let report = run_experiment(&cfg)?;
                finish(&cfg, &report, &out, started).map(|_| ())
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
