//! Command-line front end for `delayfb-core`.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, unreadable
//! config, a delay that is not close to a multiple of `dt`), 2 when the
//! numerics refuse the request (outside the validity range, a spectral
//! pole, a state blow-up, too little data for error bars).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use delayfb_core::{
    analytic_purity, drift_steady_state, feedback_gains, simulate_ensemble, simulate_trajectory,
    spectral_report, AtomParams, Error, Mode, SimConfig, SpectralParams,
};

pub use config::{parse_run_file, RunFile};
use output::{round6, unwrap_angles, Header};

/// Largest relative change allowed when snapping `tau` onto the `dt` grid.
const TAU_ROUNDING_LIMIT: f64 = 0.01;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "delayfb",
    version,
    about = "Delayed homodyne feedback on a two-level atom"
)]
struct Cli {
    /// Read angles in degrees (converted to radians on input).
    #[arg(long, global = true)]
    degrees: bool,
    /// Omit the timestamp header so identical runs give identical files.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Flat key=value file (or a previous output file); flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary Bloch vector of the driven atom without feedback.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    SteadyState {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Markovian driving and feedback amplitudes for a target angle.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Gains {
        #[arg(long)]
        theta0: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
    /// One conditioned trajectory, written step by step.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Trajectory(TrajectoryArgs),
    /// Time-averaged states over a grid of target angles.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Locus(LocusArgs),
    /// Time-averaged purity against delay, with the short-delay law.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    PurityScan(ScanArgs),
    /// Spectral angle variance, its short-delay asymptote and the threshold delay.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Spectral {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct TrajectoryArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
    #[arg(long)]
    theta0: f64,
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Write every n-th step.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[arg(long, default_value_t = 1000.0)]
    t_sim: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Trajectories pooled per grid point.
    #[arg(long, default_value_t = 1)]
    n_traj: usize,
    /// Defaults to min(50/gamma, t_sim/2).
    #[arg(long)]
    burn_in: Option<f64>,
    /// Batch-means block length; defaults to 10/gamma.
    #[arg(long)]
    batch_length: Option<f64>,
    #[arg(long, value_parser = parse_mode, default_value = "theta")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LocusArgs {
    #[arg(long)]
    tau: f64,
    /// Number of target angles, spaced evenly over (-pi, pi].
    #[arg(long)]
    theta0_grid: usize,
    #[command(flatten)]
    run: EnsembleArgs,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 0.0)]
    theta0: f64,
    /// Comma-separated delays.
    #[arg(long, value_delimiter = ',', required = true)]
    tau_grid: Vec<f64>,
    #[command(flatten)]
    run: EnsembleArgs,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Results go to stdout or the `--out` file,
/// diagnostics to stderr.
pub fn run(args: Vec<OsString>) -> u8 {
    let args = match config::expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn angle(cli: &Cli, value: f64) -> f64 {
    if cli.degrees {
        value.to_radians()
    } else {
        value
    }
}

/// Snaps `tau` to the nearest multiple of `dt`.
pub fn round_tau(tau: f64, dt: f64) -> Result<f64, CliError> {
    if !(dt > 0.0) || !(tau >= 0.0) || !tau.is_finite() {
        return Err(CliError::Usage(format!(
            "need dt > 0 and tau >= 0, got dt={dt} tau={tau}"
        )));
    }
    let rounded = (tau / dt).round() * dt;
    if tau > 0.0 && (rounded - tau).abs() > TAU_ROUNDING_LIMIT * tau {
        return Err(CliError::Usage(format!(
            "tau = {tau} is not within 1% of a multiple of dt = {dt} (nearest {rounded})"
        )));
    }
    Ok(rounded)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::SteadyState { gamma, alpha } => {
            let v = drift_steady_state(&AtomParams::new(*gamma, *alpha)?);
            println!("{} {} {}", round6(v.x), round6(v.y), round6(v.z));
        }
        Command::Gains { theta0, gamma } => {
            if !(*gamma > 0.0) {
                return Err(CliError::Usage(format!("gamma must be > 0, got {gamma}")));
            }
            let g = feedback_gains(angle(&cli, *theta0), *gamma);
            let flag = if g.equatorial {
                " [unstable-equator]"
            } else {
                ""
            };
            println!(
                "lambda={:?} alpha={:?}{flag}",
                round6(g.lambda),
                round6(g.alpha)
            );
        }
        Command::Spectral {
            gamma,
            tau,
            omega_max,
            n_points,
        } => {
            let mut p = SpectralParams::new(*gamma, *tau);
            if let Some(w) = omega_max {
                p = p.with_omega_max(*w);
            }
            if let Some(n) = n_points {
                p = p.with_n_points(*n);
            }
            let r = spectral_report(&p)?;
            if r.near_threshold {
                eprintln!(
                    "warning: tau is within 10% of the threshold; the linearisation is unreliable"
                );
            }
            println!("variance={}", r.variance);
            println!("asymptote={}", r.asymptote);
            println!("ratio={}", r.ratio);
            println!("threshold={}", r.threshold);
        }
        Command::Trajectory(a) => trajectory(&cli, a)?,
        Command::Locus(a) => locus(&cli, a)?,
        Command::PurityScan(a) => purity_scan(&cli, a)?,
    }
    Ok(())
}

fn trajectory(cli: &Cli, a: &TrajectoryArgs) -> Result<(), CliError> {
    if a.thin == 0 {
        return Err(CliError::Usage("thin must be >= 1".into()));
    }
    let tau = round_tau(a.tau, a.dt)?;
    let theta0 = angle(cli, a.theta0);
    let c = SimConfig::new(a.mode, theta0, tau, a.dt, a.t_end)
        .with_gamma(a.gamma)
        .with_seed(a.seed);
    let rec = simulate_trajectory(&c)?;
    let thetas = unwrap_angles(&rec.thetas);

    let mut h = Header::new("trajectory", cli.deterministic);
    h.push("mode", a.mode);
    h.push("theta0", theta0);
    h.push("tau", tau);
    h.push("dt", a.dt);
    h.push("t-end", a.t_end);
    h.push("seed", a.seed);
    h.push("gamma", a.gamma);
    h.push("thin", a.thin);
    h.push("out", a.out.display());
    h.push("note.guard-activations", rec.guard_activations);
    let mut body = String::from("t,theta,x,y,z,r\n");
    for i in (0..rec.len()).step_by(a.thin) {
        let v = &rec.states[i];
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.times[i],
            thetas[i],
            v.x,
            v.y,
            v.z,
            v.norm()
        ));
    }
    output::write(&a.out, &h, &body)
}

impl EnsembleArgs {
    fn config(&self, mode: Mode, theta0: f64, tau: f64, stream_index: u64) -> SimConfig {
        let mut c = SimConfig::new(mode, theta0, tau, self.dt, self.t_sim)
            .with_gamma(self.gamma)
            .with_seed(self.seed)
            .with_stream_index(stream_index);
        if let Some(b) = self.burn_in {
            c = c.with_burn_in(b);
        }
        if let Some(b) = self.batch_length {
            c = c.with_batch_length(b);
        }
        c
    }

    fn describe(&self, h: &mut Header) {
        let c = self.config(self.mode, 0.0, 0.0, 0);
        h.push("t-sim", self.t_sim);
        h.push("dt", self.dt);
        h.push("seed", self.seed);
        h.push("gamma", self.gamma);
        h.push("n-traj", self.n_traj);
        h.push("burn-in", c.burn_in);
        h.push("batch-length", c.batch_length);
        h.push("mode", self.mode);
        h.push("out", self.out.display());
    }
}

fn locus(cli: &Cli, a: &LocusArgs) -> Result<(), CliError> {
    let n = a.theta0_grid;
    if n == 0 {
        return Err(CliError::Usage("theta0-grid must be >= 1".into()));
    }
    let r = &a.run;
    let tau = round_tau(a.tau, r.dt)?;
    let grid: Vec<f64> = (0..n)
        .map(|k| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (k + 1) as f64 / n as f64)
        .collect();
    // Stream blocks depend only on the grid index, so loci at different
    // delays see the same noise.
    let rows: Vec<Result<String, CliError>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &theta0)| {
            let c = r.config(r.mode, theta0, tau, (k * r.n_traj) as u64);
            let e = simulate_ensemble(&c, r.n_traj)?;
            Ok(format!(
                "{},{},{},{},{},{}\n",
                theta0, e.mean.x, e.mean.z, e.purity.mean, e.purity.std_error, e.n_eff
            ))
        })
        .collect();

    let mut h = Header::new("locus", cli.deterministic);
    h.push("tau", tau);
    h.push("theta0-grid", n);
    r.describe(&mut h);
    let mut body = String::from("theta0,x_avg,z_avg,purity,purity_err,n_eff\n");
    for row in rows {
        body.push_str(&row?);
    }
    output::write(&r.out, &h, &body)
}

fn purity_scan(cli: &Cli, a: &ScanArgs) -> Result<(), CliError> {
    let r = &a.run;
    let theta0 = angle(cli, a.theta0);
    let taus = a
        .tau_grid
        .iter()
        .map(|&t| round_tau(t, r.dt))
        .collect::<Result<Vec<f64>, CliError>>()?;
    let rows: Vec<Result<String, CliError>> = taus
        .par_iter()
        .enumerate()
        .map(|(k, &tau)| {
            let c = r.config(r.mode, theta0, tau, (k * r.n_traj) as u64);
            let e = simulate_ensemble(&c, r.n_traj)?;
            let analytic = analytic_purity(r.gamma, tau).unwrap_or(f64::NAN);
            Ok(format!(
                "{},{},{},{}\n",
                tau,
                e.purity.mean,
                e.purity.std_error,
                round6(analytic)
            ))
        })
        .collect();

    let mut h = Header::new("purity-scan", cli.deterministic);
    h.push("theta0", theta0);
    h.push(
        "tau-grid",
        taus.iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    r.describe(&mut h);
    let mut body = String::from("tau,purity_sim,purity_err,purity_analytic\n");
    for row in rows {
        body.push_str(&row?);
    }
    output::write(&r.out, &h, &body)
}
