//! `squid-emu` command line.
//!
//! Exit codes: 0 success, 2 bad arguments or configuration, 3 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use super::config_file::ExperimentConfig;
use super::csv::{fmt_float, CsvTable};
use super::server::Server;
use super::session::InstrumentSession;
use crate::device::sample_vth_histogram;
use crate::error::Error;
use crate::noise::Sampling;
use crate::protocols::{
    calibrate_noise_levels, dc_iv, flux_feedback, linspace, modulation_map, pulsed_iv, s_curve,
    CalibrationPlan, FeedbackParams, Ramp, SweepPlan, TrialPlan,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "squid-emu", version, about = "Virtual DC-SQUID emulator instrument")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Threshold noise standard deviation (V).
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Flux-bias current (A).
    #[arg(long, global = true, allow_hyphen_values = true)]
    idc: Option<f64>,
    /// Lowest bias current of the grid (A).
    #[arg(long, global = true, allow_hyphen_values = true)]
    imin: Option<f64>,
    /// Highest bias current of the grid (A).
    #[arg(long, global = true, allow_hyphen_values = true)]
    imax: Option<f64>,
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Pulses per grid point.
    #[arg(long, global = true)]
    pulses: Option<usize>,
    /// Noise sampling across trials: `iid` or `stratified`.
    #[arg(long, global = true)]
    sampling: Option<Sampling>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Averaged DC IV sweep, ramping up then down.
    DcIv {
        /// Sweep repetitions to average.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Pulse-averaged IV curve.
    PulsedIv,
    /// Switching probability versus pulse amplitude.
    SCurve,
    /// Switching probability over flux bias and pulse amplitude.
    ModMap {
        #[arg(long, default_value_t = -2e-3, allow_hyphen_values = true)]
        idc_min: f64,
        #[arg(long, default_value_t = 2e-3, allow_hyphen_values = true)]
        idc_max: f64,
        #[arg(long, default_value_t = 161)]
        idc_points: usize,
        /// Emit the 50% contour instead of the full grid.
        #[arg(long)]
        contour: bool,
    },
    /// Histogram of the comparator threshold.
    VthHist {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Closed-loop flux feedback under a step disturbance.
    Feedback {
        /// Probe pulse amplitude (A); defaults to the working point at the start bias.
        #[arg(long)]
        probe: Option<f64>,
        #[arg(long, default_value_t = 0.25e-3, allow_hyphen_values = true)]
        idc_start: f64,
        /// Bias correction per unit probability error (A).
        #[arg(long, default_value_t = 5e-5)]
        gain: f64,
        #[arg(long, default_value_t = 400)]
        iters: usize,
        /// Disturbance step added to the modulation voltage (V).
        #[arg(long, default_value_t = 0.010, allow_hyphen_values = true)]
        step: f64,
        #[arg(long, default_value_t = 100)]
        step_at: usize,
    },
    /// Find the noise level at which the DC IV hysteresis closes.
    CalibrateNoise {
        #[arg(long)]
        reps: Option<usize>,
        /// Sigma resolution of the bisection (V).
        #[arg(long, default_value_t = 1e-4)]
        resolution: f64,
    },
    /// Run the TCP instrument server.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 5025)]
        port: u16,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Range { .. } | Error::ConfigFile { .. } | Error::InvalidInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

/// Resolved settings: defaults, then the config file, then flags.
fn resolve(common: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let p = &mut cfg.protocol;
    if let Some(v) = common.seed {
        p.seed = v;
    }
    if let Some(v) = common.idc {
        p.i_dc = v;
    }
    if let Some(v) = common.imin {
        p.imin = v;
    }
    if let Some(v) = common.imax {
        p.imax = v;
    }
    if let Some(v) = common.points {
        p.points = v;
    }
    if let Some(v) = common.pulses {
        p.pulses = v;
    }
    if let Some(v) = common.sampling {
        p.sampling = v;
    }
    if let Some(v) = common.sigma {
        cfg.emulator.noise_sigma = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(table: &CsvTable, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), Failure> {
    let res = match out {
        Some(path) => std::fs::File::create(path)
            .and_then(|f| table.write_to(std::io::BufWriter::new(f)))
            .map_err(|e| format!("{}: {e}", path.display())),
        None => table.write_to(stdout).map_err(|e| e.to_string()),
    };
    res.map_err(Failure::Runtime)
}

fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let exp = resolve(&cli.common)?;
    let cfg = exp.emulator;
    let p = exp.protocol;
    let trials = TrialPlan::new(p.pulses, p.seed).with_sampling(p.sampling);
    let grid = || linspace(p.imin, p.imax, p.points);

    let table = match cli.command {
        Command::DcIv { reps } => {
            let ramp = Ramp::new(p.imin, p.imax, p.points)?;
            let plan = SweepPlan {
                currents: ramp.currents(),
                i_dc: p.i_dc,
                n_avg: reps.unwrap_or(p.reps),
                seed: p.seed,
                sampling: p.sampling,
            };
            let rec = dc_iv(&plan, &cfg)?;
            let mut t = CsvTable::new(["step", "branch", "i_sq_A", "mean_v_V", "p_sw"]);
            for k in 0..rec.len() {
                let branch = if k <= ramp.turn() { "up" } else { "down" };
                t.push(vec![
                    k.to_string(),
                    branch.into(),
                    fmt_float(rec.currents[k]),
                    fmt_float(rec.mean_v[k]),
                    fmt_float(rec.fraction[k]),
                ]);
            }
            t
        }
        Command::PulsedIv => {
            let rec = pulsed_iv(&cfg, &grid(), p.i_dc, &trials)?;
            let mut t = CsvTable::new(["i_sq_A", "mean_v_V", "p_sw"]);
            for k in 0..rec.len() {
                t.push(vec![
                    fmt_float(rec.currents[k]),
                    fmt_float(rec.mean_v[k]),
                    fmt_float(rec.fraction[k]),
                ]);
            }
            t
        }
        Command::SCurve => {
            let sc = s_curve(&cfg, &grid(), p.i_dc, &trials)?;
            let mut t = CsvTable::new(["i_sq_A", "p_sw"]);
            for (i, ps) in sc.currents.iter().zip(&sc.p_sw) {
                t.push(vec![fmt_float(*i), fmt_float(*ps)]);
            }
            t
        }
        Command::ModMap {
            idc_min,
            idc_max,
            idc_points,
            contour,
        } => {
            let map = modulation_map(&cfg, &linspace(idc_min, idc_max, idc_points), &grid(), &trials)?;
            if contour {
                let mut t = CsvTable::new(["i_dc_A", "i_sw50_A"]);
                for (i_dc, c) in map.i_dc.iter().zip(map.contour(0.5)) {
                    let cell = c.map(fmt_float).unwrap_or_else(|| "nan".into());
                    t.push(vec![fmt_float(*i_dc), cell]);
                }
                t
            } else {
                let mut t = CsvTable::new(["i_dc_A", "i_sq_A", "p_sw"]);
                for (row, i_dc) in map.i_dc.iter().enumerate() {
                    for (col, i_sq) in map.i_sq.iter().enumerate() {
                        t.push(vec![fmt_float(*i_dc), fmt_float(*i_sq), fmt_float(map.p_sw[row][col])]);
                    }
                }
                t
            }
        }
        Command::VthHist { samples, bins } => {
            let noise = cfg.noise(p.seed)?;
            let h = sample_vth_histogram(&cfg, p.i_dc, samples, &noise, p.sampling)?;
            let _ = writeln!(
                stderr,
                "mean {} V, std {} V, n {}",
                fmt_float(h.mean()),
                fmt_float(h.std_dev()),
                h.samples.len()
            );
            let mut t = CsvTable::new(["bin_lo_V", "bin_hi_V", "count"]);
            for b in h.histogram(bins) {
                t.push(vec![fmt_float(b.lo), fmt_float(b.hi), b.count.to_string()]);
            }
            t
        }
        Command::Feedback {
            probe,
            idc_start,
            gain,
            iters,
            step,
            step_at,
        } => {
            let mut params = FeedbackParams::rising_branch(&cfg, idc_start, trials)?;
            if let Some(i) = probe {
                params.i_sq_probe = i;
            }
            params.gain = gain;
            params.n_iters = iters;
            params.disturbance = (0..iters).map(|k| if k >= step_at { step } else { 0.0 }).collect();
            let trace = flux_feedback(&cfg, &params)?;
            if let Some(esc) = trace.escape {
                let _ = writeln!(
                    stderr,
                    "warning: flux bias left the branch at iteration {} ({} A); trace truncated",
                    esc.iteration,
                    fmt_float(esc.i_dc)
                );
            }
            let mut t = CsvTable::new(["iteration", "p_hat", "i_dc_A", "disturbance_V"]);
            for s in &trace.steps {
                t.push(vec![
                    s.iteration.to_string(),
                    fmt_float(s.p_hat),
                    fmt_float(s.i_dc),
                    fmt_float(s.disturbance),
                ]);
            }
            t
        }
        Command::CalibrateNoise { reps, resolution } => {
            let mut plan = CalibrationPlan::new(Ramp::new(p.imin, p.imax, p.points)?, reps.unwrap_or(p.reps), p.seed);
            plan.i_dc = p.i_dc;
            plan.sampling = p.sampling;
            plan.resolution = resolution;
            let lv = calibrate_noise_levels(&cfg, &plan)?;
            let mut t = CsvTable::new(["sigma_large_V", "sigma_medium_V", "closure_tol_V", "gap_V"]);
            t.push(vec![
                fmt_float(lv.sigma_large),
                fmt_float(lv.sigma_medium),
                fmt_float(lv.closure_tol),
                fmt_float(lv.gap),
            ]);
            t
        }
        Command::Serve { bind, port } => {
            let seed = p.seed;
            let server = Server::bind((bind.as_str(), port), Arc::new(move || InstrumentSession::new(cfg, seed)))
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            let addr = server.local_addr().map_err(|e| Failure::Runtime(e.to_string()))?;
            let _ = writeln!(stderr, "listening on {addr}");
            server.run();
            return Ok(());
        }
    };
    emit(&table, &cli.common.out, stdout)
}

/// Run with explicit output streams. `argv[0]` is the program name.
pub fn run_cli_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match run(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("squid-emu").chain(args.iter().copied());
        let code = run_cli_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["warp-drive"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["s-curve", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["s-curve", "--sigma", "-1"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["s-curve", "--pulses", "0"]).0, EXIT_USAGE);
        let (code, _, err) = run_args(&[]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("s-curve"));
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        assert_eq!(run_args(&["s-curve", "--config", "/nonexistent/x.cfg"]).0, EXIT_USAGE);
    }

    #[test]
    fn zero_resolution_is_rejected() {
        let (code, _, err) = run_args(&["calibrate-noise", "--reps", "50", "--resolution", "0"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
    }

    #[test]
    fn unwritable_output_is_runtime() {
        let (code, _, _) = run_args(&["s-curve", "--points", "3", "--pulses", "2", "--out", "/nonexistent/dir/x.csv"]);
        assert_eq!(code, EXIT_RUNTIME);
    }

    #[test]
    fn vth_hist_reports_moments() {
        let (code, out, err) = run_args(&["vth-hist", "--samples", "1000", "--sigma", "5e-3", "--bins", "10"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), 11);
        assert!(err.starts_with("mean"));
    }
}
