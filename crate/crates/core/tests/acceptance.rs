//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use statrs::distribution::{ContinuousCDF, Normal};

use squid_emu::device::{retrap_current, sample_vth_histogram};
use squid_emu::io::{run_cli_with, InstrumentSession, Key, Server};
use squid_emu::protocols::{
    calibrate_noise_levels, dc_iv, flux_feedback, linspace, modulation_map, pulsed_iv, s_curve,
    CalibrationPlan, FeedbackParams, NoiseLevels, Ramp, SweepPlan, TrialPlan,
};
use squid_emu::reference::taylor_cos;
use squid_emu::tri::{remap, AdcCode};
use squid_emu::{EmulatorConfig, Sampling};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ua(i: f64) -> String {
    format!("{:.3} uA", i * 1e6)
}

fn defaults() -> EmulatorConfig {
    EmulatorConfig::default()
}

fn zero_noise_grid() -> Vec<f64> {
    linspace(0.0, 120e-6, 121)
}

fn index_of(grid: &[f64], i: f64) -> usize {
    grid.iter()
        .position(|x| (x - i).abs() < 1e-12)
        .expect("current on grid")
}

fn c1_retrap() -> Check {
    let i_r = retrap_current(&defaults(), 0.090);
    ensure!((i_r - 73.47e-6).abs() <= 0.01e-6, "retrap current {}", ua(i_r));
    Ok(format!("I_r = {}", ua(i_r)))
}

fn c2_zero_noise_iv() -> Check {
    let cfg = defaults();
    let ramp = Ramp::new(0.0, 120e-6, 121).map_err(|e| e.to_string())?;
    let plan = SweepPlan::new(ramp.currents(), 100, 1);
    let rec = dc_iv(&plan, &cfg).map_err(|e| e.to_string())?;
    let (up, down) = ramp.branches(&rec.fraction);
    let grid = &ramp.up;
    let switch_at = up.iter().position(|f| *f > 0.0).ok_or("up branch never switches")?;
    ensure!(switch_at == index_of(grid, 91e-6), "up branch switches at {}", ua(grid[switch_at]));
    ensure!(up[switch_at..].iter().all(|f| *f == 1.0), "up branch is not a clean step");
    let retrap_at = down.iter().rposition(|f| *f == 0.0).ok_or("down branch never retraps")?;
    ensure!(retrap_at == index_of(grid, 73e-6), "down branch retraps at {}", ua(grid[retrap_at]));
    ensure!(down[retrap_at + 1..].iter().all(|f| *f == 1.0), "down branch is not a clean step");

    let pulsed = pulsed_iv(&cfg, grid, 0.0, &TrialPlan::new(100, 1)).map_err(|e| e.to_string())?;
    let step = pulsed.fraction.iter().position(|f| *f > 0.0).ok_or("pulsed curve never switches")?;
    ensure!(step == switch_at, "pulsed curve switches at {}", ua(grid[step]));
    ensure!(
        pulsed.fraction[step..].iter().all(|f| *f == 1.0),
        "pulsed curve has more than one step"
    );
    Ok(format!(
        "switch {}, retrap {}, pulsed step {}",
        ua(grid[switch_at]),
        ua(grid[retrap_at]),
        ua(grid[step])
    ))
}

fn calibration() -> Result<(NoiseLevels, CalibrationPlan), String> {
    let ramp = Ramp::new(0.0, 120e-6, 121).map_err(|e| e.to_string())?;
    let plan = CalibrationPlan::new(ramp, 5000, 2024);
    let levels = calibrate_noise_levels(&defaults(), &plan).map_err(|e| e.to_string())?;
    Ok((levels, plan))
}

fn c3_closure(cal: &Result<(NoiseLevels, CalibrationPlan), String>) -> Check {
    let (levels, plan) = cal.as_ref().map_err(Clone::clone)?;
    let tol = 0.02 * 90e-6 * 225.0;
    let mut cfg = defaults();
    cfg.noise_sigma = levels.sigma_large;
    let rec = dc_iv(&plan.sweep_plan(), &cfg).map_err(|e| e.to_string())?;
    let gap = plan.ramp.hysteresis_gap(&rec);
    ensure!(gap < tol, "gap {:.4} mV at sigma_large {:.2} mV", gap * 1e3, levels.sigma_large * 1e3);
    Ok(format!(
        "sigma_large {:.3} mV, gap {:.4} mV < {:.4} mV",
        levels.sigma_large * 1e3,
        gap * 1e3,
        tol * 1e3
    ))
}

fn c4_s_curve() -> Check {
    let n = 10_000;
    let sigma = 5e-3;
    let mut cfg = defaults();
    cfg.noise_sigma = sigma;
    let grid = zero_noise_grid();
    let plan = TrialPlan::new(n, 4).with_sampling(Sampling::Independent);
    let sc = s_curve(&cfg, &grid, 0.0, &plan).map_err(|e| e.to_string())?;
    let law = Normal::new(0.0, sigma).unwrap();
    let max_dev = grid
        .iter()
        .zip(&sc.p_sw)
        .map(|(i, p)| (p - law.cdf(i * cfg.r_in - cfg.v_th0)).abs())
        .fold(0.0, f64::max);
    let bound = 4.0 * (0.25 / n as f64).sqrt();
    ensure!(max_dev < bound, "max deviation {max_dev:.4} >= {bound}");

    let clean = s_curve(&defaults(), &grid, 0.0, &plan).map_err(|e| e.to_string())?;
    let i_noisy = sc.crossing(0.5).ok_or("noisy curve has no 50% crossing")?;
    let i_clean = clean.crossing(0.5).ok_or("clean curve has no 50% crossing")?;
    ensure!(i_noisy <= i_clean, "noisy crossing {} above clean {}", ua(i_noisy), ua(i_clean));
    Ok(format!(
        "max |p - Phi| = {max_dev:.4} < {bound}, crossing {} <= {}",
        ua(i_noisy),
        ua(i_clean)
    ))
}

fn c5_histograms(cal: &Result<(NoiseLevels, CalibrationPlan), String>) -> Check {
    let (levels, _) = cal.as_ref().map_err(Clone::clone)?;
    let n = 100_000;
    let mut report = Vec::new();
    for sigma in [0.0, levels.sigma_medium, levels.sigma_large] {
        let mut cfg = defaults();
        cfg.noise_sigma = sigma;
        let noise = cfg.noise(5).map_err(|e| e.to_string())?;
        let h = sample_vth_histogram(&cfg, 0.0, n, &noise, Sampling::Independent).map_err(|e| e.to_string())?;
        let (mean, sd) = (h.mean(), h.std_dev());
        ensure!(
            (mean - cfg.v_th0).abs() <= 3.0 * sigma / (n as f64).sqrt(),
            "sigma {sigma}: mean {mean}"
        );
        ensure!((sd - sigma).abs() <= 0.03 * sigma, "sigma {sigma}: std {sd}");
        report.push(format!("{:.2}/{:.2} mV", sd * 1e3, sigma * 1e3));
    }
    Ok(format!("std/sigma {}", report.join(", ")))
}

fn c6_modulation_map() -> Check {
    let cfg = defaults();
    let plan = TrialPlan::new(1, 6);
    let i_sq = linspace(0.0, 120e-6, 481);
    let sq_step = i_sq[1] - i_sq[0];

    let i_dc = linspace(-2e-3, 2e-3, 161);
    let map = modulation_map(&cfg, &i_dc, &i_sq, &plan).map_err(|e| e.to_string())?;
    let contour: Vec<f64> = map
        .contour(0.5)
        .into_iter()
        .collect::<Option<_>>()
        .ok_or("a map row never reaches 50%")?;

    // period of 1 mA is 40 grid steps
    let dac_current = cfg.tri.dac_step() / cfg.r_in;
    for k in 0..contour.len() - 40 {
        let d = (contour[k] - contour[k + 40]).abs();
        ensure!(
            d <= sq_step + dac_current,
            "contour not periodic at {} mA: {}",
            i_dc[k] * 1e3,
            ua(d)
        );
    }
    let minima = (1..contour.len() - 1)
        .filter(|&k| contour[k] < contour[k - 1] && contour[k] <= contour[k + 1])
        .count();
    ensure!(minima == 4, "{minima} contour minima over +-2 mA");
    let lowest = contour.iter().copied().fold(f64::INFINITY, f64::min);
    ensure!(lowest > 0.0 && (lowest - 50e-6).abs() <= sq_step, "minimum contour {}", ua(lowest));

    // one period at 1 uA flux-bias resolution
    let period = linspace(0.0, 1e-3 - 1e-6, 1000);
    let fine = modulation_map(&cfg, &period, &i_sq, &plan).map_err(|e| e.to_string())?;
    let mut levels: Vec<i64> = fine
        .contour(0.5)
        .into_iter()
        .map(|c| c.map(|c| (c * 1e9).round() as i64))
        .collect::<Option<_>>()
        .ok_or("a fine-map row never reaches 50%")?;
    levels.sort_unstable();
    levels.dedup();
    ensure!(levels.len() <= 64, "{} distinct contour levels in one period", levels.len());
    Ok(format!(
        "4 minima, lowest contour {}, {} levels per period",
        ua(lowest),
        levels.len()
    ))
}

fn c7_tri_codes() -> Check {
    let mut prev: Option<u8> = None;
    for code in 0..=255u8 {
        // brute force: flip each of the six low bits when bit 6 is set
        let mut expect = 0u8;
        for bit in 0..6 {
            let b = (code >> bit) & 1;
            expect |= (b ^ ((code >> 6) & 1)) << bit;
        }
        let got = remap(AdcCode::new(code));
        ensure!(got == expect, "code {code}: remap {got}, expected {expect}");
        if let Some(p) = prev {
            ensure!(got.abs_diff(p) <= 1, "codes {} -> {code} jump by {}", code - 1, got.abs_diff(p));
        }
        prev = Some(got);
    }
    Ok("256 codes match, neighbour steps <= 1".into())
}

fn c8_taylor() -> Check {
    let xs = linspace(-std::f64::consts::PI, std::f64::consts::PI, 10_000);
    let mut worst = 0.0f64;
    for x in xs {
        let y = taylor_cos(x, 9).map_err(|e| e.to_string())?;
        worst = worst.max((y - x.cos()).abs());
    }
    ensure!(worst < 2e-6, "max error {worst:e}");
    Ok(format!("max error {worst:.3e}"))
}

fn c9_feedback() -> Check {
    let mut cfg = defaults();
    cfg.noise_sigma = 5e-3;
    let start = 0.25e-3;
    let step_at = 100;
    let iters = 400;
    let mut params =
        FeedbackParams::rising_branch(&cfg, start, TrialPlan::new(1000, 9)).map_err(|e| e.to_string())?;
    params.gain = 5e-5;
    params.n_iters = iters;
    params.disturbance = (0..iters).map(|k| if k >= step_at { 0.010 } else { 0.0 }).collect();
    let trace = flux_feedback(&cfg, &params).map_err(|e| e.to_string())?;
    ensure!(trace.escape.is_none(), "loop left the branch: {:?}", trace.escape);
    let p = trace.settled_p(100);
    ensure!((p - 0.5).abs() <= 0.05, "settled p_hat {p}");
    let shift = trace.settled_i_dc(100) - start;
    let expected = -(0.010 / cfg.tri.dac_step()) * cfg.tri.code_current();
    ensure!(
        (shift - expected).abs() <= cfg.tri.code_current(),
        "shift {} vs {}",
        ua(shift),
        ua(expected)
    );

    params.gain = 0.0;
    let open = flux_feedback(&cfg, &params).map_err(|e| e.to_string())?;
    ensure!(open.steps.iter().all(|s| s.i_dc == start), "zero-gain run moved i_dc");
    Ok(format!(
        "p_hat {p:.3}, shift {} (expected {}), zero gain holds",
        ua(shift),
        ua(expected)
    ))
}

fn cli_bytes(args: &[&str], path: &std::path::Path) -> Result<Vec<u8>, String> {
    let argv = ["squid-emu"]
        .into_iter()
        .chain(args.iter().copied())
        .chain(["--out", path.to_str().unwrap()]);
    let mut err = Vec::new();
    let code = run_cli_with(argv, &mut std::io::sink(), &mut err);
    ensure!(code == 0, "{args:?} exited {code}: {}", String::from_utf8_lossy(&err));
    std::fs::read(path).map_err(|e| e.to_string())
}

fn c10_determinism_and_protocol() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 5] = [
        &["s-curve", "--sigma", "5e-3", "--pulses", "500", "--seed", "11"],
        &["dc-iv", "--sigma", "0.02", "--reps", "200", "--seed", "11"],
        &["s-curve", "--sigma", "5e-3", "--pulses", "500", "--seed", "11", "--sampling", "iid"],
        &["feedback", "--sigma", "5e-3", "--iters", "150", "--seed", "11"],
        &["vth-hist", "--sigma", "5e-3", "--samples", "5000", "--seed", "11"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let a = cli_bytes(args, &dir.path().join(format!("{k}a.csv")))?;
        let b = cli_bytes(args, &dir.path().join(format!("{k}b.csv")))?;
        ensure!(a == b, "{args:?} not byte-identical");
    }

    let server = Server::bind("127.0.0.1:0", Arc::new(InstrumentSession::default))
        .and_then(|s| s.spawn())
        .map_err(|e| e.to_string())?;
    let stream = TcpStream::connect(server.local_addr()).map_err(|e| e.to_string())?;
    stream.set_read_timeout(Some(Duration::from_secs(10))).ok();
    let mut w = stream.try_clone().map_err(|e| e.to_string())?;
    let mut r = BufReader::new(stream);
    let mut ask = |line: &[u8]| -> Result<String, String> {
        w.write_all(line).and_then(|_| w.write_all(b"\n")).map_err(|e| e.to_string())?;
        let mut reply = String::new();
        r.read_line(&mut reply).map_err(|e| e.to_string())?;
        ensure!(reply.ends_with('\n'), "connection closed after {:?}", String::from_utf8_lossy(line));
        Ok(reply.trim_end().to_string())
    };

    let values = ["1500", "180", "0.1", "-0.002", "0.004", "0.025", "2000", "42", "0.0003"];
    for (key, value) in Key::ALL.iter().zip(values) {
        let set = ask(format!("SET {} {value}", key.name()).as_bytes())?;
        ensure!(set == "OK", "SET {} -> {set}", key.name());
        let got = ask(format!("GET {}", key.name()).as_bytes())?;
        ensure!(
            got.parse::<f64>().ok() == value.parse::<f64>().ok(),
            "GET {} -> {got}, set {value}",
            key.name()
        );
    }
    let malformed: [&[u8]; 12] = [
        b"",
        b"   ",
        b"FROB 1",
        b"SET",
        b"SET RIN",
        b"SET RIN abc",
        b"SET NOPE 1",
        b"SET RIN -5",
        b"GET",
        b"PULSE",
        b"SCURVE 1 0 5 5",
        b"\xff\xfe PULSE",
    ];
    for line in malformed {
        let reply = ask(line)?;
        ensure!(reply.starts_with("ERR "), "{:?} -> {reply}", String::from_utf8_lossy(line));
    }
    ensure!(ask(b"GET RIN")? == "1500", "session state changed by malformed lines");
    server.shutdown();
    Ok(format!("{} CSV runs identical, {} keys, {} malformed lines", runs.len(), Key::ALL.len(), malformed.len()))
}

fn run(n: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let t0 = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    let elapsed = t0.elapsed();
    let result = match (result, limit) {
        (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
        (r, _) => r,
    };
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n:>2} {tag} {name}: {detail} [{elapsed:.2?}]");
    result.is_ok()
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= run(1, "retrap current", None, c1_retrap);
    ok &= run(2, "zero-noise IV", Some(secs(1)), c2_zero_noise_iv);
    let mut cal = Err("calibration did not run".to_string());
    ok &= run(3, "hysteresis closure", Some(secs(60)), || {
        cal = calibration();
        c3_closure(&cal)
    });
    ok &= run(4, "S-curve law", Some(secs(30)), c4_s_curve);
    ok &= run(5, "threshold histograms", Some(secs(5)), || c5_histograms(&cal));
    ok &= run(6, "modulation map", Some(secs(60)), c6_modulation_map);
    ok &= run(7, "tri-converter codes", None, c7_tri_codes);
    ok &= run(8, "Taylor cosine", None, c8_taylor);
    ok &= run(9, "flux feedback", Some(secs(30)), c9_feedback);
    ok &= run(10, "determinism and protocol", None, c10_determinism_and_protocol);
    if !ok {
        std::process::exit(1);
    }
}
