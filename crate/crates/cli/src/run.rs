//! Subcommand dispatch and artifact writing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crossdetect_core::config::{CubeTarget, EdgePolicy, ExperimentConfig};
use crossdetect_core::cube::{detect_cube, synth_cube, CubeDetections, PingCube};
use crossdetect_core::detectors::{DetectorId, Statistic};
use crossdetect_core::estimators::EstimatorKind;
use crossdetect_core::harness::{
    calibrate_thresholds, convergence_trace, corruption_experiment, null_statistics, pd_curves, pd_theta_maps,
    pfa_curve_from_stats, snr_at_pd, CurveResult, MapSummary,
};
use crossdetect_core::rng::Domain;
use crossdetect_core::{Error, Result};

use crate::config::resolve;
use crate::{Cli, Command};

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = resolve(&cli.common)?;
    let out = cli.common.out.clone();
    let name = match &cli.command {
        Command::Pfa => "pfa",
        Command::PdSnr => "pd-snr",
        Command::PdTheta { .. } => "pd-theta",
        Command::Calibrate => "calibrate",
        Command::Converge => "converge",
        Command::CorruptExp { .. } => "corrupt-exp",
        Command::SynthCube { .. } => "synth-cube",
        Command::DetectCube { .. } => "detect-cube",
    };
    apply_command_overrides(&mut cfg, &cli.command)?;
    cfg.validate()?;
    fs::create_dir_all(&out)?;
    write_resolved(&cfg, &out.join(format!("{name}.config.toml")))?;
    match &cli.command {
        Command::Pfa => pfa(&cfg, &out),
        Command::PdSnr => pd_snr(&cfg, &out),
        Command::PdTheta { offset_db } => pd_theta(&cfg, &out, *offset_db),
        Command::Calibrate => calibrate(&cfg, &out),
        Command::Converge => converge(&cfg, &out),
        Command::CorruptExp { .. } => corrupt(&cfg, &out),
        Command::SynthCube { output, .. } => synth(&cfg, output.clone().unwrap_or_else(|| out.join("cube.pcub"))),
        Command::DetectCube { cube, estimator, bins, .. } => detect(&cfg, &out, cube, estimator.as_deref(), bins),
    }
}

fn apply_command_overrides(cfg: &mut ExperimentConfig, cmd: &Command) -> Result<()> {
    match cmd {
        Command::CorruptExp { index, target_snr_db, corrupt_snr_db } => {
            if index.is_some() {
                cfg.corruption.index = *index;
            }
            if let Some(v) = target_snr_db {
                cfg.corruption.target_snr_db = *v;
            }
            if let Some(v) = corrupt_snr_db {
                cfg.corruption.corrupt_snr_db = *v;
            }
        }
        Command::SynthCube { bins, inject, no_targets, .. } => {
            if let Some(b) = bins {
                cfg.cube.n_bins = *b;
            }
            if *no_targets {
                cfg.cube.targets.clear();
            } else if !inject.is_empty() {
                cfg.cube.targets = inject.iter().map(|s| parse_target(s)).collect::<Result<_>>()?;
            }
        }
        Command::DetectCube { window_k, guard, edge, .. } => {
            if window_k.is_some() {
                cfg.window.k = *window_k;
            }
            if let Some(g) = guard {
                cfg.window.guard = *g;
            }
            if let Some(e) = edge {
                cfg.window.edge = match e.as_str() {
                    "shrink" => EdgePolicy::Shrink,
                    "skip" => EdgePolicy::Skip,
                    _ => return Err(Error::Config(format!("--edge {e}: expected shrink or skip"))),
                };
            }
        }
        _ => {}
    }
    Ok(())
}

fn parse_target(s: &str) -> Result<CubeTarget> {
    let bad = || Error::Config(format!("--inject {s}: expected bin:theta1:theta2:snr_db"));
    let parts: Vec<&str> = s.split(':').collect();
    let [b, t1, t2, snr] = parts[..] else {
        return Err(bad());
    };
    let f = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    Ok(CubeTarget { bin: b.trim().parse().map_err(|_| bad())?, theta1_deg: f(t1)?, theta2_deg: f(t2)?, snr_db: f(snr)? })
}

fn write_resolved(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let text = toml::to_string(cfg).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(path, text)?;
    Ok(())
}

fn save(curve: &CurveResult, path: PathBuf) -> Result<()> {
    let mut f = fs::File::create(&path)?;
    curve.write_csv(&mut f)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}"))
}

fn pfa(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let dets = cfg.detector_ids()?;
    let stats = null_statistics(cfg, &dets, cfg.n_h0, Domain::Null)?;
    for (d, s) in dets.iter().zip(&stats) {
        save(&pfa_curve_from_stats(cfg, &d.to_string(), s)?, out.join(format!("pfa_{d}.csv")))?;
    }
    Ok(())
}

fn pd_snr(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let dets = cfg.detector_ids()?;
    let thr = calibrate_thresholds(cfg, &dets)?;
    let curves = pd_curves(cfg, &dets, &thr)?;
    for (d, c) in dets.iter().zip(&curves) {
        save(c, out.join(format!("pd_snr_{d}.csv")))?;
    }
    let first = snr_at_pd(&curves[0], 0.8);
    println!("{:<16} {:>12} {:>10} {:>10} {:>12}", "detector", "threshold", "snr@pd0.5", "snr@pd0.8", "gap@pd0.8");
    for ((d, c), t) in dets.iter().zip(&curves).zip(&thr) {
        let s8 = snr_at_pd(c, 0.8);
        let gap = s8.zip(first).map(|(a, b)| a - b);
        println!("{:<16} {:>12.5e} {:>10} {:>10} {:>12}", d.to_string(), t, fmt_opt(snr_at_pd(c, 0.5)), fmt_opt(s8), fmt_opt(gap));
    }
    Ok(())
}

fn pd_theta(cfg: &ExperimentConfig, out: &Path, offset_db: f64) -> Result<()> {
    let dets = cfg.detector_ids()?;
    let thr = calibrate_thresholds(cfg, &dets)?;
    let maps = pd_theta_maps(cfg, &dets, &thr, offset_db)?;
    for (d, m) in dets.iter().zip(&maps) {
        save(m, out.join(format!("pd_theta_{d}.csv")))?;
        let pd = m.column("pd").unwrap_or_default();
        let (lo, hi) = pd.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!("{d}: pd range [{lo:.3}, {hi:.3}] at {:.2} dB", cfg.map_snr_db + offset_db);
    }
    Ok(())
}

fn calibrate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let dets = cfg.detector_ids()?;
    let thr = calibrate_thresholds(cfg, &dets)?;
    let path = out.join("thresholds.csv");
    let mut f = fs::File::create(&path)?;
    writeln!(f, "# config_fingerprint={}", cfg.fingerprint())?;
    writeln!(f, "# seed={}", cfg.seed)?;
    writeln!(f, "detector,pfa,threshold")?;
    for (d, t) in dets.iter().zip(&thr) {
        writeln!(f, "{d},{},{t}", cfg.pfa)?;
        println!("{:<16} {t:.6e}", d.to_string());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn converge(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let trace = convergence_trace(cfg)?;
    if let Some(last) = trace.rows.last() {
        println!("2TYL: {} iterations, final rel_dev {:.3e}", last[0], last[1]);
    }
    save(&trace, out.join("convergence.csv"))
}

fn summary_line(name: &str, s: &MapSummary, th: &[f64]) -> String {
    format!("{name:<12} peak ({:>6.1}, {:>6.1})  peak/median {:>8.2}", th[s.peak.0], th[s.peak.1], s.pbr)
}

fn corrupt(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let o = corruption_experiment(cfg)?;
    let th = cfg.angles.values();
    println!("truth        ({:>6.1}, {:>6.1})", th[o.truth.0], th[o.truth.1]);
    for (n, s) in [("scm clean", &o.scm_clean), ("scm corrupt", &o.scm_corrupt), ("tyl clean", &o.tyl_clean), ("tyl corrupt", &o.tyl_corrupt)] {
        println!("{}", summary_line(n, s, &th));
    }
    save(&o.maps, out.join("corruption.csv"))
}

fn synth(cfg: &ExperimentConfig, path: PathBuf) -> Result<()> {
    let cube = synth_cube(cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    cube.save(&path)?;
    println!("wrote {} (m = {}, {} bins, {} targets, synthetic)", path.display(), cube.m(), cube.n_bins(), cfg.cube.targets.len());
    Ok(())
}

fn detector_for_cube(cfg: &ExperimentConfig, estimator: Option<&str>) -> Result<DetectorId> {
    let first = cfg.detectors.first().ok_or_else(|| Error::Config("no detector given".into()))?;
    match estimator {
        None => first.parse(),
        Some(e) => {
            let est: EstimatorKind = e.parse()?;
            DetectorId::adaptive(Statistic::parse_base(first)?, est)
        }
    }
}

fn detect(cfg: &ExperimentConfig, out: &Path, cube_path: &Path, estimator: Option<&str>, bins: &[usize]) -> Result<()> {
    let det = detector_for_cube(cfg, estimator)?;
    let cube = PingCube::load(cube_path)?;
    let theta = cfg.angles.values();
    let sel = (!bins.is_empty()).then_some(bins);
    let rows = detect_cube(&cube, det, &cfg.window, &theta, &cfg.tyler, sel, cfg.threads)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if let Some(best) = rows.iter().filter(|r| r.statistic.is_finite()).max_by(|a, b| a.statistic.total_cmp(&b.statistic)) {
        println!(
            "{det}: max {:.4e} at bin {} ({:.1}, {:.1}); {} rows, {failed} with errors",
            best.statistic,
            best.range_bin,
            best.theta1,
            best.theta2,
            rows.len()
        );
    }
    let path = out.join("detections.csv");
    let mut f = fs::File::create(&path)?;
    CubeDetections { fingerprint: cfg.fingerprint(), seed: cfg.seed, rows }.write_csv(&mut f)?;
    println!("wrote {}", path.display());
    Ok(())
}
