//! Monte-Carlo experiments: threshold calibration, false-alarm curves,
//! detection curves, angle maps, fixed-point convergence traces and the
//! training-data corruption experiment.
//!
//! Every trial draws from its own counter-seeded stream, so results are
//! identical for any worker count.

use std::io::{self, Write};

use crate::clutter::{corrupt_batch, make_secondary, sample_snapshot, SnapshotBatch};
use crate::config::ExperimentConfig;
use crate::detectors::{DetectorId, GridEvaluator, PreparedCovariance, Projections, Statistic};
use crate::error::{Error, Result};
use crate::estimators::{accept_last_iterate, two_tyler, EstimatorKind};
use crate::exec::map_chunks;
use crate::linalg::C64;
use crate::rng::{trial_rng, Domain};
use crate::scene::{
    alpha_for_snr, amplitude_for_input_snr, build_covariance, steering_vector, BlockCovariance, SteeringMatrix,
};

const CHUNK: usize = 64;
/// Stream offset separating secondary data from the test snapshot of a trial.
const SECONDARY_STREAM: u64 = 1 << 40;
/// Trial index of the shared batch; no real trial reaches it.
const SHARED_BATCH: u64 = (1 << 40) - 1;
pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z99: f64 = 2.575_829_303_548_901;

/// A table written as CSV with a provenance preamble.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveResult {
    pub label: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fingerprint: String,
    pub seed: u64,
}

impl CurveResult {
    fn new(label: impl Into<String>, columns: &[&str], cfg: &ExperimentConfig) -> Self {
        CurveResult {
            label: label.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            fingerprint: cfg.fingerprint(),
            seed: cfg.seed,
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# config_fingerprint={}", self.fingerprint)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// The `ceil(N (1 - pfa))`-th order statistic of an ascending sample.
pub fn quantile_sorted(sorted: &[f64], pfa: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(pfa > 0.0 && pfa <= 1.0) {
        return Err(Error::InvalidParameter(format!("pfa must lie in (0, 1], got {pfa}")));
    }
    let n = sorted.len();
    let r = ((n as f64) * (1.0 - pfa) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[r.min(n) - 1])
}

pub fn quantile_threshold(stats: &[f64], pfa: f64) -> Result<f64> {
    let mut s = stats.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, pfa)
}

/// Fraction of `stats` strictly above `threshold`.
pub fn empirical_pfa(stats: &[f64], threshold: f64) -> f64 {
    stats.iter().filter(|&&s| s > threshold).count() as f64 / stats.len() as f64
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if k == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

/// Normal-approximation band `p +- z sqrt(p (1 - p) / n)`.
pub fn binomial_band(p: f64, n: usize, z: f64) -> (f64, f64) {
    let h = z * (p * (1.0 - p) / n as f64).sqrt();
    (p - h, p + h)
}

/// SNR at which a detection curve first reaches `pd`, interpolating linearly
/// in dB between grid points.
pub fn snr_at_pd(curve: &CurveResult, pd: f64) -> Option<f64> {
    let snr = curve.column("snr_db")?;
    let p = curve.column("pd")?;
    for i in 0..p.len().saturating_sub(1) {
        if p[i] < pd && p[i + 1] >= pd {
            let t = (pd - p[i]) / (p[i + 1] - p[i]);
            return Some(snr[i] + t * (snr[i + 1] - snr[i]));
        }
    }
    None
}

/// SNR gap `a - b` at the given detection probability.
pub fn db_gap(a: &CurveResult, b: &CurveResult, pd: f64) -> Option<f64> {
    Some(snr_at_pd(a, pd)? - snr_at_pd(b, pd)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Source {
    Known,
    Estimated(EstimatorKind),
}

struct Group {
    source: Source,
    stats: Vec<Statistic>,
    members: Vec<usize>,
}

/// Detectors grouped by the covariance they share within a trial.
struct Plan {
    cov: BlockCovariance,
    known: Option<PreparedCovariance>,
    groups: Vec<Group>,
    /// Per-group estimate from one shared batch when `reuse_secondary` is set.
    shared: Vec<Option<PreparedCovariance>>,
    n_detectors: usize,
}

impl Plan {
    fn new(cfg: &ExperimentConfig, detectors: &[DetectorId]) -> Result<Self> {
        cfg.validate()?;
        if detectors.is_empty() {
            return Err(Error::Config("detectors: at least one detector is required".into()));
        }
        let cov = build_covariance(&cfg.geometry()?, &cfg.scene)?;
        let mut groups: Vec<Group> = Vec::new();
        for (i, d) in detectors.iter().enumerate() {
            let source = d.estimator.map_or(Source::Known, Source::Estimated);
            if let Source::Estimated(e) = source {
                DetectorId::adaptive(d.statistic, e)?;
            }
            match groups.iter_mut().find(|g| g.source == source) {
                Some(g) => {
                    if !g.stats.contains(&d.statistic) {
                        g.stats.push(d.statistic);
                    }
                    g.members.push(i);
                }
                None => groups.push(Group { source, stats: vec![d.statistic], members: vec![i] }),
            }
        }
        let known = if groups.iter().any(|g| g.source == Source::Known) {
            Some(PreparedCovariance::known(&cov)?)
        } else {
            None
        };
        let mut shared: Vec<Option<PreparedCovariance>> = groups.iter().map(|_| None).collect();
        if cfg.reuse_secondary && groups.iter().any(|g| g.source != Source::Known) {
            let mut r = trial_rng(cfg.seed, Domain::Null, SECONDARY_STREAM | SHARED_BATCH);
            let batch = make_secondary(&cov, &cfg.clutter, cfg.k(), &mut r)?;
            for (g, slot) in groups.iter().zip(shared.iter_mut()) {
                if let Source::Estimated(est) = g.source {
                    *slot = Some(PreparedCovariance::estimate(&g.stats, est, &batch, &cfg.tyler)?.0);
                }
            }
        }
        Ok(Plan { cov, known, groups, shared, n_detectors: detectors.len() })
    }

    fn needs_secondary(&self) -> bool {
        self.groups.iter().any(|g| g.source != Source::Known)
    }

    /// Draw the test snapshot (and training data) of trial `t` and hand each
    /// group's evaluator and projections to `visit`.
    fn trial<F>(
        &self,
        cfg: &ExperimentConfig,
        domain: Domain,
        t: usize,
        known_ev: Option<&GridEvaluator>,
        p1s: &[Vec<C64>],
        p2s: &[Vec<C64>],
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(&Group, &GridEvaluator, &Projections) -> Result<()>,
    {
        let mut rng = trial_rng(cfg.seed, domain, t as u64);
        let z = sample_snapshot(&self.cov, &cfg.clutter, &mut rng);
        let batch = if self.needs_secondary() && !cfg.reuse_secondary {
            let mut r2 = trial_rng(cfg.seed, domain, SECONDARY_STREAM | t as u64);
            Some(make_secondary(&self.cov, &cfg.clutter, cfg.k(), &mut r2)?)
        } else {
            None
        };
        for (g, shared) in self.groups.iter().zip(&self.shared) {
            match g.source {
                Source::Known => {
                    let ev = known_ev.expect("known evaluator");
                    let p = ev.project(z.as_slice())?;
                    visit(g, ev, &p)?;
                }
                Source::Estimated(_) if shared.is_some() => {
                    let ev = GridEvaluator::new(shared.as_ref().expect("shared estimate"), p1s, p2s)?;
                    let p = ev.project(z.as_slice())?;
                    visit(g, &ev, &p)?;
                }
                Source::Estimated(est) => {
                    let b = batch.as_ref().expect("secondary data");
                    let (prep, _) = PreparedCovariance::estimate(&g.stats, est, b, &cfg.tyler)?;
                    let ev = GridEvaluator::new(&prep, p1s, p2s)?;
                    let p = ev.project(z.as_slice())?;
                    visit(g, &ev, &p)?;
                }
            }
        }
        Ok(())
    }
}

fn collect<T>(chunks: Vec<Result<T>>) -> Result<Vec<T>> {
    chunks.into_iter().collect()
}

fn parse_detector(detector: &str) -> Result<DetectorId> {
    detector.parse()
}

/// Null-hypothesis statistics for each detector at the configured target
/// direction, `n` trials drawn from `domain`.
pub fn null_statistics(cfg: &ExperimentConfig, detectors: &[DetectorId], n: usize, domain: Domain) -> Result<Vec<Vec<f64>>> {
    let plan = Plan::new(cfg, detectors)?;
    let s = cfg.steering();
    let (p1s, p2s) = (vec![s.p1.clone()], vec![s.p2.clone()]);
    let known_ev = plan.known.as_ref().map(|k| GridEvaluator::new(k, &p1s, &p2s)).transpose()?;
    let zero = [C64::new(0.0, 0.0); 2];
    let chunks = map_chunks(cfg.threads, n, CHUNK, |range| -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::with_capacity(range.len()); plan.n_detectors];
        for t in range {
            plan.trial(cfg, domain, t, known_ev.as_ref(), &p1s, &p2s, |g, ev, p| {
                for &i in &g.members {
                    out[i].push(ev.statistic(detectors[i].statistic, p, 0, 0, zero)?);
                }
                Ok(())
            })?;
        }
        Ok(out)
    });
    let mut all = vec![Vec::with_capacity(n); detectors.len()];
    for chunk in collect(chunks)? {
        for (dst, src) in all.iter_mut().zip(chunk) {
            dst.extend(src);
        }
    }
    Ok(all)
}

pub fn h0_statistics(cfg: &ExperimentConfig, detector: &str) -> Result<Vec<f64>> {
    let d = parse_detector(detector)?;
    Ok(null_statistics(cfg, &[d], cfg.n_h0, Domain::Null)?.remove(0))
}

pub fn calibrate_thresholds(cfg: &ExperimentConfig, detectors: &[DetectorId]) -> Result<Vec<f64>> {
    null_statistics(cfg, detectors, cfg.n_h0, Domain::Null)?
        .iter()
        .map(|s| quantile_threshold(s, cfg.pfa))
        .collect()
}

pub fn calibrate_threshold(cfg: &ExperimentConfig, detector: &str) -> Result<f64> {
    Ok(calibrate_thresholds(cfg, &[parse_detector(detector)?])?[0])
}

/// Log-spaced false-alarm levels from 1 down to `10 / n`, ten per decade.
pub fn pfa_levels(n: usize) -> Vec<f64> {
    let floor = 10.0 / n as f64;
    (0..).map(|k| 10f64.powf(-(k as f64) / 10.0)).take_while(|&p| p >= floor * (1.0 - 1e-12)).collect()
}

/// `threshold,pfa` rows, ascending in threshold.
pub fn pfa_curve_from_stats(cfg: &ExperimentConfig, label: &str, stats: &[f64]) -> Result<CurveResult> {
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = CurveResult::new(label, &["threshold", "pfa"], cfg);
    for p in pfa_levels(sorted.len()) {
        let thr = quantile_sorted(&sorted, p)?;
        let above = sorted.len() - sorted.partition_point(|&s| s <= thr);
        out.rows.push(vec![thr, above as f64 / sorted.len() as f64]);
    }
    out.rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    out.rows.dedup_by(|a, b| a[0] == b[0]);
    Ok(out)
}

pub fn pfa_curve(cfg: &ExperimentConfig, detector: &str) -> Result<CurveResult> {
    let stats = h0_statistics(cfg, detector)?;
    pfa_curve_from_stats(cfg, detector, &stats)
}

/// Detection curves `snr_db,pd,ci_lo,ci_hi` for several detectors sharing
/// trials. SNR is the output SNR under the true covariance, with equal
/// amplitudes on both arrays.
pub fn pd_curves(cfg: &ExperimentConfig, detectors: &[DetectorId], thresholds: &[f64]) -> Result<Vec<CurveResult>> {
    if thresholds.len() != detectors.len() {
        return Err(Error::DimensionMismatch { expected: detectors.len(), found: thresholds.len() });
    }
    let plan = Plan::new(cfg, detectors)?;
    let s = cfg.steering();
    let snrs = cfg.snr.values();
    let one = C64::new(1.0, 0.0);
    let alphas: Vec<[C64; 2]> =
        snrs.iter().map(|&v| alpha_for_snr(v, [one, one], &s, &plan.cov)).collect::<Result<_>>()?;
    let (p1s, p2s) = (vec![s.p1.clone()], vec![s.p2.clone()]);
    let known_ev = plan.known.as_ref().map(|k| GridEvaluator::new(k, &p1s, &p2s)).transpose()?;
    let chunks = map_chunks(cfg.threads, cfg.n_mc, CHUNK, |range| -> Result<Vec<Vec<u64>>> {
        let mut counts = vec![vec![0u64; snrs.len()]; plan.n_detectors];
        for t in range {
            plan.trial(cfg, Domain::Detection, t, known_ev.as_ref(), &p1s, &p2s, |g, ev, p| {
                for &i in &g.members {
                    for (j, a) in alphas.iter().enumerate() {
                        if ev.statistic(detectors[i].statistic, p, 0, 0, *a)? > thresholds[i] {
                            counts[i][j] += 1;
                        }
                    }
                }
                Ok(())
            })?;
        }
        Ok(counts)
    });
    let mut total = vec![vec![0u64; snrs.len()]; detectors.len()];
    for c in collect(chunks)? {
        for (t, c) in total.iter_mut().zip(c) {
            for (a, b) in t.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    let n = cfg.n_mc as u64;
    Ok(detectors
        .iter()
        .zip(total)
        .map(|(d, counts)| {
            let mut out = CurveResult::new(d.to_string(), &["snr_db", "pd", "ci_lo", "ci_hi"], cfg);
            for (snr, k) in snrs.iter().zip(counts) {
                let (lo, hi) = wilson_interval(k, n, Z95);
                out.rows.push(vec![*snr, k as f64 / n as f64, lo, hi]);
            }
            out
        })
        .collect())
}

pub fn pd_curve(cfg: &ExperimentConfig, detector: &str, threshold: f64) -> Result<CurveResult> {
    Ok(pd_curves(cfg, &[parse_detector(detector)?], &[threshold])?.remove(0))
}

/// Detection probability over the angle grid for a target of fixed per-sensor
/// input SNR (`map_snr_db + offset_db`), rows `theta1_deg,theta2_deg,pd`.
pub fn pd_theta_maps(
    cfg: &ExperimentConfig,
    detectors: &[DetectorId],
    thresholds: &[f64],
    offset_db: f64,
) -> Result<Vec<CurveResult>> {
    if thresholds.len() != detectors.len() {
        return Err(Error::DimensionMismatch { expected: detectors.len(), found: thresholds.len() });
    }
    let plan = Plan::new(cfg, detectors)?;
    let th = cfg.angles.values();
    let nt = th.len();
    let p1s: Vec<_> = th.iter().map(|&t| steering_vector(cfg.m, t)).collect();
    let p2s = p1s.clone();
    let a = amplitude_for_input_snr(cfg.map_snr_db + offset_db, &plan.cov);
    let alpha = [C64::new(a, 0.0), C64::new(a, 0.0)];
    let known_ev = plan.known.as_ref().map(|k| GridEvaluator::new(k, &p1s, &p2s)).transpose()?;
    let chunks = map_chunks(cfg.threads, cfg.n_mc, CHUNK, |range| -> Result<Vec<Vec<u32>>> {
        let mut counts = vec![vec![0u32; nt * nt]; plan.n_detectors];
        for t in range {
            plan.trial(cfg, Domain::AngleMap, t, known_ev.as_ref(), &p1s, &p2s, |g, ev, p| {
                for &i in &g.members {
                    let stat = detectors[i].statistic;
                    for i1 in 0..nt {
                        for i2 in 0..nt {
                            if ev.statistic(stat, p, i1, i2, alpha)? > thresholds[i] {
                                counts[i][i1 * nt + i2] += 1;
                            }
                        }
                    }
                }
                Ok(())
            })?;
        }
        Ok(counts)
    });
    let mut total = vec![vec![0u64; nt * nt]; detectors.len()];
    for c in collect(chunks)? {
        for (t, c) in total.iter_mut().zip(c) {
            for (a, b) in t.iter_mut().zip(c) {
                *a += b as u64;
            }
        }
    }
    let n = cfg.n_mc as f64;
    Ok(detectors
        .iter()
        .zip(total)
        .map(|(d, counts)| {
            let mut out = CurveResult::new(d.to_string(), &["theta1_deg", "theta2_deg", "pd"], cfg);
            for i1 in 0..nt {
                for i2 in 0..nt {
                    out.rows.push(vec![th[i1], th[i2], counts[i1 * nt + i2] as f64 / n]);
                }
            }
            out
        })
        .collect())
}

pub fn pd_theta_map(cfg: &ExperimentConfig, detector: &str, threshold: f64) -> Result<CurveResult> {
    Ok(pd_theta_maps(cfg, &[parse_detector(detector)?], &[threshold], 0.0)?.remove(0))
}

/// PD of one detector at one grid node as a function of the map SNR offset.
pub fn pd_at_node(
    cfg: &ExperimentConfig,
    detector: DetectorId,
    threshold: f64,
    theta: (f64, f64),
    offset_db: f64,
) -> Result<f64> {
    let plan = Plan::new(cfg, &[detector])?;
    let (p1s, p2s) = (vec![steering_vector(cfg.m, theta.0)], vec![steering_vector(cfg.m, theta.1)]);
    let a = amplitude_for_input_snr(cfg.map_snr_db + offset_db, &plan.cov);
    let alpha = [C64::new(a, 0.0), C64::new(a, 0.0)];
    let known_ev = plan.known.as_ref().map(|k| GridEvaluator::new(k, &p1s, &p2s)).transpose()?;
    let chunks = map_chunks(cfg.threads, cfg.n_mc, CHUNK, |range| -> Result<u64> {
        let mut k = 0;
        for t in range {
            plan.trial(cfg, Domain::AngleMap, t, known_ev.as_ref(), &p1s, &p2s, |_, ev, p| {
                if ev.statistic(detector.statistic, p, 0, 0, alpha)? > threshold {
                    k += 1;
                }
                Ok(())
            })?;
        }
        Ok(k)
    });
    Ok(collect(chunks)?.iter().sum::<u64>() as f64 / cfg.n_mc as f64)
}

/// SNR offset (dB) at which `detector` reaches `target_pd` at `theta`, found
/// by bisection on a fixed trial set. Brackets `[lo, hi]` must straddle it.
pub fn calibrate_map_offset(
    cfg: &ExperimentConfig,
    detector: DetectorId,
    threshold: f64,
    theta: (f64, f64),
    target_pd: f64,
    (mut lo, mut hi): (f64, f64),
) -> Result<f64> {
    let pd = |off| pd_at_node(cfg, detector, threshold, theta, off);
    if pd(lo)? > target_pd || pd(hi)? < target_pd {
        return Err(Error::InvalidParameter(format!("offset bracket [{lo}, {hi}] does not straddle pd {target_pd}")));
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if pd(mid)? < target_pd {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Relative deviation per iteration of the dual-array fixed point on one
/// training batch, rows `iter,rel_dev`.
pub fn convergence_trace(cfg: &ExperimentConfig) -> Result<CurveResult> {
    cfg.validate()?;
    let cov = build_covariance(&cfg.geometry()?, &cfg.scene)?;
    let mut rng = trial_rng(cfg.seed, Domain::Convergence, 0);
    let batch = make_secondary(&cov, &cfg.clutter, cfg.k(), &mut rng)?;
    let est = accept_last_iterate(two_tyler(&batch, &cfg.tyler))?;
    let mut out = CurveResult::new("2tyl", &["iter", "rel_dev"], cfg);
    out.rows = est.trace.iter().enumerate().map(|(i, d)| vec![(i + 1) as f64, *d]).collect();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSummary {
    pub peak: (usize, usize),
    pub peak_value: f64,
    pub background: f64,
    /// Peak over median.
    pub pbr: f64,
}

pub fn summarize_map(values: &[f64], n2: usize) -> MapSummary {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v > &values[best] {
            best = i;
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let background = sorted[sorted.len() / 2];
    MapSummary {
        peak: (best / n2, best % n2),
        peak_value: values[best],
        background,
        pbr: values[best] / background,
    }
}

#[derive(Clone, Debug)]
pub struct CorruptionOutcome {
    pub truth: (usize, usize),
    pub scm_clean: MapSummary,
    pub scm_corrupt: MapSummary,
    pub tyl_clean: MapSummary,
    pub tyl_corrupt: MapSummary,
    /// `theta1_deg,theta2_deg,scm_clean,scm_corrupt,tyl_clean,tyl_corrupt`
    pub maps: CurveResult,
}

/// Rao maps at the cell under test with clean and corrupted training data,
/// using the sample covariance and the dual-array fixed point.
pub fn corruption_experiment(cfg: &ExperimentConfig) -> Result<CorruptionOutcome> {
    cfg.validate()?;
    let cov = build_covariance(&cfg.geometry()?, &cfg.scene)?;
    let k = cfg.k();
    let index = cfg.corruption.index.unwrap_or(k / 2);
    let mut rng = trial_rng(cfg.seed, Domain::Corruption, 0);
    let z = sample_snapshot(&cov, &cfg.clutter, &mut rng);
    let clean = make_secondary(&cov, &cfg.clutter, k, &mut rng)?;
    let th = cfg.angles.values();
    let truth = (cfg.angles.nearest(cfg.target.theta1_deg), cfg.angles.nearest(cfg.target.theta2_deg));
    let steer = SteeringMatrix::at_angles(cfg.m, th[truth.0], th[truth.1]);
    let a = amplitude_for_input_snr(cfg.corruption.target_snr_db, &cov);
    let x: Vec<C64> = z.as_slice().iter().zip(steer.apply([C64::new(a, 0.0); 2])).map(|(u, v)| u + v).collect();
    let ac = amplitude_for_input_snr(cfg.corruption.corrupt_snr_db, &cov);
    let corrupted = corrupt_batch(&clean, &steer, [C64::new(ac, 0.0); 2], index)?;
    let map = |batch: &SnapshotBatch, est: EstimatorKind| -> Result<Vec<f64>> {
        let (prep, _) = PreparedCovariance::estimate(&[Statistic::MNmfR], est, batch, &cfg.tyler)?;
        GridEvaluator::from_angles(&prep, &th, &th)?.map(Statistic::MNmfR, &x)
    };
    let maps = [
        map(&clean, EstimatorKind::Scm)?,
        map(&corrupted, EstimatorKind::Scm)?,
        map(&clean, EstimatorKind::Tyler)?,
        map(&corrupted, EstimatorKind::Tyler)?,
    ];
    let nt = th.len();
    let mut table = CurveResult::new(
        "corruption",
        &["theta1_deg", "theta2_deg", "scm_clean", "scm_corrupt", "tyl_clean", "tyl_corrupt"],
        cfg,
    );
    for i1 in 0..nt {
        for i2 in 0..nt {
            let j = i1 * nt + i2;
            table.rows.push(vec![th[i1], th[i2], maps[0][j], maps[1][j], maps[2][j], maps[3][j]]);
        }
    }
    Ok(CorruptionOutcome {
        truth,
        scm_clean: summarize_map(&maps[0], nt),
        scm_corrupt: summarize_map(&maps[1], nt),
        tyl_clean: summarize_map(&maps[2], nt),
        tyl_corrupt: summarize_map(&maps[3], nt),
        maps: table,
    })
}
