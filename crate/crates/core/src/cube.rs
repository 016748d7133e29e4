//! Ping cubes: one dual-array snapshot per range bin, stored as
//!
//! ```text
//! "PCUB" | version u32 | m u32 | n_arrays u32 (= 2) | n_range_bins u32
//! payload: n_range_bins x (m array-1 sensors, m array-2 sensors) x (re f32, im f32)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::clutter::{sample_snapshot, SnapshotBatch, Snapshot};
use crate::config::{EdgePolicy, ExperimentConfig, WindowConfig};
use crate::detectors::{DetectorId, GridEvaluator, PreparedCovariance};
use crate::error::{Error, Result};
use crate::estimators::FixedPointOptions;
use crate::exec::map_indexed;
use crate::linalg::C64;
use crate::rng::{trial_rng, Domain};
use crate::scene::{amplitude_for_input_snr, build_covariance, steering_vector, SteeringMatrix};

pub const MAGIC: &[u8; 4] = b"PCUB";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct PingCube {
    m: usize,
    n_bins: usize,
    data: Vec<C64>,
}

impl PingCube {
    pub fn new(m: usize, n_bins: usize, data: Vec<C64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Format("m must be positive".into()));
        }
        if data.len() != n_bins * 2 * m {
            return Err(Error::DimensionMismatch { expected: n_bins * 2 * m, found: data.len() });
        }
        Ok(PingCube { m, n_bins, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn snapshot(&self, bin: usize) -> &[C64] {
        let n = 2 * self.m;
        &self.data[bin * n..(bin + 1) * n]
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.m as u32, 2, self.n_bins as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for z in &self.data {
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; HEADER_LEN];
        r.read_exact(&mut head).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
            _ => Error::Io(e),
        })?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(head[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let (version, m, arrays, bins) = (word(0), word(1) as usize, word(2), word(3) as usize);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        if arrays != 2 {
            return Err(Error::Format(format!("expected 2 arrays, header says {arrays}")));
        }
        if m == 0 {
            return Err(Error::Format("m must be positive".into()));
        }
        let expected = bins
            .checked_mul(2 * m * 8)
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != expected {
            return Err(Error::Format(format!("payload is {} bytes, header implies {expected}", payload.len())));
        }
        let f = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap()) as f64;
        let data = payload.chunks_exact(8).map(|c| C64::new(f(&c[..4]), f(&c[4..]))).collect();
        PingCube::new(m, bins, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

/// Clutter cube with the configured targets; values are rounded to `f32` so
/// the in-memory cube equals what is written to disk.
pub fn synth_cube(cfg: &ExperimentConfig) -> Result<PingCube> {
    cfg.validate()?;
    let cov = build_covariance(&cfg.geometry()?, &cfg.scene)?;
    let n_bins = cfg.cube.n_bins;
    for t in &cfg.cube.targets {
        if t.bin >= n_bins {
            return Err(Error::Config(format!("cube.targets: bin {} outside 0..{n_bins}", t.bin)));
        }
    }
    let mut data = Vec::with_capacity(n_bins * 2 * cfg.m);
    for b in 0..n_bins {
        let mut rng = trial_rng(cfg.seed, Domain::Cube, b as u64);
        let mut x = sample_snapshot(&cov, &cfg.clutter, &mut rng).into_vec();
        for t in cfg.cube.targets.iter().filter(|t| t.bin == b) {
            let s = SteeringMatrix::at_angles(cfg.m, t.theta1_deg, t.theta2_deg);
            let a = C64::new(amplitude_for_input_snr(t.snr_db, &cov), 0.0);
            for (z, v) in x.iter_mut().zip(s.apply([a, a])) {
                *z += v;
            }
        }
        data.extend(x.into_iter().map(|z| C64::new(z.re as f32 as f64, z.im as f32 as f64)));
    }
    PingCube::new(cfg.m, n_bins, data)
}

/// Training bins for the cell under test `cut`, or `None` when the edge
/// policy skips it. `Shrink` takes the `k` nearest bins outside the guard
/// band, so windows near the ends become one-sided.
pub fn training_bins(cut: usize, n_bins: usize, k: usize, guard: usize, edge: EdgePolicy) -> Result<Option<Vec<usize>>> {
    if cut >= n_bins {
        return Err(Error::IndexOutOfRange { index: cut, len: n_bins });
    }
    if n_bins < k + 2 * guard + 1 {
        return Err(Error::WindowTooSmall(format!("{n_bins} bins cannot hold {k} training bins and {guard} guards per side")));
    }
    match edge {
        EdgePolicy::Skip => {
            let left = k / 2;
            let right = k - left;
            if cut < guard + left || cut + guard + right >= n_bins {
                return Ok(None);
            }
            let mut v: Vec<usize> = (cut - guard - left..cut - guard).collect();
            v.extend(cut + guard + 1..=cut + guard + right);
            Ok(Some(v))
        }
        EdgePolicy::Shrink => {
            let mut cand: Vec<usize> = (0..n_bins).filter(|&b| b.abs_diff(cut) > guard).collect();
            cand.sort_by_key(|&b| (b.abs_diff(cut), b));
            cand.truncate(k);
            cand.sort_unstable();
            Ok(Some(cand))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubeRow {
    pub range_bin: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub statistic: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubeDetections {
    pub fingerprint: String,
    pub seed: u64,
    pub rows: Vec<CubeRow>,
}

impl CubeDetections {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# config_fingerprint={}", self.fingerprint)?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "range_bin,theta1,theta2,statistic,error")?;
        for r in &self.rows {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(w, "{},{},{},{},{}", r.range_bin, r.theta1, r.theta2, r.statistic, err)?;
        }
        Ok(())
    }
}

/// Run an adaptive detector over the angle grid at each selected bin.
/// Estimation failures are reported per bin and do not stop processing.
pub fn detect_cube(
    cube: &PingCube,
    detector: DetectorId,
    window: &WindowConfig,
    theta: &[f64],
    opts: &FixedPointOptions,
    bins: Option<&[usize]>,
    threads: usize,
) -> Result<Vec<CubeRow>> {
    let estimator = detector
        .estimator
        .ok_or_else(|| Error::Config(format!("detector {detector} needs the true covariance; pick an adaptive detector")))?;
    if theta.is_empty() {
        return Err(Error::Config("theta grid is empty".into()));
    }
    let m = cube.m();
    let k = window.k.unwrap_or(4 * m);
    let needed = if detector.statistic.needs_full() { 2 * m } else { m };
    if k < needed {
        return Err(Error::WindowTooSmall(format!("{k} training bins, {detector} needs at least {needed}")));
    }
    let all: Vec<usize> = (0..cube.n_bins()).collect();
    let bins = bins.unwrap_or(&all);
    for &b in bins {
        if b >= cube.n_bins() {
            return Err(Error::IndexOutOfRange { index: b, len: cube.n_bins() });
        }
    }
    let windows: Vec<(usize, Vec<usize>)> = bins
        .iter()
        .map(|&b| Ok(training_bins(b, cube.n_bins(), k, window.guard, window.edge)?.map(|w| (b, w))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let p: Vec<Vec<C64>> = theta.iter().map(|&t| steering_vector(m, t)).collect();
    let per_bin = map_indexed(threads, windows.len(), |i| {
        let (cut, train) = &windows[i];
        let fail = |e: Error| {
            let mut rows = Vec::with_capacity(theta.len() * theta.len());
            for &t1 in theta {
                for &t2 in theta {
                    rows.push(CubeRow { range_bin: *cut, theta1: t1, theta2: t2, statistic: f64::NAN, error: Some(e.to_string()) });
                }
            }
            rows
        };
        let run = || -> Result<Vec<CubeRow>> {
            let snaps: Vec<Snapshot> =
                train.iter().map(|&b| Snapshot::new(cube.snapshot(b).to_vec())).collect::<Result<_>>()?;
            let batch = SnapshotBatch::from_snapshots(&snaps)?;
            let (prep, _) = PreparedCovariance::estimate(&[detector.statistic], estimator, &batch, opts)?;
            let ev = GridEvaluator::new(&prep, &p, &p)?;
            let proj = ev.project(cube.snapshot(*cut))?;
            let zero = [C64::new(0.0, 0.0); 2];
            let mut rows = Vec::with_capacity(theta.len() * theta.len());
            for (i1, &t1) in theta.iter().enumerate() {
                for (i2, &t2) in theta.iter().enumerate() {
                    let (statistic, error) = match ev.statistic(detector.statistic, &proj, i1, i2, zero) {
                        Ok(v) => (v, None),
                        Err(e) => (f64::NAN, Some(e.to_string())),
                    };
                    rows.push(CubeRow { range_bin: *cut, theta1: t1, theta2: t2, statistic, error });
                }
            }
            Ok(rows)
        };
        run().unwrap_or_else(fail)
    });
    Ok(per_bin.into_iter().flatten().collect())
}
