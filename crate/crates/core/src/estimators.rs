//! Covariance estimators from secondary data: the sample covariance, the
//! classical single-array Tyler estimator and the dual-array fixed point with
//! one texture per array.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clutter::SnapshotBatch;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sqr, quad_form, BlockView, CholeskyFactor, HermitianMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Scm,
    #[serde(rename = "tyl")]
    Tyler,
}

impl EstimatorKind {
    pub fn id(&self) -> &'static str {
        match self {
            EstimatorKind::Scm => "scm",
            EstimatorKind::Tyler => "tyl",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scm" => Ok(EstimatorKind::Scm),
            "tyl" => Ok(EstimatorKind::Tyler),
            _ => Err(Error::Config(format!("unknown estimator `{s}` (expected scm or tyl)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { max_iter: 100, tol: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    Scm,
    Tyler,
    TwoTyler,
}

#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub matrix: HermitianMatrix,
    pub method: EstimateMethod,
    pub iterations: usize,
    pub final_rel_dev: f64,
    /// Relative deviation after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Per-snapshot texture estimates under the current covariance iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TextureEstimate {
    pub t1: f64,
    pub t2: f64,
    pub t12: f64,
    pub tau1: f64,
    pub tau2: f64,
}

pub fn scm_vectors(vs: &[&[C64]]) -> Result<HermitianMatrix> {
    let n = vs.first().ok_or(Error::EmptyBatch)?.len();
    let mut acc = vec![C64::new(0.0, 0.0); n * n];
    for v in vs {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        accumulate_lower(&mut acc, v, 1.0);
    }
    let k = vs.len() as f64;
    Ok(HermitianMatrix::from_lower(n, |i, j| acc[i * n + j] / k))
}

#[inline]
fn accumulate_lower(acc: &mut [C64], v: &[C64], w: f64) {
    let n = v.len();
    for i in 0..n {
        let vi = v[i] * w;
        let row = &mut acc[i * n..i * n + i + 1];
        for (a, vj) in row.iter_mut().zip(v) {
            *a += vi * vj.conj();
        }
    }
}

pub fn scm(batch: &SnapshotBatch) -> Result<CovarianceEstimate> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let vs: Vec<&[C64]> = batch.iter().collect();
    Ok(CovarianceEstimate {
        matrix: scm_vectors(&vs)?,
        method: EstimateMethod::Scm,
        iterations: 0,
        final_rel_dev: 0.0,
        trace: Vec::new(),
        converged: true,
    })
}

/// Texture estimates from the `W`-metric forms `t1`, `t2`, `t12`.
pub fn texture_from_forms(t1: f64, t2: f64, t12: f64, index: usize) -> Result<TextureEstimate> {
    let degenerate = |reason: &str| Error::DegenerateSnapshot { index, reason: reason.into() };
    if !(t1 > 0.0 && t2 > 0.0) || !(t1.is_finite() && t2.is_finite()) {
        return Err(degenerate("zero energy on one array"));
    }
    let g = (t1 * t2).sqrt();
    let s = g + t12;
    if s < -1e-12 * g {
        return Err(degenerate("negative texture estimate"));
    }
    if s <= 1e-12 * g {
        return Err(degenerate("arrays are collinear in the whitened metric"));
    }
    Ok(TextureEstimate { t1, t2, t12, tau1: (t1 / t2).sqrt() * s, tau2: (t2 / t1).sqrt() * s })
}

/// Texture step for snapshot `x` given the blocks `w` of the inverse iterate.
pub fn texture_step(x: &[C64], w: &BlockView) -> Result<TextureEstimate> {
    let m = w.m;
    if x.len() != 2 * m {
        return Err(Error::DimensionMismatch { expected: 2 * m, found: x.len() });
    }
    let (x1, x2) = x.split_at(m);
    let mf = m as f64;
    let t1 = quad_form(&w.b11, x1, x1)?.re / mf;
    let t2 = quad_form(&w.b22, x2, x2)?.re / mf;
    let t12 = quad_form(&w.b12, x1, x2)?.re / mf;
    texture_from_forms(t1, t2, t12, 0)
}

/// `(t1, t2, t12)` from the Cholesky factor of the iterate.
fn whitened_forms(f: &CholeskyFactor, x: &[C64], e1: &mut Vec<C64>, e2: &mut Vec<C64>) -> (f64, f64, f64) {
    let n = x.len();
    let m = n / 2;
    e1.clear();
    e1.extend_from_slice(&x[..m]);
    e1.resize(n, C64::new(0.0, 0.0));
    f.forward_in_place_from(e1, 0);
    e2.clear();
    e2.resize(m, C64::new(0.0, 0.0));
    e2.extend_from_slice(&x[m..]);
    f.forward_in_place_from(e2, m);
    let mf = m as f64;
    (norm_sqr(e1) / mf, norm_sqr(e2) / mf, dot(e1, e2).re / mf)
}

/// Rescale so that each diagonal block has trace `m`.
pub fn normalize_blocks(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = a.dim();
    if n % 2 != 0 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: n });
    }
    let m = n / 2;
    let tr = |r: std::ops::Range<usize>| r.map(|i| a[(i, i)].re).sum::<f64>() / m as f64;
    let (s1, s2) = (tr(0..m), tr(m..n));
    let d: Vec<f64> = (0..n).map(|i| if i < m { 1.0 / s1.sqrt() } else { 1.0 / s2.sqrt() }).collect();
    a.scale_diag(&d)
}

fn rel_dev(new: &HermitianMatrix, old: &HermitianMatrix) -> f64 {
    new.as_matrix().sub(old.as_matrix()).expect("same shape").frobenius_norm() / old.as_matrix().frobenius_norm()
}

/// Dual-array fixed point with per-array textures, started from the identity
/// and renormalized to unit mean diagonal per array at every iteration.
pub fn two_tyler(batch: &SnapshotBatch, opts: &FixedPointOptions) -> Result<CovarianceEstimate> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m = batch.m();
    let n = 2 * m;
    if batch.len() < n {
        return Err(Error::InsufficientSamples { needed: n, got: batch.len() });
    }
    let k = batch.len() as f64;
    let mut cur = HermitianMatrix::identity(n);
    let mut trace = Vec::new();
    let (mut e1, mut e2) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut y = vec![C64::new(0.0, 0.0); n];
    for it in 1..=opts.max_iter {
        let f = CholeskyFactor::new(&cur).map_err(|_| Error::RankDeficient { iteration: it - 1 })?;
        let mut acc = vec![C64::new(0.0, 0.0); n * n];
        for (idx, x) in batch.iter().enumerate() {
            let (t1, t2, t12) = whitened_forms(&f, x, &mut e1, &mut e2);
            let tex = texture_from_forms(t1, t2, t12, idx)?;
            let (w1, w2) = (1.0 / tex.tau1.sqrt(), 1.0 / tex.tau2.sqrt());
            for (j, (yj, xj)) in y.iter_mut().zip(x).enumerate() {
                *yj = xj * if j < m { w1 } else { w2 };
            }
            accumulate_lower(&mut acc, &y, 1.0);
        }
        let next = normalize_blocks(&HermitianMatrix::from_lower(n, |i, j| acc[i * n + j] / k))?;
        let dev = rel_dev(&next, &cur);
        trace.push(dev);
        cur = next;
        if dev < opts.tol {
            return Ok(estimate(cur, EstimateMethod::TwoTyler, trace, true));
        }
    }
    Err(Error::NoConvergence(Box::new(estimate(cur, EstimateMethod::TwoTyler, trace, false))))
}

/// Classical Tyler estimator on `m`-vectors, trace-normalized to `m`.
pub fn tyler(vs: &[&[C64]], opts: &FixedPointOptions) -> Result<CovarianceEstimate> {
    let m = vs.first().ok_or(Error::EmptyBatch)?.len();
    if vs.iter().any(|v| v.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, found: vs.iter().map(|v| v.len()).find(|&l| l != m).unwrap() });
    }
    if vs.len() < m {
        return Err(Error::InsufficientSamples { needed: m, got: vs.len() });
    }
    let k = vs.len() as f64;
    let mut cur = HermitianMatrix::identity(m);
    let mut trace = Vec::new();
    let mut e = Vec::with_capacity(m);
    for it in 1..=opts.max_iter {
        let f = CholeskyFactor::new(&cur).map_err(|_| Error::RankDeficient { iteration: it - 1 })?;
        let mut acc = vec![C64::new(0.0, 0.0); m * m];
        for (idx, v) in vs.iter().enumerate() {
            e.clear();
            e.extend_from_slice(v);
            f.forward_in_place_from(&mut e, 0);
            let q = norm_sqr(&e);
            if !(q > 0.0) {
                return Err(Error::DegenerateSnapshot { index: idx, reason: "zero snapshot".into() });
            }
            accumulate_lower(&mut acc, v, 1.0 / q);
        }
        let raw = HermitianMatrix::from_lower(m, |i, j| acc[i * m + j] / k);
        let next = raw.scale(m as f64 / raw.trace());
        let dev = rel_dev(&next, &cur);
        trace.push(dev);
        cur = next;
        if dev < opts.tol {
            return Ok(estimate(cur, EstimateMethod::Tyler, trace, true));
        }
    }
    Err(Error::NoConvergence(Box::new(estimate(cur, EstimateMethod::Tyler, trace, false))))
}

fn estimate(matrix: HermitianMatrix, method: EstimateMethod, trace: Vec<f64>, converged: bool) -> CovarianceEstimate {
    CovarianceEstimate {
        matrix,
        method,
        iterations: trace.len(),
        final_rel_dev: trace.last().copied().unwrap_or(0.0),
        trace,
        converged,
    }
}

/// Accept a non-converged fixed point, keeping its last iterate.
pub fn accept_last_iterate(r: Result<CovarianceEstimate>) -> Result<CovarianceEstimate> {
    match r {
        Err(Error::NoConvergence(est)) => Ok(*est),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clutter::{make_secondary, Snapshot, TextureModel};
    use crate::linalg::inverse_blocks;
    use crate::rng::{trial_rng, Domain};
    use crate::scene::{build_covariance, ArrayGeometry, CovarianceModelParams};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scm_of_single_basis_snapshot() {
        let x = Snapshot::new(vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]).unwrap();
        let b = SnapshotBatch::from_snapshots(&[x]).unwrap();
        let s = scm(&b).unwrap().matrix;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_eq!(s[(i, j)], c(want, 0.0));
            }
        }
    }

    #[test]
    fn texture_step_identity_example() {
        let w = inverse_blocks(&HermitianMatrix::identity(2)).unwrap();
        let t = texture_step(&[c(2., 0.), c(1., 0.)], &w).unwrap();
        assert!((t.tau1 - 4.0).abs() < 1e-15);
        assert!((t.tau2 - 1.0).abs() < 1e-15);
        assert_eq!(t.t12, 0.0);
    }

    #[test]
    fn zero_array_is_degenerate() {
        let w = inverse_blocks(&HermitianMatrix::identity(4)).unwrap();
        let x = [c(1., 0.), c(0., 1.), c(0., 0.), c(0., 0.)];
        assert!(matches!(texture_step(&x, &w), Err(Error::DegenerateSnapshot { .. })));
    }

    #[test]
    fn factor_forms_match_inverse_blocks() {
        let cov = build_covariance(&ArrayGeometry::new(4).unwrap(), &CovarianceModelParams::strongly_correlated()).unwrap();
        let mut rng = trial_rng(2, Domain::Null, 0);
        let b = make_secondary(&cov, &TextureModel::Gaussian, 3, &mut rng).unwrap();
        let w = cov.inverse_blocks();
        for x in b.iter() {
            let a = texture_step(x, &w).unwrap();
            let (mut e1, mut e2) = (Vec::new(), Vec::new());
            let (t1, t2, t12) = whitened_forms(cov.factor(), x, &mut e1, &mut e2);
            assert!((a.t1 - t1).abs() < 1e-9 * t1);
            assert!((a.t2 - t2).abs() < 1e-9 * t2);
            assert!((a.t12 - t12).abs() < 1e-9 * (t1 * t2).sqrt());
        }
    }

    #[test]
    fn insufficient_and_empty() {
        let cov = build_covariance(&ArrayGeometry::new(4).unwrap(), &CovarianceModelParams::baseline()).unwrap();
        let mut rng = trial_rng(2, Domain::Null, 0);
        let b = make_secondary(&cov, &TextureModel::Gaussian, 7, &mut rng).unwrap();
        assert!(matches!(two_tyler(&b, &FixedPointOptions::default()), Err(Error::InsufficientSamples { .. })));
        assert!(matches!(tyler(&[], &FixedPointOptions::default()), Err(Error::EmptyBatch)));
    }

    #[test]
    fn identical_snapshots_lose_rank() {
        let v = [c(1., 0.), c(0.5, -0.5), c(0., 1.)];
        let vs: Vec<&[C64]> = vec![&v; 6];
        let r = tyler(&vs, &FixedPointOptions::default());
        assert!(matches!(r, Err(Error::RankDeficient { .. })), "{r:?}");
    }

    #[test]
    fn tyler_single_is_normalized_and_converges() {
        let cov = build_covariance(&ArrayGeometry::new(6).unwrap(), &CovarianceModelParams::baseline()).unwrap();
        let mut rng = trial_rng(4, Domain::Null, 0);
        let b = make_secondary(&cov, &TextureModel::K { nu: 0.5 }, 60, &mut rng).unwrap();
        let est = tyler(&b.array(0), &FixedPointOptions::default()).unwrap();
        assert!(est.converged);
        assert!((est.matrix.trace() - 6.0).abs() < 1e-10);
    }

    #[test]
    fn two_tyler_recovers_normalized_truth() {
        let cov = build_covariance(&ArrayGeometry::new(8).unwrap(), &CovarianceModelParams::baseline()).unwrap();
        let mut rng = trial_rng(8, Domain::Null, 0);
        let b = make_secondary(&cov, &TextureModel::K { nu: 0.5 }, 512, &mut rng).unwrap();
        let est = two_tyler(&b, &FixedPointOptions::default()).unwrap();
        let truth = normalize_blocks(cov.matrix()).unwrap();
        let err = rel_dev(&est.matrix, &truth);
        assert!(err < 0.1, "relative error {err}");
        let blocks = est.matrix.blocks().unwrap();
        assert!((blocks.b11.trace().re - 8.0).abs() < 1e-9);
        assert!((blocks.b22.trace().re - 8.0).abs() < 1e-9);
    }

    #[test]
    fn no_convergence_carries_last_iterate() {
        let cov = build_covariance(&ArrayGeometry::new(4).unwrap(), &CovarianceModelParams::baseline()).unwrap();
        let mut rng = trial_rng(8, Domain::Null, 1);
        let b = make_secondary(&cov, &TextureModel::Gaussian, 16, &mut rng).unwrap();
        let opts = FixedPointOptions { max_iter: 3, tol: 0.0 };
        match two_tyler(&b, &opts) {
            Err(Error::NoConvergence(est)) => {
                assert_eq!(est.iterations, 3);
                assert!(!est.converged);
                assert!(est.final_rel_dev > 0.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(accept_last_iterate(two_tyler(&b, &opts)).is_ok());
    }
}
