//! Detection statistics for the cross array.
//!
//! Every dual-array statistic is a function of a handful of inner products in
//! the whitened domain: with `M = L L^H`, `e1 = L^{-1}[x1; 0]`,
//! `e2 = L^{-1}[0; x2]`, `y1 = L^{-1}[p1; 0]` and `y2 = L^{-1}[0; p2]`, the
//! blocks of `M^{-1}` and of the projector `M^{-1} P (P^H M^{-1} P)^{-1} P^H M^{-1}`
//! only enter through `<e_i, e_j>`, `<y_i, e_j>` and `<y_i, y_j>`. Single-array
//! statistics use the factor of the corresponding diagonal block instead.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::clutter::SnapshotBatch;
use crate::error::{Error, Result};
use crate::estimators::{self, accept_last_iterate, EstimatorKind, FixedPointOptions};
use crate::linalg::{dot, norm_sqr, CholeskyFactor, HermitianMatrix, C64};
use crate::scene::{steering_vector, BlockCovariance, SteeringMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistic {
    Nmf1,
    Nmf2,
    MimoMf,
    MNmfG,
    MNmfR,
    MNmfI,
    Ace,
}

impl Statistic {
    pub fn needs_full(&self) -> bool {
        matches!(self, Statistic::MimoMf | Statistic::MNmfG | Statistic::MNmfR | Statistic::Ace)
    }

    pub fn needs_array(&self, i: usize) -> bool {
        match self {
            Statistic::Nmf1 => i == 0,
            Statistic::Nmf2 => i == 1,
            Statistic::MNmfI => true,
            _ => false,
        }
    }

    fn base_id(&self) -> &'static str {
        match self {
            Statistic::Nmf1 => "nmf1",
            Statistic::Nmf2 => "nmf2",
            Statistic::MimoMf => "mimo-mf",
            Statistic::MNmfG => "m-nmf-g",
            Statistic::MNmfR => "m-nmf-r",
            Statistic::MNmfI => "m-nmf-i",
            Statistic::Ace => "ace",
        }
    }

    pub fn parse_base(s: &str) -> Result<Self> {
        Ok(match s {
            "nmf1" => Statistic::Nmf1,
            "nmf2" => Statistic::Nmf2,
            "mimo-mf" => Statistic::MimoMf,
            "m-nmf-g" => Statistic::MNmfG,
            "m-nmf-r" => Statistic::MNmfR,
            "m-nmf-i" => Statistic::MNmfI,
            "ace" => Statistic::Ace,
            _ => return Err(Error::Config(format!("unknown detector `{s}`"))),
        })
    }
}

/// A statistic together with the covariance it runs on: the true one
/// (`estimator = None`) or an estimate from secondary data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DetectorId {
    pub statistic: Statistic,
    pub estimator: Option<EstimatorKind>,
}

impl DetectorId {
    pub const fn known(statistic: Statistic) -> Self {
        DetectorId { statistic, estimator: None }
    }

    pub fn adaptive(statistic: Statistic, estimator: EstimatorKind) -> Result<Self> {
        if statistic == Statistic::MimoMf && estimator == EstimatorKind::Tyler {
            return Err(Error::IncompatiblePair { detector: "mimo-amf".into(), estimator: "tyl".into() });
        }
        Ok(DetectorId { statistic, estimator: Some(estimator) })
    }

    /// The sixteen standard identifiers.
    pub fn all() -> Vec<DetectorId> {
        STANDARD_IDS.iter().map(|s| s.parse().expect("standard id")).collect()
    }
}

const STANDARD_IDS: [&str; 16] = [
    "nmf1",
    "nmf2",
    "anmf1-scm",
    "anmf1-tyl",
    "anmf2-scm",
    "anmf2-tyl",
    "mimo-mf",
    "mimo-amf-scm",
    "m-nmf-g",
    "m-nmf-r",
    "m-nmf-i",
    "ace",
    "m-anmf-g-scm",
    "m-anmf-g-tyl",
    "m-anmf-r-scm",
    "m-anmf-r-tyl",
];

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(est) = self.estimator else {
            return f.write_str(self.statistic.base_id());
        };
        let stem = match self.statistic {
            Statistic::Nmf1 => "anmf1",
            Statistic::Nmf2 => "anmf2",
            Statistic::MimoMf => "mimo-amf",
            Statistic::MNmfG => "m-anmf-g",
            Statistic::MNmfR => "m-anmf-r",
            Statistic::MNmfI => "m-anmf-i",
            Statistic::Ace => "aace",
        };
        write!(f, "{stem}-{est}")
    }
}

fn unknown_detector(s: &str) -> Error {
    Error::Config(format!("unknown detector `{s}`; valid ids: {}", STANDARD_IDS.join(", ")))
}

impl FromStr for DetectorId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(stat) = Statistic::parse_base(s) {
            return Ok(DetectorId::known(stat));
        }
        let (stem, est) = s
            .rsplit_once('-')
            .ok_or_else(|| unknown_detector(s))?;
        let estimator: EstimatorKind = est.parse().map_err(|_| unknown_detector(s))?;
        let statistic = match stem {
            "anmf1" => Statistic::Nmf1,
            "anmf2" => Statistic::Nmf2,
            "mimo-amf" => Statistic::MimoMf,
            "m-anmf-g" => Statistic::MNmfG,
            "m-anmf-r" => Statistic::MNmfR,
            "m-anmf-i" => Statistic::MNmfI,
            "aace" => Statistic::Ace,
            _ => return Err(unknown_detector(s)),
        };
        DetectorId::adaptive(statistic, estimator)
    }
}

/// Inner products for one array and its own diagonal-block factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrayForms {
    pub array: usize,
    /// `x^H R^{-1} x`
    pub xx: f64,
    /// `p^H R^{-1} x`
    pub px: C64,
    /// `p^H R^{-1} p`
    pub pp: f64,
}

/// Whitened inner products for the stacked snapshot and the two steering columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualForms {
    pub m: usize,
    pub e11: f64,
    pub e22: f64,
    pub e12: C64,
    /// `ye[i][j] = <y_i, e_j>`
    pub ye: [[C64; 2]; 2],
    /// `P^H M^{-1} P`
    pub gram: [[C64; 2]; 2],
}

/// Residual-based scale estimates under the alternative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum H1Fit {
    Residual { b1: f64, b2: f64, b12: f64, sigma1_sq: f64, sigma2_sq: f64 },
    PerfectFit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaEstimates {
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub h1: H1Fit,
}

fn inv2(g: &[[C64; 2]; 2]) -> Result<[[C64; 2]; 2]> {
    let (g00, g11) = (g[0][0].re, g[1][1].re);
    let det = g00 * g11 - g[0][1].norm_sqr();
    if !(det > 1e-12 * g00 * g11) || !det.is_finite() {
        return Err(Error::SingularGram);
    }
    Ok([[C64::new(g11 / det, 0.0), -g[0][1] / det], [-g[1][0] / det, C64::new(g00 / det, 0.0)]])
}

/// `u^H G v` for a 2x2 `G`.
#[inline]
fn qf2(g: &[[C64; 2]; 2], u: [C64; 2], v: [C64; 2]) -> C64 {
    let gv0 = g[0][0] * v[0] + g[0][1] * v[1];
    let gv1 = g[1][0] * v[0] + g[1][1] * v[1];
    u[0].conj() * gv0 + u[1].conj() * gv1
}

/// `(a1, a2, a12)` and the scale solution `sqrt(a1 a2) + a12 > 0`.
fn h0_terms(f: &DualForms) -> Result<(f64, f64, f64, f64)> {
    let mf = f.m as f64;
    let (a1, a2, a12) = (f.e11 / mf, f.e22 / mf, f.e12.re / mf);
    let floor = 1e-30 * (a1 + a2);
    if !(a1 > floor) {
        return Err(Error::NoiseFloorZero { array: 1 });
    }
    if !(a2 > floor) {
        return Err(Error::NoiseFloorZero { array: 2 });
    }
    let g = (a1 * a2).sqrt();
    let s = g + a12;
    if !(s > 1e-12 * g) {
        return Err(Error::DegenerateSnapshot { index: 0, reason: "arrays are collinear in the whitened metric".into() });
    }
    Ok((a1, a2, a12, s))
}

pub fn glrt_sigmas_from_forms(f: &DualForms) -> Result<SigmaEstimates> {
    let (a1, a2, a12, s0) = h0_terms(f)?;
    let sigma1_sq = (a1 / a2).sqrt() * s0;
    let sigma2_sq = (a2 / a1).sqrt() * s0;
    let gi = inv2(&f.gram)?;
    let r1 = [f.ye[0][0], f.ye[1][0]];
    let r2 = [f.ye[0][1], f.ye[1][1]];
    let mf = f.m as f64;
    let b1 = a1 - qf2(&gi, r1, r1).re / mf;
    let b2 = a2 - qf2(&gi, r2, r2).re / mf;
    let b12 = a12 - qf2(&gi, r1, r2).re / mf;
    let tiny = 1e-13;
    let h1 = if b1 <= tiny * a1 || b2 <= tiny * a2 {
        H1Fit::PerfectFit
    } else {
        let g1 = (b1 * b2).sqrt();
        let s1 = g1 + b12;
        if s1 <= tiny * g1 {
            H1Fit::PerfectFit
        } else {
            H1Fit::Residual { b1, b2, b12, sigma1_sq: (b1 / b2).sqrt() * s1, sigma2_sq: (b2 / b1).sqrt() * s1 }
        }
    };
    Ok(SigmaEstimates { a1, a2, a12, sigma1_sq, sigma2_sq, h1 })
}

/// Generalized likelihood ratio, reported as its `2m`-th root
/// `sigma10 sigma20 / (sigma11 sigma21)`.
pub fn m_nmf_g_from_forms(f: &DualForms) -> Result<f64> {
    let s = glrt_sigmas_from_forms(f)?;
    match s.h1 {
        H1Fit::PerfectFit => Ok(f64::INFINITY),
        H1Fit::Residual { b1, b2, b12, .. } => {
            let num = (s.a1 * s.a2).sqrt() + s.a12;
            let den = (b1 * b2).sqrt() + b12;
            Ok(num / den)
        }
    }
}

/// Rao score statistic `2 x^H C0^{-1} P (P^H C0^{-1} P)^{-1} P^H C0^{-1} x`
/// with `C0 = S0 M S0` at the null-hypothesis scale estimates. Since
/// `S0^{-1} P = P Z0^{-1}`, it reduces to `2 w^H (P^H M^{-1} P)^{-1} w` with
/// `w = r1 / sigma10 + r2 / sigma20`.
pub fn m_nmf_r_from_forms(f: &DualForms) -> Result<f64> {
    let (a1, a2, _, s0) = h0_terms(f)?;
    let s1 = ((a1 / a2).sqrt() * s0).sqrt();
    let s2 = ((a2 / a1).sqrt() * s0).sqrt();
    let gi = inv2(&f.gram)?;
    let w = [f.ye[0][0] / s1 + f.ye[0][1] / s2, f.ye[1][0] / s1 + f.ye[1][1] / s2];
    Ok(2.0 * qf2(&gi, w, w).re)
}

pub fn mimo_mf_from_forms(f: &DualForms) -> Result<f64> {
    let gi = inv2(&f.gram)?;
    let r = [f.ye[0][0] + f.ye[0][1], f.ye[1][0] + f.ye[1][1]];
    Ok(qf2(&gi, r, r).re)
}

pub fn ace_from_forms(f: &DualForms) -> Result<f64> {
    let xx = f.e11 + f.e22 + 2.0 * f.e12.re;
    if !(xx > 0.0) {
        return Err(Error::NoiseFloorZero { array: 0 });
    }
    Ok(mimo_mf_from_forms(f)? / xx)
}

pub fn nmf_from_forms(f: &ArrayForms) -> Result<f64> {
    if !(f.xx > 0.0) {
        return Err(Error::NoiseFloorZero { array: f.array + 1 });
    }
    if !(f.pp > 0.0) {
        return Err(Error::SingularGram);
    }
    Ok((f.px.norm_sqr() / (f.pp * f.xx)).min(1.0))
}

/// Product of the two single-array ratios, reported as its `2m`-th root
/// `prod_i (1 - nmf_i)^{-1/2}`.
pub fn m_nmf_i_from_forms(f: &[ArrayForms; 2]) -> Result<f64> {
    let mut v = 1.0;
    for a in f {
        let n = nmf_from_forms(a)?;
        if n >= 1.0 - 1e-15 {
            return Ok(f64::INFINITY);
        }
        v /= (1.0 - n).sqrt();
    }
    Ok(v)
}

fn split_whiten(factor: &CholeskyFactor, x: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let n = x.len();
    let m = n / 2;
    let mut e1 = x[..m].to_vec();
    e1.resize(n, C64::new(0.0, 0.0));
    factor.forward_in_place_from(&mut e1, 0);
    let mut e2 = vec![C64::new(0.0, 0.0); m];
    e2.extend_from_slice(&x[m..]);
    factor.forward_in_place_from(&mut e2, m);
    (e1, e2)
}

pub fn dual_forms(x: &[C64], steering: &SteeringMatrix, factor: &CholeskyFactor) -> Result<DualForms> {
    let n = factor.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    if 2 * steering.m() != n {
        return Err(Error::DimensionMismatch { expected: n / 2, found: steering.m() });
    }
    let (e1, e2) = split_whiten(factor, x);
    let (y1, y2) = split_whiten(factor, &[steering.p1.as_slice(), &steering.p2].concat());
    Ok(DualForms {
        m: n / 2,
        e11: norm_sqr(&e1),
        e22: norm_sqr(&e2),
        e12: dot(&e1, &e2),
        ye: [[dot(&y1, &e1), dot(&y1, &e2)], [dot(&y2, &e1), dot(&y2, &e2)]],
        gram: [[dot(&y1, &y1), dot(&y1, &y2)], [dot(&y2, &y1), dot(&y2, &y2)]],
    })
}

pub fn array_forms(x: &[C64], p: &[C64], factor: &CholeskyFactor, array: usize) -> Result<ArrayForms> {
    let m = factor.dim();
    for len in [x.len(), p.len()] {
        if len != m {
            return Err(Error::DimensionMismatch { expected: m, found: len });
        }
    }
    let f = factor.forward(x);
    let h = factor.forward(p);
    Ok(ArrayForms { array, xx: norm_sqr(&f), px: dot(&h, &f), pp: norm_sqr(&h) })
}

/// Normalized matched filter on one array with its own covariance.
pub fn nmf(x: &[C64], p: &[C64], cov: &HermitianMatrix) -> Result<f64> {
    nmf_from_forms(&array_forms(x, p, &CholeskyFactor::new(cov)?, 0)?)
}

pub fn glrt_sigmas(x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<SigmaEstimates> {
    glrt_sigmas_from_forms(&dual_forms(x, steering, cov.factor())?)
}

pub fn m_nmf_g(x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<f64> {
    m_nmf_g_from_forms(&dual_forms(x, steering, cov.factor())?)
}

pub fn m_nmf_r(x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<f64> {
    m_nmf_r_from_forms(&dual_forms(x, steering, cov.factor())?)
}

pub fn mimo_mf(x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<f64> {
    mimo_mf_from_forms(&dual_forms(x, steering, cov.factor())?)
}

pub fn ace(x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<f64> {
    ace_from_forms(&dual_forms(x, steering, cov.factor())?)
}

pub fn m_nmf_i(x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<f64> {
    let m = cov.m();
    if x.len() != 2 * m {
        return Err(Error::DimensionMismatch { expected: 2 * m, found: x.len() });
    }
    let f1 = CholeskyFactor::new(&cov.diagonal_block(0))?;
    let f2 = CholeskyFactor::new(&cov.diagonal_block(1))?;
    m_nmf_i_from_forms(&[array_forms(&x[..m], &steering.p1, &f1, 0)?, array_forms(&x[m..], &steering.p2, &f2, 1)?])
}

/// Factors needed to evaluate a set of statistics on one covariance.
#[derive(Clone, Debug)]
pub struct PreparedCovariance {
    m: usize,
    full: Option<CholeskyFactor>,
    arrays: [Option<CholeskyFactor>; 2],
}

/// Summary of the estimation step behind a prepared covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EstimateDiagnostics {
    pub iterations: usize,
    pub final_rel_dev: f64,
    pub converged: bool,
}

impl PreparedCovariance {
    /// All factors of a known covariance.
    pub fn known(cov: &BlockCovariance) -> Result<Self> {
        Ok(PreparedCovariance {
            m: cov.m(),
            full: Some(cov.factor().clone()),
            arrays: [
                Some(CholeskyFactor::new(&cov.diagonal_block(0))?),
                Some(CholeskyFactor::new(&cov.diagonal_block(1))?),
            ],
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn supports(&self, stat: Statistic) -> bool {
        (!stat.needs_full() || self.full.is_some())
            && (0..2).all(|i| !stat.needs_array(i) || self.arrays[i].is_some())
    }

    /// Estimate what `stats` need from `batch`. A fixed point that runs out of
    /// iterations contributes its last iterate; `diag.converged` records it.
    pub fn estimate(
        stats: &[Statistic],
        estimator: EstimatorKind,
        batch: &SnapshotBatch,
        opts: &FixedPointOptions,
    ) -> Result<(Self, EstimateDiagnostics)> {
        let m = batch.m();
        let need_full = stats.iter().any(|s| s.needs_full());
        let need_arr = [0, 1].map(|i| stats.iter().any(|s| s.needs_array(i)));
        if estimator == EstimatorKind::Tyler && stats.contains(&Statistic::MimoMf) {
            return Err(Error::IncompatiblePair { detector: "mimo-amf".into(), estimator: "tyl".into() });
        }
        let mut diag = EstimateDiagnostics { iterations: 0, final_rel_dev: 0.0, converged: true };
        let mut note = |e: &estimators::CovarianceEstimate| {
            diag.iterations = diag.iterations.max(e.iterations);
            diag.final_rel_dev = diag.final_rel_dev.max(e.final_rel_dev);
            diag.converged &= e.converged;
        };
        let mut full = None;
        let mut arrays = [None, None];
        match estimator {
            EstimatorKind::Scm => {
                let s = estimators::scm(batch)?.matrix;
                if need_full {
                    full = Some(CholeskyFactor::new(&s)?);
                }
                for i in 0..2 {
                    if need_arr[i] {
                        let b = HermitianMatrix::new(s.as_matrix().submatrix(i * m, i * m, m, m))?;
                        arrays[i] = Some(CholeskyFactor::new(&b)?);
                    }
                }
            }
            EstimatorKind::Tyler => {
                if need_full {
                    let e = accept_last_iterate(estimators::two_tyler(batch, opts))?;
                    note(&e);
                    full = Some(CholeskyFactor::new(&e.matrix)?);
                }
                for i in 0..2 {
                    if need_arr[i] {
                        let e = accept_last_iterate(estimators::tyler(&batch.array(i), opts))?;
                        note(&e);
                        arrays[i] = Some(CholeskyFactor::new(&e.matrix)?);
                    }
                }
            }
        }
        Ok((PreparedCovariance { m, full, arrays }, diag))
    }
}

/// Precomputed whitened steering vectors over a grid of look directions.
pub struct GridEvaluator<'a> {
    prep: &'a PreparedCovariance,
    n1: usize,
    n2: usize,
    y1: Vec<Vec<C64>>,
    y2: Vec<Vec<C64>>,
    g11: Vec<f64>,
    g22: Vec<f64>,
    g12: Vec<C64>,
    h: [Vec<Vec<C64>>; 2],
    hh: [Vec<f64>; 2],
}

/// Noise-part inner products of one test snapshot against a grid.
#[derive(Clone, Debug)]
pub struct Projections {
    e11: f64,
    e22: f64,
    e12: C64,
    y1e1: Vec<C64>,
    y1e2: Vec<C64>,
    y2e1: Vec<C64>,
    y2e2: Vec<C64>,
    ff: [f64; 2],
    hf: [Vec<C64>; 2],
}

impl<'a> GridEvaluator<'a> {
    pub fn new(prep: &'a PreparedCovariance, p1s: &[Vec<C64>], p2s: &[Vec<C64>]) -> Result<Self> {
        let m = prep.m;
        for p in p1s.iter().chain(p2s) {
            if p.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: p.len() });
            }
        }
        let (n1, n2) = (p1s.len(), p2s.len());
        let mut ev = GridEvaluator {
            prep,
            n1,
            n2,
            y1: Vec::new(),
            y2: Vec::new(),
            g11: Vec::new(),
            g22: Vec::new(),
            g12: Vec::new(),
            h: [Vec::new(), Vec::new()],
            hh: [Vec::new(), Vec::new()],
        };
        if let Some(f) = &prep.full {
            let zero = vec![C64::new(0.0, 0.0); m];
            ev.y1 = p1s.iter().map(|p| split_whiten(f, &[p.as_slice(), &zero].concat()).0).collect();
            ev.y2 = p2s.iter().map(|p| split_whiten(f, &[zero.as_slice(), p].concat()).1).collect();
            ev.g11 = ev.y1.iter().map(|y| norm_sqr(y)).collect();
            ev.g22 = ev.y2.iter().map(|y| norm_sqr(&y[m..])).collect();
            ev.g12 = Vec::with_capacity(n1 * n2);
            for a in &ev.y1 {
                for b in &ev.y2 {
                    ev.g12.push(dot(&a[m..], &b[m..]));
                }
            }
        }
        for (i, ps) in [p1s, p2s].into_iter().enumerate() {
            if let Some(f) = &prep.arrays[i] {
                ev.h[i] = ps.iter().map(|p| f.forward(p)).collect();
                ev.hh[i] = ev.h[i].iter().map(|h| norm_sqr(h)).collect();
            }
        }
        Ok(ev)
    }

    pub fn from_angles(prep: &'a PreparedCovariance, theta1: &[f64], theta2: &[f64]) -> Result<Self> {
        let m = prep.m;
        let p1s: Vec<_> = theta1.iter().map(|&t| steering_vector(m, t)).collect();
        let p2s: Vec<_> = theta2.iter().map(|&t| steering_vector(m, t)).collect();
        Self::new(prep, &p1s, &p2s)
    }

    pub fn single(prep: &'a PreparedCovariance, steering: &SteeringMatrix) -> Result<Self> {
        Self::new(prep, &[steering.p1.clone()], &[steering.p2.clone()])
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn project(&self, x: &[C64]) -> Result<Projections> {
        let m = self.prep.m;
        if x.len() != 2 * m {
            return Err(Error::DimensionMismatch { expected: 2 * m, found: x.len() });
        }
        let mut p = Projections {
            e11: 0.0,
            e22: 0.0,
            e12: C64::new(0.0, 0.0),
            y1e1: Vec::new(),
            y1e2: Vec::new(),
            y2e1: Vec::new(),
            y2e2: Vec::new(),
            ff: [0.0; 2],
            hf: [Vec::new(), Vec::new()],
        };
        if let Some(f) = &self.prep.full {
            let (e1, e2) = split_whiten(f, x);
            p.e11 = norm_sqr(&e1);
            p.e22 = norm_sqr(&e2[m..]);
            p.e12 = dot(&e1[m..], &e2[m..]);
            p.y1e1 = self.y1.iter().map(|y| dot(y, &e1)).collect();
            p.y1e2 = self.y1.iter().map(|y| dot(&y[m..], &e2[m..])).collect();
            p.y2e1 = self.y2.iter().map(|y| dot(&y[m..], &e1[m..])).collect();
            p.y2e2 = self.y2.iter().map(|y| dot(&y[m..], &e2[m..])).collect();
        }
        for i in 0..2 {
            if let Some(f) = &self.prep.arrays[i] {
                let fz = f.forward(&x[i * m..(i + 1) * m]);
                p.ff[i] = norm_sqr(&fz);
                p.hf[i] = self.h[i].iter().map(|h| dot(h, &fz)).collect();
            }
        }
        Ok(p)
    }

    /// Forms of `x + P(i1, i2) alpha` where `x` produced `p`.
    pub fn dual_forms(&self, p: &Projections, i1: usize, i2: usize, alpha: [C64; 2]) -> DualForms {
        let (a1, a2) = (alpha[0], alpha[1]);
        let g11 = self.g11[i1];
        let g22 = self.g22[i2];
        let g12 = self.g12[i1 * self.n2 + i2];
        let (y1e1, y1e2, y2e1, y2e2) = (p.y1e1[i1], p.y1e2[i1], p.y2e1[i2], p.y2e2[i2]);
        DualForms {
            m: self.prep.m,
            e11: p.e11 + 2.0 * (a1 * y1e1.conj()).re + a1.norm_sqr() * g11,
            e22: p.e22 + 2.0 * (a2 * y2e2.conj()).re + a2.norm_sqr() * g22,
            e12: p.e12 + a2 * y2e1.conj() + a1.conj() * y1e2 + a1.conj() * a2 * g12,
            ye: [[y1e1 + a1 * g11, y1e2 + a2 * g12], [y2e1 + a1 * g12.conj(), y2e2 + a2 * g22]],
            gram: [[C64::new(g11, 0.0), g12], [g12.conj(), C64::new(g22, 0.0)]],
        }
    }

    pub fn array_forms(&self, p: &Projections, array: usize, idx: usize, alpha: C64) -> ArrayForms {
        let hh = self.hh[array][idx];
        let hf = p.hf[array][idx];
        ArrayForms {
            array,
            xx: p.ff[array] + 2.0 * (alpha * hf.conj()).re + alpha.norm_sqr() * hh,
            px: hf + alpha * hh,
            pp: hh,
        }
    }

    pub fn statistic(&self, stat: Statistic, p: &Projections, i1: usize, i2: usize, alpha: [C64; 2]) -> Result<f64> {
        if !self.prep.supports(stat) {
            return Err(Error::InvalidParameter(format!("covariance was not prepared for {}", stat.base_id())));
        }
        match stat {
            Statistic::Nmf1 => nmf_from_forms(&self.array_forms(p, 0, i1, alpha[0])),
            Statistic::Nmf2 => nmf_from_forms(&self.array_forms(p, 1, i2, alpha[1])),
            Statistic::MNmfI => m_nmf_i_from_forms(&[
                self.array_forms(p, 0, i1, alpha[0]),
                self.array_forms(p, 1, i2, alpha[1]),
            ]),
            Statistic::MimoMf => mimo_mf_from_forms(&self.dual_forms(p, i1, i2, alpha)),
            Statistic::MNmfG => m_nmf_g_from_forms(&self.dual_forms(p, i1, i2, alpha)),
            Statistic::MNmfR => m_nmf_r_from_forms(&self.dual_forms(p, i1, i2, alpha)),
            Statistic::Ace => ace_from_forms(&self.dual_forms(p, i1, i2, alpha)),
        }
    }

    /// Statistic over the whole grid, `theta1`-major.
    pub fn map(&self, stat: Statistic, x: &[C64]) -> Result<Vec<f64>> {
        let p = self.project(x)?;
        let zero = [C64::new(0.0, 0.0); 2];
        let mut out = Vec::with_capacity(self.n1 * self.n2);
        for i1 in 0..self.n1 {
            for i2 in 0..self.n2 {
                out.push(self.statistic(stat, &p, i1, i2, zero)?);
            }
        }
        Ok(out)
    }
}

/// Evaluate `stat` on `x` with a prepared covariance.
pub fn evaluate(stat: Statistic, x: &[C64], steering: &SteeringMatrix, prep: &PreparedCovariance) -> Result<f64> {
    let ev = GridEvaluator::single(prep, steering)?;
    let p = ev.project(x)?;
    ev.statistic(stat, &p, 0, 0, [C64::new(0.0, 0.0); 2])
}

#[derive(Clone, Debug)]
pub struct DetectorOutput {
    pub detector: DetectorId,
    pub statistic: f64,
    pub elapsed: Duration,
    pub diagnostics: EstimateDiagnostics,
}

/// Estimate the covariance from `batch` and evaluate the detector on `x`.
pub fn adaptive(
    detector: DetectorId,
    x: &[C64],
    steering: &SteeringMatrix,
    batch: &SnapshotBatch,
    opts: &FixedPointOptions,
) -> Result<DetectorOutput> {
    let start = Instant::now();
    let estimator = detector
        .estimator
        .ok_or_else(|| Error::InvalidParameter(format!("{detector} uses the true covariance")))?;
    if batch.m() != steering.m() || x.len() != 2 * batch.m() {
        return Err(Error::DimensionMismatch { expected: 2 * batch.m(), found: x.len() });
    }
    let (prep, diagnostics) = PreparedCovariance::estimate(&[detector.statistic], estimator, batch, opts)?;
    let statistic = evaluate(detector.statistic, x, steering, &prep)?;
    Ok(DetectorOutput { detector, statistic, elapsed: start.elapsed(), diagnostics })
}

/// Evaluate a known-covariance detector.
pub fn known(detector: DetectorId, x: &[C64], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<DetectorOutput> {
    let start = Instant::now();
    if detector.estimator.is_some() {
        return Err(Error::InvalidParameter(format!("{detector} needs secondary data")));
    }
    let statistic = evaluate(detector.statistic, x, steering, &PreparedCovariance::known(cov)?)?;
    Ok(DetectorOutput { detector, statistic, elapsed: start.elapsed(), diagnostics: EstimateDiagnostics::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clutter::{make_secondary, sample_snapshot, TextureModel};
    use crate::rng::{trial_rng, Domain};
    use crate::scene::{build_covariance, ArrayGeometry, CovarianceModelParams};

    fn scene(m: usize) -> BlockCovariance {
        build_covariance(&ArrayGeometry::new(m).unwrap(), &CovarianceModelParams::baseline()).unwrap()
    }

    #[test]
    fn ids_roundtrip() {
        let all = DetectorId::all();
        assert_eq!(all.len(), 16);
        for (id, s) in all.iter().zip(STANDARD_IDS) {
            assert_eq!(id.to_string(), s);
        }
        assert!(matches!("mimo-amf-tyl".parse::<DetectorId>(), Err(Error::IncompatiblePair { .. })));
        assert!("bogus".parse::<DetectorId>().is_err());
    }

    #[test]
    fn nmf_of_steering_is_one() {
        let p = steering_vector(4, 17.0);
        let v = nmf(&p, &p, &HermitianMatrix::identity(4)).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let z = vec![C64::new(0.0, 0.0); 4];
        assert!(matches!(nmf(&z, &p, &HermitianMatrix::identity(4)), Err(Error::NoiseFloorZero { .. })));
    }

    #[test]
    fn zero_array_hits_noise_floor() {
        let cov = scene(4);
        let s = SteeringMatrix::at_angles(4, 0.0, 0.0);
        let mut x = vec![C64::new(0.0, 0.0); 8];
        x[5] = C64::new(1.0, 0.0);
        assert!(matches!(m_nmf_g(&x, &s, &cov), Err(Error::NoiseFloorZero { array: 1 })));
    }

    #[test]
    fn perfect_fit_is_infinite() {
        let cov = scene(4);
        let s = SteeringMatrix::at_angles(4, 10.0, -20.0);
        let x = s.apply([C64::new(1.0, 0.5), C64::new(-0.3, 2.0)]);
        assert_eq!(m_nmf_g(&x, &s, &cov).unwrap(), f64::INFINITY);
        assert!(matches!(glrt_sigmas(&x, &s, &cov).unwrap().h1, H1Fit::PerfectFit));
    }

    #[test]
    fn orthogonal_snapshot_gives_zero_rao() {
        // x = M v with v orthogonal to both steering columns; decoupled blocks make
        // every whitened projection vanish
        let cov = build_covariance(&ArrayGeometry::new(4).unwrap(), &CovarianceModelParams::decoupled()).unwrap();
        let s = SteeringMatrix::at_angles(4, 0.0, 0.0);
        let mut v1 = vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        let v2 = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)];
        v1.extend(v2);
        let x = cov.matrix().as_matrix().mul_vec(&v1).unwrap();
        assert!(m_nmf_r(&x, &s, &cov).unwrap().abs() < 1e-20);
        assert!(mimo_mf(&x, &s, &cov).unwrap().abs() < 1e-20);
    }

    #[test]
    fn grid_expansion_matches_direct_forms() {
        let cov = scene(6);
        let prep = PreparedCovariance::known(&cov).unwrap();
        let th1 = [-30.0, 0.0, 12.0];
        let th2 = [5.0, 40.0];
        let ev = GridEvaluator::from_angles(&prep, &th1, &th2).unwrap();
        let mut rng = trial_rng(9, Domain::Null, 0);
        let z = sample_snapshot(&cov, &TextureModel::Gaussian, &mut rng);
        let alpha = [C64::new(0.01, -0.02), C64::new(0.015, 0.005)];
        let proj = ev.project(z.as_slice()).unwrap();
        for (i1, &t1) in th1.iter().enumerate() {
            for (i2, &t2) in th2.iter().enumerate() {
                let s = SteeringMatrix::at_angles(6, t1, t2);
                let x: Vec<C64> = z.as_slice().iter().zip(s.apply(alpha)).map(|(a, b)| a + b).collect();
                for stat in [Statistic::MNmfG, Statistic::MNmfR, Statistic::MimoMf, Statistic::Ace] {
                    let direct = match stat {
                        Statistic::MNmfG => m_nmf_g(&x, &s, &cov),
                        Statistic::MNmfR => m_nmf_r(&x, &s, &cov),
                        Statistic::MimoMf => mimo_mf(&x, &s, &cov),
                        _ => ace(&x, &s, &cov),
                    }
                    .unwrap();
                    let grid = ev.statistic(stat, &proj, i1, i2, alpha).unwrap();
                    assert!((direct - grid).abs() < 1e-9 * direct.abs().max(1.0), "{stat:?} {direct} {grid}");
                }
                let d = m_nmf_i(&x, &s, &cov).unwrap();
                let g = ev.statistic(Statistic::MNmfI, &proj, i1, i2, alpha).unwrap();
                assert!((d - g).abs() < 1e-10 * d);
                let d1 = nmf(&x[..6], &s.p1, &cov.diagonal_block(0)).unwrap();
                let g1 = ev.statistic(Statistic::Nmf1, &proj, i1, i2, alpha).unwrap();
                assert!((d1 - g1).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adaptive_pairs() {
        let cov = scene(4);
        let mut rng = trial_rng(2, Domain::Null, 0);
        let b = make_secondary(&cov, &TextureModel::Gaussian, 16, &mut rng).unwrap();
        let x = sample_snapshot(&cov, &TextureModel::Gaussian, &mut rng);
        let s = SteeringMatrix::at_angles(4, 0.0, 0.0);
        let opts = FixedPointOptions::default();
        for id in DetectorId::all().into_iter().filter(|d| d.estimator.is_some()) {
            let out = adaptive(id, x.as_slice(), &s, &b, &opts).unwrap();
            assert!(out.statistic.is_finite() && out.statistic >= 0.0, "{id}");
        }
        let bad = DetectorId { statistic: Statistic::MimoMf, estimator: Some(EstimatorKind::Tyler) };
        assert!(matches!(adaptive(bad, x.as_slice(), &s, &b, &opts), Err(Error::IncompatiblePair { .. })));
    }
}
