//! Compound-Gaussian clutter: per-array textures multiplying a correlated
//! complex Gaussian speckle, plus target injection and batch corruption.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, C64};
use crate::scene::{BlockCovariance, SteeringMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TextureModel {
    Gaussian,
    /// Gamma textures with shape `nu` and unit mean (K-distributed amplitude).
    K { nu: f64 },
}

impl TextureModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TextureModel::Gaussian => Ok(()),
            TextureModel::K { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            TextureModel::K { nu } => Err(Error::InvalidParameter(format!("texture shape nu must be positive, got {nu}"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TextureModel::Gaussian => "gaussian".into(),
            TextureModel::K { nu } => format!("k(nu={nu})"),
        }
    }
}

/// Independent textures `(tau1, tau2)`.
pub fn sample_texture<R: Rng + ?Sized>(model: &TextureModel, rng: &mut R) -> [f64; 2] {
    match *model {
        TextureModel::Gaussian => [1.0, 1.0],
        TextureModel::K { nu } => {
            let g = Gamma::new(nu, 1.0 / nu).expect("validated shape");
            [g.sample(rng), g.sample(rng)]
        }
    }
}

/// Circular complex Gaussian speckle with covariance `L L^H`.
pub fn sample_speckle<R: Rng + ?Sized>(factor: &CholeskyFactor, rng: &mut R) -> Vec<C64> {
    let g = standard_complex(factor.dim(), rng);
    factor.mul_lower(&g)
}

pub fn standard_complex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * s, im * s)
        })
        .collect()
}

/// A stacked dual-array snapshot `[x1; x2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    m: usize,
    data: Vec<C64>,
}

impl Snapshot {
    pub fn new(data: Vec<C64>) -> Result<Self> {
        if data.is_empty() || data.len() % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: data.len() + 1, found: data.len() });
        }
        Ok(Snapshot { m: data.len() / 2, data })
    }

    pub fn from_parts(x1: &[C64], x2: &[C64]) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch { expected: x1.len(), found: x2.len() });
        }
        Snapshot::new([x1, x2].concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn x1(&self) -> &[C64] {
        &self.data[..self.m]
    }

    pub fn x2(&self) -> &[C64] {
        &self.data[self.m..]
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    /// Scale array `i` by a real factor.
    pub fn scale_arrays(&self, c1: f64, c2: f64) -> Snapshot {
        let m = self.m;
        let data = self.data.iter().enumerate().map(|(j, z)| z * if j < m { c1 } else { c2 }).collect();
        Snapshot { m, data }
    }
}

/// One clutter draw with its ground truth.
#[derive(Clone, Debug)]
pub struct ClutterDraw {
    pub snapshot: Snapshot,
    pub speckle: Vec<C64>,
    pub textures: [f64; 2],
}

pub fn sample_clutter<R: Rng + ?Sized>(cov: &BlockCovariance, texture: &TextureModel, rng: &mut R) -> ClutterDraw {
    let m = cov.m();
    let tau = sample_texture(texture, rng);
    let speckle = sample_speckle(cov.factor(), rng);
    let (s1, s2) = (tau[0].sqrt(), tau[1].sqrt());
    let data = speckle.iter().enumerate().map(|(j, z)| z * if j < m { s1 } else { s2 }).collect();
    ClutterDraw { snapshot: Snapshot { m, data }, speckle, textures: tau }
}

pub fn sample_snapshot<R: Rng + ?Sized>(cov: &BlockCovariance, texture: &TextureModel, rng: &mut R) -> Snapshot {
    sample_clutter(cov, texture, rng).snapshot
}

/// `x + P alpha`.
pub fn inject_target(x: &Snapshot, steering: &SteeringMatrix, alpha: [C64; 2]) -> Result<Snapshot> {
    if steering.m() != x.m() {
        return Err(Error::DimensionMismatch { expected: x.m(), found: steering.m() });
    }
    let s = steering.apply(alpha);
    Ok(Snapshot { m: x.m, data: x.data.iter().zip(&s).map(|(a, b)| a + b).collect() })
}

/// `K` secondary snapshots of common size, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotBatch {
    m: usize,
    data: Vec<C64>,
    textures: Option<Vec<[f64; 2]>>,
}

impl SnapshotBatch {
    pub fn from_snapshots(snaps: &[Snapshot]) -> Result<Self> {
        let first = snaps.first().ok_or(Error::EmptyBatch)?;
        let m = first.m();
        let mut data = Vec::with_capacity(snaps.len() * 2 * m);
        for s in snaps {
            if s.m() != m {
                return Err(Error::DimensionMismatch { expected: m, found: s.m() });
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(SnapshotBatch { m, data, textures: None })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len() / (2 * self.m)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, k: usize) -> &[C64] {
        let n = 2 * self.m;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(2 * self.m)
    }

    /// Array `i` components of every snapshot.
    pub fn array(&self, i: usize) -> Vec<&[C64]> {
        let m = self.m;
        self.iter().map(|x| &x[i * m..(i + 1) * m]).collect()
    }

    pub fn textures(&self) -> Option<&[[f64; 2]]> {
        self.textures.as_deref()
    }

    /// Scale array components of snapshot `k` by `c[k]`.
    pub fn scale_per_snapshot(&self, c: &[[f64; 2]]) -> Result<SnapshotBatch> {
        if c.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: c.len() });
        }
        let m = self.m;
        let mut data = self.data.clone();
        for (k, chunk) in data.chunks_exact_mut(2 * m).enumerate() {
            for (j, z) in chunk.iter_mut().enumerate() {
                *z *= if j < m { c[k][0] } else { c[k][1] };
            }
        }
        Ok(SnapshotBatch { m, data, textures: None })
    }
}

pub fn make_secondary<R: Rng + ?Sized>(
    cov: &BlockCovariance,
    texture: &TextureModel,
    k: usize,
    rng: &mut R,
) -> Result<SnapshotBatch> {
    if k == 0 {
        return Err(Error::EmptyBatch);
    }
    let m = cov.m();
    let mut data = Vec::with_capacity(k * 2 * m);
    let mut tex = Vec::with_capacity(k);
    for _ in 0..k {
        let d = sample_clutter(cov, texture, rng);
        data.extend_from_slice(d.snapshot.as_slice());
        tex.push(d.textures);
    }
    Ok(SnapshotBatch { m, data, textures: Some(tex) })
}

/// Copy of `batch` with `P alpha` added to snapshot `index`.
pub fn corrupt_batch(batch: &SnapshotBatch, steering: &SteeringMatrix, alpha: [C64; 2], index: usize) -> Result<SnapshotBatch> {
    if index >= batch.len() {
        return Err(Error::IndexOutOfRange { index, len: batch.len() });
    }
    if steering.m() != batch.m() {
        return Err(Error::DimensionMismatch { expected: batch.m(), found: steering.m() });
    }
    let mut out = batch.clone();
    let n = 2 * batch.m;
    let s = steering.apply(alpha);
    for (z, a) in out.data[index * n..(index + 1) * n].iter_mut().zip(&s) {
        *z += a;
    }
    Ok(out)
}
