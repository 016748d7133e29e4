#![allow(dead_code)]

pub mod ml;

use crossdetect_core::clutter::standard_complex;
use crossdetect_core::linalg::{CMatrix, HermitianMatrix};
use crossdetect_core::rng::{trial_rng, Domain, SimRng};
use crossdetect_core::scene::{assemble_steering, BlockCovariance, SteeringMatrix};
use crossdetect_core::C64;
use nalgebra::DMatrix;
use rand::Rng;

pub fn rng(seed: u64) -> SimRng {
    trial_rng(seed, Domain::NullCheck, 0)
}

/// Random well-conditioned Hermitian positive definite matrix.
pub fn random_hpd(n: usize, rng: &mut SimRng) -> HermitianMatrix {
    let g = standard_complex(n * n, rng);
    let a = CMatrix::from_vec(n, n, g).unwrap();
    let mut b = a.matmul(&a.adjoint()).unwrap();
    for i in 0..n {
        b[(i, i)] += C64::new(0.5 * n as f64, 0.0);
    }
    HermitianMatrix::new(b).unwrap()
}

pub fn random_cov(m: usize, rng: &mut SimRng) -> BlockCovariance {
    BlockCovariance::new(random_hpd(2 * m, rng)).unwrap()
}

pub fn random_unit(m: usize, rng: &mut SimRng) -> Vec<C64> {
    let v = standard_complex(m, rng);
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn random_steering(m: usize, rng: &mut SimRng) -> SteeringMatrix {
    assemble_steering(random_unit(m, rng), random_unit(m, rng)).unwrap()
}

pub fn random_x(m: usize, rng: &mut SimRng) -> Vec<C64> {
    standard_complex(2 * m, rng)
}

pub fn log_uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn to_na(a: &CMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

pub fn col(v: &[C64]) -> DMatrix<C64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

pub fn scalar(a: &DMatrix<C64>) -> C64 {
    assert_eq!(a.shape(), (1, 1));
    a[(0, 0)]
}

/// Per-array diagonal gauge `diag(s1 I, s2 I)`.
pub fn gauge(m: usize, s1: f64, s2: f64) -> Vec<f64> {
    (0..2 * m).map(|i| if i < m { s1 } else { s2 }).collect()
}
