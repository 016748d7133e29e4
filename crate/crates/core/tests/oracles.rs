//! Dense-inverse cross-checks of every statistic and of the linear algebra.

mod common;

use common::*;
use crossdetect_core::detectors::{self, H1Fit};
use crossdetect_core::linalg::{inverse_blocks, CholeskyFactor};
use crossdetect_core::scene::{BlockCovariance, SteeringMatrix};
use crossdetect_core::C64;
use nalgebra::DMatrix;

struct Dense {
    m: usize,
    w: DMatrix<C64>,
    p: DMatrix<C64>,
    x: DMatrix<C64>,
}

impl Dense {
    fn new(x: &[C64], s: &SteeringMatrix, cov: &BlockCovariance) -> Self {
        let w = to_na(cov.matrix().as_matrix()).try_inverse().unwrap();
        Dense { m: cov.m(), w, p: to_na(&s.dense()), x: col(x) }
    }

    /// `W - W P (P^H W P)^{-1} P^H W`
    fn residual_w(&self) -> DMatrix<C64> {
        let wp = &self.w * &self.p;
        let g = (self.p.adjoint() * &wp).try_inverse().unwrap();
        &self.w - &wp * g * wp.adjoint()
    }

    /// `(a1, a2, a12)` for a weight matrix.
    fn terms(&self, w: &DMatrix<C64>) -> (f64, f64, f64) {
        let m = self.m;
        let x1 = self.x.rows(0, m).into_owned();
        let x2 = self.x.rows(m, m).into_owned();
        let b = |r: usize, c: usize| w.view((r, c), (m, m)).into_owned();
        let mf = m as f64;
        (
            scalar(&(x1.adjoint() * b(0, 0) * &x1)).re / mf,
            scalar(&(x2.adjoint() * b(m, m) * &x2)).re / mf,
            scalar(&(x1.adjoint() * b(0, m) * &x2)).re / mf,
        )
    }

    fn mimo(&self) -> f64 {
        let u = self.p.adjoint() * &self.w * &self.x;
        let g = (self.p.adjoint() * &self.w * &self.p).try_inverse().unwrap();
        scalar(&(u.adjoint() * g * &u)).re
    }

    fn xwx(&self) -> f64 {
        scalar(&(self.x.adjoint() * &self.w * &self.x)).re
    }

    fn rao(&self) -> f64 {
        let (a1, a2, a12) = self.terms(&self.w);
        let s1 = (a1 + (a1 / a2).sqrt() * a12).sqrt();
        let s2 = (a2 + (a2 / a1).sqrt() * a12).sqrt();
        let n = 2 * self.m;
        let si = DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i < self.m {
                C64::new(1.0 / s1, 0.0)
            } else {
                C64::new(1.0 / s2, 0.0)
            }
        });
        let ci = &si * &self.w * &si;
        let u = self.p.adjoint() * &ci * &self.x;
        let g = (self.p.adjoint() * &ci * &self.p).try_inverse().unwrap();
        2.0 * scalar(&(u.adjoint() * g * &u)).re
    }

    fn glrt(&self) -> f64 {
        let (a1, a2, a12) = self.terms(&self.w);
        let (b1, b2, b12) = self.terms(&self.residual_w());
        ((a1 * a2).sqrt() + a12) / ((b1 * b2).sqrt() + b12)
    }
}

fn case(seed: u64, m: usize) -> (Vec<C64>, SteeringMatrix, BlockCovariance) {
    let mut r = rng(seed);
    let cov = random_cov(m, &mut r);
    let s = random_steering(m, &mut r);
    let x = random_x(m, &mut r);
    (x, s, cov)
}

#[test]
fn rao_matches_dense_definition() {
    for seed in 0..200 {
        let (x, s, cov) = case(seed, 2 + (seed % 5) as usize);
        let want = Dense::new(&x, &s, &cov).rao();
        let got = detectors::m_nmf_r(&x, &s, &cov).unwrap();
        assert!(rel(got, want) < 1e-9, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn glrt_matches_dense_projection() {
    for seed in 0..200 {
        let (x, s, cov) = case(seed, 2 + (seed % 5) as usize);
        let d = Dense::new(&x, &s, &cov);
        let got = detectors::m_nmf_g(&x, &s, &cov).unwrap();
        assert!(rel(got, d.glrt()) < 1e-9, "seed {seed}");
        let sig = detectors::glrt_sigmas(&x, &s, &cov).unwrap();
        let (a1, a2, a12) = d.terms(&d.w);
        assert!(rel(sig.sigma1_sq, a1 + (a1 / a2).sqrt() * a12) < 1e-10);
        assert!(rel(sig.sigma2_sq, a2 + (a2 / a1).sqrt() * a12) < 1e-10);
        let (b1, b2, b12) = d.terms(&d.residual_w());
        match sig.h1 {
            H1Fit::Residual { sigma1_sq, sigma2_sq, .. } => {
                assert!(rel(sigma1_sq, b1 + (b1 / b2).sqrt() * b12) < 1e-9);
                assert!(rel(sigma2_sq, b2 + (b2 / b1).sqrt() * b12) < 1e-9);
            }
            H1Fit::PerfectFit => panic!("seed {seed}: unexpected perfect fit"),
        }
    }
}

#[test]
fn mimo_and_ace_match_dense() {
    for seed in 0..200 {
        let (x, s, cov) = case(seed, 2 + (seed % 5) as usize);
        let d = Dense::new(&x, &s, &cov);
        assert!(rel(detectors::mimo_mf(&x, &s, &cov).unwrap(), d.mimo()) < 1e-9);
        let ace = detectors::ace(&x, &s, &cov).unwrap();
        assert!(rel(ace, d.mimo() / d.xwx()) < 1e-9);
        assert!((0.0..=1.0 + 1e-12).contains(&ace));
    }
}

#[test]
fn nmf_matches_dense() {
    for seed in 0..200 {
        let (x, s, cov) = case(seed, 2 + (seed % 5) as usize);
        let m = cov.m();
        for i in 0..2 {
            let r = cov.diagonal_block(i);
            let w = to_na(r.as_matrix()).try_inverse().unwrap();
            let xi = col(&x[i * m..(i + 1) * m]);
            let p = col(&s.column(i)[i * m..(i + 1) * m]);
            let want = scalar(&(p.adjoint() * &w * &xi)).norm_sqr()
                / (scalar(&(p.adjoint() * &w * &p)).re * scalar(&(xi.adjoint() * &w * &xi)).re);
            let got = detectors::nmf(&x[i * m..(i + 1) * m], &s.column(i)[i * m..(i + 1) * m], &r).unwrap();
            assert!(rel(got, want) < 1e-10, "seed {seed} array {i}");
        }
    }
}

#[test]
fn cholesky_and_inverse_blocks_match_dense() {
    for seed in 0..50 {
        let mut r = rng(seed);
        let n = 2 * (1 + seed as usize % 8);
        let a = random_hpd(n, &mut r);
        let f = CholeskyFactor::new(&a).unwrap();
        let back = f.reconstruct();
        let diff = back.as_matrix().sub(a.as_matrix()).unwrap().frobenius_norm();
        assert!(diff < 1e-10 * a.as_matrix().frobenius_norm());
        let dense = to_na(a.as_matrix());
        let inv = dense.clone().try_inverse().unwrap();
        let blocks = inverse_blocks(&a).unwrap().assemble();
        let err = (to_na(&blocks) - &inv).norm() / inv.norm();
        assert!(err < 1e-10, "n {n}: {err}");
        let ld = dense.determinant().re.ln();
        assert!((f.log_det() - ld).abs() < 1e-8 * ld.abs().max(1.0));
        let b = random_x(n / 2, &mut r);
        let sol = f.solve(&b).unwrap();
        let want = &inv * col(&b);
        for (g, w) in sol.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-9 * want.norm());
        }
    }
}

#[test]
fn cholesky_rejects_indefinite() {
    let mut r = rng(3);
    let a = random_hpd(6, &mut r);
    let neg = a.scale(-1.0);
    assert!(matches!(CholeskyFactor::new(&neg), Err(crossdetect_core::Error::NotPositiveDefinite { .. })));
}
