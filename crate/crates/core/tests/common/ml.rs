//! Brute-force likelihood maximization for one sensor per array.

use super::*;
use crossdetect_core::detectors::{glrt_sigmas, H1Fit};
use crossdetect_core::linalg::inverse_blocks;
use crossdetect_core::scene::{assemble_steering, BlockCovariance};
use crossdetect_core::C64;
use rand::Rng;

pub const GRID: usize = 400;
pub const LO: f64 = 1e-3;
pub const HI: f64 = 1e3;

/// Log-likelihood of `x` under `C = S M S`, `S = diag(s1, s2)`, up to constants, for m = 1.
fn loglik(w: [[C64; 2]; 2], x: [C64; 2], s1: f64, s2: f64) -> f64 {
    let v = [x[0] / s1, x[1] / s2];
    let mut q = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            q += (v[i].conj() * w[i][j] * v[j]).re;
        }
    }
    -2.0 * s1.ln() - 2.0 * s2.ln() - q
}

/// Returns the worst log-distance (in grid steps) between closed form and grid argmax.
pub fn worst_offset(instances: u64) -> f64 {
    let step = (HI / LO).ln() / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|i| (LO.ln() + i as f64 * step).exp()).collect();
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let mut r = rng(1000 + seed);
        let cov = BlockCovariance::new(random_hpd(2, &mut r)).unwrap();
        let x = random_x(1, &mut r);
        let ph = |r: &mut crossdetect_core::rng::SimRng| C64::from_polar(1.0, r.random::<f64>() * std::f64::consts::TAU);
        let s = assemble_steering(vec![ph(&mut r)], vec![ph(&mut r)]).unwrap();
        let sig = glrt_sigmas(&x, &s, &cov).unwrap();
        assert_eq!(sig.h1, H1Fit::PerfectFit, "two complex amplitudes fit two samples exactly");
        let b = inverse_blocks(cov.matrix()).unwrap();
        let w = [[b.b11[(0, 0)], b.b12[(0, 0)]], [b.b21[(0, 0)], b.b22[(0, 0)]]];
        let xx = [x[0], x[1]];
        let (mut best, mut arg) = (f64::NEG_INFINITY, (0, 0));
        for (i, &s1) in grid.iter().enumerate() {
            for (j, &s2) in grid.iter().enumerate() {
                let l = loglik(w, xx, s1, s2);
                if l > best {
                    best = l;
                    arg = (i, j);
                }
            }
        }
        let d1 = (sig.sigma1_sq.sqrt().ln() - grid[arg.0].ln()).abs() / step;
        let d2 = (sig.sigma2_sq.sqrt().ln() - grid[arg.1].ln()).abs() / step;
        worst = worst.max(d1).max(d2);
    }
    worst
}
