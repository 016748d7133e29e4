//! Cross-array geometry, the separable clutter covariance model and steering
//! vectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, BlockView, CMatrix, CholeskyFactor, HermitianMatrix, C64};

/// Two orthogonal uniform linear arrays of `m` sensors crossing at their centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrayGeometry {
    m: usize,
}

impl ArrayGeometry {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("array size m must be positive".into()));
        }
        Ok(ArrayGeometry { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn crossing(&self) -> f64 {
        (self.m as f64 - 1.0) / 2.0
    }

    /// Planar coordinates of stacked sensor `j` (array 1 first, then array 2).
    pub fn coords(&self, j: usize) -> (f64, f64) {
        let c = self.crossing();
        if j < self.m {
            (j as f64, c)
        } else {
            (c, (j - self.m) as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceModelParams {
    pub beta: f64,
    pub rho1: f64,
    pub rho2: f64,
    #[serde(default)]
    pub zero_cross_blocks: bool,
}

impl CovarianceModelParams {
    pub fn baseline() -> Self {
        CovarianceModelParams { beta: 3e-4, rho1: 0.4, rho2: 0.9, zero_cross_blocks: false }
    }

    pub fn strongly_correlated() -> Self {
        CovarianceModelParams { beta: 1.0, rho1: 0.95, rho2: 0.95, zero_cross_blocks: false }
    }

    pub fn decoupled() -> Self {
        CovarianceModelParams { beta: 100.0, rho1: 0.1, rho2: 0.1, zero_cross_blocks: true }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline()),
            "correlated" => Some(Self::strongly_correlated()),
            "decoupled" => Some(Self::decoupled()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        for (name, r) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {r}")));
            }
        }
        Ok(())
    }
}

/// A `2m x 2m` HPD covariance with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct BlockCovariance {
    m: usize,
    matrix: HermitianMatrix,
    factor: CholeskyFactor,
}

impl BlockCovariance {
    pub fn new(matrix: HermitianMatrix) -> Result<Self> {
        let n = matrix.dim();
        if n == 0 || n % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: n + 1, found: n });
        }
        let factor = CholeskyFactor::new(&matrix)?;
        Ok(BlockCovariance { m: n / 2, matrix, factor })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn blocks(&self) -> BlockView {
        self.matrix.blocks().expect("even dimension")
    }

    /// Diagonal block `i` (0 or 1) as a Hermitian matrix.
    pub fn diagonal_block(&self, i: usize) -> HermitianMatrix {
        let m = self.m;
        HermitianMatrix::new(self.matrix.as_matrix().submatrix(i * m, i * m, m, m)).expect("square")
    }

    /// Blocks of the inverse, computed from the cached factor.
    pub fn inverse_blocks(&self) -> BlockView {
        self.factor.inverse().blocks().expect("even dimension")
    }
}

pub fn build_covariance(geom: &ArrayGeometry, params: &CovarianceModelParams) -> Result<BlockCovariance> {
    params.validate()?;
    let m = geom.m();
    let h = HermitianMatrix::from_lower(2 * m, |i, j| {
        if params.zero_cross_blocks && (i < m) != (j < m) {
            return C64::new(0.0, 0.0);
        }
        let (xi, yi) = geom.coords(i);
        let (xj, yj) = geom.coords(j);
        let v = params.beta * params.rho1.powf((xi - xj).abs()) * params.rho2.powf((yi - yj).abs());
        C64::new(v, 0.0)
    });
    BlockCovariance::new(h)
}

/// Unit-norm steering vector `exp(i pi n sin(theta)) / sqrt(m)`, `theta` in degrees.
pub fn steering_vector(m: usize, theta_deg: f64) -> Vec<C64> {
    let s = theta_deg.to_radians().sin();
    let norm = 1.0 / (m as f64).sqrt();
    (0..m)
        .map(|n| Complex64::from_polar(norm, std::f64::consts::PI * n as f64 * s))
        .collect()
}

/// The `2m x 2` block-diagonal steering matrix `P = blkdiag(p1, p2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringMatrix {
    pub p1: Vec<C64>,
    pub p2: Vec<C64>,
}

impl SteeringMatrix {
    pub fn m(&self) -> usize {
        self.p1.len()
    }

    pub fn at_angles(m: usize, theta1_deg: f64, theta2_deg: f64) -> Self {
        SteeringMatrix { p1: steering_vector(m, theta1_deg), p2: steering_vector(m, theta2_deg) }
    }

    /// Column `i` as a stacked `2m` vector.
    pub fn column(&self, i: usize) -> Vec<C64> {
        let m = self.m();
        let zero = vec![C64::new(0.0, 0.0); m];
        match i {
            0 => [self.p1.as_slice(), &zero].concat(),
            _ => [&zero, self.p2.as_slice()].concat(),
        }
    }

    /// `P alpha`.
    pub fn apply(&self, alpha: [C64; 2]) -> Vec<C64> {
        self.p1.iter().map(|p| p * alpha[0]).chain(self.p2.iter().map(|p| p * alpha[1])).collect()
    }

    pub fn dense(&self) -> CMatrix {
        let (c0, c1) = (self.column(0), self.column(1));
        CMatrix::from_columns(&[&c0, &c1]).expect("equal columns")
    }
}

pub fn assemble_steering(p1: Vec<C64>, p2: Vec<C64>) -> Result<SteeringMatrix> {
    if p1.len() != p2.len() {
        return Err(Error::DimensionMismatch { expected: p1.len(), found: p2.len() });
    }
    if p1.is_empty() {
        return Err(Error::InvalidParameter("empty steering vector".into()));
    }
    Ok(SteeringMatrix { p1, p2 })
}

/// `P^H M^{-1} P` as a 2x2 matrix.
pub fn whitened_gram(steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<[[C64; 2]; 2]> {
    if steering.m() != cov.m() {
        return Err(Error::DimensionMismatch { expected: cov.m(), found: steering.m() });
    }
    let f = cov.factor();
    let y1 = f.forward(&steering.column(0));
    let y2 = f.forward(&steering.column(1));
    Ok([[dot(&y1, &y1), dot(&y1, &y2)], [dot(&y2, &y1), dot(&y2, &y2)]])
}

/// Output SNR `10 log10(alpha^H P^H M^{-1} P alpha)`; `-inf` for `alpha = 0`.
pub fn snr_db(alpha: [C64; 2], steering: &SteeringMatrix, cov: &BlockCovariance) -> Result<f64> {
    let g = whitened_gram(steering, cov)?;
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += (alpha[i].conj() * g[i][j] * alpha[j]).re;
        }
    }
    Ok(10.0 * s.max(0.0).log10())
}

/// Amplitudes along `direction` giving the requested output SNR.
pub fn alpha_for_snr(
    snr_db: f64,
    direction: [C64; 2],
    steering: &SteeringMatrix,
    cov: &BlockCovariance,
) -> Result<[C64; 2]> {
    let base = self::snr_db(direction, steering, cov)?;
    if !base.is_finite() {
        return Err(Error::InvalidParameter("zero target direction".into()));
    }
    let a = 10f64.powf((snr_db - base) / 20.0);
    Ok([direction[0] * a, direction[1] * a])
}

/// Per-sensor input SNR `10 log10(|alpha_i|^2 / (m sigma^2))` with `sigma^2` the
/// mean clutter power; returns the common amplitude magnitude.
pub fn amplitude_for_input_snr(snr_db: f64, cov: &BlockCovariance) -> f64 {
    let m = cov.m() as f64;
    let power = cov.matrix().trace() / (2.0 * m);
    (m * power * 10f64.powf(snr_db / 10.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m2_entries() {
        let g = ArrayGeometry::new(2).unwrap();
        let p = CovarianceModelParams { beta: 1.0, rho1: 0.5, rho2: 0.5, zero_cross_blocks: false };
        let cov = build_covariance(&g, &p).unwrap();
        let a = cov.matrix();
        assert!((a[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((a[(0, 1)].re - 0.5).abs() < 1e-15);
        // sensor (0, 0.5) against (0.5, 0)
        assert!((a[(0, 2)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoupled_has_zero_cross() {
        let g = ArrayGeometry::new(6).unwrap();
        let cov = build_covariance(&g, &CovarianceModelParams::decoupled()).unwrap();
        let b = cov.blocks();
        assert!(b.b12.frobenius_norm() == 0.0);
        assert!(b.b21.frobenius_norm() == 0.0);
    }

    #[test]
    fn odd_m_coincident_sensor_is_rejected() {
        let g = ArrayGeometry::new(5).unwrap();
        let r = build_covariance(&g, &CovarianceModelParams::strongly_correlated());
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn bad_params() {
        let g = ArrayGeometry::new(4).unwrap();
        let p = CovarianceModelParams { beta: 1.0, rho1: 1.0, rho2: 0.5, zero_cross_blocks: false };
        assert!(matches!(build_covariance(&g, &p), Err(Error::InvalidParameter(_))));
        assert!(ArrayGeometry::new(0).is_err());
    }

    #[test]
    fn broadside_steering() {
        let p = steering_vector(4, 0.0);
        for z in &p {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let p = steering_vector(7, 33.0);
        assert!((dot(&p, &p).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn snr_zero_alpha_is_neg_inf() {
        let g = ArrayGeometry::new(4).unwrap();
        let cov = build_covariance(&g, &CovarianceModelParams::baseline()).unwrap();
        let s = SteeringMatrix::at_angles(4, 10.0, -5.0);
        let z = C64::new(0.0, 0.0);
        assert_eq!(snr_db([z, z], &s, &cov).unwrap(), f64::NEG_INFINITY);
        let a = alpha_for_snr(7.0, [C64::new(1.0, 0.0); 2], &s, &cov).unwrap();
        assert!((snr_db(a, &s, &cov).unwrap() - 7.0).abs() < 1e-10);
    }

    #[test]
    fn steering_dimension_mismatch() {
        assert!(assemble_steering(vec![C64::new(1.0, 0.0); 3], vec![C64::new(1.0, 0.0); 4]).is_err());
    }
}
