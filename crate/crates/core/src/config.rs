//! Resolved experiment configuration shared by the harness and the CLI.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clutter::TextureModel;
use crate::detectors::DetectorId;
use crate::error::{Error, Result};
use crate::estimators::FixedPointOptions;
use crate::scene::{ArrayGeometry, CovarianceModelParams, SteeringMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub theta1_deg: f64,
    pub theta2_deg: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig { theta1_deg: 13.0, theta2_deg: 7.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl Default for SnrGrid {
    fn default() -> Self {
        SnrGrid { start_db: -5.0, stop_db: 25.0, step_db: 0.25 }
    }
}

impl SnrGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start_db, self.stop_db, self.step_db)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleGrid {
    pub min_deg: f64,
    pub max_deg: f64,
    pub step_deg: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid { min_deg: -60.0, max_deg: 60.0, step_deg: 2.0 }
    }
}

impl AngleGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min_deg, self.max_deg, self.step_deg)
    }

    /// Index of the grid node closest to `theta`.
    pub fn nearest(&self, theta: f64) -> usize {
        let v = self.values();
        let mut best = 0;
        for (i, t) in v.iter().enumerate() {
            if (t - theta).abs() < (v[best] - theta).abs() {
                best = i;
            }
        }
        best
    }
}

fn linspace(a: f64, b: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || b < a {
        return vec![a];
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| a + i as f64 * step).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgePolicy {
    Shrink,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Training bins; `None` means `2 * 2m`.
    pub k: Option<usize>,
    pub guard: usize,
    pub edge: EdgePolicy,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { k: None, guard: 8, edge: EdgePolicy::Shrink }
    }
}

/// Synthetic corruption of the training window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    /// Per-sensor input SNR of the target in the cell under test.
    pub target_snr_db: f64,
    /// Per-sensor input SNR of the target leaking into a training snapshot.
    pub corrupt_snr_db: f64,
    /// Training snapshot that receives the interfering target; `None` = middle.
    pub index: Option<usize>,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig { target_snr_db: 0.0, corrupt_snr_db: 20.0, index: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeTarget {
    pub bin: usize,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    /// Per-sensor input SNR.
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CubeConfig {
    pub n_bins: usize,
    pub targets: Vec<CubeTarget>,
}

impl Default for CubeConfig {
    fn default() -> Self {
        CubeConfig {
            n_bins: 256,
            targets: vec![CubeTarget { bin: 128, theta1_deg: 13.0, theta2_deg: 7.0, snr_db: -5.0 }],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads, 0 = all available.
    pub threads: usize,
    pub m: usize,
    /// Secondary snapshots; `None` means `2 * 2m`.
    pub k_secondary: Option<usize>,
    /// Estimate once from a single secondary batch shared by all trials.
    /// Faster, but every trial then sees the same estimation error.
    pub reuse_secondary: bool,
    pub n_h0: usize,
    pub n_mc: usize,
    pub pfa: f64,
    pub detectors: Vec<String>,
    pub scene: CovarianceModelParams,
    pub clutter: TextureModel,
    pub target: TargetConfig,
    pub snr: SnrGrid,
    pub angles: AngleGrid,
    /// Per-sensor input SNR used for angle maps.
    pub map_snr_db: f64,
    pub tyler: FixedPointOptions,
    pub window: WindowConfig,
    pub corruption: CorruptionConfig,
    pub cube: CubeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            threads: 0,
            m: 16,
            k_secondary: None,
            reuse_secondary: false,
            n_h0: 100_000,
            n_mc: 2000,
            pfa: 1e-2,
            detectors: vec!["m-nmf-r".into()],
            scene: CovarianceModelParams::baseline(),
            clutter: TextureModel::Gaussian,
            target: TargetConfig::default(),
            snr: SnrGrid::default(),
            angles: AngleGrid::default(),
            map_snr_db: -12.0,
            tyler: FixedPointOptions::default(),
            window: WindowConfig::default(),
            corruption: CorruptionConfig::default(),
            cube: CubeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Full-size runs: m = 64 and 10^4 trials per point.
    pub fn full_scale(mut self) -> Self {
        self.m = 64;
        self.k_secondary = None;
        self.n_mc = 10_000;
        self
    }

    pub fn k(&self) -> usize {
        self.k_secondary.unwrap_or(4 * self.m)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.m)
    }

    pub fn steering(&self) -> SteeringMatrix {
        SteeringMatrix::at_angles(self.m, self.target.theta1_deg, self.target.theta2_deg)
    }

    pub fn detector_ids(&self) -> Result<Vec<DetectorId>> {
        self.detectors.iter().map(|s| s.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.m < 2 {
            return bad("m", format!("must be at least 2, got {}", self.m));
        }
        if !(self.pfa > 0.0 && self.pfa <= 1.0) {
            return bad("pfa", format!("must lie in (0, 1], got {}", self.pfa));
        }
        if (self.n_h0 as f64) < 10.0 / self.pfa {
            return bad("n_h0", format!("{} is below 10 / pfa = {}", self.n_h0, (10.0 / self.pfa).ceil()));
        }
        if self.n_mc == 0 {
            return bad("n_mc", "must be positive".into());
        }
        if !(self.snr.step_db > 0.0) || self.snr.stop_db < self.snr.start_db {
            return bad("snr", "need step_db > 0 and stop_db >= start_db".into());
        }
        if !(self.angles.step_deg > 0.0) || self.angles.max_deg < self.angles.min_deg {
            return bad("angles", "need step_deg > 0 and max_deg >= min_deg".into());
        }
        if self.angles.min_deg < -90.0 || self.angles.max_deg > 90.0 {
            return bad("angles", "must stay within [-90, 90] degrees".into());
        }
        if self.tyler.max_iter == 0 || !(self.tyler.tol >= 0.0) {
            return bad("tyler", "need max_iter >= 1 and tol >= 0".into());
        }
        if self.k() < 2 * self.m {
            return bad("k_secondary", format!("{} is below 2m = {}", self.k(), 2 * self.m));
        }
        self.scene.validate().map_err(|e| Error::Config(format!("scene: {e}")))?;
        self.clutter.validate().map_err(|e| Error::Config(format!("clutter: {e}")))?;
        self.detector_ids()?;
        Ok(())
    }

    /// Short hash of the resolved configuration. The thread count does not
    /// change results and is left out.
    pub fn fingerprint(&self) -> String {
        let key = ExperimentConfig { threads: 0, ..self.clone() };
        let digest = Sha256::digest(format!("{key:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        ExperimentConfig::default().full_scale().validate().unwrap();
        assert_eq!(ExperimentConfig::default().full_scale().k(), 256);
    }

    #[test]
    fn null_sample_size_guard() {
        let cfg = ExperimentConfig { n_h0: 999, pfa: 1e-2, ..Default::default() };
        let e = cfg.validate().unwrap_err();
        assert!(e.to_string().contains("n_h0"), "{e}");
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 2, ..Default::default() };
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn grids() {
        let g = AngleGrid::default().values();
        assert_eq!(g.len(), 61);
        assert_eq!(g[30], 0.0);
        assert_eq!(AngleGrid::default().nearest(8.3), 34);
        assert_eq!(SnrGrid { start_db: 0.0, stop_db: 1.0, step_db: 0.25 }.values().len(), 5);
    }
}
