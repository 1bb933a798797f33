use serde::{Deserialize, Serialize};

/// Chamfer-distance thresholds used for detection scoring.
pub const MATCH_THRESHOLDS: [f64; 5] = [0.1, 0.05, 0.02, 0.01, 0.005];

/// Threshold whose matching drives topology scoring and good/total counts.
pub const TOPOLOGY_MATCH_THRESHOLD: f64 = 0.01;

/// Pipeline parameters. Lengths are in normalized (unit box) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub resolution: usize,
    pub patch_stride: usize,
    pub patch_size: usize,
    /// Fitting acceptance threshold (rms).
    pub eps1: f64,
    /// Surface adjacency distance threshold.
    pub eps2: f64,
    /// Curve adjacency distance threshold.
    pub eps3: f64,
    /// Third-derivative threshold; `None` means `0.5 / spacing^2`.
    pub detect_tau: Option<f64>,
    pub detect_dirs: usize,
    /// Largest UDF value at which a voxel may be flagged as boundary.
    pub d_max: f64,
    pub hole_fill_steps: usize,
    pub min_cell_voxels: usize,
    pub match_thresholds: Vec<f64>,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            resolution: 256,
            patch_stride: 16,
            patch_size: 32,
            eps1: 0.001,
            eps2: 0.02,
            eps3: 0.05,
            detect_tau: None,
            detect_dirs: 8,
            d_max: 0.3,
            hole_fill_steps: 4,
            min_cell_voxels: 8,
            match_thresholds: MATCH_THRESHOLDS.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("thresholds must satisfy 0 < eps1 < eps2 < eps3 (got {0}, {1}, {2})")]
    ThresholdOrder(f64, f64, f64),
    #[error("patch stride {stride} must be positive and not exceed patch size {size}")]
    Patch { stride: usize, size: usize },
    #[error("resolution must be positive")]
    Resolution,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

impl Config {
    pub fn with_resolution(resolution: usize) -> Self {
        Self {
            resolution,
            ..Self::default()
        }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn tau(&self) -> f64 {
        self.detect_tau
            .unwrap_or_else(|| 0.5 / (self.spacing() * self.spacing()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.resolution == 0 {
            return Err(ConfigError::Resolution);
        }
        if !(self.eps1 > 0.0 && self.eps1 < self.eps2 && self.eps2 < self.eps3) {
            return Err(ConfigError::ThresholdOrder(self.eps1, self.eps2, self.eps3));
        }
        if self.patch_stride == 0 || self.patch_stride > self.patch_size {
            return Err(ConfigError::Patch {
                stride: self.patch_stride,
                size: self.patch_size,
            });
        }
        if let Some(t) = self.detect_tau {
            if t <= 0.0 {
                return Err(ConfigError::NonPositive("detect_tau"));
            }
        }
        if self.d_max <= 0.0 {
            return Err(ConfigError::NonPositive("d_max"));
        }
        if self.match_thresholds.iter().any(|&t| t <= 0.0) {
            return Err(ConfigError::NonPositive("match threshold"));
        }
        Ok(())
    }
}
