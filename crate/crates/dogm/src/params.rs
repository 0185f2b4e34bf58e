//! Shared parameter set for the whole pipeline.
//!
//! Every threshold used anywhere in the engine lives here so a single
//! override file can retune a run. All fields have serde defaults; a
//! partial JSON override keeps the remaining defaults.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Tunable parameters of measurement modeling, tracking, classification,
/// clustering and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Radar pre-classifier threshold: scores at or above it make static
    /// births, below it dynamic births.
    pub eps_rsp: f64,
    /// Decay gain of the mixture-weight decay function.
    pub k_d: f64,
    /// Minimum particle age (steps) before classification and moment
    /// estimation use it.
    pub a_min: u32,
    /// Speed threshold (m/s): classified static at or below, dynamic above.
    pub eps_v: f64,
    /// Minimum dynamic mass for a cell to enter clustering.
    pub eps_d_min: f64,
    /// Default static/dynamic decision threshold on the static mass; the
    /// ROC evaluation sweeps this value.
    pub eps_lambda: f64,
    /// Occupancy Gaussian spread of the radar inverse model (m).
    pub sigma_occ_radar: f64,
    /// Occupancy Gaussian spread of the lidar inverse model (m); smaller
    /// than the radar spread.
    pub sigma_occ_lidar: f64,
    /// Radial-velocity likelihood spread (m/s); also the pre-classifier
    /// residual scale and the dynamic-birth radial spread.
    pub sigma_vr: f64,
    /// Process-noise standard deviation on position per step (m).
    pub q_pos: f64,
    /// Process-noise standard deviation on velocity per step (m/s).
    pub q_vel: f64,
    /// Speed bound for dynamic births (m/s).
    pub v_max: f64,
    /// Share of a cell's particle budget born from the measurement.
    pub birth_fraction: f64,
    /// Peak free-space probability of the inverse model at zero range.
    pub p_free_max: f64,
    /// Peak occupancy probability at a detection point.
    pub p_occ_max: f64,
    /// Soft birth split: when true the static/dynamic birth mix is
    /// proportional to the pre-classifier score instead of thresholded.
    pub soft_static_birth: bool,
    /// Clustering: cell connectivity radius (Chebyshev distance, cells).
    pub d_conn: u32,
    /// Clustering: velocity similarity gate (m/s).
    pub eps_v_sim: f64,
    /// Clustering: minimum component size in cells.
    pub min_cluster_cells: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            eps_rsp: 0.5,
            k_d: 0.65,
            a_min: 6,
            eps_v: 1.2,
            eps_d_min: 0.4,
            eps_lambda: 0.5,
            sigma_occ_radar: 0.6,
            sigma_occ_lidar: 0.15,
            sigma_vr: 0.5,
            q_pos: 0.05,
            q_vel: 0.2,
            v_max: 16.7,
            birth_fraction: 0.2,
            p_free_max: 0.95,
            p_occ_max: 0.95,
            soft_static_birth: false,
            d_conn: 2,
            eps_v_sim: 2.0,
            min_cluster_cells: 3,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let nonneg = [
            ("eps_rsp", self.eps_rsp),
            ("k_d", self.k_d),
            ("eps_v", self.eps_v),
            ("eps_d_min", self.eps_d_min),
            ("sigma_occ_radar", self.sigma_occ_radar),
            ("sigma_occ_lidar", self.sigma_occ_lidar),
            ("sigma_vr", self.sigma_vr),
            ("q_pos", self.q_pos),
            ("q_vel", self.q_vel),
            ("v_max", self.v_max),
            ("eps_v_sim", self.eps_v_sim),
        ];
        for (name, v) in nonneg {
            if v < 0.0 || !v.is_finite() {
                return Err(invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        for (name, v) in [
            ("birth_fraction", self.birth_fraction),
            ("eps_lambda", self.eps_lambda),
            ("p_free_max", self.p_free_max),
            ("p_occ_max", self.p_occ_max),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Load from a JSON file; missing fields keep their defaults and
    /// unknown keys are rejected.
    pub fn from_json_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let params: Params = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        params.validate().map_err(|e| ConfigError::Invalid {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(params)
    }
}

fn invalid(reason: String) -> ConfigError {
    ConfigError::Invalid {
        path: "params".into(),
        reason,
    }
}
