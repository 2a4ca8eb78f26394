//! Closed-form per-subsystem models: processing time, precision, image
//! resolution, network size and energy rate.

use crate::constants::ModelConstants;
use crate::error::{Error, Result};

/// One subsystem's operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemConfig {
    /// Normalized resource share.
    pub share: f64,
    pub network_size: f64,
    /// Megapixels.
    pub resolution: f64,
    /// Hz.
    pub frequency: f64,
}

impl SubsystemConfig {
    pub fn time(&self, k: &ModelConstants) -> Result<f64> {
        compute_time(self.share, self.network_size, self.resolution, k)
    }

    pub fn precision(&self, k: &ModelConstants) -> f64 {
        compute_precision(self.network_size, self.resolution, k)
    }

    pub fn energy(&self, k: &ModelConstants) -> f64 {
        compute_energy(self.share, self.frequency, k)
    }
}

/// Seconds to analyze one image: `t0 + t1 * S * R / C`.
pub fn compute_time(share: f64, network_size: f64, resolution: f64, k: &ModelConstants) -> Result<f64> {
    if !(share > 0.0) {
        return Err(Error::Domain(format!(
            "processing time needs a positive resource share, got {share}"
        )));
    }
    Ok(k.t0 + k.t1 * (network_size * resolution / share))
}

/// Detection precision, clamped to 1. Does not depend on the resource share.
pub fn compute_precision(network_size: f64, resolution: f64, k: &ModelConstants) -> f64 {
    (k.p0 + k.p1 * network_size * resolution).min(1.0)
}

/// Image resolution (MP) for an importance factor, floored at `R_min`.
pub fn compute_resolution(alpha: f64, k: &ModelConstants) -> f64 {
    (k.r_max * alpha).max(k.r_min)
}

/// Normalized network size for a weightage, floored at `S_min`.
pub fn compute_network_size(weight: f64, k: &ModelConstants) -> f64 {
    (k.s_max * weight).max(k.s_min)
}

/// Normalized energy per second: `e0 + e1 * C * F`.
pub fn compute_energy(share: f64, frequency: f64, k: &ModelConstants) -> f64 {
    k.e0 + k.e1 * share * frequency
}
