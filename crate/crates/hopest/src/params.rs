//! The tunable estimator parameter set, its bounds, and the per-filter
//! trainable subsets.
//!
//! Serialized field names double as the config-file keys, so they follow the
//! conventional symbols (`f_HVSE`, `g_s`, `sigma_az`, ...) rather than Rust
//! style.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterKind;

/// Everything the genetic algorithm is allowed to touch.
///
/// Cutoffs are in Hz, noise levels in SI units (m/s², m/s, m), and the
/// polynomial coefficients dimensionless. `c_m1`/`c_m0` map the summed motor
/// duty commands to thrust force for the in-flight bias measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorParams {
    /// State-filter accelerometer low-pass cutoff, Hz.
    #[serde(rename = "f_HVSE")]
    pub f_hvse: f64,
    /// Phase-machine accelerometer low-pass cutoff, Hz.
    #[serde(rename = "f_HPE")]
    pub f_hpe: f64,
    /// Range switch point between the two accelerometers, in g.
    pub g_s: f64,
    /// Process noise driving the kinematic states, m/s².
    pub sigma_az: f64,
    /// Bias random-walk / bias measurement noise, m/s².
    pub sigma_bz: f64,
    /// Velocity measurement noise, m/s.
    pub sigma_vz: f64,
    /// Position measurement noise, m.
    pub sigma_pz: f64,
    pub c_vel2: f64,
    pub c_vel1: f64,
    pub c_vel0: f64,
    pub c_ch1: f64,
    pub c_ch0: f64,
    pub c_m1: f64,
    pub c_m0: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            f_hvse: 7.0,
            f_hpe: 8.0,
            g_s: 14.24,
            sigma_az: 9.9857,
            sigma_bz: 0.05,
            sigma_vz: 0.5,
            sigma_pz: 0.0091,
            c_vel2: 0.0,
            c_vel1: 0.0,
            c_vel0: 1.0,
            c_ch1: 0.0,
            c_ch0: 1.0,
            c_m1: 1.61865,
            c_m0: 0.0,
        }
    }
}

/// Identifies one entry of [`EstimatorParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamId {
    FHvse,
    FHpe,
    GS,
    SigmaAz,
    SigmaBz,
    SigmaVz,
    SigmaPz,
    CVel2,
    CVel1,
    CVel0,
    CCh1,
    CCh0,
    CM1,
    CM0,
}

impl ParamId {
    pub const ALL: [ParamId; 14] = [
        ParamId::FHvse,
        ParamId::FHpe,
        ParamId::GS,
        ParamId::SigmaAz,
        ParamId::SigmaBz,
        ParamId::SigmaVz,
        ParamId::SigmaPz,
        ParamId::CVel2,
        ParamId::CVel1,
        ParamId::CVel0,
        ParamId::CCh1,
        ParamId::CCh0,
        ParamId::CM1,
        ParamId::CM0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::FHvse => "f_HVSE",
            ParamId::FHpe => "f_HPE",
            ParamId::GS => "g_s",
            ParamId::SigmaAz => "sigma_az",
            ParamId::SigmaBz => "sigma_bz",
            ParamId::SigmaVz => "sigma_vz",
            ParamId::SigmaPz => "sigma_pz",
            ParamId::CVel2 => "c_vel2",
            ParamId::CVel1 => "c_vel1",
            ParamId::CVel0 => "c_vel0",
            ParamId::CCh1 => "c_ch1",
            ParamId::CCh0 => "c_ch0",
            ParamId::CM1 => "c_m1",
            ParamId::CM0 => "c_m0",
        }
    }

    /// Training bounds (lo, hi). Cutoffs stay within what the estimation loop
    /// can represent, the switch point within the overlap of the two sensor
    /// ranges, noise levels strictly positive, coefficients in a symmetric
    /// box.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ParamId::FHvse | ParamId::FHpe => (5.0, 400.0),
            ParamId::GS => (12.0, 14.5),
            ParamId::SigmaAz | ParamId::SigmaBz | ParamId::SigmaVz | ParamId::SigmaPz => {
                (1e-4, 10.0)
            }
            _ => (-10.0, 10.0),
        }
    }

    /// The subset the trainer optimizes for a given filter kind. Two-state
    /// filters have no bias terms to tune; the error-state pair drops the
    /// liftoff velocity rescale (that update is not applied to them), and only
    /// the bias-measuring kinds see the thrust map.
    pub fn trained_set(kind: FilterKind) -> &'static [ParamId] {
        use ParamId::*;
        match kind {
            FilterKind::Kf1 => &[
                FHvse, FHpe, GS, SigmaAz, SigmaVz, SigmaPz, CVel2, CVel1, CVel0, CCh1, CCh0,
            ],
            FilterKind::Kf2 => &[
                FHvse, FHpe, GS, SigmaAz, SigmaVz, SigmaPz, SigmaBz, CVel2, CVel1, CVel0, CCh1,
                CCh0, CM1, CM0,
            ],
            FilterKind::Eskf1 => &[FHvse, FHpe, GS, SigmaAz, SigmaVz, SigmaPz, SigmaBz],
            FilterKind::Eskf2 => &[FHvse, FHpe, GS, SigmaAz, SigmaVz, SigmaPz, SigmaBz, CM1, CM0],
        }
    }
}

impl EstimatorParams {
    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::FHvse => self.f_hvse,
            ParamId::FHpe => self.f_hpe,
            ParamId::GS => self.g_s,
            ParamId::SigmaAz => self.sigma_az,
            ParamId::SigmaBz => self.sigma_bz,
            ParamId::SigmaVz => self.sigma_vz,
            ParamId::SigmaPz => self.sigma_pz,
            ParamId::CVel2 => self.c_vel2,
            ParamId::CVel1 => self.c_vel1,
            ParamId::CVel0 => self.c_vel0,
            ParamId::CCh1 => self.c_ch1,
            ParamId::CCh0 => self.c_ch0,
            ParamId::CM1 => self.c_m1,
            ParamId::CM0 => self.c_m0,
        }
    }

    pub fn set(&mut self, id: ParamId, v: f64) {
        match id {
            ParamId::FHvse => self.f_hvse = v,
            ParamId::FHpe => self.f_hpe = v,
            ParamId::GS => self.g_s = v,
            ParamId::SigmaAz => self.sigma_az = v,
            ParamId::SigmaBz => self.sigma_bz = v,
            ParamId::SigmaVz => self.sigma_vz = v,
            ParamId::SigmaPz => self.sigma_pz = v,
            ParamId::CVel2 => self.c_vel2 = v,
            ParamId::CVel1 => self.c_vel1 = v,
            ParamId::CVel0 => self.c_vel0 = v,
            ParamId::CCh1 => self.c_ch1 = v,
            ParamId::CCh0 => self.c_ch0 = v,
            ParamId::CM1 => self.c_m1 = v,
            ParamId::CM0 => self.c_m0 = v,
        }
    }

    /// Packs the trainable subset for `kind` into a flat vector.
    pub fn to_vector(&self, kind: FilterKind) -> Vec<f64> {
        ParamId::trained_set(kind).iter().map(|&id| self.get(id)).collect()
    }

    /// Rebuilds a full parameter set from a flat vector, taking untrained
    /// entries from `self`.
    pub fn with_vector(&self, kind: FilterKind, v: &[f64]) -> Result<EstimatorParams> {
        let ids = ParamId::trained_set(kind);
        if v.len() != ids.len() {
            return Err(Error::config(format!(
                "parameter vector has {} entries, expected {}",
                v.len(),
                ids.len()
            )));
        }
        let mut out = *self;
        for (&id, &x) in ids.iter().zip(v) {
            out.set(id, x);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for id in ParamId::ALL {
            let v = self.get(id);
            if !v.is_finite() {
                return Err(Error::config(format!("{} is not finite", id.name())));
            }
        }
        for id in [ParamId::FHvse, ParamId::FHpe] {
            if self.get(id) <= 0.0 {
                return Err(Error::config(format!("{} must be positive", id.name())));
            }
        }
        for id in [ParamId::SigmaAz, ParamId::SigmaBz, ParamId::SigmaVz, ParamId::SigmaPz] {
            if self.get(id) <= 0.0 {
                return Err(Error::config(format!("{} must be positive", id.name())));
            }
        }
        if self.g_s <= 0.0 {
            return Err(Error::config("g_s must be positive"));
        }
        Ok(())
    }
}
