//! Accelerometer synthesis and signal conditioning.
//!
//! The robot carries two vertically aligned accelerometers: a low-g unit that
//! is quiet but clips during stance transients, and a high-g unit that covers
//! impacts at the price of a much noisier floor. Both are modelled here, along
//! with the range-selection rule and the first-order low-pass used in front of
//! the estimators.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity, m/s². Sensor ranges quoted "in g" are scaled by this.
pub const G: f64 = 9.81;

/// Dual-range accelerometer setup plus the two loop rates it feeds.
///
/// All accelerations are specific force in m/s² (a resting sensor reads +G).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Low-g full-scale range, m/s².
    pub lowg_range: f64,
    /// Low-g noise, 1-sigma per sample, m/s².
    pub lowg_noise_std: f64,
    /// High-g full-scale range, m/s².
    pub highg_range: f64,
    /// High-g noise, 1-sigma per sample, m/s².
    pub highg_noise_std: f64,
    /// Constant accelerometer bias added to both channels, m/s². Zero for a
    /// calibrated unit; set nonzero to exercise the bias-estimating filters.
    pub accel_bias: f64,
    /// IMU output rate, Hz.
    pub sensor_rate: f64,
    /// Estimator tick rate, Hz. At most `sensor_rate`; when lower, the
    /// estimator consumes the freshest sample and the rest are dropped.
    pub est_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            lowg_range: 16.0 * G,
            lowg_noise_std: 0.013 * G,
            highg_range: 100.0 * G,
            highg_noise_std: 0.32 * G,
            accel_bias: 0.0,
            sensor_rate: 840.0,
            est_rate: 840.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lowg_range > 0.0 && self.highg_range > 0.0) {
            return Err(Error::config("sensor ranges must be positive"));
        }
        if self.lowg_noise_std < 0.0 || self.highg_noise_std < 0.0 {
            return Err(Error::config("sensor noise std must be non-negative"));
        }
        if !(self.sensor_rate > 0.0 && self.est_rate > 0.0) {
            return Err(Error::config("sensor and estimator rates must be positive"));
        }
        if self.est_rate > self.sensor_rate + 1e-9 {
            return Err(Error::config(format!(
                "est_rate {} Hz exceeds sensor_rate {} Hz",
                self.est_rate, self.sensor_rate
            )));
        }
        Ok(())
    }

    /// Copy of this config with all noise switched off.
    pub fn noiseless(mut self) -> Self {
        self.lowg_noise_std = 0.0;
        self.highg_noise_std = 0.0;
        self
    }
}

/// One synchronous reading of both accelerometers, specific force in m/s².
#[derive(Debug, Clone, Copy, Default)]
pub struct ImuSample {
    pub lowg: f64,
    pub highg: f64,
}

/// Synthesizes one dual-range sample from the true specific force `a`.
///
/// Gaussian noise is added per channel first, then the result is clipped to
/// the channel range, so a reading can sit exactly on the rail. The low-g
/// channel is always drawn before the high-g one, which keeps RNG streams
/// comparable between noisy and noiseless runs.
pub fn sample_imu<R: Rng + ?Sized>(a: f64, cfg: &SensorConfig, rng: &mut R) -> ImuSample {
    let n_low: f64 = rng.sample(StandardNormal);
    let n_high: f64 = rng.sample(StandardNormal);
    let biased = a + cfg.accel_bias;
    ImuSample {
        lowg: (biased + cfg.lowg_noise_std * n_low).clamp(-cfg.lowg_range, cfg.lowg_range),
        highg: (biased + cfg.highg_noise_std * n_high).clamp(-cfg.highg_range, cfg.highg_range),
    }
}

/// Picks the channel to trust: the low-g reading while it is strictly inside
/// `switch_threshold` (m/s²), the high-g reading from the boundary up.
pub fn select_accel(s: &ImuSample, switch_threshold: f64) -> f64 {
    if s.lowg.abs() < switch_threshold {
        s.lowg
    } else {
        s.highg
    }
}

/// First-order IIR low-pass, `y += alpha * (x - y)` with
/// `alpha = 1 - exp(-2*pi*cutoff*dt)`.
///
/// The first call passes its input straight through so the filter does not
/// start from a fictitious zero state.
#[derive(Debug, Clone, Copy)]
pub struct LowPass {
    alpha: f64,
    y: f64,
    primed: bool,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, dt: f64) -> Self {
        LowPass {
            alpha: 1.0 - (-std::f64::consts::TAU * cutoff_hz * dt).exp(),
            y: 0.0,
            primed: false,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn filter(&mut self, x: f64) -> f64 {
        if self.primed {
            self.y += self.alpha * (x - self.y);
        } else {
            self.y = x;
            self.primed = true;
        }
        self.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lowpass_alpha_at_840hz() {
        let lp = LowPass::new(7.0, 1.0 / 840.0);
        assert_relative_eq!(lp.alpha(), 0.0510127138, epsilon = 1e-8);
    }

    #[test]
    fn lowpass_step_from_zero() {
        let mut lp = LowPass::new(7.0, 1.0 / 840.0);
        lp.filter(0.0);
        let y = lp.filter(1.0);
        assert_relative_eq!(y, 0.05101, epsilon = 1e-5);
    }

    #[test]
    fn lowpass_first_call_passes_through() {
        let mut lp = LowPass::new(7.0, 1.0 / 840.0);
        assert_eq!(lp.filter(-42.5), -42.5);
    }

    #[test]
    fn lowpass_converges_to_constant() {
        let mut lp = LowPass::new(20.0, 1.0 / 840.0);
        let mut y = 0.0;
        lp.filter(0.0);
        for _ in 0..5000 {
            y = lp.filter(3.25);
        }
        assert_relative_eq!(y, 3.25, epsilon = 1e-9);
    }

    #[test]
    fn noiseless_sample_hits_both_channels_exactly() {
        let cfg = SensorConfig::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_imu(-G, &cfg, &mut rng);
        assert_eq!(s.lowg, -G);
        assert_eq!(s.highg, -G);
    }

    #[test]
    fn lowg_clips_highg_does_not() {
        let cfg = SensorConfig::default().noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_imu(20.0 * G, &cfg, &mut rng);
        assert_eq!(s.lowg, 16.0 * G);
        assert_eq!(s.highg, 20.0 * G);
    }

    #[test]
    fn noise_std_matches_request() {
        let cfg = SensorConfig {
            lowg_noise_std: 0.013 * G,
            ..SensorConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_imu(0.0, &cfg, &mut rng).lowg).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!(
            (std - cfg.lowg_noise_std).abs() < 0.05 * cfg.lowg_noise_std,
            "sample std {std} vs requested {}",
            cfg.lowg_noise_std
        );
    }

    #[test]
    fn constant_bias_shifts_both_channels() {
        let cfg = SensorConfig {
            accel_bias: 0.7,
            ..SensorConfig::default().noiseless()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_imu(-G, &cfg, &mut rng);
        assert_relative_eq!(s.lowg, -G + 0.7);
        assert_relative_eq!(s.highg, -G + 0.7);
    }

    #[test]
    fn select_prefers_lowg_inside_range() {
        let th = 14.24 * G;
        let s = ImuSample { lowg: 5.0, highg: 5.4 };
        assert_eq!(select_accel(&s, th), 5.0);
    }

    #[test]
    fn select_boundary_goes_high() {
        let th = 14.24 * G;
        let s = ImuSample { lowg: th, highg: 150.0 };
        assert_eq!(select_accel(&s, th), 150.0);
        let s2 = ImuSample { lowg: -th, highg: -150.0 };
        assert_eq!(select_accel(&s2, th), -150.0);
    }

    #[test]
    fn est_rate_above_sensor_rate_rejected() {
        let cfg = SensorConfig {
            est_rate: 1000.0,
            sensor_rate: 840.0,
            ..SensorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
