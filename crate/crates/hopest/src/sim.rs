//! Closed-loop hop trials.
//!
//! One trial wires the whole stack together: plant stepped at [`SIM_DT`],
//! IMU sampled at the sensor rate, estimator and height controller run at
//! the estimation rate on the freshest sample. Everything downstream of the
//! plant sees only what the real robot would: specific-force samples and
//! its own state estimate (unless the trial is configured to close the loop
//! on true state, which is the ground-truth baseline the noisy runs are
//! judged against).
//!
//! Trials are pure functions of their config: the only randomness is the
//! sensor noise stream, drawn from a counter-keyed generator seeded by
//! `TrialConfig::seed`, so a rerun is bitwise identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    height_control, step, ControlConfig, ControlSource, RobotParams, SimState, TruePhaseTracker,
    SIM_DT,
};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorRig, TickInput};
use crate::filter::FilterKind;
use crate::hoplog::{HopLog, TickRow};
use crate::params::EstimatorParams;
use crate::phase::PhaseConfig;
use crate::sensing::{sample_imu, ImuSample, SensorConfig};

/// One step of the commanded-height schedule: from `t` onward the
/// controller chases apex height `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSeg {
    /// Segment start time, s.
    pub t: f64,
    /// Commanded apex height, m.
    pub h: f64,
}

/// Everything a trial depends on. Two configs that compare equal produce
/// byte-identical logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    pub robot: RobotParams,
    pub estimator: EstimatorParams,
    pub filter: FilterKind,
    pub sensors: SensorConfig,
    pub phase: PhaseConfig,
    pub control: ControlConfig,
    /// Commanded-height schedule, strictly increasing in `t`. Before the
    /// first segment the first height applies.
    pub schedule: Vec<ScheduleSeg>,
    /// Trial length, s.
    pub duration: f64,
    /// Seed for the sensor-noise stream.
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            robot: RobotParams::default(),
            estimator: EstimatorParams::default(),
            filter: FilterKind::Kf1,
            sensors: SensorConfig::default(),
            phase: PhaseConfig::default(),
            control: ControlConfig::default(),
            schedule: vec![ScheduleSeg { t: 0.0, h: 1.0 }],
            duration: 10.0,
            seed: 0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.estimator.validate()?;
        self.sensors.validate()?;
        self.phase.validate()?;
        self.control.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("trial duration must be positive"));
        }
        if self.schedule.is_empty() {
            return Err(Error::config("height schedule must not be empty"));
        }
        for (i, seg) in self.schedule.iter().enumerate() {
            if !(seg.h > 0.0 && seg.h.is_finite()) {
                return Err(Error::config("scheduled height must be positive"));
            }
            if !seg.t.is_finite() {
                return Err(Error::config("schedule time must be finite"));
            }
            if i > 0 && seg.t <= self.schedule[i - 1].t {
                return Err(Error::config("schedule times must strictly increase"));
            }
        }
        Ok(())
    }

    /// Commanded height in force at time `t`.
    pub fn h_desired_at(&self, t: f64) -> f64 {
        let mut h = self.schedule[0].h;
        for seg in &self.schedule {
            if seg.t <= t {
                h = seg.h;
            } else {
                break;
            }
        }
        h
    }
}

/// Runs one closed-loop trial and returns its log, one row per estimator
/// tick.
///
/// The trial starts airborne at the first scheduled height with zero
/// velocity, as if carried there, and drops into its first hop. Thrust is
/// commanded only while the controlling source believes the robot is
/// airborne; during stance the command is zero and the spring does the
/// work.
///
/// Three clocks run against the plant: the IMU sampler at the sensor rate,
/// the controller at its own rate, and the estimator at the estimation
/// rate. When the loop is closed on true state the controller sees truth
/// sampled and held at the sensor rate, so rate studies degrade its
/// reference the same way they degrade the estimator's input.
pub fn simulate_trial(cfg: &TrialConfig) -> Result<HopLog> {
    cfg.validate()?;
    let rp = &cfg.robot;

    let mut state = SimState::at_apex(cfg.schedule[0].h, rp);
    let mut tracker = TruePhaseTracker::new(state.in_contact);
    let mut rig = EstimatorRig::new(
        cfg.filter,
        &cfg.estimator,
        &cfg.phase,
        rp,
        cfg.sensors.est_rate,
        state.com_height(rp),
        state.com_velocity(rp),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let steps = (cfg.duration / SIM_DT).round() as u64;
    let mut rows = Vec::with_capacity((cfg.duration * cfg.sensors.est_rate) as usize + 2);

    // Clock counters; event k fires at the first plant step whose time
    // reaches k over the rate. Integer counters keep the schedules
    // drift-free over long trials.
    let mut k_sample: u64 = 0;
    let mut k_ctrl: u64 = 0;
    let mut k_est: u64 = 0;
    let mut sample = ImuSample {
        lowg: 0.0,
        highg: 0.0,
    };
    // True state held from the last sensor sample, for true-state control.
    let mut snap_z = state.com_height(rp);
    let mut snap_v = state.com_velocity(rp);
    let mut snap_aerial = tracker.phase().is_aerial();
    let mut twr = 0.0;

    for n in 0..=steps {
        let t = state.t;
        let due = t + 0.5 * SIM_DT;

        while (k_sample as f64) / cfg.sensors.sensor_rate <= due {
            // Channels read specific force: body acceleration plus gravity.
            sample = sample_imu(state.a_b + rp.g, &cfg.sensors, &mut rng);
            snap_z = state.com_height(rp);
            snap_v = state.com_velocity(rp);
            snap_aerial = tracker.phase().is_aerial();
            k_sample += 1;
        }

        while (k_ctrl as f64) / cfg.control.rate <= due {
            let t_ctrl = (k_ctrl as f64) / cfg.control.rate;
            let h_desired = cfg.h_desired_at(t_ctrl);
            let (z_src, v_src, aerial) = match cfg.control.source {
                ControlSource::TrueState => (snap_z, snap_v, snap_aerial),
                ControlSource::Estimated => (
                    rig.filter().z(),
                    rig.filter().v(),
                    rig.phase().is_aerial(),
                ),
            };
            twr = if aerial {
                height_control(z_src, v_src, h_desired, rp.g, &cfg.control)
            } else {
                0.0
            };
            k_ctrl += 1;
        }

        while (k_est as f64) / cfg.sensors.est_rate <= due {
            // Rows are stamped with the nominal tick time so the log's tick
            // period is exactly the estimation period, not the plant-grid
            // time the tick happened to land on.
            let t_row = (k_est as f64) / cfg.sensors.est_rate;
            let h_desired = cfg.h_desired_at(t_row);

            let est = rig.tick(&TickInput {
                sample,
                twr,
                h_desired,
            })?;

            rows.push(TickRow {
                t: t_row,
                z_true: state.com_height(rp),
                v_true: state.com_velocity(rp),
                a_true: state.a_b,
                a_lowg: sample.lowg,
                a_highg: sample.highg,
                a_world_est: est.a_world,
                phase: tracker.phase(),
                event: est.event,
                z_est: est.z,
                v_est: est.v,
                p00: est.p00,
                p01: est.p01,
                p11: est.p11,
                twr,
                h_desired,
            });
            k_est += 1;
        }

        if n < steps {
            state = step(&state, twr, rp, SIM_DT)?;
            tracker.update(state.in_contact, state.v_b);
        }
    }

    Ok(HopLog::new(rows))
}
