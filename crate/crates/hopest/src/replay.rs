//! Offline re-estimation over recorded logs.
//!
//! A recorded trial fixes everything the estimator ever saw: the raw
//! accelerometer stream, the thrust commands, and the commanded heights.
//! Replaying that stream through a rig built with different parameters
//! shows exactly what those parameters would have estimated on the same
//! flight, which is what the trainer's cost function scores. Replaying
//! with the original parameters reproduces the logged estimates bit for
//! bit.

use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::estimator::{EstimatorRig, InferredUpdate, TickEstimate, TickInput};
use crate::filter::FilterKind;
use crate::hoplog::HopLog;
use crate::params::EstimatorParams;
use crate::phase::PhaseConfig;
use crate::sensing::ImuSample;

/// Recovers the estimation rate from a log's tick period.
///
/// Tick times are stamped as k/rate, so the first interval is the exact
/// period. Whole-Hz rates round-trip through the division exactly; anything
/// else falls back to the reciprocal.
pub fn log_est_rate(log: &HopLog) -> Result<f64> {
    if log.len() < 2 {
        return Err(Error::data("replay needs at least two rows"));
    }
    let dt = log.rows[1].t - log.rows[0].t;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::data("log tick times must increase"));
    }
    let rounded = (1.0 / dt).round();
    if rounded > 0.0 && (rounded * dt - 1.0).abs() < 1e-6 {
        Ok(rounded)
    } else {
        Ok(1.0 / dt)
    }
}

/// Runs the recorded sensor stream through a fresh estimator and returns
/// one estimate per row.
///
/// The rig starts from the logged initial true state, as the online run
/// did, and consumes exactly the logged inputs; the log's own estimate
/// columns are ignored.
pub fn replay_log(
    kind: FilterKind,
    params: &EstimatorParams,
    phase_cfg: &PhaseConfig,
    rp: &RobotParams,
    log: &HopLog,
) -> Result<Vec<TickEstimate>> {
    replay_inner(kind, params, phase_cfg, rp, log, None)
}

/// [`replay_log`] with the rig limited to a subset of its inferred
/// updates. An empty slice disables them all, leaving pure dead reckoning
/// between events.
pub fn replay_log_restricted(
    kind: FilterKind,
    params: &EstimatorParams,
    phase_cfg: &PhaseConfig,
    rp: &RobotParams,
    log: &HopLog,
    allowed: &[InferredUpdate],
) -> Result<Vec<TickEstimate>> {
    replay_inner(kind, params, phase_cfg, rp, log, Some(allowed))
}

fn replay_inner(
    kind: FilterKind,
    params: &EstimatorParams,
    phase_cfg: &PhaseConfig,
    rp: &RobotParams,
    log: &HopLog,
    allowed: Option<&[InferredUpdate]>,
) -> Result<Vec<TickEstimate>> {
    let est_rate = log_est_rate(log)?;
    let first = &log.rows[0];
    let mut rig = EstimatorRig::new(
        kind,
        params,
        phase_cfg,
        rp,
        est_rate,
        first.z_true,
        first.v_true,
    )?;
    if let Some(allowed) = allowed {
        rig.restrict_updates(allowed);
    }

    let mut out = Vec::with_capacity(log.len());
    for row in &log.rows {
        let est = rig.tick(&TickInput {
            sample: ImuSample {
                lowg: row.a_lowg,
                highg: row.a_highg,
            },
            twr: row.twr,
            h_desired: row.h_desired,
        })?;
        out.push(est);
    }
    Ok(out)
}

/// Copies a log with its estimate columns replaced by a replay's output.
/// Truth, sensor, and command columns are untouched.
pub fn replayed_log(log: &HopLog, ests: &[TickEstimate]) -> HopLog {
    let rows = log
        .rows
        .iter()
        .zip(ests)
        .map(|(row, est)| {
            let mut r = *row;
            r.a_world_est = est.a_world;
            r.event = est.event;
            r.z_est = est.z;
            r.v_est = est.v;
            r.p00 = est.p00;
            r.p01 = est.p01;
            r.p11 = est.p11;
            r
        })
        .collect();
    HopLog::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlConfig, ControlSource};
    use crate::sensing::SensorConfig;
    use crate::sim::{simulate_trial, TrialConfig};

    fn logged_trial(seed: u64) -> (TrialConfig, HopLog) {
        let cfg = TrialConfig {
            duration: 4.0,
            seed,
            sensors: SensorConfig::default().noiseless(),
            control: ControlConfig {
                source: ControlSource::TrueState,
                ..ControlConfig::default()
            },
            ..TrialConfig::default()
        };
        let log = simulate_trial(&cfg).unwrap();
        (cfg, log)
    }

    #[test]
    fn replay_reproduces_the_online_estimates_bitwise() {
        let (cfg, log) = logged_trial(7);
        let ests =
            replay_log(cfg.filter, &cfg.estimator, &cfg.phase, &cfg.robot, &log).unwrap();
        assert_eq!(ests.len(), log.len());
        for (row, est) in log.rows.iter().zip(&ests) {
            assert_eq!(row.z_est.to_bits(), est.z.to_bits());
            assert_eq!(row.v_est.to_bits(), est.v.to_bits());
            assert_eq!(row.event, est.event);
            assert_eq!(row.p00.to_bits(), est.p00.to_bits());
        }
    }

    #[test]
    fn different_params_change_the_replay() {
        let (cfg, log) = logged_trial(7);
        let mut p = cfg.estimator.clone();
        p.f_hvse = 40.0;
        let ests = replay_log(cfg.filter, &p, &cfg.phase, &cfg.robot, &log).unwrap();
        let same = log
            .rows
            .iter()
            .zip(&ests)
            .all(|(row, est)| row.z_est.to_bits() == est.z.to_bits());
        assert!(!same);
    }

    #[test]
    fn rate_recovery_is_exact_for_whole_hz() {
        let (_, log) = logged_trial(1);
        assert_eq!(log_est_rate(&log).unwrap(), 840.0);
    }

    #[test]
    fn replayed_log_swaps_only_estimate_columns() {
        let (cfg, log) = logged_trial(3);
        let mut p = cfg.estimator.clone();
        p.sigma_pz = 1.0;
        let ests = replay_log(cfg.filter, &p, &cfg.phase, &cfg.robot, &log).unwrap();
        let swapped = replayed_log(&log, &ests);
        for (a, b) in log.rows.iter().zip(&swapped.rows) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.z_true, b.z_true);
            assert_eq!(a.a_lowg, b.a_lowg);
            assert_eq!(a.twr, b.twr);
            assert_eq!(a.phase, b.phase);
        }
    }

    #[test]
    fn single_row_log_is_rejected() {
        let (_, log) = logged_trial(1);
        let short = HopLog::new(vec![log.rows[0]]);
        assert!(replay_log(
            FilterKind::Kf1,
            &EstimatorParams::default(),
            &PhaseConfig::default(),
            &RobotParams::default(),
            &short
        )
        .is_err());
    }
}
