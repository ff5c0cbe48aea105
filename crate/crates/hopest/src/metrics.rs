//! Error metrics, ground-height tracking, reference estimators, and the
//! hopping agility figures.
//!
//! Hop-level scoring works on [`HopRecord`]s cut from a log at detected
//! touchdowns. The five headline numbers:
//!
//! * M1, M2: per-hop normalized mean absolute error of position and
//!   velocity, averaged over hops, in percent. The normalizer is the
//!   per-hop mean of true height (M1) and of true absolute velocity (M2).
//! * M3: mean absolute percentage error of detected apex heights against
//!   true apexes, percent.
//! * M4: mean absolute detected-apex timing error, seconds.
//! * M5: mean absolute gap between the true apex and the commanded height,
//!   meters. This one scores the closed loop rather than the estimator.
//!
//! The reference estimators give the comparison points: coasting
//! ballistically from liftoff, dead-reckoning the accelerometer, and a
//! filter allowed only its touchdown position fix.

use serde::{Deserialize, Serialize};

use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::estimator::InferredUpdate;
use crate::filter::FilterKind;
use crate::hoplog::{detect_true_transitions, HopLog};
use crate::params::EstimatorParams;
use crate::phase::{Phase, PhaseConfig, Transition};
use crate::replay::replay_log_restricted;
use crate::sensing::{select_accel, ImuSample, G};

/// One detected hop cycle, touchdown to the tick before the next
/// touchdown, with the paired estimate/truth series needed for scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopRecord {
    /// Estimated height at the detected touchdown, m.
    pub h_td: f64,
    /// Estimated height at the detected apex, m.
    pub h_ha: f64,
    pub t_td: f64,
    /// Time of the detected apex, s.
    pub t_ha: f64,
    /// True apex height over the cycle, m.
    pub true_h_ha: f64,
    pub true_t_ha: f64,
    /// Commanded height at touchdown, m.
    pub h_desired: f64,
    pub z_true: Vec<f64>,
    pub z_est: Vec<f64>,
    pub v_true: Vec<f64>,
    pub v_est: Vec<f64>,
}

/// Reconstructs the estimator's phase at every row from the event column.
/// The row carrying an event already belongs to the new phase.
pub fn detected_phases(log: &HopLog) -> Vec<Phase> {
    let mut phase = Phase::Drop;
    log.rows
        .iter()
        .map(|row| {
            if let Some(ev) = row.event {
                phase = match ev {
                    Transition::Td => Phase::StanceDown,
                    Transition::Ms => Phase::StanceUp,
                    Transition::Lo => Phase::Rebound,
                    Transition::Ha => Phase::Drop,
                };
            }
            phase
        })
        .collect()
}

/// Cuts a log into hop records at detected touchdowns.
///
/// A cycle without a detected apex inside it produces no record. With
/// `aerial_only` the sample arrays keep only rows the estimator believed
/// were airborne, which scores flight tracking without the stance ticks.
pub fn hop_records(log: &HopLog, aerial_only: bool) -> Vec<HopRecord> {
    let phases = detected_phases(log);
    let td_rows: Vec<usize> = log
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.event == Some(Transition::Td))
        .map(|(i, _)| i)
        .collect();

    let mut out = Vec::new();
    for w in td_rows.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rows = &log.rows[a..b];
        let Some(ha_off) = rows.iter().position(|r| r.event == Some(Transition::Ha)) else {
            continue;
        };
        let ha = &rows[ha_off];
        let (true_off, true_apex) = rows
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.z_true.total_cmp(&y.z_true))
            .unwrap();

        let keep = |i: usize| !aerial_only || phases[a + i].is_aerial();
        let mut rec = HopRecord {
            h_td: rows[0].z_est,
            h_ha: ha.z_est,
            t_td: rows[0].t,
            t_ha: ha.t,
            true_h_ha: true_apex.z_true,
            true_t_ha: rows[true_off].t,
            h_desired: rows[0].h_desired,
            z_true: Vec::new(),
            z_est: Vec::new(),
            v_true: Vec::new(),
            v_est: Vec::new(),
        };
        for (i, r) in rows.iter().enumerate() {
            if keep(i) {
                rec.z_true.push(r.z_true);
                rec.z_est.push(r.z_est);
                rec.v_true.push(r.v_true);
                rec.v_est.push(r.v_est);
            }
        }
        out.push(rec);
    }
    out
}

/// The full metric set over one ordered sequence of hops.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Normalized position error, percent.
    pub m1: f64,
    /// Normalized velocity error, percent.
    pub m2: f64,
    /// Apex height error, percent.
    pub m3: f64,
    /// Apex timing error, s.
    pub m4: f64,
    /// True apex versus commanded height, m.
    pub m5: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Hops dropped from M1/M2 for a vanishing normalizer.
    pub excluded_hops: usize,
    pub n_hops: usize,
    /// Ground-height estimate per hop, m.
    pub h_g: Vec<f64>,
    /// Mean climb rate over hops, m/s.
    pub nu_vja: Option<f64>,
    /// Mean full-cycle rate over hops, m/s.
    pub nu_ha: Option<f64>,
    /// Apex-to-apex rate over hops, m/s.
    pub nu_uha: Option<f64>,
}

/// Scores an ordered hop sequence.
pub fn compute_metrics(records: &[HopRecord]) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::data("no hop records to score"));
    }
    if records.iter().all(|r| r.z_true.len() < 2) {
        return Err(Error::data("hop records carry fewer than two samples"));
    }

    let mut m1_sum = 0.0;
    let mut m2_sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    let mut sq_z = 0.0;
    let mut sq_v = 0.0;
    let mut n_samples = 0usize;
    for r in records {
        let n = r.z_true.len();
        if n == 0 {
            excluded += 1;
            continue;
        }
        let mae_z: f64 =
            r.z_true.iter().zip(&r.z_est).map(|(t, e)| (e - t).abs()).sum::<f64>() / n as f64;
        let mae_v: f64 =
            r.v_true.iter().zip(&r.v_est).map(|(t, e)| (e - t).abs()).sum::<f64>() / n as f64;
        let mean_z: f64 = r.z_true.iter().sum::<f64>() / n as f64;
        let mean_av: f64 = r.v_true.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        if mean_z.abs() < 1e-9 || mean_av < 1e-9 {
            excluded += 1;
            continue;
        }
        m1_sum += mae_z / mean_z.abs();
        m2_sum += mae_v / mean_av;
        used += 1;
        for (t, e) in r.z_true.iter().zip(&r.z_est) {
            sq_z += (e - t).powi(2);
        }
        for (t, e) in r.v_true.iter().zip(&r.v_est) {
            sq_v += (e - t).powi(2);
        }
        n_samples += n;
    }
    if used == 0 {
        return Err(Error::data("every hop was excluded by a vanishing normalizer"));
    }

    let apex_frac = records
        .iter()
        .map(|r| ((r.h_ha - r.true_h_ha) / r.true_h_ha).abs())
        .sum::<f64>()
        / records.len() as f64;
    let m4 = records.iter().map(|r| (r.t_ha - r.true_t_ha).abs()).sum::<f64>()
        / records.len() as f64;
    let m5 = records
        .iter()
        .map(|r| (r.true_h_ha - r.h_desired).abs())
        .sum::<f64>()
        / records.len() as f64;

    let gamma2 = (sq_z / n_samples as f64).sqrt();
    let gamma3 = (sq_v / n_samples as f64).sqrt();

    let h_g = ground_height_track(records);

    let mut vja = Vec::new();
    let mut ha = Vec::new();
    let mut uha = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let t_apogee = r.true_t_ha - r.t_td;
        if t_apogee > 0.0 {
            vja.push(r.true_h_ha / t_apogee);
        }
        if let Some(next) = records.get(i + 1) {
            let t_cycle = next.t_td - r.t_td;
            if t_cycle > 0.0 {
                ha.push(2.0 * r.true_h_ha / t_cycle);
            }
        }
        if i > 0 {
            let prev = &records[i - 1];
            let apex_gap = r.true_t_ha - prev.true_t_ha;
            if apex_gap > 0.0 {
                uha.push((r.true_h_ha + prev.true_h_ha) / apex_gap);
            }
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };

    Ok(MetricsReport {
        m1: 100.0 * m1_sum / used as f64,
        m2: 100.0 * m2_sum / used as f64,
        m3: 100.0 * apex_frac,
        m4,
        m5,
        gamma1: apex_frac,
        gamma2,
        gamma3,
        excluded_hops: excluded,
        n_hops: records.len(),
        h_g,
        nu_vja: mean(&vja),
        nu_ha: mean(&ha),
        nu_uha: mean(&uha),
    })
}

/// Cumulative ground-height estimate, one value per hop, first hop zero.
///
/// Each step averages two observations of the same change: the difference
/// between successive drop heights (apex minus touchdown), and the
/// touchdown height itself.
pub fn ground_height_track(records: &[HopRecord]) -> Vec<f64> {
    let mut h_g = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if i == 0 {
            h_g.push(0.0);
            continue;
        }
        let prev = &records[i - 1];
        let dh1 = (r.h_ha - r.h_td) - (prev.h_ha - prev.h_td);
        let dh2 = r.h_td;
        h_g.push(h_g[i - 1] + 0.5 * (dh1 + dh2));
    }
    h_g
}

/// The horizontal optical-flow scale error equals the relative height
/// error, so the position metric doubles as its proxy.
pub fn optical_flow_error_proxy(m1: f64) -> f64 {
    m1
}

/// Inputs for the model-based agility computation. Thrust fractions
/// `gamma_r`/`gamma_d` and drag fractions `gamma_lr`/`gamma_ld` shape the
/// average aerial accelerations; `zeta_s` is the liftoff-to-touchdown
/// speed ratio across stance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgilityInputs {
    /// Current hop apex height, m.
    pub h1: f64,
    /// Previous hop apex height, m.
    pub h0: f64,
    /// Stance time, s.
    pub t_s: f64,
    pub gamma_r: f64,
    pub gamma_d: f64,
    pub gamma_lr: f64,
    pub gamma_ld: f64,
    pub zeta_s: f64,
    /// 0 counts only the climb; 1 counts the full cycle.
    pub beta: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgilityResult {
    pub nu_uha: f64,
    pub nu_vja: f64,
    pub nu_ha: f64,
    pub t_r: f64,
    pub t_d: f64,
    /// Previous-hop height consistent with `zeta_s` and the accelerations.
    pub h0_implied: f64,
}

/// Evaluates the unified agility metric and its two specializations.
pub fn agility(a: &AgilityInputs) -> Result<AgilityResult> {
    if !(a.h1 > 0.0 && a.h0 >= 0.0 && a.t_s >= 0.0 && a.g > 0.0) {
        return Err(Error::config("heights, stance time, and g must be non-negative"));
    }
    if !(a.gamma_r < 1.0 && a.gamma_d < 1.0) {
        return Err(Error::config("thrust fractions must be below 1"));
    }
    if !(a.gamma_lr >= 0.0 && a.gamma_ld >= 0.0) {
        return Err(Error::config("drag fractions must be non-negative"));
    }
    if !(a.zeta_s > 0.0) {
        return Err(Error::config("stance speed ratio must be positive"));
    }
    if !(a.beta == 0.0 || a.beta == 1.0) {
        return Err(Error::config("beta must be 0 or 1"));
    }
    let a_r = 1.0 - a.gamma_r + a.gamma_lr;
    let a_d = 1.0 - a.gamma_d - a.gamma_ld;
    if a_r <= 0.0 || a_d <= 0.0 {
        return Err(Error::config("average aerial acceleration must stay negative"));
    }

    let t_r = (2.0 * a.h1 / (a.g * a_r)).sqrt();
    let t_d = (2.0 * a.h0 / (a.g * a_d)).sqrt();
    let nu_uha = (a.h1 + a.beta * a.h0) / (a.t_s + t_r + a.beta * t_d);
    let nu_vja = a.h1 / (a.t_s + t_r);
    let nu_ha = (a.h1 + a.h0) / (a.t_s + t_r + t_d);
    let h0_implied = a.zeta_s.powi(2) * a.h1 * a_r / a_d;

    Ok(AgilityResult {
        nu_uha,
        nu_vja,
        nu_ha,
        t_r,
        t_d,
        h0_implied,
    })
}

/// Table-mode agility from directly measured times: climb rate and
/// full-cycle rate.
pub fn agility_from_times(h1: f64, t_apogee: f64, t_cycle: f64) -> Result<(f64, f64)> {
    if !(h1 > 0.0 && t_apogee > 0.0 && t_cycle > 0.0) {
        return Err(Error::config("height and times must be positive"));
    }
    Ok((h1 / t_apogee, 2.0 * h1 / t_cycle))
}

/// Reference estimator variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BaselineKind {
    /// Coast ballistically from the state at each true liftoff.
    Ba1,
    /// Dead-reckon the range-switched accelerometer from each true liftoff.
    Dr1,
    /// Two-state filter allowed only the touchdown position fix.
    Kf3,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Ba1 => "BA1",
            BaselineKind::Dr1 => "DR1",
            BaselineKind::Kf3 => "KF3",
        }
    }

    pub fn parse(s: &str) -> Result<BaselineKind> {
        match s.to_ascii_uppercase().as_str() {
            "BA1" => Ok(BaselineKind::Ba1),
            "DR1" => Ok(BaselineKind::Dr1),
            "KF3" => Ok(BaselineKind::Kf3),
            _ => Err(Error::config(format!(
                "unknown baseline {s:?} (expected BA1, DR1, or KF3)"
            ))),
        }
    }
}

/// Position/velocity series from a reference estimator, one entry per row.
#[derive(Debug, Clone)]
pub struct BaselineTrajectory {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

/// Runs one of the reference estimators over a recorded log.
///
/// The coasting and dead-reckoning variants re-anchor on the true state at
/// the start of the log and at every true liftoff; a log that has
/// touchdowns but never lifts off again is rejected, since everything
/// after the first stance would be unanchored.
pub fn baseline_estimates(
    log: &HopLog,
    kind: BaselineKind,
    params: &EstimatorParams,
    phase_cfg: &PhaseConfig,
    rp: &RobotParams,
) -> Result<BaselineTrajectory> {
    if log.len() < 2 {
        return Err(Error::data("baseline needs at least two rows"));
    }
    if kind == BaselineKind::Kf3 {
        let ests = replay_log_restricted(
            FilterKind::Kf1,
            params,
            phase_cfg,
            rp,
            log,
            &[InferredUpdate::PositionTd],
        )?;
        return Ok(BaselineTrajectory {
            z: ests.iter().map(|e| e.z).collect(),
            v: ests.iter().map(|e| e.v).collect(),
        });
    }

    let trans = detect_true_transitions(log);
    let has_td = trans.iter().any(|t| t.kind == Transition::Td);
    let lo_rows: Vec<usize> = trans
        .iter()
        .filter(|t| t.kind == Transition::Lo)
        .map(|t| t.row)
        .collect();
    if has_td && lo_rows.is_empty() {
        return Err(Error::data("log never lifts off after touchdown"));
    }

    let dt = log.rows[1].t - log.rows[0].t;
    let switch = params.g_s * G;
    let mut z = Vec::with_capacity(log.len());
    let mut v = Vec::with_capacity(log.len());
    let mut anchor = lo_rows.iter().copied().peekable();
    let mut zc = log.rows[0].z_true;
    let mut vc = log.rows[0].v_true;
    for (i, row) in log.rows.iter().enumerate() {
        if anchor.peek() == Some(&i) {
            zc = row.z_true;
            vc = row.v_true;
            anchor.next();
        } else if i > 0 {
            let u = match kind {
                BaselineKind::Ba1 => -rp.g,
                BaselineKind::Dr1 => {
                    let sample = ImuSample {
                        lowg: row.a_lowg,
                        highg: row.a_highg,
                    };
                    select_accel(&sample, switch) - rp.g
                }
                BaselineKind::Kf3 => unreachable!(),
            };
            vc += u * dt;
            zc += vc * dt;
        }
        z.push(zc);
        v.push(vc);
    }
    Ok(BaselineTrajectory { z, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlConfig, ControlSource};
    use crate::hoplog::TickRow;
    use crate::sensing::SensorConfig;
    use crate::sim::{simulate_trial, TrialConfig};
    use crate::replay::replay_log;
    use approx::assert_relative_eq;

    fn bare_record(h_ha: f64, true_h_ha: f64, t_ha: f64, true_t_ha: f64) -> HopRecord {
        HopRecord {
            h_td: 0.27,
            h_ha,
            t_td: t_ha - 0.8,
            t_ha,
            true_h_ha,
            true_t_ha,
            h_desired: 1.0,
            z_true: vec![1.0, 1.0],
            z_est: vec![1.0, 1.0],
            v_true: vec![1.0, -1.0],
            v_est: vec![1.0, -1.0],
        }
    }

    #[test]
    fn apex_height_error_hand_case() {
        let recs = vec![
            bare_record(1.1, 1.0, 1.0, 1.0),
            bare_record(0.9, 1.0, 2.0, 2.0),
        ];
        let rep = compute_metrics(&recs).unwrap();
        assert_relative_eq!(rep.m3, 10.0, epsilon = 1e-12);
        assert_relative_eq!(rep.m1, 0.0);
        assert_relative_eq!(rep.m2, 0.0);
    }

    #[test]
    fn apex_time_error_hand_case() {
        let recs = vec![bare_record(1.0, 1.0, 1.05, 1.00)];
        let rep = compute_metrics(&recs).unwrap();
        assert_relative_eq!(rep.m4, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn perfect_estimates_score_zero() {
        let recs = vec![
            bare_record(1.0, 1.0, 1.0, 1.0),
            bare_record(1.0, 1.0, 2.0, 2.0),
        ];
        let rep = compute_metrics(&recs).unwrap();
        assert_eq!(rep.m1, 0.0);
        assert_eq!(rep.m2, 0.0);
        assert_eq!(rep.m3, 0.0);
        assert_eq!(rep.m4, 0.0);
        assert_eq!(rep.m5, 0.0);
        assert_eq!(rep.gamma2, 0.0);
    }

    #[test]
    fn zero_velocity_hop_is_excluded_not_fatal() {
        let mut still = bare_record(1.0, 1.0, 1.0, 1.0);
        still.v_true = vec![0.0, 0.0];
        still.v_est = vec![0.1, 0.1];
        let recs = vec![still, bare_record(1.0, 1.0, 2.0, 2.0)];
        let rep = compute_metrics(&recs).unwrap();
        assert_eq!(rep.excluded_hops, 1);
        assert_eq!(rep.n_hops, 2);
    }

    #[test]
    fn ground_track_step_sequence() {
        let mk = |h_td: f64, h_ha: f64| {
            let mut r = bare_record(h_ha, h_ha, 1.0, 1.0);
            r.h_td = h_td;
            r
        };
        let recs = vec![
            mk(0.0, 2.0),
            mk(0.0, 2.0),
            mk(0.2, 2.2),
            mk(0.0, 2.2),
            mk(0.0, 2.2),
        ];
        let h_g = ground_height_track(&recs);
        let expect = [0.0, 0.0, 0.1, 0.2, 0.2];
        for (got, want) in h_g.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn ballistic_agility_closed_form() {
        let a = AgilityInputs {
            h1: 1.0,
            h0: 1.0,
            t_s: 0.0,
            gamma_r: 0.0,
            gamma_d: 0.0,
            gamma_lr: 0.0,
            gamma_ld: 0.0,
            zeta_s: 1.0,
            beta: 1.0,
            g: 9.81,
        };
        let r = agility(&a).unwrap();
        let closed = (2.0_f64 * 9.81 * 1.0).sqrt() / 2.0;
        assert_relative_eq!(r.nu_vja, closed, epsilon = 1e-9);
        assert_relative_eq!(r.nu_ha, closed, epsilon = 1e-9);
        assert_relative_eq!(r.nu_uha, closed, epsilon = 1e-9);
        assert_relative_eq!(r.h0_implied, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_switches_between_the_two_metrics() {
        let base = AgilityInputs {
            h1: 2.5,
            h0: 1.7,
            t_s: 0.07,
            gamma_r: 0.3,
            gamma_d: 0.1,
            gamma_lr: 0.05,
            gamma_ld: 0.02,
            zeta_s: 0.9,
            beta: 0.0,
            g: 9.81,
        };
        let r0 = agility(&base).unwrap();
        assert_relative_eq!(r0.nu_uha, r0.nu_vja, epsilon = 1e-12);
        let r1 = agility(&AgilityInputs { beta: 1.0, ..base }).unwrap();
        assert_relative_eq!(r1.nu_uha, r1.nu_ha, epsilon = 1e-12);
    }

    #[test]
    fn published_platform_rows_reproduce() {
        let cases = [
            (1.008, 0.58, 1.03, 1.75, 1.96),
            (1.63, 0.71, 1.37, 2.30, 2.37),
            (3.92, 1.58, 2.60, 2.47, 3.01),
            (4.02, 1.85, 2.86, 2.18, 2.81),
        ];
        for (h1, t_apogee, t_cycle, vja, ha) in cases {
            let (got_vja, got_ha) = agility_from_times(h1, t_apogee, t_cycle).unwrap();
            assert!((got_vja - vja).abs() <= 0.02, "vja {got_vja} vs {vja}");
            assert!((got_ha - ha).abs() <= 0.02, "ha {got_ha} vs {ha}");
        }
    }

    #[test]
    fn excessive_drag_in_drop_is_rejected() {
        let a = AgilityInputs {
            h1: 1.0,
            h0: 1.0,
            t_s: 0.0,
            gamma_r: 0.0,
            gamma_d: 0.5,
            gamma_lr: 0.0,
            gamma_ld: 0.6,
            zeta_s: 1.0,
            beta: 1.0,
            g: 9.81,
        };
        assert!(agility(&a).is_err());
    }

    fn ballistic_rows(n: usize, thrust_accel: f64) -> Vec<TickRow> {
        let dt = 1.0 / 840.0;
        let g = 9.81;
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let a = -g + thrust_accel;
                TickRow {
                    t,
                    z_true: 5.0 + 0.5 * a * t * t,
                    v_true: a * t,
                    a_true: a,
                    a_lowg: (a + g) / 1.0,
                    a_highg: a + g,
                    a_world_est: a,
                    phase: Phase::Drop,
                    event: None,
                    z_est: 0.0,
                    v_est: 0.0,
                    p00: 0.0,
                    p01: 0.0,
                    p11: 0.0,
                    twr: 0.0,
                    h_desired: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn coasting_baseline_is_exact_on_ballistic_flight() {
        let log = HopLog::new(ballistic_rows(400, 0.0));
        let tr = baseline_estimates(
            &log,
            BaselineKind::Ba1,
            &EstimatorParams::default(),
            &PhaseConfig::default(),
            &RobotParams::default(),
        )
        .unwrap();
        for (i, row) in log.rows.iter().enumerate() {
            assert!((tr.z[i] - row.z_true).abs() < 5e-3, "row {i}");
            assert!((tr.v[i] - row.v_true).abs() < 1e-9, "row {i}");
        }
    }

    #[test]
    fn coasting_baseline_misses_thrusted_flight_by_the_closed_form() {
        let thrust = 2.0;
        let n = 840;
        let log = HopLog::new(ballistic_rows(n, thrust));
        let tr = baseline_estimates(
            &log,
            BaselineKind::Ba1,
            &EstimatorParams::default(),
            &PhaseConfig::default(),
            &RobotParams::default(),
        )
        .unwrap();
        let t_end = log.rows[n - 1].t;
        let expect_gap = 0.5 * thrust * t_end * t_end;
        let gap = (tr.z[n - 1] - log.rows[n - 1].z_true).abs();
        assert_relative_eq!(gap, expect_gap, epsilon = 0.01);
    }

    #[test]
    fn dead_reckoning_follows_the_measured_channel() {
        let log = HopLog::new(ballistic_rows(840, 2.0));
        let tr = baseline_estimates(
            &log,
            BaselineKind::Dr1,
            &EstimatorParams::default(),
            &PhaseConfig::default(),
            &RobotParams::default(),
        )
        .unwrap();
        let last = log.rows.last().unwrap();
        assert!((tr.z[839] - last.z_true).abs() < 0.02);
        assert!((tr.v[839] - last.v_true).abs() < 0.01);
    }

    fn se_log() -> HopLog {
        let cfg = TrialConfig {
            duration: 8.0,
            sensors: SensorConfig::default().noiseless(),
            control: ControlConfig {
                source: ControlSource::TrueState,
                ..ControlConfig::default()
            },
            ..TrialConfig::default()
        };
        simulate_trial(&cfg).unwrap()
    }

    #[test]
    fn baselines_run_on_simulated_logs() {
        let log = se_log();
        let p = EstimatorParams::default();
        let pc = PhaseConfig::default();
        let rp = RobotParams::default();
        for kind in [BaselineKind::Ba1, BaselineKind::Dr1, BaselineKind::Kf3] {
            let tr = baseline_estimates(&log, kind, &p, &pc, &rp).unwrap();
            assert_eq!(tr.z.len(), log.len());
            assert!(tr.z.iter().all(|z| z.is_finite()), "{}", kind.as_str());
        }
        let full = replay_log(FilterKind::Kf1, &p, &pc, &rp, &log).unwrap();
        let kf3 = baseline_estimates(&log, BaselineKind::Kf3, &p, &pc, &rp).unwrap();
        let differs = full
            .iter()
            .zip(&kf3.z)
            .any(|(a, b)| a.z.to_bits() != b.to_bits());
        assert!(differs);
    }

    #[test]
    fn stance_without_liftoff_is_rejected_for_anchored_baselines() {
        let log = se_log();
        let first_lo = detect_true_transitions(&log)
            .iter()
            .find(|t| t.kind == Transition::Lo)
            .unwrap()
            .row;
        let cut = HopLog::new(log.rows[..first_lo].to_vec());
        let err = baseline_estimates(
            &cut,
            BaselineKind::Ba1,
            &EstimatorParams::default(),
            &PhaseConfig::default(),
            &RobotParams::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("lift"));
    }

    #[test]
    fn hop_records_from_a_closed_loop_log() {
        let log = se_log();
        let recs = hop_records(&log, false);
        assert!(recs.len() >= 3, "records = {}", recs.len());
        for r in &recs {
            assert!(r.t_td < r.t_ha);
            assert!(r.z_true.len() == r.z_est.len());
            assert!(r.true_h_ha > 0.5);
        }
        let aerial = hop_records(&log, true);
        assert_eq!(aerial.len(), recs.len());
        for (a, f) in aerial.iter().zip(&recs) {
            assert!(a.z_true.len() < f.z_true.len());
        }
        let rep = compute_metrics(&recs).unwrap();
        assert!(rep.m3 < 50.0);
        assert!(rep.nu_vja.unwrap() > 0.5);
    }

    #[test]
    fn flow_proxy_is_identity() {
        assert_eq!(optical_flow_error_proxy(19.0), 19.0);
        assert_eq!(optical_flow_error_proxy(0.0), 0.0);
    }
}
