//! Hop phase estimation from filtered vertical acceleration.
//!
//! The estimator walks a fixed cycle Drop -> StanceDown -> StanceUp ->
//! Rebound -> Drop. Touchdown is declared on a jerk spike, mid-stance on the
//! jerk sign flip just after the stance acceleration peak, liftoff once
//! gravity dominates the filtered signal again, and apex when the estimated
//! vertical speed falls through zero. At most one transition fires per tick.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four phases of a hop cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Drop,
    StanceDown,
    StanceUp,
    Rebound,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Drop => "drop",
            Phase::StanceDown => "stance_down",
            Phase::StanceUp => "stance_up",
            Phase::Rebound => "rebound",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(Phase::Drop),
            "stance_down" => Ok(Phase::StanceDown),
            "stance_up" => Ok(Phase::StanceUp),
            "rebound" => Ok(Phase::Rebound),
            other => Err(Error::data(format!("unknown phase label {other:?}"))),
        }
    }

    /// True for the two flight phases.
    pub fn is_aerial(self) -> bool {
        matches!(self, Phase::Drop | Phase::Rebound)
    }
}

/// Transitions between phases, in cycle order: TD < MS < LO < HA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Transition {
    Td,
    Ms,
    Lo,
    Ha,
}

impl Transition {
    pub fn as_str(self) -> &'static str {
        match self {
            Transition::Td => "TD",
            Transition::Ms => "MS",
            Transition::Lo => "LO",
            Transition::Ha => "HA",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "TD" => Ok(Transition::Td),
            "MS" => Ok(Transition::Ms),
            "LO" => Ok(Transition::Lo),
            "HA" => Ok(Transition::Ha),
            other => Err(Error::data(format!("unknown event label {other:?}"))),
        }
    }
}

/// Tuning for the phase machine.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    /// Touchdown jerk threshold in m/s^3, quoted at `reference_rate`. The
    /// running threshold scales proportionally with the estimator rate so the
    /// detector keeps firing when the loop slows down.
    pub jerk_threshold: f64,
    /// Rate at which `jerk_threshold` is quoted, Hz.
    pub reference_rate: f64,
    /// Number of samples in the jerk slope fit. 2 gives the plain backward
    /// difference; larger windows use a least-squares slope.
    pub slope_window: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            jerk_threshold: 2000.0,
            reference_rate: 840.0,
            slope_window: 2,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jerk_threshold > 0.0) {
            return Err(Error::config("jerk_threshold must be positive"));
        }
        if !(self.reference_rate > 0.0) {
            return Err(Error::config("reference_rate must be positive"));
        }
        if self.slope_window < 2 {
            return Err(Error::config("slope_window must be at least 2"));
        }
        Ok(())
    }
}

/// Online phase machine fed with filtered, gravity-compensated world
/// acceleration and the current velocity estimate.
#[derive(Debug, Clone)]
pub struct PhaseEstimator {
    phase: Phase,
    threshold: f64,
    window: usize,
    hist: VecDeque<f64>,
}

impl PhaseEstimator {
    pub fn new(cfg: &PhaseConfig, est_rate: f64) -> Result<Self> {
        cfg.validate()?;
        if !(est_rate > 0.0) {
            return Err(Error::config("est_rate must be positive"));
        }
        Ok(PhaseEstimator {
            phase: Phase::Drop,
            threshold: cfg.jerk_threshold * est_rate / cfg.reference_rate,
            window: cfg.slope_window,
            hist: VecDeque::with_capacity(cfg.slope_window),
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Running touchdown threshold after rate scaling, m/s^3.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Advances the machine by one tick. `a_filt` is the phase-filter output
    /// (world frame, gravity removed) and `v_est` the current velocity
    /// estimate. Returns the transition that fired, if any.
    pub fn update(&mut self, a_filt: f64, v_est: f64, dt: f64) -> Option<Transition> {
        if self.hist.len() == self.window {
            self.hist.pop_front();
        }
        self.hist.push_back(a_filt);
        let jerk = slope(&self.hist, dt);

        match self.phase {
            Phase::Drop => {
                if let Some(j) = jerk {
                    if j > self.threshold {
                        self.phase = Phase::StanceDown;
                        return Some(Transition::Td);
                    }
                }
            }
            Phase::StanceDown => {
                if let Some(j) = jerk {
                    if j < 0.0 {
                        self.phase = Phase::StanceUp;
                        return Some(Transition::Ms);
                    }
                }
            }
            Phase::StanceUp => {
                if a_filt < 0.0 {
                    self.phase = Phase::Rebound;
                    return Some(Transition::Lo);
                }
            }
            Phase::Rebound => {
                if v_est <= 0.0 {
                    self.phase = Phase::Drop;
                    return Some(Transition::Ha);
                }
            }
        }
        None
    }
}

/// Least-squares slope of the buffered samples against time. With two samples
/// this reduces to the backward difference. `None` until two samples exist.
fn slope(hist: &VecDeque<f64>, dt: f64) -> Option<f64> {
    let k = hist.len();
    if k < 2 {
        return None;
    }
    if k == 2 {
        return Some((hist[1] - hist[0]) / dt);
    }
    let xbar = (k - 1) as f64 / 2.0;
    let ybar = hist.iter().sum::<f64>() / k as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in hist.iter().enumerate() {
        let dx = i as f64 - xbar;
        num += dx * (y - ybar);
        den += dx * dx;
    }
    Some(num / (den * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn estimator(rate: f64) -> PhaseEstimator {
        PhaseEstimator::new(&PhaseConfig::default(), rate).unwrap()
    }

    #[test]
    fn no_event_before_two_samples() {
        let mut pe = estimator(840.0);
        assert_eq!(pe.update(100.0, -5.0, 1.0 / 840.0), None);
        assert_eq!(pe.phase(), Phase::Drop);
    }

    #[test]
    fn touchdown_on_jerk_spike() {
        let mut pe = estimator(840.0);
        let dt = 1.0 / 840.0;
        pe.update(0.0, -5.0, dt);
        // step of 30 m/s² in one tick: jerk = 30/dt = 25200 m/s³ > 2000
        let ev = pe.update(30.0, -5.0, dt);
        assert_eq!(ev, Some(Transition::Td));
        assert_eq!(pe.phase(), Phase::StanceDown);
    }

    #[test]
    fn small_jerk_does_not_trigger() {
        let mut pe = estimator(840.0);
        let dt = 1.0 / 840.0;
        pe.update(0.0, -5.0, dt);
        // 2 m/s² per tick -> 1680 m/s³, just under the threshold
        assert_eq!(pe.update(2.0, -5.0, dt), None);
        assert_eq!(pe.phase(), Phase::Drop);
    }

    #[test]
    fn threshold_scales_with_rate() {
        let full = estimator(840.0);
        let half = estimator(420.0);
        assert_relative_eq!(half.threshold(), full.threshold() / 2.0);
    }

    #[test]
    fn full_cycle_in_order() {
        let mut pe = estimator(840.0);
        let dt = 1.0 / 840.0;
        let mut events = Vec::new();
        // drop
        for _ in 0..5 {
            if let Some(e) = pe.update(0.0, -4.0, dt) {
                events.push(e);
            }
        }
        // touchdown spike, rising stance acceleration
        for a in [60.0, 120.0, 180.0, 200.0] {
            if let Some(e) = pe.update(a, -2.0, dt) {
                events.push(e);
            }
        }
        // past the stance peak: falling acceleration
        for a in [190.0, 150.0, 80.0, 20.0, 5.0] {
            if let Some(e) = pe.update(a, 1.0, dt) {
                events.push(e);
            }
        }
        // gravity dominates: liftoff
        for a in [-2.0, -9.0] {
            if let Some(e) = pe.update(a, 4.0, dt) {
                events.push(e);
            }
        }
        // rebound, then apex when v crosses zero
        for v in [3.0, 2.0, 1.0, 0.0] {
            if let Some(e) = pe.update(-9.81, v, dt) {
                events.push(e);
            }
        }
        assert_eq!(
            events,
            vec![Transition::Td, Transition::Ms, Transition::Lo, Transition::Ha]
        );
        assert_eq!(pe.phase(), Phase::Drop);
    }

    #[test]
    fn apex_needs_nonpositive_velocity() {
        let mut pe = estimator(840.0);
        let dt = 1.0 / 840.0;
        pe.update(0.0, -4.0, dt);
        pe.update(50.0, -4.0, dt); // TD
        pe.update(40.0, -1.0, dt); // MS
        pe.update(-5.0, 2.0, dt); // LO
        assert_eq!(pe.phase(), Phase::Rebound);
        assert_eq!(pe.update(-9.81, 0.5, dt), None);
        assert_eq!(pe.update(-9.81, 0.0, dt), Some(Transition::Ha));
    }

    #[test]
    fn three_point_window_uses_least_squares() {
        let cfg = PhaseConfig {
            slope_window: 3,
            ..PhaseConfig::default()
        };
        let mut pe = PhaseEstimator::new(&cfg, 840.0).unwrap();
        let dt = 1.0 / 840.0;
        pe.update(0.0, -5.0, dt);
        pe.update(1.0, -5.0, dt);
        // window [0, 1, 5]: LS slope = sum(dx*dy)/sum(dx^2)/dt = (0*(-2)+... )
        // points (0,0),(1,1),(2,5): xbar=1, ybar=2 -> num = (-1)(-2)+0+1*3 = 5,
        // den = 2 -> slope = 2.5/dt = 2100 m/s³ > 2000
        let ev = pe.update(5.0, -5.0, dt);
        assert_eq!(ev, Some(Transition::Td));
    }

    #[test]
    fn window_below_two_rejected() {
        let cfg = PhaseConfig {
            slope_window: 1,
            ..PhaseConfig::default()
        };
        assert!(PhaseEstimator::new(&cfg, 840.0).is_err());
    }

    #[test]
    fn phase_labels_round_trip() {
        for p in [Phase::Drop, Phase::StanceDown, Phase::StanceUp, Phase::Rebound] {
            assert_eq!(Phase::parse(p.as_str()).unwrap(), p);
        }
        for t in [Transition::Td, Transition::Ms, Transition::Lo, Transition::Ha] {
            assert_eq!(Transition::parse(t.as_str()).unwrap(), t);
        }
    }
}
