//! Vertical two-mass hopper dynamics.
//!
//! The robot is reduced to a body mass and a leg mass on a vertical prismatic
//! joint. The main power spring acts when the body squats toward the leg; a
//! stiffer spring-damper pair models the joint's travel stop, which carries
//! the leg in flight and yanks it off the ground at liftoff.
//! Ground contact at the foot is a unilateral penalty spring with
//! penetration-scaled damping.
//!
//! Integration is semi-implicit Euler at a fixed 40 kHz internal step,
//! deliberately far above any sensor rate so that decimating the true
//! acceleration produces genuine aliasing rather than an artifact of the
//! integrator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{Phase, Transition};

/// Internal integration step, s (40 kHz).
pub const SIM_DT: f64 = 2.5e-5;

/// Foot height below which a step is refined into substeps, m. The foot's
/// mode against the ground spring rings at ~60 krad/s, far too fast for a
/// 25 µs step to resolve.
const CONTACT_MARGIN: f64 = 8e-3;
/// Refinement factor inside the margin; gives 1 µs substeps.
const CONTACT_SUBSTEPS: usize = 25;
/// Release band for the contact flag, m. The flag sets on touch but clears
/// only once the foot has risen well clear: at a hard touchdown the foot
/// takes a brief elastic pop of a few millimetres before the loaded spring
/// pins it, and that must not read as flight.
const CONTACT_RELEASE: f64 = 6e-3;

/// Thrust ceiling as a fraction of total weight.
pub const TWR_MAX: f64 = 0.837;

/// Mass, spring, and geometry constants of the hopper plus the ground
/// contact model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    /// Body mass, kg.
    pub m_body: f64,
    /// Leg mass, kg.
    pub m_leg: f64,
    /// Main power spring rate, N/m. Acts only while the body is squatted
    /// below its rest position on the leg; stores the hop energy.
    pub k_spring: f64,
    /// Joint travel-stop spring rate, N/m. An elastomer bump stop: soft
    /// enough that the liftoff yank spreads over tens of milliseconds
    /// instead of a metal-on-metal click.
    pub k_stop: f64,
    /// Joint travel-stop damping, N·s/m. Near critical for the leg mass
    /// against the stop, so the leg settles without ringing in flight.
    pub b_joint: f64,
    /// Leg top to leg CM, m.
    pub l1: f64,
    /// Leg bottom (foot) to leg CM, m.
    pub l2: f64,
    /// Body CM below leg top at rest, m.
    pub l3: f64,
    /// Gravity, m/s².
    pub g: f64,
    /// Ground penalty spring rate, N/m. Sized to keep penetration at or
    /// below 1e-4 m for foot impacts up to ~9 m/s.
    pub k_ground: f64,
    /// Ground damping per metre of penetration, N·s/m². Scaling by
    /// penetration keeps the contact force continuous at touchdown, and the
    /// magnitude makes the pad lossy enough that foot impacts above ~1 m/s
    /// land dead instead of bouncing.
    pub b_ground: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            m_body: 0.5619,
            m_leg: 0.0981,
            k_spring: 704.0,
            k_stop: 2500.0,
            b_joint: 30.0,
            l1: 0.1053,
            l2: 0.2821,
            l3: 0.1191,
            g: 9.81,
            k_ground: 4e8,
            b_ground: 4e8,
        }
    }
}

impl RobotParams {
    pub fn total_mass(&self) -> f64 {
        self.m_body + self.m_leg
    }

    /// Rest offset of the body CM above the leg CM, m.
    pub fn rest_offset(&self) -> f64 {
        self.l1 - self.l3
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_B", self.m_body),
            ("m_L", self.m_leg),
            ("K_s", self.k_spring),
            ("K_lb", self.k_stop),
            ("L_1", self.l1),
            ("L_2", self.l2),
            ("L_3", self.l3),
            ("g", self.g),
            ("K_ground", self.k_ground),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("robot parameter {name} must be positive")));
            }
        }
        for (name, v) in [("b_lb", self.b_joint), ("b_ground", self.b_ground)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("robot parameter {name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Instantaneous mechanical state of the hopper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    /// Body CM height, m.
    pub z_b: f64,
    /// Body velocity, m/s.
    pub v_b: f64,
    /// Leg CM height, m.
    pub z_l: f64,
    /// Leg velocity, m/s.
    pub v_l: f64,
    /// Body acceleration over the preceding step, m/s².
    pub a_b: f64,
    /// Foot on the ground. Sets on touch, clears once the foot rises out of
    /// a small release band.
    pub in_contact: bool,
    /// Time, s.
    pub t: f64,
}

impl SimState {
    /// Airborne at rest at the given CM height, joint at its flight
    /// equilibrium (travel stop just touching).
    pub fn at_apex(h_com: f64, rp: &RobotParams) -> SimState {
        let z_l = h_com - rp.m_body / rp.total_mass() * rp.rest_offset();
        let z_b = z_l + rp.rest_offset();
        SimState {
            z_b,
            v_b: 0.0,
            z_l,
            v_l: 0.0,
            a_b: -rp.g,
            in_contact: z_l - rp.l2 <= 0.0,
            t: 0.0,
        }
    }

    pub fn foot_height(&self, rp: &RobotParams) -> f64 {
        self.z_l - rp.l2
    }

    pub fn com_height(&self, rp: &RobotParams) -> f64 {
        (rp.m_body * self.z_b + rp.m_leg * self.z_l) / rp.total_mass()
    }

    pub fn com_velocity(&self, rp: &RobotParams) -> f64 {
        (rp.m_body * self.v_b + rp.m_leg * self.v_l) / rp.total_mass()
    }

    /// Squat depth: how far the body sits below its rest position relative
    /// to the leg, m. Positive during stance compression.
    pub fn squat(&self, rp: &RobotParams) -> f64 {
        rp.rest_offset() - (self.z_b - self.z_l)
    }
}

fn check_finite(state: &SimState) -> Result<()> {
    let fields = [
        ("z_B", state.z_b),
        ("v_B", state.v_b),
        ("z_L", state.z_l),
        ("v_L", state.v_l),
        ("t", state.t),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(Error::numeric(format!("state field {name} is not finite")));
        }
    }
    Ok(())
}

fn substep(state: &SimState, twr: f64, rp: &RobotParams, dt: f64) -> SimState {
    let squat = state.squat(rp);
    let sdot = state.v_l - state.v_b;

    // Joint force, positive pushing the body up (reaction pushes the leg
    // down). Power spring on the squat side; spring-damper stop on the
    // extension side, clamped so the stop never holds the pair together.
    let f_joint = if squat > 0.0 {
        rp.k_spring * squat
    } else {
        (rp.k_stop * squat + rp.b_joint * sdot).min(0.0)
    };

    // Unilateral ground penalty on the foot, never pulling down.
    let pen = -state.foot_height(rp);
    let f_ground = if pen > 0.0 {
        (pen * (rp.k_ground - rp.b_ground * state.v_l)).max(0.0)
    } else {
        0.0
    };

    let f_thrust = twr * rp.total_mass() * rp.g;

    let a_b = -rp.g + (f_joint + f_thrust) / rp.m_body;
    let a_l = -rp.g + (f_ground - f_joint) / rp.m_leg;

    let v_b = state.v_b + a_b * dt;
    let v_l = state.v_l + a_l * dt;
    let z_b = state.z_b + v_b * dt;
    let z_l = state.z_l + v_l * dt;

    let foot = z_l - rp.l2;
    let in_contact = if state.in_contact { foot <= CONTACT_RELEASE } else { foot <= 0.0 };

    SimState { z_b, v_b, z_l, v_l, a_b, in_contact, t: state.t + dt }
}

/// Advance the hopper one step of `dt` seconds under a thrust command.
///
/// Thrust is `twr · (m_B + m_L) · g` applied upward on the body; the caller
/// decides when thrust is allowed, this function just applies it. Near the
/// ground the step is refined into substeps so the stiff contact is actually
/// resolved; `a_b` then reports the step-average body acceleration, which is
/// what an IMU integrating over the step would see. Pure: the same inputs
/// always produce the same output.
pub fn step(state: &SimState, twr: f64, rp: &RobotParams, dt: f64) -> Result<SimState> {
    check_finite(state)?;
    if !twr.is_finite() || twr < 0.0 {
        return Err(Error::config(format!("twr command {twr} invalid")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("step dt must be positive"));
    }

    let mut next = if state.foot_height(rp) < CONTACT_MARGIN {
        let h = dt / CONTACT_SUBSTEPS as f64;
        let mut cur = *state;
        for _ in 0..CONTACT_SUBSTEPS {
            cur = substep(&cur, twr, rp, h);
        }
        cur.a_b = (cur.v_b - state.v_b) / dt;
        cur
    } else {
        substep(state, twr, rp, dt)
    };
    next.t = state.t + dt;
    check_finite(&next)?;
    Ok(next)
}

/// Kinetic plus potential energy of the full system, J. Spring terms are the
/// unilateral potentials actually used by `step`, so with zero thrust this
/// can only decrease (up to integrator roundoff at the stiff contacts).
pub fn mechanical_energy(state: &SimState, rp: &RobotParams) -> f64 {
    let squat = state.squat(rp);
    let pen = -state.foot_height(rp);
    0.5 * rp.m_body * state.v_b * state.v_b
        + 0.5 * rp.m_leg * state.v_l * state.v_l
        + rp.m_body * rp.g * state.z_b
        + rp.m_leg * rp.g * state.z_l
        + 0.5 * rp.k_spring * squat.max(0.0).powi(2)
        + 0.5 * rp.k_stop * squat.min(0.0).powi(2)
        + 0.5 * rp.k_ground * pen.max(0.0).powi(2)
}

// ---------------------------------------------------------------------------
// Height control

/// Where the height controller gets its state from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlSource {
    /// True simulator state, sampled at the sensor rate.
    TrueState,
    /// The estimator's output (closed loop under test).
    Estimated,
}

impl ControlSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlSource::TrueState => "true-state",
            ControlSource::Estimated => "estimated",
        }
    }

    pub fn parse(s: &str) -> Result<ControlSource> {
        match s.to_ascii_lowercase().as_str() {
            "true" | "true-state" | "gt" => Ok(ControlSource::TrueState),
            "est" | "estimated" | "se" => Ok(ControlSource::Estimated),
            _ => Err(Error::config(format!(
                "unknown control source {s:?} (expected true-state or estimated)"
            ))),
        }
    }
}

/// Proportional apex-energy height controller settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Proportional gain, TWR per metre of apex error. The default makes
    /// proportional saturation coincide with the 0.33 m sliding-mode band.
    pub k_p: f64,
    /// Thrust ceiling.
    pub twr_max: f64,
    /// Commands below this fraction produce effectively no thrust on the
    /// hardware and are treated as zero.
    pub twr_floor: f64,
    /// Command update rate, Hz. Runs on its own clock, independent of the
    /// sensing and estimation rates.
    pub rate: f64,
    pub source: ControlSource,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            k_p: TWR_MAX / 0.33,
            twr_max: TWR_MAX,
            twr_floor: 0.02,
            rate: 400.0,
            source: ControlSource::Estimated,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_p.is_finite() && self.k_p > 0.0) {
            return Err(Error::config("control gain k_p must be positive"));
        }
        if !(self.twr_max > 0.0 && self.twr_max <= 1.0) {
            return Err(Error::config("twr_max must be in (0, 1]"));
        }
        if !(self.twr_floor >= 0.0 && self.twr_floor < self.twr_max) {
            return Err(Error::config("twr_floor must be in [0, twr_max)"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::config("control rate must be positive"));
        }
        Ok(())
    }
}

/// Thrust-to-weight command from the current vertical state and the desired
/// apex height.
///
/// The ballistic apex the robot would coast to is `z + v²/2g`. Rising short
/// of the target commands thrust to add energy; falling from above it
/// commands thrust as a brake. Output saturates at the TWR ceiling and
/// snaps to zero below the actuation floor.
pub fn height_control(z: f64, v: f64, h_desired: f64, g: f64, cc: &ControlConfig) -> f64 {
    if !(z.is_finite() && v.is_finite() && h_desired.is_finite()) {
        return 0.0;
    }
    let head = z + v * v / (2.0 * g);
    let err = if v >= 0.0 { h_desired - head } else { head - h_desired };
    let twr = (cc.k_p * err).clamp(0.0, cc.twr_max);
    if twr < cc.twr_floor {
        0.0
    } else {
        twr
    }
}

// ---------------------------------------------------------------------------
// True phase tracking

/// Tracks the hop cycle from the true contact flag and body velocity,
/// emitting at most one transition per call and only ever moving forward
/// through drop → stance-down → stance-up → rebound.
#[derive(Debug, Clone)]
pub struct TruePhaseTracker {
    phase: Phase,
    pending_lo: bool,
}

impl TruePhaseTracker {
    pub fn new(in_contact: bool) -> Self {
        TruePhaseTracker {
            phase: if in_contact { Phase::StanceDown } else { Phase::Drop },
            pending_lo: false,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn update(&mut self, in_contact: bool, v_b: f64) -> Option<Transition> {
        if self.pending_lo {
            self.pending_lo = false;
            self.phase = Phase::Rebound;
            return Some(Transition::Lo);
        }
        match self.phase {
            Phase::Drop => in_contact.then(|| {
                self.phase = Phase::StanceDown;
                Transition::Td
            }),
            Phase::StanceDown => {
                if !in_contact {
                    // Left the ground before the squat bottomed out: the max
                    // squat collapses onto this instant, liftoff follows on
                    // the next call.
                    self.phase = Phase::StanceUp;
                    self.pending_lo = true;
                    Some(Transition::Ms)
                } else if v_b >= 0.0 {
                    self.phase = Phase::StanceUp;
                    Some(Transition::Ms)
                } else {
                    None
                }
            }
            Phase::StanceUp => (!in_contact).then(|| {
                self.phase = Phase::Rebound;
                Transition::Lo
            }),
            Phase::Rebound => (v_b <= 0.0).then(|| {
                self.phase = Phase::Drop;
                Transition::Ha
            }),
        }
    }
}
