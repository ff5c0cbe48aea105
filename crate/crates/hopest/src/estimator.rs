//! Per-tick estimation chain: range selection, low-pass conditioning, the
//! phase machine, the state filter, and the inferred-measurement triggers
//! that tie them together.
//!
//! The same rig runs inside the closed-loop simulator and in offline replay,
//! so a recorded trial can be re-estimated under different parameters and
//! produce exactly what the online run would have.

use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::filter::{
    com_foot_offset, liftoff_velocity_scale, FilterKind, MeasuredState, VerticalFilter,
};
use crate::params::EstimatorParams;
use crate::phase::{Phase, PhaseConfig, PhaseEstimator, Transition};
use crate::sensing::{select_accel, ImuSample, LowPass, G};

/// One kind of inferred measurement.
///
/// Phase transitions pin position (the foot is on the ground at TD and LO),
/// velocity (the body is momentarily still at max squat; the liftoff velocity
/// estimate is rescaled and re-applied at LO), and, in flight, the
/// accelerometer bias against the commanded thrust.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferredUpdate {
    PositionTd,
    PositionLo,
    VelocityMs,
    VelocityLo,
    AccelBiasAerial,
}

/// The inferred updates each filter kind runs with.
///
/// KF1 has no bias state. The error-state kinds drop the liftoff velocity
/// update, which destabilizes them, and ESKF1 additionally runs without the
/// thrust model needed for the in-flight bias measurement.
pub fn allowed_updates(kind: FilterKind) -> &'static [InferredUpdate] {
    use InferredUpdate::*;
    match kind {
        FilterKind::Kf1 => &[PositionTd, PositionLo, VelocityMs, VelocityLo],
        FilterKind::Kf2 => &[PositionTd, PositionLo, VelocityMs, VelocityLo, AccelBiasAerial],
        FilterKind::Eskf1 => &[PositionTd, PositionLo, VelocityMs],
        FilterKind::Eskf2 => &[PositionTd, PositionLo, VelocityMs, AccelBiasAerial],
    }
}

/// Everything an inferred measurement may need beyond the filter itself.
#[derive(Debug, Clone, Copy)]
pub struct ImuptContext {
    /// Commanded apex height currently in force, m.
    pub h_ch: f64,
    /// Velocity estimate captured at the liftoff tick, before any liftoff
    /// updates were applied, m/s.
    pub v_lo_est: f64,
    /// Summed motor duty command in force, one unit per rotor at full
    /// thrust.
    pub duty_sum: f64,
    /// The filtered world-frame acceleration fed to the state filter this
    /// tick, m/s².
    pub u_world: f64,
}

/// Builds the scalar measurement for `update` and applies it.
///
/// Position updates measure the CoM height of a robot standing on the
/// ground. The max-squat velocity update measures zero. The liftoff velocity
/// update re-measures the captured liftoff velocity scaled by the trained
/// loss polynomial. The aerial bias update compares the accelerometer
/// against the acceleration the commanded thrust should produce; what is
/// left over is bias.
pub fn apply_imupt(
    filter: &mut VerticalFilter,
    update: InferredUpdate,
    ctx: &ImuptContext,
    p: &EstimatorParams,
    rp: &RobotParams,
) -> Result<()> {
    if !allowed_updates(filter.kind()).contains(&update) {
        return Err(Error::config(format!(
            "{update:?} is not run for {}",
            filter.kind().as_str()
        )));
    }
    let (comp, value, r) = match update {
        InferredUpdate::PositionTd | InferredUpdate::PositionLo => {
            (MeasuredState::Position, -com_foot_offset(rp), p.sigma_pz * p.sigma_pz)
        }
        InferredUpdate::VelocityMs => (MeasuredState::Velocity, 0.0, p.sigma_vz * p.sigma_vz),
        InferredUpdate::VelocityLo => (
            MeasuredState::Velocity,
            ctx.v_lo_est * liftoff_velocity_scale(ctx.v_lo_est, ctx.h_ch, p),
            p.sigma_vz * p.sigma_vz,
        ),
        InferredUpdate::AccelBiasAerial => {
            let f_u1 = p.c_m1 * ctx.duty_sum + p.c_m0;
            let expected = f_u1 / rp.total_mass() - rp.g;
            (MeasuredState::AccelBias, ctx.u_world - expected, p.sigma_bz * p.sigma_bz)
        }
    };
    filter.update(comp, value, r)
}

/// Sensor readings and commands for one estimator tick.
#[derive(Debug, Clone, Copy)]
pub struct TickInput {
    pub sample: ImuSample,
    /// Thrust-to-weight command in force.
    pub twr: f64,
    /// Commanded apex height in force, m.
    pub h_desired: f64,
}

/// Everything the estimator knows at the end of a tick.
#[derive(Debug, Clone, Copy)]
pub struct TickEstimate {
    /// Filtered, range-selected, gravity-compensated acceleration, m/s².
    pub a_world: f64,
    pub phase: Phase,
    pub event: Option<Transition>,
    pub z: f64,
    pub v: f64,
    pub p00: f64,
    pub p01: f64,
    pub p11: f64,
}

/// Largest liftoff-velocity capture the loss polynomial is trusted with.
/// The polynomial is a fit over real hops; fed a diverged filter's velocity
/// its cubic would compound the divergence instead of correcting it.
const V_LO_TRUSTED: f64 = 20.0;

/// The full online estimator: one filter, one phase machine, two low-pass
/// conditioners, ticked at the estimation rate.
#[derive(Debug, Clone)]
pub struct EstimatorRig {
    params: EstimatorParams,
    rp: RobotParams,
    filter: VerticalFilter,
    phase: PhaseEstimator,
    lp_hvse: LowPass,
    lp_hpe: LowPass,
    allowed: Vec<InferredUpdate>,
    dt: f64,
    v_lo_est: f64,
}

impl EstimatorRig {
    pub fn new(
        kind: FilterKind,
        params: &EstimatorParams,
        phase_cfg: &PhaseConfig,
        rp: &RobotParams,
        est_rate: f64,
        z0: f64,
        v0: f64,
    ) -> Result<EstimatorRig> {
        params.validate()?;
        rp.validate()?;
        if !(est_rate > 0.0) || !est_rate.is_finite() {
            return Err(Error::config("est_rate must be positive"));
        }
        let dt = 1.0 / est_rate;
        Ok(EstimatorRig {
            params: *params,
            rp: rp.clone(),
            filter: VerticalFilter::with_state(kind, z0, v0),
            phase: PhaseEstimator::new(phase_cfg, est_rate)?,
            lp_hvse: LowPass::new(params.f_hvse, dt),
            lp_hpe: LowPass::new(params.f_hpe, dt),
            allowed: allowed_updates(kind).to_vec(),
            dt,
            v_lo_est: 0.0,
        })
    }

    /// Restricts the rig to a subset of its kind's inferred updates. Used by
    /// the stripped-down baseline estimators.
    pub fn restrict_updates(&mut self, updates: &[InferredUpdate]) {
        let legal = allowed_updates(self.filter.kind());
        self.allowed = updates.iter().copied().filter(|u| legal.contains(u)).collect();
    }

    pub fn filter(&self) -> &VerticalFilter {
        &self.filter
    }

    pub fn phase(&self) -> Phase {
        self.phase.phase()
    }

    pub fn tick_dt(&self) -> f64 {
        self.dt
    }

    /// Runs one estimation tick: condition the freshest IMU sample, predict,
    /// step the phase machine, and apply whatever inferred measurements the
    /// tick's phase and events call for.
    pub fn tick(&mut self, input: &TickInput) -> Result<TickEstimate> {
        let selected = select_accel(&input.sample, self.params.g_s * G);
        let u_raw = selected - self.rp.g;
        let u_hvse = self.lp_hvse.filter(u_raw);
        let u_hpe = self.lp_hpe.filter(u_raw);

        self.filter.predict(u_hvse, self.dt, self.params.sigma_az, self.params.sigma_bz)?;

        let event = self.phase.update(u_hpe, self.filter.v(), self.dt);

        let mut ctx = ImuptContext {
            h_ch: input.h_desired,
            v_lo_est: self.v_lo_est,
            duty_sum: 4.0 * input.twr,
            u_world: u_hvse,
        };
        match event {
            Some(Transition::Td) => self.apply_if_allowed(InferredUpdate::PositionTd, &ctx)?,
            Some(Transition::Ms) => self.apply_if_allowed(InferredUpdate::VelocityMs, &ctx)?,
            Some(Transition::Lo) => {
                // The velocity the filter carried into liftoff, before the
                // liftoff updates themselves touch it.
                self.v_lo_est = self.filter.v();
                ctx.v_lo_est = self.v_lo_est;
                self.apply_if_allowed(InferredUpdate::PositionLo, &ctx)?;
                if self.v_lo_est.abs() <= V_LO_TRUSTED {
                    self.apply_if_allowed(InferredUpdate::VelocityLo, &ctx)?;
                }
            }
            Some(Transition::Ha) | None => {}
        }
        if self.phase.phase().is_aerial() {
            self.apply_if_allowed(InferredUpdate::AccelBiasAerial, &ctx)?;
        }

        let p = self.filter.covariance();
        Ok(TickEstimate {
            a_world: u_hvse,
            phase: self.phase.phase(),
            event,
            z: self.filter.z(),
            v: self.filter.v(),
            p00: p[(0, 0)],
            p01: p[(0, 1)],
            p11: p[(1, 1)],
        })
    }

    fn apply_if_allowed(&mut self, update: InferredUpdate, ctx: &ImuptContext) -> Result<()> {
        if self.allowed.contains(&update) {
            apply_imupt(&mut self.filter, update, ctx, &self.params, &self.rp)?;
        }
        Ok(())
    }
}
