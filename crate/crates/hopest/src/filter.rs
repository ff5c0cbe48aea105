//! Vertical-state Kalman filter bank.
//!
//! Four variants share one implementation: plain Kalman filters with two
//! states (KF1: height, velocity) or three (KF2: plus accelerometer bias),
//! and error-state forms of the three-state filter (ESKF1, ESKF2) that apply
//! corrections through an explicit error vector. All of them integrate the
//! gravity-compensated world-frame acceleration between inferred-measurement
//! updates; what differs is the state dimension and which updates each kind
//! accepts (enforced one level up, in the estimator rig).
//!
//! Internally every kind lives in a 3-vector/3x3 layout. The two-state KF1
//! simply keeps the bias entry and its covariance row/column at zero, which
//! the update equations preserve on their own.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::params::EstimatorParams;

/// Which filter variant is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FilterKind {
    #[default]
    Kf1,
    Kf2,
    Eskf1,
    Eskf2,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] =
        [FilterKind::Kf1, FilterKind::Kf2, FilterKind::Eskf1, FilterKind::Eskf2];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Kf1 => "KF1",
            FilterKind::Kf2 => "KF2",
            FilterKind::Eskf1 => "ESKF1",
            FilterKind::Eskf2 => "ESKF2",
        }
    }

    pub fn parse(s: &str) -> Result<FilterKind> {
        match s.to_ascii_uppercase().as_str() {
            "KF1" => Ok(FilterKind::Kf1),
            "KF2" => Ok(FilterKind::Kf2),
            "ESKF1" => Ok(FilterKind::Eskf1),
            "ESKF2" => Ok(FilterKind::Eskf2),
            _ => Err(Error::config(format!(
                "unknown filter kind {s:?} (expected KF1, KF2, ESKF1, or ESKF2)"
            ))),
        }
    }

    /// True for the kinds that carry an accelerometer-bias state.
    pub fn has_bias_state(self) -> bool {
        !matches!(self, FilterKind::Kf1)
    }

    /// True for the error-state variants.
    pub fn is_error_state(self) -> bool {
        matches!(self, FilterKind::Eskf1 | FilterKind::Eskf2)
    }
}

/// Which state component a scalar measurement observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasuredState {
    Position,
    Velocity,
    AccelBias,
}

impl MeasuredState {
    fn index(self) -> usize {
        match self {
            MeasuredState::Position => 0,
            MeasuredState::Velocity => 1,
            MeasuredState::AccelBias => 2,
        }
    }
}

/// Initial height/velocity covariance block, chosen as a typical converged
/// covariance so the first touchdown already gets a sensible gain.
pub const DEFAULT_P0: [[f64; 2]; 2] = [[0.0582e-4, 0.0774e-4], [0.0774e-4, 0.1441e-4]];

/// Initial bias variance for the three-state kinds, (m/s²)².
pub const DEFAULT_BIAS_VAR: f64 = 1e-2;

pub fn default_initial_covariance(kind: FilterKind) -> Matrix3<f64> {
    let mut p = Matrix3::zeros();
    p[(0, 0)] = DEFAULT_P0[0][0];
    p[(0, 1)] = DEFAULT_P0[0][1];
    p[(1, 0)] = DEFAULT_P0[1][0];
    p[(1, 1)] = DEFAULT_P0[1][1];
    if kind.has_bias_state() {
        p[(2, 2)] = DEFAULT_BIAS_VAR;
    }
    p
}

/// Signed centre-of-mass-to-foot offset at rest, m. Negative: the CoM sits
/// below the top of the leg travel by more than the CoM height above the
/// foot, so the inferred ground-contact position measurement is `-L_f > 0`.
pub fn com_foot_offset(rp: &RobotParams) -> f64 {
    let m = rp.m_body + rp.m_leg;
    (rp.m_body * rp.l3 + rp.m_leg * rp.l1) / m - (rp.l1 + rp.l2)
}

/// Liftoff-velocity rescale factor: a quadratic in the liftoff velocity
/// estimate times an affine term in the commanded height for the next hop.
/// Absorbs stance-phase estimation error that a pure zero-velocity update
/// cannot see.
pub fn liftoff_velocity_scale(v_lo: f64, h_ch: f64, p: &EstimatorParams) -> f64 {
    (p.c_vel2 * v_lo * v_lo + p.c_vel1 * v_lo + p.c_vel0) * (p.c_ch1 * h_ch + p.c_ch0)
}

/// One vertical-state filter instance.
///
/// `x = [z, dz, accel_bias]`; for KF1 the bias entry is structurally zero.
#[derive(Debug, Clone)]
pub struct VerticalFilter {
    kind: FilterKind,
    x: Vector3<f64>,
    p: Matrix3<f64>,
    /// Error state for the ESKF kinds. Held at zero between updates; the
    /// measurement step fills it, injects it into `x`, and clears it again.
    delta: Vector3<f64>,
}

impl VerticalFilter {
    pub fn new(kind: FilterKind) -> Self {
        Self::with_state(kind, 0.0, 0.0)
    }

    pub fn with_state(kind: FilterKind, z0: f64, v0: f64) -> Self {
        VerticalFilter {
            kind,
            x: Vector3::new(z0, v0, 0.0),
            p: default_initial_covariance(kind),
            delta: Vector3::zeros(),
        }
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    /// Estimated height, m.
    pub fn z(&self) -> f64 {
        self.x[0]
    }

    /// Estimated vertical velocity, m/s.
    pub fn v(&self) -> f64 {
        self.x[1]
    }

    /// Estimated accelerometer bias, m/s². Zero for KF1.
    pub fn accel_bias(&self) -> f64 {
        self.x[2]
    }

    pub fn state(&self) -> Vector3<f64> {
        self.x
    }

    pub fn covariance(&self) -> &Matrix3<f64> {
        &self.p
    }

    pub fn set_state(&mut self, z: f64, v: f64) {
        self.x[0] = z;
        self.x[1] = v;
    }

    pub fn set_covariance(&mut self, p: Matrix3<f64>) {
        self.p = 0.5 * (p + p.transpose());
    }

    /// Time propagation with the gravity-compensated vertical acceleration
    /// input `u` (m/s², world frame, thrust and gravity both included).
    pub fn predict(&mut self, u: f64, dt: f64, sigma_az: f64, sigma_bz: f64) -> Result<()> {
        if !(u.is_finite() && dt.is_finite()) {
            return Err(Error::numeric("non-finite predict input"));
        }
        if dt <= 0.0 {
            return Err(Error::config("predict step dt must be positive"));
        }

        let mut f = Matrix3::identity();
        f[(0, 1)] = dt;
        if self.kind.has_bias_state() {
            f[(0, 2)] = -0.5 * dt * dt;
            f[(1, 2)] = -dt;
        }
        let g = Vector3::new(0.5 * dt * dt, dt, 0.0);

        self.x = f * self.x + g * u;

        let mut q = g * g.transpose() * (sigma_az * sigma_az);
        if self.kind.has_bias_state() {
            q[(2, 2)] += sigma_bz * sigma_bz;
        }
        self.p = f * self.p * f.transpose() + q;
        self.symmetrize();

        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("filter state diverged in predict"));
        }
        Ok(())
    }

    /// Scalar measurement update of one state component.
    ///
    /// Covariance uses the Joseph form, which stays positive semi-definite
    /// for any gain, then is symmetrized.
    pub fn update(&mut self, comp: MeasuredState, value: f64, r: f64) -> Result<()> {
        if comp == MeasuredState::AccelBias && !self.kind.has_bias_state() {
            return Err(Error::config(format!(
                "{} has no bias state to measure",
                self.kind.as_str()
            )));
        }
        if !(value.is_finite() && r.is_finite()) {
            return Err(Error::numeric("non-finite measurement"));
        }
        if r <= 0.0 {
            return Err(Error::config("measurement variance must be positive"));
        }
        let i = comp.index();

        let s = self.p[(i, i)] + r;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::numeric(format!(
                "singular innovation covariance (S = {s})"
            )));
        }
        let k: Vector3<f64> = self.p.column(i) / s;
        let resid = value - self.x[i];

        if self.kind.is_error_state() {
            self.delta = k * (resid - self.delta[i]);
            self.x += self.delta;
            self.delta.fill(0.0);
        } else {
            self.x += k * resid;
        }

        let mut a: Matrix3<f64> = Matrix3::identity();
        for row in 0..3 {
            a[(row, i)] -= k[row];
        }
        self.p = a * self.p * a.transpose() + k * k.transpose() * r;
        self.symmetrize();

        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("filter state diverged in update"));
        }
        Ok(())
    }

    fn symmetrize(&mut self) {
        self.p = 0.5 * (self.p + self.p.transpose());
    }

    /// Smallest eigenvalue of the covariance. Negative beyond roundoff means
    /// the filter lost positive semi-definiteness.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        self.p
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e))
    }

    /// Largest absolute element of `P - Pᵀ`.
    pub fn max_covariance_asymmetry(&self) -> f64 {
        let d = self.p - self.p.transpose();
        d.iter().fold(0.0_f64, |m, &e| m.max(e.abs()))
    }
}
