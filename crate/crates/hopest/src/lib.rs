//! Simulation, sensing, estimation, and training for a one-dimensional hopping
//! robot that measures nothing but its own vertical acceleration.
//!
//! The crate covers the whole loop needed to study inertial-only vertical
//! state estimation on a spring-legged monopod:
//!
//! * [`dynamics`] — a two-mass vertical hopper with unilateral ground contact,
//!   integrated at a fixed fine step so that sensor decimation produces real
//!   aliasing rather than an artifact of the integrator.
//! * [`sensing`] — dual-range accelerometer synthesis, range selection, and
//!   the first-order low-pass filters that condition the signal.
//! * [`phase`] — the hop phase machine turning filtered acceleration into
//!   touchdown, mid-stance, liftoff, and apex events.
//! * [`filter`] — the vertical Kalman filter bank (plain and error-state,
//!   with and without an accelerometer bias state).
//! * [`estimator`] — the per-tick rig that chains range selection, filtering,
//!   phase estimation, and the event-driven inferred measurement updates.
//! * [`sim`] — the closed-loop trial runner with a proportional apex-height
//!   controller.
//! * [`hoplog`] — the CSV tick log that is the interchange format between
//!   simulation, training, and evaluation.
//! * [`replay`] — offline re-estimation over recorded logs.
//! * [`trainer`] — genetic-algorithm search over the estimator parameters.
//! * [`metrics`] — error metrics, ground-height tracking, hopping agility
//!   numbers, and the reference baselines used for comparison.

pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod hoplog;
pub mod metrics;
pub mod params;
pub mod phase;
pub mod replay;
pub mod sensing;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
