//! Discrete PI compensator with output clamping and conditional anti-windup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PiError {
    #[error("non-finite controller error signal ({0})")]
    NonFiniteError(f64),
    #[error("controller time step must be positive (got {0})")]
    BadStep(f64),
}

/// Proportional and integral coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiGains {
    pub kp: f64,
    /// Integral gain in 1/s.
    pub ki: f64,
}

impl PiGains {
    pub const fn new(kp: f64, ki: f64) -> Self {
        Self { kp, ki }
    }
}

/// Forward-Euler PI with saturated output.
///
/// The integrator is frozen whenever the unclamped output would exceed a limit
/// in the direction the error is pushing it. The output is always inside
/// `[out_min, out_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiController {
    pub gains: PiGains,
    out_min: f64,
    out_max: f64,
    integrator: f64,
}

impl PiController {
    pub fn new(gains: PiGains, out_min: f64, out_max: f64) -> Self {
        assert!(out_min < out_max, "PI limits must satisfy min < max");
        Self {
            gains,
            out_min,
            out_max,
            integrator: 0.0,
        }
    }

    pub fn symmetric(gains: PiGains, limit: f64) -> Self {
        Self::new(gains, -limit, limit)
    }

    pub fn integrator(&self) -> f64 {
        self.integrator
    }

    pub fn limits(&self) -> (f64, f64) {
        (self.out_min, self.out_max)
    }

    pub fn set_limits(&mut self, out_min: f64, out_max: f64) {
        debug_assert!(out_min < out_max);
        self.out_min = out_min;
        self.out_max = out_max;
    }

    pub fn set_integrator(&mut self, value: f64) {
        self.integrator = value;
    }

    pub fn reset(&mut self) {
        self.integrator = 0.0;
    }

    /// Advances the controller by `dt` seconds with the given error and returns
    /// the clamped output.
    pub fn step(&mut self, error: f64, dt: f64) -> Result<f64, PiError> {
        if !error.is_finite() {
            return Err(PiError::NonFiniteError(error));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PiError::BadStep(dt));
        }
        let proportional = self.gains.kp * error;
        let candidate = self.integrator + self.gains.ki * error * dt;
        let unclamped = proportional + candidate;
        let pushing_high = unclamped > self.out_max && error > 0.0;
        let pushing_low = unclamped < self.out_min && error < 0.0;
        if !(pushing_high || pushing_low) {
            self.integrator = candidate;
        }
        Ok((proportional + self.integrator).clamp(self.out_min, self.out_max))
    }
}
