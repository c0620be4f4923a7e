//! Supervisory bus-voltage control.
//!
//! Three regimes share one bus:
//! - centralized: a secondary PI measures the bus voltage and broadcasts one
//!   reference correction to every converter over a communication link;
//! - none: every converter regulates its own terminal to the nominal voltage;
//! - decentralized: every converter raises its own reference by the drop it
//!   expects across its feeder, `v* + i·R̂`, using only local measurements.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pi::{PiController, PiError, PiGains};

pub const DEFAULT_SECONDARY_GAINS: PiGains = PiGains::new(1.5, 150.0);
/// Default correction clamp as a fraction of the nominal bus voltage.
pub const DEFAULT_CORRECTION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("measurement error: bus voltage reading is {0}")]
    Measurement(f64),
    #[error(transparent)]
    Pi(#[from] PiError),
    #[error("schedule error: {0}")]
    Schedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    Centralized,
    None,
    Decentralized,
}

impl ControlMode {
    /// Integer code used in the CSV output.
    pub fn code(self) -> u8 {
        match self {
            ControlMode::Centralized => 0,
            ControlMode::None => 1,
            ControlMode::Decentralized => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::Centralized => "centralized",
            ControlMode::None => "none",
            ControlMode::Decentralized => "decentralized",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "centralized" => Ok(ControlMode::Centralized),
            "none" => Ok(ControlMode::None),
            "decentralized" => Ok(ControlMode::Decentralized),
            other => Err(format!("unknown control mode `{other}`")),
        }
    }
}

/// Centralized secondary restoration loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryController {
    pi: PiController,
    pub v_dc_nominal: f64,
    correction: f64,
    enabled: bool,
}

impl SecondaryController {
    /// `limit` bounds the broadcast correction in volts.
    pub fn new(gains: PiGains, v_dc_nominal: f64, limit: f64) -> Self {
        Self {
            pi: PiController::symmetric(gains, limit),
            v_dc_nominal,
            correction: 0.0,
            enabled: true,
        }
    }

    pub fn with_default_limit(gains: PiGains, v_dc_nominal: f64) -> Self {
        Self::new(
            gains,
            v_dc_nominal,
            DEFAULT_CORRECTION_FRACTION * v_dc_nominal,
        )
    }

    pub fn correction(&self) -> f64 {
        self.correction
    }

    pub fn integrator(&self) -> f64 {
        self.pi.integrator()
    }

    pub fn set_integrator(&mut self, value: f64) {
        self.pi.set_integrator(value);
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn enable(&mut self) {
        self.enabled = true;
    }

    /// Switches the loop off: zero correction, integrator cleared.
    pub fn disable(&mut self) {
        self.enabled = false;
        self.correction = 0.0;
        self.pi.reset();
    }

    pub fn reset(&mut self) {
        self.correction = 0.0;
        self.pi.reset();
    }

    /// Samples the bus voltage and returns the correction to broadcast.
    ///
    /// A non-finite reading is rejected and the previous correction is kept.
    pub fn update(&mut self, v_pcc_measured: f64, dt: f64) -> Result<f64, ControlError> {
        if !self.enabled {
            return Ok(0.0);
        }
        if !v_pcc_measured.is_finite() {
            return Err(ControlError::Measurement(v_pcc_measured));
        }
        self.correction = self.pi.step(self.v_dc_nominal - v_pcc_measured, dt)?;
        Ok(self.correction)
    }
}

/// What a receiver uses while the link is down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossPolicy {
    /// Keep the last value that arrived.
    #[default]
    Hold,
    /// Fall back to no correction.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkState {
    Up,
    Down,
}

/// Sampled broadcast channel with a whole-period delay and scheduled outages.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLink {
    /// Seconds between transmissions.
    pub period: f64,
    /// Delay in whole periods.
    pub delay: usize,
    pub on_loss: LossPolicy,
    /// `(time, state)` switches; the link is up before the first one.
    events: Vec<(f64, LinkState)>,
    in_flight: VecDeque<f64>,
    last_delivered: f64,
}

impl CommLink {
    pub fn new(period: f64, delay: usize, on_loss: LossPolicy) -> Self {
        Self {
            period,
            delay,
            on_loss,
            events: Vec::new(),
            in_flight: VecDeque::with_capacity(delay + 1),
            last_delivered: 0.0,
        }
    }

    /// Adds outage/restore switches. Times must be strictly increasing.
    pub fn with_events(mut self, events: Vec<(f64, LinkState)>) -> Self {
        self.events = events;
        self
    }

    /// Periods during which the link is up, clipped to `[0, horizon]`.
    pub fn up_intervals(&self, horizon: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = Some(0.0);
        for &(t, state) in &self.events {
            match (state, start) {
                (LinkState::Down, Some(s)) => {
                    if t > s {
                        out.push((s, t.min(horizon)));
                    }
                    start = None;
                }
                (LinkState::Up, None) => start = Some(t),
                _ => {}
            }
        }
        if let Some(s) = start {
            if s < horizon {
                out.push((s, horizon));
            }
        }
        out
    }

    pub fn is_up(&self, t: f64) -> bool {
        let idx = self.events.partition_point(|&(te, _)| te <= t);
        idx == 0 || self.events[idx - 1].1 == LinkState::Up
    }

    pub fn last_delivered(&self) -> f64 {
        self.last_delivered
    }

    /// Drops everything in flight and forgets the last delivery.
    pub fn reset(&mut self) {
        self.in_flight.clear();
        self.last_delivered = 0.0;
    }

    /// Sends `value` at time `t` and returns what the receivers hold afterwards.
    ///
    /// The sender keeps transmitting during an outage; those samples are lost at
    /// the receiving end. With `delay = d` the value delivered is the one sent
    /// `d` calls earlier; until the pipeline fills, the receiver keeps its
    /// previous value.
    pub fn transmit(&mut self, value: f64, t: f64) -> f64 {
        self.in_flight.push_back(value);
        while self.in_flight.len() > self.delay + 1 {
            self.in_flight.pop_front();
        }
        if !self.is_up(t) {
            return match self.on_loss {
                LossPolicy::Hold => self.last_delivered,
                LossPolicy::Zero => 0.0,
            };
        }
        if self.in_flight.len() == self.delay + 1 {
            self.last_delivered = self.in_flight[0];
        }
        self.last_delivered
    }
}

/// Local reference of one converter under decentralized restoration.
pub fn decentralized_reference(v_dc_nominal: f64, i_out: f64, r_est: f64) -> f64 {
    v_dc_nominal + i_out * r_est
}

/// Timeline of control modes, converter trips and link switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub modes: Vec<(f64, ControlMode)>,
    /// `(time, converter index)` with zero-based indices.
    pub trips: Vec<(f64, usize)>,
    pub link: Vec<(f64, LinkState)>,
}

impl ControlSchedule {
    pub fn single_mode(mode: ControlMode) -> Self {
        Self {
            modes: vec![(0.0, mode)],
            trips: Vec::new(),
            link: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let Some(&(t0, _)) = self.modes.first() else {
            return Err("mode timeline is empty".into());
        };
        if t0 != 0.0 {
            return Err(format!("mode timeline must start at t = 0 (got {t0})"));
        }
        strictly_increasing("mode timeline", self.modes.iter().map(|e| e.0))?;
        strictly_increasing("link events", self.link.iter().map(|e| e.0))?;
        for &(t, _) in &self.trips {
            if !(t.is_finite() && t >= 0.0) {
                return Err(format!("trip time must be >= 0 (got {t})"));
            }
        }
        Ok(())
    }

    pub fn last_event_time(&self) -> f64 {
        self.modes
            .iter()
            .map(|e| e.0)
            .chain(self.trips.iter().map(|e| e.0))
            .chain(self.link.iter().map(|e| e.0))
            .fold(0.0, f64::max)
    }

    /// Mode of the last timeline entry at or before `t`.
    pub fn active_mode(&self, t: f64) -> Result<ControlMode, ControlError> {
        let idx = self.modes.partition_point(|&(tm, _)| tm <= t);
        if idx == 0 {
            return Err(ControlError::Schedule(format!(
                "no control mode scheduled at or before t = {t}"
            )));
        }
        Ok(self.modes[idx - 1].1)
    }
}

fn strictly_increasing(what: &str, times: impl Iterator<Item = f64>) -> Result<(), String> {
    let mut prev: Option<f64> = None;
    for t in times {
        if !(t.is_finite() && t >= 0.0) {
            return Err(format!("{what}: time must be >= 0 (got {t})"));
        }
        if let Some(p) = prev {
            if !(t > p) {
                return Err(format!(
                    "{what}: times must be strictly increasing ({p} then {t})"
                ));
            }
        }
        prev = Some(t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3_modes() -> ControlSchedule {
        ControlSchedule {
            modes: vec![
                (0.0, ControlMode::Centralized),
                (1.0, ControlMode::None),
                (2.0, ControlMode::Decentralized),
            ],
            trips: vec![(3.0, 2)],
            link: Vec::new(),
        }
    }

    #[test]
    fn secondary_holds_at_zero_error() {
        let mut sec = SecondaryController::with_default_limit(DEFAULT_SECONDARY_GAINS, 400.0);
        sec.set_integrator(2.5);
        assert_eq!(sec.update(400.0, 1e-3).unwrap(), 2.5);
        assert_eq!(sec.integrator(), 2.5);
    }

    #[test]
    fn secondary_first_sample() {
        let mut sec = SecondaryController::with_default_limit(DEFAULT_SECONDARY_GAINS, 400.0);
        let c = sec.update(396.0, 1e-4).unwrap();
        assert!((c - 6.06).abs() < 1e-12);
    }

    #[test]
    fn secondary_rejects_bad_measurement_and_keeps_correction() {
        let mut sec = SecondaryController::with_default_limit(DEFAULT_SECONDARY_GAINS, 400.0);
        sec.update(396.0, 1e-3).unwrap();
        let before = sec.correction();
        assert!(matches!(
            sec.update(f64::INFINITY, 1e-3),
            Err(ControlError::Measurement(_))
        ));
        assert_eq!(sec.correction(), before);
    }

    #[test]
    fn secondary_correction_is_clamped() {
        let mut sec = SecondaryController::with_default_limit(DEFAULT_SECONDARY_GAINS, 400.0);
        for _ in 0..10_000 {
            let c = sec.update(300.0, 1e-3).unwrap();
            assert!(c.abs() <= 40.0);
        }
        assert_eq!(sec.correction(), 40.0);
    }

    #[test]
    fn disabled_secondary_outputs_zero_and_resets() {
        let mut sec = SecondaryController::with_default_limit(DEFAULT_SECONDARY_GAINS, 400.0);
        sec.update(396.0, 1e-3).unwrap();
        sec.disable();
        assert_eq!(sec.correction(), 0.0);
        assert_eq!(sec.integrator(), 0.0);
        assert_eq!(sec.update(390.0, 1e-3).unwrap(), 0.0);
        assert_eq!(sec.integrator(), 0.0);
    }

    #[test]
    fn transparent_link() {
        let mut link = CommLink::new(1e-3, 0, LossPolicy::Hold);
        for k in 0..5 {
            let v = k as f64 * 1.5;
            assert_eq!(link.transmit(v, k as f64 * 1e-3), v);
        }
    }

    #[test]
    fn delayed_link_lags_by_whole_samples() {
        let mut link = CommLink::new(1e-3, 2, LossPolicy::Hold);
        let sent: Vec<f64> = (0..10).map(|k| 100.0 + k as f64).collect();
        let got: Vec<f64> = sent
            .iter()
            .enumerate()
            .map(|(k, &v)| link.transmit(v, k as f64 * 1e-3))
            .collect();
        assert_eq!(got[0], 0.0);
        assert_eq!(got[1], 0.0);
        for k in 2..10 {
            assert_eq!(got[k], sent[k - 2]);
        }
    }

    #[test]
    fn outage_freezes_delivered_value() {
        let mut link =
            CommLink::new(1e-3, 0, LossPolicy::Hold).with_events(vec![(0.005, LinkState::Down)]);
        let mut last = 0.0;
        for k in 0..10 {
            let t = k as f64 * 1e-3;
            let got = link.transmit(k as f64, t);
            if t < 0.005 {
                last = got;
                assert_eq!(got, k as f64);
            } else {
                assert_eq!(got, last);
            }
        }
        assert_eq!(last, 4.0);
    }

    #[test]
    fn outage_with_zero_policy_and_restore() {
        let mut link = CommLink::new(1e-3, 0, LossPolicy::Zero)
            .with_events(vec![(0.002, LinkState::Down), (0.004, LinkState::Up)]);
        let got: Vec<f64> = (0..6)
            .map(|k| link.transmit(10.0 + k as f64, k as f64 * 1e-3))
            .collect();
        assert_eq!(got, vec![10.0, 11.0, 0.0, 0.0, 14.0, 15.0]);
        assert_eq!(link.up_intervals(0.01), vec![(0.0, 0.002), (0.004, 0.01)]);
    }

    #[test]
    fn decentralized_reference_values() {
        assert!((decentralized_reference(400.0, 10.0, 0.4) - 404.0).abs() < 1e-12);
        assert_eq!(decentralized_reference(400.0, 0.0, 0.4), 400.0);
        assert!((decentralized_reference(400.0, 7.5, 0.4) - 403.0).abs() < 1e-12);
    }

    #[test]
    fn fig3_mode_lookup() {
        let s = fig3_modes();
        assert!(s.validate().is_ok());
        assert_eq!(s.active_mode(0.5).unwrap(), ControlMode::Centralized);
        assert_eq!(s.active_mode(1.5).unwrap(), ControlMode::None);
        assert_eq!(s.active_mode(2.5).unwrap(), ControlMode::Decentralized);
        assert_eq!(s.active_mode(1.0).unwrap(), ControlMode::None);
        assert!(s.active_mode(-0.1).is_err());
        assert_eq!(s.last_event_time(), 3.0);
    }

    #[test]
    fn schedule_validation() {
        let mut s = fig3_modes();
        s.modes[2].0 = 1.0;
        assert!(s.validate().is_err());
        let mut late = fig3_modes();
        late.modes[0].0 = 0.1;
        assert!(late.validate().is_err());
    }

    #[test]
    fn mode_codes() {
        assert_eq!(ControlMode::Centralized.code(), 0);
        assert_eq!(ControlMode::None.code(), 1);
        assert_eq!(ControlMode::Decentralized.code(), 2);
        assert_eq!(
            "decentralized".parse::<ControlMode>().unwrap(),
            ControlMode::Decentralized
        );
    }
}
