//! Resistive star network: converter terminals, feeders, one common bus, one load.
//!
//! Every converter terminal connects to the point of common coupling (PCC)
//! through a purely resistive feeder. The PCC is the only unknown node, so the
//! nodal equation reduces to a single scalar balance that is solved in closed
//! form:
//!
//! ```text
//! constant-current:     Σ g_i (v_i − v_pcc) = i_L
//! constant-resistance:  Σ g_i (v_i − v_pcc) = v_pcc / R_L
//! ```
//!
//! with `g_i = 1 / R_fi` for connected feeders and `g_i = 0` for open ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("infeasible network: no connected feeder can carry a {0} A constant-current load")]
    Infeasible(f64),
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// One feeder cable between a converter terminal and the common bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeederLine {
    /// Physical resistance in ohms.
    pub r_true: f64,
    /// Resistance assumed by the converter's local compensator, in ohms.
    pub r_est: f64,
    pub connected: bool,
}

impl FeederLine {
    /// A connected feeder whose estimate equals its true resistance.
    pub fn new(r_true: f64) -> Self {
        Self {
            r_true,
            r_est: r_true,
            connected: true,
        }
    }

    pub fn with_estimate(mut self, r_est: f64) -> Self {
        self.r_est = r_est;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_true.is_finite() && self.r_true > 0.0) {
            return Err(format!("resistance must be > 0 (got {})", self.r_true));
        }
        if !(self.r_est.is_finite() && self.r_est >= 0.0) {
            return Err(format!(
                "resistance estimate must be >= 0 (got {})",
                self.r_est
            ));
        }
        Ok(())
    }

    fn conductance(&self) -> f64 {
        if self.connected {
            1.0 / self.r_true
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadKind {
    ConstantCurrent,
    ConstantResistance,
}

/// Instantaneous load seen by the bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Load {
    /// Amperes drawn regardless of bus voltage.
    Current(f64),
    /// Ohms between the bus and ground.
    Resistance(f64),
}

/// Piecewise-constant load over time.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    pub kind: LoadKind,
    /// `(time, value)` pairs; amperes or ohms depending on `kind`.
    pub steps: Vec<(f64, f64)>,
}

impl LoadProfile {
    pub fn constant_current(steps: Vec<(f64, f64)>) -> Self {
        Self {
            kind: LoadKind::ConstantCurrent,
            steps,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let Some(&(t0, _)) = self.steps.first() else {
            return Err("load profile has no steps".into());
        };
        if t0 != 0.0 {
            return Err(format!("first load step must be at t = 0 (got {t0})"));
        }
        for pair in self.steps.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(format!(
                    "load step times must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                ));
            }
        }
        for &(t, value) in &self.steps {
            if !t.is_finite() || !value.is_finite() {
                return Err(format!("non-finite load step ({t}, {value})"));
            }
            match self.kind {
                LoadKind::ConstantCurrent if value < 0.0 => {
                    return Err(format!(
                        "constant-current load must be >= 0 (got {value} at t = {t})"
                    ))
                }
                LoadKind::ConstantResistance if value <= 0.0 => {
                    return Err(format!(
                        "constant-resistance load must be > 0 (got {value} at t = {t})"
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Value of the last step at or before `t` (the first step before t = 0).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(ts, _)| ts <= t);
        self.steps[idx.saturating_sub(1)].1
    }

    pub fn load_at(&self, t: f64) -> Load {
        self.load_for(self.value_at(t))
    }

    pub fn load_for(&self, value: f64) -> Load {
        match self.kind {
            LoadKind::ConstantCurrent => Load::Current(value),
            LoadKind::ConstantResistance => Load::Resistance(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusSolution {
    pub v_pcc: f64,
    /// One entry per feeder, zero for open feeders.
    pub branch_currents: Vec<f64>,
    pub i_load: f64,
}

/// Solves the star network for the bus voltage and branch currents.
///
/// `terminal_voltages` and `feeders` are index-aligned. Terminal voltages of
/// disconnected feeders are ignored.
pub fn solve_bus(
    terminal_voltages: &[f64],
    feeders: &[FeederLine],
    load: Load,
) -> Result<BusSolution, NetworkError> {
    if terminal_voltages.len() != feeders.len() {
        return Err(NetworkError::Input(format!(
            "{} terminal voltages for {} feeders",
            terminal_voltages.len(),
            feeders.len()
        )));
    }
    let mut g_sum = 0.0;
    let mut injected = 0.0;
    let mut connected = 0usize;
    let mut last_connected = 0usize;
    for (i, (v, feeder)) in terminal_voltages.iter().zip(feeders).enumerate() {
        if !feeder.connected {
            continue;
        }
        if !v.is_finite() {
            return Err(NetworkError::Input(format!(
                "terminal voltage {} is {v}",
                i + 1
            )));
        }
        if !(feeder.r_true.is_finite() && feeder.r_true > 0.0) {
            return Err(NetworkError::Input(format!(
                "feeder {} resistance is {}",
                i + 1,
                feeder.r_true
            )));
        }
        let g = feeder.conductance();
        g_sum += g;
        injected += g * v;
        connected += 1;
        last_connected = i;
    }

    let v_pcc = match load {
        Load::Current(i_l) => {
            if !i_l.is_finite() {
                return Err(NetworkError::Input(format!("load current is {i_l}")));
            }
            if connected == 0 {
                if i_l != 0.0 {
                    return Err(NetworkError::Infeasible(i_l));
                }
                0.0
            } else if connected == 1 {
                // series circuit
                terminal_voltages[last_connected] - i_l * feeders[last_connected].r_true
            } else {
                (injected - i_l) / g_sum
            }
        }
        Load::Resistance(r_l) => {
            if !(r_l.is_finite() && r_l > 0.0) {
                return Err(NetworkError::Input(format!("load resistance is {r_l}")));
            }
            // all feeders open: the passive load has fully discharged the bus
            injected / (g_sum + 1.0 / r_l)
        }
    };

    let branch_currents: Vec<f64> = terminal_voltages
        .iter()
        .zip(feeders)
        .map(|(v, f)| {
            if f.connected {
                (v - v_pcc) / f.r_true
            } else {
                0.0
            }
        })
        .collect();
    let i_load = match load {
        Load::Current(i_l) => i_l,
        Load::Resistance(r_l) => v_pcc / r_l,
    };

    Ok(BusSolution {
        v_pcc,
        branch_currents,
        i_load,
    })
}

/// Ohmic drop across a feeder.
pub fn feeder_drop(current: f64, resistance: f64) -> f64 {
    current * resistance
}

/// Per-converter current when identical converters on identical feeders share a load.
pub fn equal_share(i_load: f64, n_connected: usize) -> Result<f64, NetworkError> {
    if n_connected == 0 {
        return Err(NetworkError::Domain(
            "cannot share a load among zero converters".into(),
        ));
    }
    Ok(i_load / n_connected as f64)
}
