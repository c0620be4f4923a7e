//! Averaged boost converter with cascaded voltage/current PI control, plus an
//! ideal first-order source used for fast studies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pi::{PiController, PiError, PiGains};

/// Upper duty-cycle clamp.
pub const DUTY_MAX: f64 = 0.98;
/// Outer-loop current reference limit as a multiple of rated current.
pub const CURRENT_REF_MARGIN: f64 = 1.6;
/// Inductor current limit as a multiple of rated current.
pub const INDUCTOR_CURRENT_MARGIN: f64 = 2.0;
/// Floor applied to the sensed output voltage before dividing by it.
const MIN_SENSED_VOLTAGE: f64 = 1.0;

pub const DEFAULT_CURRENT_GAINS: PiGains = PiGains::new(1.0, 500.0);
pub const DEFAULT_VOLTAGE_GAINS: PiGains = PiGains::new(7.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantModel {
    #[default]
    AveragedBoost,
    IdealSource,
}

impl PlantModel {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantModel::AveragedBoost => "averaged-boost",
            PlantModel::IdealSource => "ideal-source",
        }
    }
}

impl fmt::Display for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlantModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "averaged-boost" => Ok(PlantModel::AveragedBoost),
            "ideal-source" => Ok(PlantModel::IdealSource),
            other => Err(format!(
                "unknown plant model `{other}` (expected averaged-boost or ideal-source)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// Input source voltage (V).
    pub v_in: f64,
    /// Boost inductance (H).
    pub inductance: f64,
    /// Output capacitance (F).
    pub capacitance: f64,
    pub v_rated: f64,
    pub p_rated: f64,
    pub i_rated: f64,
    /// Switching frequency (Hz); the control loops run once per switching period.
    pub f_sw: f64,
    pub model: PlantModel,
    /// Time constant of the ideal-source lag (s).
    pub ideal_tau: f64,
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self {
            v_in: 250.0,
            inductance: 0.5e-3,
            capacitance: 15e-3,
            v_rated: 400.0,
            p_rated: 5000.0,
            i_rated: 12.5,
            f_sw: 5000.0,
            model: PlantModel::AveragedBoost,
            ideal_tau: 10e-3,
        }
    }
}

impl ConverterParams {
    pub fn control_period(&self) -> f64 {
        1.0 / self.f_sw
    }

    pub fn current_ref_limit(&self) -> f64 {
        CURRENT_REF_MARGIN * self.i_rated
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("v_in", self.v_in),
            ("inductance", self.inductance),
            ("capacitance", self.capacitance),
            ("v_rated", self.v_rated),
            ("p_rated", self.p_rated),
            ("i_rated", self.i_rated),
            ("f_sw", self.f_sw),
            ("ideal_tau", self.ideal_tau),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(format!("{name} must be > 0 (got {value})"));
            }
        }
        if self.model == PlantModel::AveragedBoost && self.v_rated <= self.v_in {
            return Err(format!(
                "boost topology needs v_rated > v_in (got v_rated = {}, v_in = {})",
                self.v_rated, self.v_in
            ));
        }
        Ok(())
    }
}

/// Dynamic state of one converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterState {
    /// Inductor current (A). For the ideal source this is a proxy derived from output current.
    pub i_ind: f64,
    /// Terminal (output capacitor) voltage (V).
    pub v_out: f64,
    pub duty: f64,
    /// Voltage reference latched at the last control update.
    pub v_ref: f64,
    pub enabled: bool,
}

impl ConverterState {
    /// Output capacitor charged to `v_out`, inductor de-energized.
    pub fn precharged(params: &ConverterParams, v_out: f64) -> Self {
        Self {
            i_ind: 0.0,
            v_out,
            duty: steady_duty(params, v_out),
            v_ref: v_out,
            enabled: true,
        }
    }

    /// Disconnects the converter: no inductor current, zero duty.
    pub fn trip(&mut self) {
        self.enabled = false;
        self.i_ind = 0.0;
        self.duty = 0.0;
    }
}

/// Voltage and current loops of one converter.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryLoops {
    pub voltage: PiController,
    pub current: PiController,
}

impl PrimaryLoops {
    pub fn new(params: &ConverterParams, voltage: PiGains, current: PiGains) -> Self {
        let limit = params.current_ref_limit();
        Self {
            voltage: PiController::symmetric(voltage, limit),
            // retuned from the sensed output voltage at every update
            current: PiController::new(current, params.v_in - params.v_rated, params.v_in),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub duty: f64,
    /// Output-side current reference from the voltage loop (A).
    pub i_ref: f64,
}

fn sensed(v_out: f64) -> f64 {
    v_out.max(MIN_SENSED_VOLTAGE)
}

/// Duty that holds the averaged inductor current constant at output voltage `v_out`.
pub fn steady_duty(params: &ConverterParams, v_out: f64) -> f64 {
    (1.0 - params.v_in / sensed(v_out)).clamp(0.0, DUTY_MAX)
}

/// One update of the cascaded primary control.
///
/// The voltage loop produces an output-side current reference, limited to
/// ±1.6·i_rated, which is referred to the inductor by power balance. The
/// current loop produces an inductor-voltage command `u` that is turned into a
/// duty cycle through the averaged model, `d = 1 − (v_in − u) / v_out`. The
/// current-loop limits are set so that its saturation coincides with the duty
/// clamp `[0, 0.98]`.
///
/// A disabled converter returns zero duty and leaves both integrators untouched.
/// The ideal-source model only latches the reference.
pub fn control_step(
    state: &mut ConverterState,
    params: &ConverterParams,
    loops: &mut PrimaryLoops,
    v_ref: f64,
    dt: f64,
) -> Result<ControlOutput, PiError> {
    if !state.enabled {
        state.duty = 0.0;
        return Ok(ControlOutput {
            duty: 0.0,
            i_ref: 0.0,
        });
    }
    state.v_ref = v_ref;
    match params.model {
        PlantModel::IdealSource => {
            state.duty = steady_duty(params, state.v_out);
            Ok(ControlOutput {
                duty: state.duty,
                i_ref: 0.0,
            })
        }
        PlantModel::AveragedBoost => {
            let i_ref = loops.voltage.step(v_ref - state.v_out, dt)?;
            let v_o = sensed(state.v_out);
            let i_lim = INDUCTOR_CURRENT_MARGIN * params.i_rated;
            let i_ind_ref = (i_ref * v_o / params.v_in).clamp(-i_lim, i_lim);
            loops
                .current
                .set_limits(params.v_in - v_o, params.v_in - (1.0 - DUTY_MAX) * v_o);
            let u = loops.current.step(i_ind_ref - state.i_ind, dt)?;
            state.duty = (1.0 - (params.v_in - u) / v_o).clamp(0.0, DUTY_MAX);
            Ok(ControlOutput {
                duty: state.duty,
                i_ref,
            })
        }
    }
}

/// Time derivatives `(di_ind/dt, dv_out/dt)` for output current `i_out`.
pub fn derivatives(state: &ConverterState, params: &ConverterParams, i_out: f64) -> (f64, f64) {
    if !state.enabled {
        return (0.0, -i_out / params.capacitance);
    }
    match params.model {
        PlantModel::AveragedBoost => {
            let m = 1.0 - state.duty;
            (
                (params.v_in - m * state.v_out) / params.inductance,
                (m * state.i_ind - i_out) / params.capacitance,
            )
        }
        PlantModel::IdealSource => (0.0, (state.v_ref - state.v_out) / params.ideal_tau),
    }
}

/// Applies the state clamps after integration.
pub(crate) fn finish_step(state: &mut ConverterState, params: &ConverterParams, i_out: f64) {
    if !state.enabled {
        state.i_ind = 0.0;
        state.duty = 0.0;
    } else {
        match params.model {
            PlantModel::AveragedBoost => {
                let lim = INDUCTOR_CURRENT_MARGIN * params.i_rated;
                state.i_ind = state.i_ind.clamp(-lim, lim);
            }
            PlantModel::IdealSource => {
                state.i_ind = i_out / (1.0 - state.duty);
            }
        }
    }
    state.v_out = state.v_out.max(0.0);
}

/// Advances one isolated converter by `dt` with its output current held at `i_out`
/// (classic fourth-order Runge–Kutta).
pub fn plant_step(
    state: &ConverterState,
    params: &ConverterParams,
    i_out: f64,
    dt: f64,
) -> ConverterState {
    debug_assert!((0.0..=DUTY_MAX).contains(&state.duty));
    let at = |di: f64, dv: f64, h: f64| ConverterState {
        i_ind: state.i_ind + h * di,
        v_out: state.v_out + h * dv,
        ..*state
    };
    let k1 = derivatives(state, params, i_out);
    let k2 = derivatives(&at(k1.0, k1.1, dt / 2.0), params, i_out);
    let k3 = derivatives(&at(k2.0, k2.1, dt / 2.0), params, i_out);
    let k4 = derivatives(&at(k3.0, k3.1, dt), params, i_out);
    let mut next = *state;
    next.i_ind += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    next.v_out += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    finish_step(&mut next, params, i_out);
    next
}
