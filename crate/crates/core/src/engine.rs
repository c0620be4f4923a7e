//! Fixed-step simulation loop.
//!
//! Every plant step of length `plant_dt` runs, in order:
//! 1. schedule events due at this step (mode switches, load steps, trips),
//! 2. network solve for the current terminal voltages,
//! 3. secondary sample and link delivery on link-period boundaries,
//! 4. reference selection for the active mode and primary control on
//!    control-period boundaries,
//! 5. recording on decimation boundaries,
//! 6. one RK4 step of all converters, with the network re-solved at each stage.
//!
//! Event times are quantized to the first step at or after them, so no event
//! is lost whatever the step size.

use thiserror::Error;

use crate::control::{
    decentralized_reference, CommLink, ControlMode, ControlSchedule, LossPolicy,
    SecondaryController, DEFAULT_CORRECTION_FRACTION, DEFAULT_SECONDARY_GAINS,
};
use crate::converter::{
    control_step, derivatives, finish_step, ConverterParams, ConverterState, PlantModel,
    PrimaryLoops, DEFAULT_CURRENT_GAINS, DEFAULT_VOLTAGE_GAINS,
};
use crate::metrics::Window;
use crate::network::{solve_bus, FeederLine, Load, LoadProfile};
use crate::pi::PiGains;

pub const DEFAULT_V_DC_NOMINAL: f64 = 400.0;
pub const DEFAULT_PLANT_DT: f64 = 20e-6;
pub const DEFAULT_LINK_PERIOD: f64 = 1e-3;
pub const DEFAULT_DECIMATE: f64 = 1e-3;

/// Relative slack when checking that one period is a whole multiple of another.
const RATIO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("simulation aborted at t = {t} s: {reason}")]
    Abort { t: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterSpec {
    pub params: ConverterParams,
    pub voltage_gains: PiGains,
    pub current_gains: PiGains,
}

impl Default for ConverterSpec {
    fn default() -> Self {
        Self {
            params: ConverterParams::default(),
            voltage_gains: DEFAULT_VOLTAGE_GAINS,
            current_gains: DEFAULT_CURRENT_GAINS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondarySpec {
    pub gains: PiGains,
    /// Correction clamp in volts.
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub period: f64,
    pub delay: usize,
    pub on_loss: LossPolicy,
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self {
            period: DEFAULT_LINK_PERIOD,
            delay: 0,
            on_loss: LossPolicy::Hold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub v_dc_nominal: f64,
    pub converters: Vec<ConverterSpec>,
    pub feeders: Vec<FeederLine>,
    pub load: LoadProfile,
    pub schedule: ControlSchedule,
    pub secondary: SecondarySpec,
    pub link: LinkSpec,
    pub duration: f64,
    pub plant_dt: f64,
    pub control_period: f64,
    /// Recording interval in seconds.
    pub decimate: f64,
    /// Analysis windows reported by the CLI summary.
    pub windows: Vec<Window>,
}

impl Scenario {
    /// `n` default converters on 0.4 Ω feeders, no events, one mode.
    pub fn uniform(n: usize, load: LoadProfile, mode: ControlMode, duration: f64) -> Self {
        let spec = ConverterSpec::default();
        Self {
            name: "uniform".into(),
            v_dc_nominal: DEFAULT_V_DC_NOMINAL,
            converters: vec![spec; n],
            feeders: vec![FeederLine::new(0.4); n],
            load,
            schedule: ControlSchedule::single_mode(mode),
            secondary: SecondarySpec {
                gains: DEFAULT_SECONDARY_GAINS,
                limit: DEFAULT_CORRECTION_FRACTION * DEFAULT_V_DC_NOMINAL,
            },
            link: LinkSpec::default(),
            duration,
            plant_dt: DEFAULT_PLANT_DT,
            control_period: spec.params.control_period(),
            decimate: DEFAULT_DECIMATE,
            windows: Vec::new(),
        }
    }

    pub fn with_model(mut self, model: PlantModel) -> Self {
        for c in &mut self.converters {
            c.params.model = model;
        }
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_dc_nominal.is_finite() && self.v_dc_nominal > 0.0) {
            return Err(format!(
                "v_dc_nominal must be > 0 (got {})",
                self.v_dc_nominal
            ));
        }
        if self.converters.is_empty() {
            return Err("at least one converter is required".into());
        }
        if self.converters.len() != self.feeders.len() {
            return Err(format!(
                "{} converters but {} feeders; each converter needs exactly one feeder",
                self.converters.len(),
                self.feeders.len()
            ));
        }
        for (i, c) in self.converters.iter().enumerate() {
            c.params
                .validate()
                .map_err(|e| format!("converter.{}: {e}", i + 1))?;
            for (name, g) in [
                ("voltage_pi", c.voltage_gains),
                ("current_pi", c.current_gains),
            ] {
                if !(g.kp.is_finite() && g.ki.is_finite() && g.kp >= 0.0 && g.ki >= 0.0) {
                    return Err(format!(
                        "converter.{}.{name}: gains must be finite and >= 0",
                        i + 1
                    ));
                }
            }
        }
        for (i, f) in self.feeders.iter().enumerate() {
            f.validate().map_err(|e| format!("feeder.{}: {e}", i + 1))?;
        }
        self.load.validate().map_err(|e| format!("load: {e}"))?;
        self.schedule
            .validate()
            .map_err(|e| format!("schedule: {e}"))?;
        for &(t, idx) in &self.schedule.trips {
            if idx >= self.converters.len() {
                return Err(format!(
                    "schedule: trip at t = {t} names converter {} but only {} exist",
                    idx + 1,
                    self.converters.len()
                ));
            }
        }
        let s = self.secondary;
        if !(s.gains.kp.is_finite()
            && s.gains.ki.is_finite()
            && s.gains.kp >= 0.0
            && s.gains.ki >= 0.0)
        {
            return Err("secondary: gains must be finite and >= 0".into());
        }
        if !(s.limit.is_finite() && s.limit > 0.0) {
            return Err(format!(
                "secondary: correction limit must be > 0 (got {})",
                s.limit
            ));
        }
        for (name, v) in [
            ("duration", self.duration),
            ("plant_dt", self.plant_dt),
            ("control_period", self.control_period),
            ("link_period", self.link.period),
            ("decimate", self.decimate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("engine: {name} must be > 0 (got {v})"));
            }
        }
        whole_multiple(
            "control_period",
            self.control_period,
            "plant_dt",
            self.plant_dt,
        )?;
        whole_multiple(
            "link_period",
            self.link.period,
            "control_period",
            self.control_period,
        )?;
        whole_multiple("decimate", self.decimate, "plant_dt", self.plant_dt)?;
        whole_multiple("duration", self.duration, "plant_dt", self.plant_dt)?;
        let last = self
            .schedule
            .last_event_time()
            .max(self.load.steps.last().map_or(0.0, |s| s.0));
        if last > self.duration {
            return Err(format!(
                "engine: duration {} ends before the last scheduled event at {last}",
                self.duration
            ));
        }
        for w in &self.windows {
            if !(w.start >= 0.0 && w.end <= self.duration && w.start < w.end) {
                return Err(format!(
                    "windows: [{}, {}] must lie inside [0, {}]",
                    w.start, w.end, self.duration
                ));
            }
        }
        Ok(())
    }
}

fn whole_multiple(big_name: &str, big: f64, small_name: &str, small: f64) -> Result<usize, String> {
    let ratio = big / small;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > RATIO_TOL * n {
        return Err(format!(
            "engine: {small_name} ({small}) must divide {big_name} ({big})"
        ));
    }
    Ok(n as usize)
}

/// Per-converter columns of one recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterSample {
    /// Reference latched at the last control update (V).
    pub v_ref: f64,
    pub v_term: f64,
    pub i_branch: f64,
    pub p_term: f64,
    /// Local feeder-drop compensation added to the reference (V).
    pub comp: f64,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub v_pcc: f64,
    pub i_load: f64,
    pub p_load: f64,
    pub mode: ControlMode,
    pub converters: Vec<ConverterSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub v_dc_nominal: f64,
    pub n_converters: usize,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Mode(ControlMode),
    Load(f64),
    Trip(usize),
}

/// First plant step at or after `t`.
fn step_of(t: f64, dt: f64) -> usize {
    let x = t / dt;
    let r = x.round();
    // absorb representation error of exact multiples
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

struct Unit {
    spec: ConverterSpec,
    state: ConverterState,
    loops: PrimaryLoops,
    comp: f64,
}

fn solve(
    units: &[Unit],
    feeders: &[FeederLine],
    load: Load,
    t: f64,
) -> Result<crate::network::BusSolution, SimError> {
    let v: Vec<f64> = units.iter().map(|u| u.state.v_out).collect();
    solve_bus(&v, feeders, load).map_err(|e| SimError::Abort {
        t,
        reason: e.to_string(),
    })
}

fn stage(base: &[ConverterState], slope: &[(f64, f64)], h: f64) -> Vec<ConverterState> {
    base.iter()
        .zip(slope)
        .map(|(s, k)| ConverterState {
            i_ind: s.i_ind + h * k.0,
            v_out: s.v_out + h * k.1,
            ..*s
        })
        .collect()
}

fn slopes(
    units: &[Unit],
    states: &[ConverterState],
    feeders: &[FeederLine],
    load: Load,
    t: f64,
) -> Result<Vec<(f64, f64)>, SimError> {
    let v: Vec<f64> = states.iter().map(|s| s.v_out).collect();
    let bus = solve_bus(&v, feeders, load).map_err(|e| SimError::Abort {
        t,
        reason: e.to_string(),
    })?;
    Ok(units
        .iter()
        .zip(states)
        .zip(&bus.branch_currents)
        .map(|((u, s), &i_out)| derivatives(s, &u.spec.params, i_out))
        .collect())
}

/// Runs a scenario to completion. Identical scenarios give bit-identical output.
pub fn run_scenario(scenario: &Scenario) -> Result<TimeSeries, SimError> {
    scenario.validate().map_err(SimError::Invalid)?;
    let h = scenario.plant_dt;
    let n_steps = step_of(scenario.duration, h);
    let ctrl_every = whole_multiple("control_period", scenario.control_period, "plant_dt", h)
        .map_err(SimError::Invalid)?;
    let link_every = whole_multiple("link_period", scenario.link.period, "plant_dt", h)
        .map_err(SimError::Invalid)?;
    let rec_every =
        whole_multiple("decimate", scenario.decimate, "plant_dt", h).map_err(SimError::Invalid)?;
    let v_nom = scenario.v_dc_nominal;

    let mut events: Vec<(usize, usize, Event)> = Vec::new();
    for (seq, &(t, m)) in scenario.schedule.modes.iter().enumerate() {
        events.push((step_of(t, h), seq, Event::Mode(m)));
    }
    for (seq, &(t, v)) in scenario.load.steps.iter().enumerate() {
        events.push((step_of(t, h), seq, Event::Load(v)));
    }
    for (seq, &(t, idx)) in scenario.schedule.trips.iter().enumerate() {
        events.push((step_of(t, h), seq, Event::Trip(idx)));
    }
    events.sort_by_key(|&(k, seq, e)| {
        let class = match e {
            Event::Mode(_) => 0,
            Event::Load(_) => 1,
            Event::Trip(_) => 2,
        };
        (k, class, seq)
    });
    let mut pending = events.into_iter().peekable();

    let link_events = scenario
        .schedule
        .link
        .iter()
        .map(|&(t, s)| (step_of(t, h) as f64 * h, s))
        .collect();
    let mut link = CommLink::new(
        scenario.link.period,
        scenario.link.delay,
        scenario.link.on_loss,
    )
    .with_events(link_events);
    let mut secondary =
        SecondaryController::new(scenario.secondary.gains, v_nom, scenario.secondary.limit);

    let mut feeders = scenario.feeders.clone();
    let mut units: Vec<Unit> = scenario
        .converters
        .iter()
        .map(|spec| Unit {
            spec: *spec,
            state: ConverterState::precharged(&spec.params, v_nom),
            loops: PrimaryLoops::new(&spec.params, spec.voltage_gains, spec.current_gains),
            comp: 0.0,
        })
        .collect();

    let mut mode: Option<ControlMode> = None;
    let mut load_value = scenario.load.steps[0].1;
    let mut correction = 0.0;
    let mut samples = Vec::with_capacity(n_steps / rec_every + 1);

    for k in 0..=n_steps {
        let t = k as f64 * h;

        while let Some(&(_, _, e)) = pending.peek().filter(|(ke, _, _)| *ke == k) {
            pending.next();
            match e {
                Event::Mode(m) => {
                    if mode != Some(m) {
                        // the primary loops carry over; the secondary starts clean
                        secondary.reset();
                        link.reset();
                        correction = 0.0;
                        if m == ControlMode::Centralized {
                            secondary.enable();
                        } else {
                            secondary.disable();
                        }
                        mode = Some(m);
                    }
                }
                Event::Load(v) => load_value = v,
                Event::Trip(i) => {
                    units[i].state.trip();
                    units[i].comp = 0.0;
                    feeders[i].connected = false;
                }
            }
        }
        let mode = mode.ok_or_else(|| SimError::Invalid("no control mode at t = 0".into()))?;
        let load = scenario.load.load_for(load_value);

        let bus = solve(&units, &feeders, load, t)?;
        for (u, &i_out) in units.iter_mut().zip(&bus.branch_currents) {
            finish_step(&mut u.state, &u.spec.params, i_out);
        }

        if mode == ControlMode::Centralized && k % link_every == 0 {
            let c = secondary
                .update(bus.v_pcc, scenario.link.period)
                .map_err(|e| SimError::Abort {
                    t,
                    reason: e.to_string(),
                })?;
            correction = link.transmit(c, t);
        }

        if k % ctrl_every == 0 {
            for (i, u) in units.iter_mut().enumerate() {
                if !u.state.enabled {
                    u.comp = 0.0;
                    continue;
                }
                let (v_ref, comp) = match mode {
                    ControlMode::Centralized => (v_nom + correction, 0.0),
                    ControlMode::None => (v_nom, 0.0),
                    ControlMode::Decentralized => {
                        let v = decentralized_reference(
                            v_nom,
                            bus.branch_currents[i],
                            feeders[i].r_est,
                        );
                        (v, v - v_nom)
                    }
                };
                u.comp = comp;
                control_step(
                    &mut u.state,
                    &u.spec.params,
                    &mut u.loops,
                    v_ref,
                    scenario.control_period,
                )
                .map_err(|e| SimError::Abort {
                    t,
                    reason: format!("converter {}: {e}", i + 1),
                })?;
            }
        }

        if k % rec_every == 0 {
            samples.push(Sample {
                t,
                v_pcc: bus.v_pcc,
                i_load: bus.i_load,
                p_load: bus.v_pcc * bus.i_load,
                mode,
                converters: units
                    .iter()
                    .zip(&bus.branch_currents)
                    .zip(&feeders)
                    .map(|((u, &i), f)| ConverterSample {
                        v_ref: u.state.v_ref,
                        v_term: u.state.v_out,
                        i_branch: i,
                        p_term: u.state.v_out * i,
                        comp: u.comp,
                        connected: f.connected,
                    })
                    .collect(),
            });
        }

        if k == n_steps {
            break;
        }

        let x0: Vec<ConverterState> = units.iter().map(|u| u.state).collect();
        let k1 = slopes(&units, &x0, &feeders, load, t)?;
        let k2 = slopes(&units, &stage(&x0, &k1, h / 2.0), &feeders, load, t)?;
        let k3 = slopes(&units, &stage(&x0, &k2, h / 2.0), &feeders, load, t)?;
        let k4 = slopes(&units, &stage(&x0, &k3, h), &feeders, load, t)?;
        for (i, u) in units.iter_mut().enumerate() {
            u.state.i_ind += h / 6.0 * (k1[i].0 + 2.0 * k2[i].0 + 2.0 * k3[i].0 + k4[i].0);
            u.state.v_out += h / 6.0 * (k1[i].1 + 2.0 * k2[i].1 + 2.0 * k3[i].1 + k4[i].1);
            if !(u.state.i_ind.is_finite() && u.state.v_out.is_finite()) {
                return Err(SimError::Abort {
                    t: t + h,
                    reason: format!("converter {} state diverged", i + 1),
                });
            }
        }
    }

    Ok(TimeSeries {
        v_dc_nominal: v_nom,
        n_converters: scenario.converters.len(),
        samples,
    })
}
