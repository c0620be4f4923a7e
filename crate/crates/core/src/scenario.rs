//! Scenario files.
//!
//! A scenario is one TOML document:
//!
//! ```toml
//! name = "example"
//! v_dc_nominal = 400.0                 # optional
//! windows = [[0.2, 0.5]]               # optional analysis windows
//!
//! [engine]
//! duration = 1.0
//! plant_dt = 2e-5                      # optional
//! control_period = 2e-4                # optional, defaults to 1 / f_sw
//! decimate = 1e-3                      # optional
//! model = "averaged-boost"             # optional default for every converter
//!
//! [link]                               # optional
//! period = 1e-3
//! delay = 0
//! on_loss = "hold"                     # or "zero"
//!
//! [secondary]                          # optional
//! kp = 1.5
//! ki = 150.0
//! limit = 40.0
//!
//! [converter.1]                        # every key optional
//! v_in = 250.0
//! voltage_pi = { kp = 7.0, ki = 100.0 }
//! current_pi = { kp = 1.0, ki = 500.0 }
//!
//! [feeder.1]
//! r = 0.4
//! r_est = 0.4                          # optional, defaults to r
//!
//! [load]
//! kind = "constant-current"            # or "constant-resistance"
//! steps = [[0.0, 30.0], [0.5, 15.0]]
//!
//! [schedule]
//! modes = [[0.0, "centralized"], [1.0, "none"]]
//! trips = [[0.8, 1]]                   # converter numbers are 1-based
//! link = [[0.6, "down"], [0.7, "up"]]
//! ```
//!
//! Unknown keys are rejected. Omitted converter and controller parameters take
//! the library defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    ControlMode, ControlSchedule, LinkState, LossPolicy, DEFAULT_CORRECTION_FRACTION,
    DEFAULT_SECONDARY_GAINS,
};
use crate::converter::{ConverterParams, PlantModel, DEFAULT_CURRENT_GAINS, DEFAULT_VOLTAGE_GAINS};
use crate::engine::{
    ConverterSpec, LinkSpec, Scenario, SecondarySpec, DEFAULT_DECIMATE, DEFAULT_LINK_PERIOD,
    DEFAULT_PLANT_DT, DEFAULT_V_DC_NOMINAL,
};
use crate::metrics::Window;
use crate::network::{FeederLine, LoadKind, LoadProfile};
use crate::pi::PiGains;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_dc_nominal: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    windows: Vec<(f64, f64)>,
    engine: EngineFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<LinkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    secondary: Option<SecondaryFile>,
    #[serde(default)]
    converter: BTreeMap<String, ConverterFile>,
    #[serde(default)]
    feeder: BTreeMap<String, FeederFile>,
    load: LoadFile,
    schedule: ScheduleFile,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineFile {
    duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plant_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control_period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<PlantModel>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    on_loss: Option<LossPolicy>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecondaryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ki: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limit: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConverterFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inductance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacitance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_rated: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_rated: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i_rated: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_sw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<PlantModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ideal_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voltage_pi: Option<PiGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    current_pi: Option<PiGains>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeederFile {
    r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_est: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    kind: LoadKind,
    steps: Vec<(f64, f64)>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    modes: Vec<(f64, ControlMode)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    trips: Vec<(f64, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    link: Vec<(f64, LinkState)>,
}

/// Parses numbered sections `[name.1]`, `[name.2]`, ... into a dense list.
fn numbered<T>(section: &str, map: BTreeMap<String, T>) -> Result<Vec<T>, ScenarioError> {
    let mut items: Vec<(usize, T)> = Vec::with_capacity(map.len());
    for (key, value) in map {
        let idx: usize = key.parse().map_err(|_| {
            ScenarioError::Validation(format!(
                "{section}.{key}: section number must be a positive integer"
            ))
        })?;
        items.push((idx, value));
    }
    items.sort_by_key(|(i, _)| *i);
    for (expected, (idx, _)) in (1..).zip(&items) {
        if *idx != expected {
            return Err(ScenarioError::Validation(format!(
                "{section}.{expected}: missing section ({section} numbers must run 1..n without gaps)"
            )));
        }
    }
    Ok(items.into_iter().map(|(_, v)| v).collect())
}

fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let base = ConverterParams::default();
    let default_model = file.engine.model.unwrap_or(base.model);
    let converters: Vec<ConverterSpec> = numbered("converter", file.converter)?
        .into_iter()
        .map(|c| ConverterSpec {
            params: ConverterParams {
                v_in: c.v_in.unwrap_or(base.v_in),
                inductance: c.inductance.unwrap_or(base.inductance),
                capacitance: c.capacitance.unwrap_or(base.capacitance),
                v_rated: c.v_rated.unwrap_or(base.v_rated),
                p_rated: c.p_rated.unwrap_or(base.p_rated),
                i_rated: c.i_rated.unwrap_or(base.i_rated),
                f_sw: c.f_sw.unwrap_or(base.f_sw),
                model: c.model.unwrap_or(default_model),
                ideal_tau: c.ideal_tau.unwrap_or(base.ideal_tau),
            },
            voltage_gains: c.voltage_pi.unwrap_or(DEFAULT_VOLTAGE_GAINS),
            current_gains: c.current_pi.unwrap_or(DEFAULT_CURRENT_GAINS),
        })
        .collect();
    let feeders: Vec<FeederLine> = numbered("feeder", file.feeder)?
        .into_iter()
        .map(|f| FeederLine {
            r_true: f.r,
            r_est: f.r_est.unwrap_or(f.r),
            connected: true,
        })
        .collect();

    let mut trips = Vec::with_capacity(file.schedule.trips.len());
    for (t, number) in file.schedule.trips {
        if number == 0 {
            return Err(ScenarioError::Validation(format!(
                "schedule: trip at t = {t} names converter 0; converters are numbered from 1"
            )));
        }
        trips.push((t, number - 1));
    }

    let v_dc_nominal = file.v_dc_nominal.unwrap_or(DEFAULT_V_DC_NOMINAL);
    let secondary = file.secondary.unwrap_or_default();
    let link = file.link.unwrap_or_default();
    let control_period = file.engine.control_period.unwrap_or_else(|| {
        converters
            .first()
            .map_or(base.control_period(), |c| c.params.control_period())
    });

    let scenario = Scenario {
        name: file.name.unwrap_or_else(|| "unnamed".into()),
        v_dc_nominal,
        converters,
        feeders,
        load: LoadProfile {
            kind: file.load.kind,
            steps: file.load.steps,
        },
        schedule: ControlSchedule {
            modes: file.schedule.modes,
            trips,
            link: file.schedule.link,
        },
        secondary: SecondarySpec {
            gains: PiGains::new(
                secondary.kp.unwrap_or(DEFAULT_SECONDARY_GAINS.kp),
                secondary.ki.unwrap_or(DEFAULT_SECONDARY_GAINS.ki),
            ),
            limit: secondary
                .limit
                .unwrap_or(DEFAULT_CORRECTION_FRACTION * v_dc_nominal),
        },
        link: LinkSpec {
            period: link.period.unwrap_or(DEFAULT_LINK_PERIOD),
            delay: link.delay.unwrap_or(0),
            on_loss: link.on_loss.unwrap_or_default(),
        },
        duration: file.engine.duration,
        plant_dt: file.engine.plant_dt.unwrap_or(DEFAULT_PLANT_DT),
        control_period,
        decimate: file.engine.decimate.unwrap_or(DEFAULT_DECIMATE),
        windows: file
            .windows
            .into_iter()
            .map(|(a, b)| Window::new(a, b))
            .collect(),
    };
    scenario.validate().map_err(ScenarioError::Validation)?;
    Ok(scenario)
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)
        .map_err(|e| ScenarioError::Parse(e.to_string().trim_end().to_string()))?;
    from_file(file)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Writes every field explicitly, so the document does not depend on defaults.
pub fn to_toml(scenario: &Scenario) -> String {
    let file = ScenarioFile {
        name: Some(scenario.name.clone()),
        v_dc_nominal: Some(scenario.v_dc_nominal),
        windows: scenario.windows.iter().map(|w| (w.start, w.end)).collect(),
        engine: EngineFile {
            duration: scenario.duration,
            plant_dt: Some(scenario.plant_dt),
            control_period: Some(scenario.control_period),
            decimate: Some(scenario.decimate),
            model: None,
        },
        link: Some(LinkFile {
            period: Some(scenario.link.period),
            delay: Some(scenario.link.delay),
            on_loss: Some(scenario.link.on_loss),
        }),
        secondary: Some(SecondaryFile {
            kp: Some(scenario.secondary.gains.kp),
            ki: Some(scenario.secondary.gains.ki),
            limit: Some(scenario.secondary.limit),
        }),
        converter: scenario
            .converters
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let p = c.params;
                (
                    (i + 1).to_string(),
                    ConverterFile {
                        v_in: Some(p.v_in),
                        inductance: Some(p.inductance),
                        capacitance: Some(p.capacitance),
                        v_rated: Some(p.v_rated),
                        p_rated: Some(p.p_rated),
                        i_rated: Some(p.i_rated),
                        f_sw: Some(p.f_sw),
                        model: Some(p.model),
                        ideal_tau: Some(p.ideal_tau),
                        voltage_pi: Some(c.voltage_gains),
                        current_pi: Some(c.current_gains),
                    },
                )
            })
            .collect(),
        feeder: scenario
            .feeders
            .iter()
            .enumerate()
            .map(|(i, f)| {
                (
                    (i + 1).to_string(),
                    FeederFile {
                        r: f.r_true,
                        r_est: Some(f.r_est),
                    },
                )
            })
            .collect(),
        load: LoadFile {
            kind: scenario.load.kind,
            steps: scenario.load.steps.clone(),
        },
        schedule: ScheduleFile {
            modes: scenario.schedule.modes.clone(),
            trips: scenario
                .schedule
                .trips
                .iter()
                .map(|&(t, i)| (t, i + 1))
                .collect(),
            link: scenario.schedule.link.clone(),
        },
    };
    toml::to_string(&file).expect("scenario serializes to TOML")
}
