//! Deterministic simulation of islanded DC microgrids.
//!
//! `n` boost converters feed one common bus through resistive feeders. The
//! bus voltage can be left alone, restored by a centralized secondary loop
//! that talks to the converters over a failable link, or restored locally by
//! each converter adding its own feeder drop to its voltage reference.

// `!(a < b)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod converter;
pub mod engine;
pub mod expect;
pub mod golden;
pub mod metrics;
pub mod network;
pub mod pi;
pub mod scenario;
pub mod series_csv;

pub use control::{
    decentralized_reference, CommLink, ControlMode, ControlSchedule, LinkState, LossPolicy,
    SecondaryController,
};
pub use converter::{control_step, plant_step, ConverterParams, ConverterState, PlantModel};
pub use engine::{run_scenario, Scenario, SimError, TimeSeries};
pub use expect::{ExpectationTable, Quantity};
pub use metrics::{compute_metrics, Metrics, Window, WindowMetrics};
pub use network::{
    equal_share, feeder_drop, solve_bus, BusSolution, FeederLine, Load, LoadKind, LoadProfile,
};
pub use pi::{PiController, PiGains};
pub use scenario::{load_scenario, parse_scenario, to_toml, ScenarioError};
