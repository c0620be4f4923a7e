//! Bundled reference scenarios and their expectation tables.

use crate::engine::Scenario;
use crate::expect::ExpectationTable;
use crate::scenario::parse_scenario;

pub const FIG3_TOML: &str = include_str!("../scenarios/fig3.toml");
pub const FIG3_EXPECT: &str = include_str!("../scenarios/fig3.expect.csv");
pub const HIL_TOML: &str = include_str!("../scenarios/hil.toml");
pub const HIL_EXPECT: &str = include_str!("../scenarios/hil.expect.csv");

/// Three converters through centralized, no, and decentralized restoration.
pub fn fig3() -> Scenario {
    parse_scenario(FIG3_TOML).expect("bundled fig3 scenario is valid")
}

pub fn fig3_expectations() -> ExpectationTable {
    ExpectationTable::parse(FIG3_EXPECT).expect("bundled fig3 expectations are valid")
}

/// Two converters with a link outage, then decentralized restoration.
pub fn hil() -> Scenario {
    parse_scenario(HIL_TOML).expect("bundled hil scenario is valid")
}

pub fn hil_expectations() -> ExpectationTable {
    ExpectationTable::parse(HIL_EXPECT).expect("bundled hil expectations are valid")
}
