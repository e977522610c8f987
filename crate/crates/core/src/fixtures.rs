//! Bundled scenarios.

use crate::knowledge::{parse_scenario, Scenario};

pub const ROBOT_JSON: &str = include_str!("../fixtures/robot.json");

/// The box-and-table robot scenario.
pub fn robot() -> Scenario {
    parse_scenario(ROBOT_JSON).expect("bundled robot scenario is valid")
}
