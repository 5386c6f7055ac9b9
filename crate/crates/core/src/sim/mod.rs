//! Scripted headset simulator: synthetic sensors at headset rates, timed
//! user behavior, and interface-state replies to server commands.

mod client;
mod scenario;
pub mod sensors;
mod ui;

pub use client::{run_scenario, SessionReport, SimError, SimOptions};
pub use scenario::{Action, Keyframe, Scenario, ScenarioError, ScenarioEvent};
pub use sensors::SensorRig;
pub use ui::UiModel;

/// The bundled coffee-making scenario.
pub const COFFEE_SCENARIO: &str = include_str!("../../assets/scenarios/coffee.json");
