//! Record-and-replay pipeline for mixed-reality task guidance: framed sensor
//! streams from a headset, append-only stream storage with deterministic
//! replay, RGB-D object localization, a dialog state machine driving the
//! headset interface, and pluggable speech/LLM/detection services.

pub mod controller;
pub mod geometry;
pub mod runtime;
pub mod services;
pub mod sim;
pub mod store;
pub mod task;
pub mod wire;
