//! Std side of the grid planner: map files, the chat-model transport, the
//! benchmark harness, the HTTP session service and the `plan` CLI plumbing.
//! The planning algorithms themselves live in `gridplan-core`.

pub mod bench;
pub mod console;
pub mod llm;
pub mod mapio;
pub mod service;
pub mod setup;
pub mod wire;

pub use gridplan_core as core;
