//! Community-authored cooking instructions for an assistive microwave.
//!
//! * [`dsl`] parses, lints and canonically serializes product resources.
//! * [`engine`] runs one instruction set as an interlocked state machine.
//! * [`sim`] is a deterministic microwave with a lumped thermal model.
//! * [`host`] couples engine and simulator into a session and records transcripts.
//! * [`service`] is the HTTP repository and session server.

pub mod dsl;
pub mod engine;
pub mod host;
pub mod service;
pub mod sim;
