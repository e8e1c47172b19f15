//! Byte-stable session transcripts.
//!
//! A transcript is line-delimited JSON. The first line is a [`TranscriptHeader`]
//! carrying everything needed to rebuild the session (resource, set id,
//! simulator and engine settings) plus the opening phase and effects. Each
//! following line is a [`TranscriptLine`]. Replaying re-executes the inputs
//! and requires every line to reproduce byte for byte.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{SessionAction, SessionHost};
use crate::dsl::{resource_from_value, MediaRef, ProductResource};
use crate::engine::{Effect, Engine, EngineConfig, EngineError, Phase};
use crate::sim::SimConfig;

pub const TRANSCRIPT_FORMAT: &str = "csa-transcript/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EngineSettings {
    pub door_left_open_timeout_millis: u64,
    pub smoke_clip: MediaRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TranscriptHeader {
    pub format: String,
    pub set_id: String,
    pub resource: Value,
    pub sim: SimConfig,
    pub engine: EngineSettings,
    pub phase: Phase,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TranscriptLine {
    pub at_millis: u64,
    pub action: SessionAction,
    pub phase: Phase,
    pub effects: Vec<Effect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("transcript values always serialize")
}

/// Runs a session and writes its transcript lines as they happen.
pub struct Recorder {
    host: SessionHost,
    lines: Vec<String>,
}

impl Recorder {
    pub fn start(
        resource: &ProductResource,
        set_id: &str,
        engine: Engine,
        sim: SimConfig,
    ) -> Result<Self, RecordError> {
        let set = resource.set_by_id(set_id).ok_or_else(|| RecordError::UnknownSet(set_id.to_owned()))?;
        let settings = EngineSettings {
            door_left_open_timeout_millis: engine.config().door_left_open_timeout_millis,
            smoke_clip: engine.config().smoke_clip.clone(),
        };
        let host = SessionHost::start(Arc::new(set.clone()), engine, sim.clone())?;
        let header = TranscriptHeader {
            format: TRANSCRIPT_FORMAT.to_owned(),
            set_id: set_id.to_owned(),
            resource: serde_json::to_value(resource).expect("resources serialize"),
            sim,
            engine: settings,
            phase: host.phase(),
            effects: host.last_effects().to_vec(),
        };
        Ok(Recorder { lines: vec![to_line(&header)], host })
    }

    /// Applies `action` at `at_millis` and records the outcome; a refused action is recorded too.
    pub fn step(&mut self, at_millis: u64, action: &SessionAction) -> TranscriptLine {
        let (effects, outcome) = self.host.run_at(at_millis, action);
        let line = TranscriptLine {
            at_millis: self.host.clock_millis(),
            action: action.clone(),
            phase: self.host.phase(),
            effects,
            rejected: outcome.err().map(|e| e.0),
        };
        self.lines.push(to_line(&line));
        line
    }

    pub fn host(&self) -> &SessionHost {
        &self.host
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// The whole transcript, one JSON document per line, newline-terminated.
    pub fn text(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("resource has no instruction set `{0}`")]
    UnknownSet(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// The first line at which a replay disagreed with the transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// 1-based line number within the transcript.
    pub line: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {}: transcript diverges\n  recorded: {}\n  replayed: {}", .0.line, .0.expected, .0.actual)]
    Diverged(Divergence),
}

/// Re-executes a transcript and checks every line reproduces byte for byte.
/// An empty transcript replays trivially.
pub fn replay(text: &str) -> Result<usize, ReplayError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((header_no, header_text)) = lines.next() else {
        return Ok(0);
    };
    let malformed = |line: usize, message: String| ReplayError::Malformed { line: line + 1, message };
    let header: TranscriptHeader =
        serde_json::from_str(header_text).map_err(|e| malformed(header_no, e.to_string()))?;
    if header.format != TRANSCRIPT_FORMAT {
        return Err(malformed(header_no, format!("unsupported transcript format `{}`", header.format)));
    }
    let resource = resource_from_value(&header.resource).map_err(|e| malformed(header_no, e.to_string()))?;
    header.sim.validate().map_err(|e| malformed(header_no, e.to_string()))?;
    let engine = Engine::new(EngineConfig {
        door_left_open_timeout_millis: header.engine.door_left_open_timeout_millis,
        smoke_clip: header.engine.smoke_clip.clone(),
    });
    let mut recorder = Recorder::start(&resource, &header.set_id, engine, header.sim.clone())
        .map_err(|e| malformed(header_no, e.to_string()))?;
    check(header_no, header_text, &recorder.lines[0])?;

    let mut count = 1;
    for (no, text) in lines {
        let recorded: TranscriptLine = serde_json::from_str(text).map_err(|e| malformed(no, e.to_string()))?;
        recorder.step(recorded.at_millis, &recorded.action);
        check(no, text, recorder.lines.last().expect("a line was just recorded"))?;
        count += 1;
    }
    Ok(count)
}

fn check(no: usize, expected: &str, actual: &str) -> Result<(), ReplayError> {
    if expected.trim_end() == actual {
        Ok(())
    } else {
        Err(ReplayError::Diverged(Divergence {
            line: no + 1,
            expected: expected.trim_end().to_owned(),
            actual: actual.to_owned(),
        }))
    }
}
