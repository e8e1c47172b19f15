use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SessionAction;
use crate::dsl::{CookingInstructionSet, Instruction, TransitionSpec};

/// One line of an action script: apply `action` once the clock reaches `at_millis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScriptLine {
    pub at_millis: u64,
    pub action: SessionAction,
}

impl ScriptLine {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("script lines always serialize")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: time {at_millis} ms is earlier than the previous line")]
    TimeWentBackwards { line: usize, at_millis: u64 },
}

/// Parses a line-delimited script. Blank lines are skipped; line numbers are 1-based.
pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>, ScriptError> {
    let mut lines = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: ScriptLine =
            serde_json::from_str(raw).map_err(|e| ScriptError::Malformed { line: i + 1, message: e.to_string() })?;
        if line.at_millis < last {
            return Err(ScriptError::TimeWentBackwards { line: i + 1, at_millis: line.at_millis });
        }
        last = line.at_millis;
        lines.push(line);
    }
    Ok(lines)
}

pub const DEFAULT_LOAD_GRAMS: u32 = 400;
pub const DEFAULT_LOAD_TEMP_C: f64 = 5.0;

/// Physical bookkeeping while deriving a script.
struct Walker {
    t: u64,
    door_open: bool,
    load: u32,
    out: Vec<ScriptLine>,
}

impl Walker {
    fn push(&mut self, action: SessionAction) {
        match action {
            SessionAction::OpenDoor => self.door_open = true,
            SessionAction::CloseDoor => self.door_open = false,
            SessionAction::PlaceLoad { grams, .. } => self.load = grams,
            SessionAction::RemoveLoad => self.load = 0,
            _ => {}
        }
        self.out.push(ScriptLine { at_millis: self.t, action });
    }

    fn wait(&mut self, millis: u64) {
        self.t += millis;
        self.push(SessionAction::Wait);
    }

    fn ensure_door(&mut self, open: bool) {
        if self.door_open != open {
            self.push(if open { SessionAction::OpenDoor } else { SessionAction::CloseDoor });
        }
    }

    fn place(&mut self, grams: u32) {
        self.push(SessionAction::PlaceLoad { grams, initial_temp_c: DEFAULT_LOAD_TEMP_C });
    }
}

/// Derives the action script that satisfies every instruction of `set` in
/// order, including the door and load moves a user would make in between.
///
/// Against a session started on `set` the script reaches `Complete` with
/// exactly one instruction advance per instruction.
pub fn happy_path_script(set: &CookingInstructionSet) -> Vec<ScriptLine> {
    let mut w = Walker { t: 0, door_open: false, load: 0, out: Vec::new() };
    for ins in &set.instructions {
        match ins {
            Instruction::Device(d) => {
                w.ensure_door(false);
                w.wait(d.duration_millis());
            }
            Instruction::User(u) => match u.until {
                TransitionSpec::DoorOpen => {
                    w.ensure_door(false);
                    w.push(SessionAction::OpenDoor);
                }
                TransitionSpec::DoorClosed => {
                    w.ensure_door(true);
                    w.push(SessionAction::CloseDoor);
                }
                TransitionSpec::UserConfirm => w.push(SessionAction::Confirm),
                TransitionSpec::TimerExpired { duration_seconds } => w.wait(u64::from(duration_seconds) * 1000),
                TransitionSpec::WeightChange { min_delta_grams } if min_delta_grams > 0 => {
                    w.ensure_door(true);
                    if w.load > 0 {
                        w.push(SessionAction::RemoveLoad);
                    }
                    w.place(DEFAULT_LOAD_GRAMS.max(min_delta_grams as u32));
                }
                TransitionSpec::WeightChange { min_delta_grams } => {
                    w.ensure_door(true);
                    let needed = min_delta_grams.unsigned_abs();
                    if w.load < needed {
                        if w.load > 0 {
                            w.push(SessionAction::RemoveLoad);
                        }
                        w.place(DEFAULT_LOAD_GRAMS.max(needed));
                    }
                    w.push(SessionAction::RemoveLoad);
                }
            },
        }
    }
    w.out
}
