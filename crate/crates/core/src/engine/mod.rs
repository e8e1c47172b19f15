//! Executes one [`CookingInstructionSet`] as a deterministic state machine.
//!
//! The engine never reads a clock: time arrives only as [`Event::Tick`]. Every
//! call to [`Engine::step`] is a pure function of the state and the event, and
//! the returned effects list actuator commands before media and feedback.
//!
//! Interlocks hold for every instruction set, whatever it says:
//! the magnetron and carousel are switched off before anything else whenever
//! the door opens, and heating never starts while the door is open.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{
    lint_instruction_set, CookingInstructionSet, DeviceInstruction, Instruction, LintReport, MediaKind, MediaRef,
    TransitionSpec, UserInstruction,
};

/// An external stimulus delivered to a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", deny_unknown_fields)]
pub enum Event {
    DoorOpen,
    DoorClosed,
    #[serde(rename_all = "camelCase")]
    WeightChange {
        delta_grams: i32,
    },
    SmokeDetected,
    UserConfirm,
    #[serde(rename_all = "camelCase")]
    Tick {
        dt_millis: u64,
    },
    Abort,
}

impl Event {
    /// Weight deltas must be nonzero and ticks must advance time.
    pub fn is_valid(&self) -> bool {
        match self {
            Event::WeightChange { delta_grams } => *delta_grams != 0,
            Event::Tick { dt_millis } => *dt_millis > 0,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlertKind {
    Smoke,
    DoorLeftOpen,
    Aborted,
}

/// A command emitted by the engine.
///
/// There is deliberately no constructor for an audible alarm: smoke is reported
/// with an [`Effect::Alert`] and a calm [`Effect::PlayAudio`] clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", deny_unknown_fields)]
pub enum Effect {
    SetMagnetron { on: bool },
    SetCarousel { on: bool },
    SetLight { on: bool },
    ShowInstruction { text: String, media: Vec<MediaRef> },
    PlayAudio { media: MediaRef },
    Suggest { text: String, media: Vec<MediaRef> },
    Alert { kind: AlertKind, text: String },
    SessionComplete,
}

impl Effect {
    pub fn is_actuator(&self) -> bool {
        matches!(self, Effect::SetMagnetron { .. } | Effect::SetCarousel { .. } | Effect::SetLight { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum Phase {
    AwaitingUser { index: usize },
    Heating { index: usize, remaining_millis: u64 },
    HeatingPaused { index: usize, remaining_millis: u64 },
    SmokeHold { index: usize },
    Complete,
    Aborted,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AwaitingUser { .. } => "AwaitingUser",
            Phase::Heating { .. } => "Heating",
            Phase::HeatingPaused { .. } => "HeatingPaused",
            Phase::SmokeHold { .. } => "SmokeHold",
            Phase::Complete => "Complete",
            Phase::Aborted => "Aborted",
        }
    }

    pub fn index(&self) -> Option<usize> {
        match *self {
            Phase::AwaitingUser { index }
            | Phase::Heating { index, .. }
            | Phase::HeatingPaused { index, .. }
            | Phase::SmokeHold { index } => Some(index),
            Phase::Complete | Phase::Aborted => None,
        }
    }

    pub fn remaining_millis(&self) -> Option<u64> {
        match *self {
            Phase::Heating { remaining_millis, .. } | Phase::HeatingPaused { remaining_millis, .. } => {
                Some(remaining_millis)
            }
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Complete | Phase::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    pub phase: Phase,
    pub door_open: bool,
    pub elapsed_in_phase_millis: u64,
    pub set: Arc<CookingInstructionSet>,
}

impl SessionState {
    pub fn instruction(&self) -> Option<&Instruction> {
        self.phase.index().and_then(|i| self.set.instructions.get(i))
    }

    /// Power of the device instruction being executed, if heating.
    pub fn heating_power_watts(&self) -> Option<u32> {
        match self.phase {
            Phase::Heating { index, .. } => self.set.instructions[index].as_device().map(|d| d.power_watts),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub state: SessionState,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("instruction set has {} lint error(s)", .0.errors().count())]
    LintDirty(LintReport),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// How long the door may stay open mid-heating before an alert, repeated each further interval.
    pub door_left_open_timeout_millis: u64,
    /// The non-startling clip played with every smoke alert.
    pub smoke_clip: MediaRef,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            door_left_open_timeout_millis: 30_000,
            smoke_clip: MediaRef::new("calm-smoke-notice.ogg", MediaKind::Audio),
        }
    }
}

/// Collects effects, keeping actuator commands ahead of everything else.
#[derive(Default)]
struct Effects {
    actuators: Vec<Effect>,
    feedback: Vec<Effect>,
}

impl Effects {
    /// Actuator commands that repeat the latest command for the same actuator are dropped.
    fn push(&mut self, e: Effect) {
        if e.is_actuator() {
            let same_actuator = |x: &&Effect| std::mem::discriminant(*x) == std::mem::discriminant(&e);
            if self.actuators.iter().rev().find(same_actuator) != Some(&e) {
                self.actuators.push(e);
            }
        } else {
            self.feedback.push(e);
        }
    }

    fn stop_heating(&mut self) {
        self.push(Effect::SetMagnetron { on: false });
        self.push(Effect::SetCarousel { on: false });
    }

    fn into_vec(mut self) -> Vec<Effect> {
        self.actuators.append(&mut self.feedback);
        self.actuators
    }
}

const SMOKE_TEXT: &str = "Smoke noticed. The oven has stopped. Leave the door closed and ask for help.";
const DOOR_LEFT_OPEN_TEXT: &str = "The door is open.";
const CLOSE_DOOR_TEXT: &str = "Close the door to carry on heating.";
const ABORTED_TEXT: &str = "Cooking stopped.";

fn heating_text(d: &DeviceInstruction) -> String {
    format!("Heating at {} W for {}:{:02}", d.power_watts, d.duration_seconds / 60, d.duration_seconds % 60)
}

fn weight_matches(min_delta_grams: i32, delta_grams: i32) -> bool {
    if min_delta_grams > 0 {
        delta_grams >= min_delta_grams
    } else {
        delta_grams <= min_delta_grams
    }
}

/// The transition the current user instruction waits for; `None` outside [`Phase::AwaitingUser`].
pub fn expected_transition(state: &SessionState) -> Option<&TransitionSpec> {
    match state.phase {
        Phase::AwaitingUser { index } => state.set.instructions[index].as_user().map(|u| &u.until),
        _ => None,
    }
}

pub fn is_terminal(state: &SessionState) -> bool {
    state.phase.is_terminal()
}

#[derive(Debug, Clone, Default)]
pub struct Engine {
    config: EngineConfig,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        Engine { config }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Enters instruction 0 with the door closed. Sets with lint errors are refused.
    pub fn init_session(&self, set: Arc<CookingInstructionSet>) -> Result<StepResult, EngineError> {
        let report = lint_instruction_set(&set);
        if report.has_errors() {
            return Err(EngineError::LintDirty(report));
        }
        let mut state = SessionState { phase: Phase::Complete, door_open: false, elapsed_in_phase_millis: 0, set };
        let mut fx = Effects::default();
        self.enter(&mut state, 0, &mut fx);
        Ok(StepResult { state, effects: fx.into_vec() })
    }

    pub fn step(&self, state: &SessionState, event: &Event) -> StepResult {
        let mut next = state.clone();
        let mut fx = Effects::default();
        if event.is_valid() {
            self.transition(&mut next, event, &mut fx);
        }
        StepResult { state: next, effects: fx.into_vec() }
    }

    fn transition(&self, s: &mut SessionState, event: &Event, fx: &mut Effects) {
        match event {
            Event::DoorOpen => {
                s.door_open = true;
            }
            Event::DoorClosed => {
                s.door_open = false;
            }
            _ => {}
        }

        if s.phase.is_terminal() {
            match event {
                Event::DoorOpen => fx.push(Effect::SetLight { on: true }),
                Event::DoorClosed => fx.push(Effect::SetLight { on: false }),
                Event::SmokeDetected => self.smoke_alert(fx),
                _ => {}
            }
            return;
        }

        match event {
            Event::Abort => {
                fx.stop_heating();
                fx.push(Effect::Alert { kind: AlertKind::Aborted, text: ABORTED_TEXT.into() });
                self.set_phase(s, Phase::Aborted);
                return;
            }
            Event::SmokeDetected => {
                fx.stop_heating();
                self.smoke_alert(fx);
                if let Some(index) = s.phase.index().filter(|_| !matches!(s.phase, Phase::SmokeHold { .. })) {
                    self.set_phase(s, Phase::SmokeHold { index });
                }
                return;
            }
            _ => {}
        }

        match s.phase {
            Phase::AwaitingUser { index } => self.awaiting_user(s, index, event, fx),
            Phase::Heating { index, remaining_millis } => match event {
                Event::Tick { dt_millis } => {
                    let remaining = remaining_millis.saturating_sub(*dt_millis);
                    if remaining == 0 {
                        fx.stop_heating();
                        self.advance(s, index, fx);
                    } else {
                        s.phase = Phase::Heating { index, remaining_millis: remaining };
                        s.elapsed_in_phase_millis += dt_millis;
                    }
                }
                Event::DoorOpen => {
                    fx.stop_heating();
                    fx.push(Effect::SetLight { on: true });
                    fx.push(Effect::Suggest { text: CLOSE_DOOR_TEXT.into(), media: vec![] });
                    self.set_phase(s, Phase::HeatingPaused { index, remaining_millis });
                }
                _ => {}
            },
            Phase::HeatingPaused { index, remaining_millis } => match event {
                Event::DoorClosed => {
                    let d = s.set.instructions[index]
                        .as_device()
                        .expect("paused phase indexes a device instruction")
                        .clone();
                    self.start_heating(s, index, remaining_millis, &d, fx);
                }
                Event::DoorOpen => fx.push(Effect::SetLight { on: true }),
                Event::Tick { dt_millis } => {
                    let timeout = self.config.door_left_open_timeout_millis.max(1);
                    let before = s.elapsed_in_phase_millis / timeout;
                    s.elapsed_in_phase_millis += dt_millis;
                    if s.door_open && s.elapsed_in_phase_millis / timeout > before {
                        fx.push(Effect::Alert { kind: AlertKind::DoorLeftOpen, text: DOOR_LEFT_OPEN_TEXT.into() });
                        fx.push(Effect::Suggest { text: CLOSE_DOOR_TEXT.into(), media: vec![] });
                    }
                }
                _ => {}
            },
            Phase::SmokeHold { .. } => match event {
                Event::DoorOpen => fx.push(Effect::SetLight { on: true }),
                Event::Tick { dt_millis } => s.elapsed_in_phase_millis += dt_millis,
                _ => {}
            },
            Phase::Complete | Phase::Aborted => unreachable!("terminal phases handled above"),
        }
    }

    fn awaiting_user(&self, s: &mut SessionState, index: usize, event: &Event, fx: &mut Effects) {
        let user = s.set.instructions[index].as_user().expect("awaiting phase indexes a user instruction").clone();
        if let Event::Tick { dt_millis } = event {
            s.elapsed_in_phase_millis += dt_millis;
        }
        let matched = match (&user.until, event) {
            (TransitionSpec::DoorOpen, Event::DoorOpen)
            | (TransitionSpec::DoorClosed, Event::DoorClosed)
            | (TransitionSpec::UserConfirm, Event::UserConfirm) => true,
            (TransitionSpec::WeightChange { min_delta_grams }, Event::WeightChange { delta_grams }) => {
                weight_matches(*min_delta_grams, *delta_grams)
            }
            (TransitionSpec::TimerExpired { duration_seconds }, Event::Tick { .. }) => {
                s.elapsed_in_phase_millis >= u64::from(*duration_seconds) * 1000
            }
            _ => false,
        };
        if let Event::DoorOpen = event {
            fx.push(Effect::SetLight { on: true });
        }
        if matched {
            self.advance(s, index, fx);
        } else if matches!(event, Event::WeightChange { .. } | Event::UserConfirm) {
            self.suggest(&user, fx);
        }
    }

    fn suggest(&self, user: &UserInstruction, fx: &mut Effects) {
        let media = user.visual_media().into_iter().chain(user.audio.iter().cloned()).collect();
        fx.push(Effect::Suggest { text: user.text.clone(), media });
    }

    fn smoke_alert(&self, fx: &mut Effects) {
        fx.push(Effect::Alert { kind: AlertKind::Smoke, text: SMOKE_TEXT.into() });
        fx.push(Effect::PlayAudio { media: self.config.smoke_clip.clone() });
    }

    fn set_phase(&self, s: &mut SessionState, phase: Phase) {
        s.phase = phase;
        s.elapsed_in_phase_millis = 0;
    }

    fn advance(&self, s: &mut SessionState, index: usize, fx: &mut Effects) {
        let next = index + 1;
        if next < s.set.instructions.len() {
            self.enter(s, next, fx);
        } else {
            if !s.door_open {
                fx.push(Effect::SetLight { on: false });
            }
            fx.push(Effect::SessionComplete);
            self.set_phase(s, Phase::Complete);
        }
    }

    fn enter(&self, s: &mut SessionState, index: usize, fx: &mut Effects) {
        match s.set.instructions[index].clone() {
            Instruction::User(u) => {
                fx.push(Effect::SetLight { on: true });
                fx.push(Effect::ShowInstruction { text: u.text.clone(), media: u.visual_media() });
                if let Some(audio) = u.audio {
                    fx.push(Effect::PlayAudio { media: audio });
                }
                self.set_phase(s, Phase::AwaitingUser { index });
            }
            Instruction::Device(d) => {
                fx.push(Effect::ShowInstruction { text: heating_text(&d), media: vec![] });
                if s.door_open {
                    fx.push(Effect::SetLight { on: true });
                    fx.push(Effect::Suggest { text: CLOSE_DOOR_TEXT.into(), media: vec![] });
                    self.set_phase(s, Phase::HeatingPaused { index, remaining_millis: d.duration_millis() });
                } else {
                    self.start_heating(s, index, d.duration_millis(), &d, fx);
                }
            }
        }
    }

    /// Light first, magnetron last; the light stays on for the whole heating period.
    fn start_heating(
        &self,
        s: &mut SessionState,
        index: usize,
        remaining_millis: u64,
        d: &DeviceInstruction,
        fx: &mut Effects,
    ) {
        debug_assert!(!s.door_open);
        fx.push(Effect::SetLight { on: true });
        fx.push(Effect::SetCarousel { on: d.activations.carousel });
        fx.push(Effect::SetMagnetron { on: d.activations.magnetron });
        self.set_phase(s, Phase::Heating { index, remaining_millis });
    }
}

/// Actuator state reconstructed by folding the engine's effects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActuatorShadow {
    pub magnetron: bool,
    pub carousel: bool,
    pub light: bool,
}

impl ActuatorShadow {
    pub fn apply(&mut self, effect: &Effect) {
        match *effect {
            Effect::SetMagnetron { on } => self.magnetron = on,
            Effect::SetCarousel { on } => self.carousel = on,
            Effect::SetLight { on } => self.light = on,
            _ => {}
        }
    }

    pub fn apply_all<'a>(&mut self, effects: impl IntoIterator<Item = &'a Effect>) {
        effects.into_iter().for_each(|e| self.apply(e));
    }
}
