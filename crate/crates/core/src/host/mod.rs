//! A live session: one workflow engine wired to one simulated appliance.
//!
//! Everything that happens to a session goes through a single stream of
//! [`SessionAction`]s and clock advances. Each input is turned into sensor
//! events by the simulator, the events are stepped through the engine in
//! order, and the engine's effects are applied back to the simulator.

mod script;
mod transcript;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::{CookingInstructionSet, MediaRef, TransitionSpec};
use crate::engine::{expected_transition, AlertKind, Effect, Engine, EngineError, Event, Phase, SessionState};
use crate::sim::{ApplianceState, HardwareFault, PreconditionViolated, SimConfig, UserAction};

pub use script::{happy_path_script, parse_script, ScriptError, ScriptLine, DEFAULT_LOAD_GRAMS, DEFAULT_LOAD_TEMP_C};
pub use transcript::{
    replay, Divergence, EngineSettings, RecordError, Recorder, ReplayError, TranscriptHeader, TranscriptLine,
    TRANSCRIPT_FORMAT,
};

/// An input a user (or a script) feeds into a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum SessionAction {
    OpenDoor,
    CloseDoor,
    PlaceLoad {
        grams: u32,
        initial_temp_c: f64,
    },
    RemoveLoad,
    Confirm,
    Abort,
    /// Lets time pass without touching the appliance.
    Wait,
}

impl SessionAction {
    fn as_user_action(&self) -> Option<UserAction> {
        Some(match *self {
            SessionAction::OpenDoor => UserAction::OpenDoor,
            SessionAction::CloseDoor => UserAction::CloseDoor,
            SessionAction::PlaceLoad { grams, initial_temp_c } => UserAction::PlaceLoad { grams, initial_temp_c },
            SessionAction::RemoveLoad => UserAction::RemoveLoad,
            SessionAction::Confirm => UserAction::Confirm,
            SessionAction::Abort | SessionAction::Wait => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertRecord {
    pub at_millis: u64,
    pub kind: AlertKind,
    pub text: String,
}

/// What the touchscreen and speakers are presenting.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Display {
    pub text: String,
    pub media: Vec<MediaRef>,
    pub suggestion: Option<String>,
}

impl Display {
    fn apply(&mut self, effect: &Effect) {
        match effect {
            Effect::ShowInstruction { text, media } => {
                self.text = text.clone();
                self.media = media.clone();
                self.suggestion = None;
            }
            Effect::PlayAudio { media } => {
                if !self.media.contains(media) {
                    self.media.push(media.clone());
                }
            }
            Effect::Suggest { text, .. } => self.suggestion = Some(text.clone()),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplianceReadout {
    pub door_open: bool,
    pub load_grams: u32,
    pub food_temp_c: f64,
    pub smoke_active: bool,
    pub magnetron_on: bool,
    pub carousel_on: bool,
    pub light_on: bool,
}

/// Point-in-time view of a session, as rendered by an operator console.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HostSnapshot {
    pub phase: &'static str,
    pub instruction_index: Option<usize>,
    pub remaining_millis: Option<u64>,
    pub expected_transition: Option<TransitionSpec>,
    pub clock_millis: u64,
    pub instruction_text: String,
    pub pending_media: Vec<MediaRef>,
    pub suggestion: Option<String>,
    pub appliance: ApplianceReadout,
    pub alerts: Vec<AlertRecord>,
    pub faults: Vec<HardwareFault>,
    pub last_effects: Vec<Effect>,
}

#[derive(Debug, Clone)]
pub struct SessionHost {
    engine: Engine,
    sim_config: SimConfig,
    state: SessionState,
    appliance: ApplianceState,
    display: Display,
    alerts: Vec<AlertRecord>,
    last_effects: Vec<Effect>,
}

impl SessionHost {
    /// Initializes the engine on `set` with a fresh appliance and applies the opening effects.
    pub fn start(set: Arc<CookingInstructionSet>, engine: Engine, sim_config: SimConfig) -> Result<Self, EngineError> {
        let init = engine.init_session(set)?;
        let appliance = ApplianceState::new(&sim_config);
        let mut host = SessionHost {
            engine,
            sim_config,
            state: init.state,
            appliance,
            display: Display::default(),
            alerts: Vec::new(),
            last_effects: Vec::new(),
        };
        host.apply_effects(&init.effects);
        host.last_effects = init.effects;
        Ok(host)
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn appliance(&self) -> &ApplianceState {
        &self.appliance
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.sim_config
    }

    pub fn set(&self) -> &Arc<CookingInstructionSet> {
        &self.state.set
    }

    pub fn clock_millis(&self) -> u64 {
        self.appliance.clock_millis
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn is_terminal(&self) -> bool {
        self.state.phase.is_terminal()
    }

    /// Effects produced by the most recent input.
    pub fn last_effects(&self) -> &[Effect] {
        &self.last_effects
    }

    fn apply_effects(&mut self, effects: &[Effect]) {
        self.appliance.power_watts = self.state.heating_power_watts().unwrap_or(0);
        for effect in effects {
            self.appliance.apply_effect(effect);
            self.display.apply(effect);
            if let Effect::Alert { kind, text } = effect {
                self.alerts.push(AlertRecord {
                    at_millis: self.appliance.clock_millis,
                    kind: *kind,
                    text: text.clone(),
                });
            }
        }
    }

    fn feed(&mut self, event: &Event, out: &mut Vec<Effect>) {
        let result = self.engine.step(&self.state, event);
        self.state = result.state;
        self.apply_effects(&result.effects);
        out.extend(result.effects);
    }

    /// Applies one action. A refused action changes nothing, including `last_effects`.
    pub fn act(&mut self, action: &SessionAction) -> Result<Vec<Effect>, PreconditionViolated> {
        let events = match action {
            SessionAction::Abort => vec![Event::Abort],
            SessionAction::Wait => vec![],
            other => self.appliance.user_action(&other.as_user_action().expect("physical action"))?,
        };
        let mut effects = Vec::new();
        for event in &events {
            self.feed(event, &mut effects);
        }
        self.last_effects = effects.clone();
        Ok(effects)
    }

    /// Advances virtual time in ticks of at most `tick_millis`, feeding every
    /// sensor event to the engine. `dt_millis == 0` is a no-op.
    pub fn advance(&mut self, dt_millis: u64) -> Vec<Effect> {
        let mut effects = Vec::new();
        let mut left = dt_millis;
        while left > 0 {
            let dt = left.min(self.sim_config.tick_millis);
            left -= dt;
            for event in self.appliance.tick(&self.sim_config, dt) {
                self.feed(&event, &mut effects);
            }
        }
        self.last_effects = effects.clone();
        effects
    }

    /// Advances to `at_millis` (if later than now), then applies `action`.
    /// Effects of both parts are returned in order.
    pub fn run_at(
        &mut self,
        at_millis: u64,
        action: &SessionAction,
    ) -> (Vec<Effect>, Result<(), PreconditionViolated>) {
        let mut effects = self.advance(at_millis.saturating_sub(self.clock_millis()));
        let outcome = match self.act(action) {
            Ok(more) => {
                effects.extend(more);
                Ok(())
            }
            Err(e) => Err(e),
        };
        self.last_effects = effects.clone();
        (effects, outcome)
    }

    pub fn snapshot(&self) -> HostSnapshot {
        let a = &self.appliance;
        HostSnapshot {
            phase: self.state.phase.name(),
            instruction_index: self.state.phase.index(),
            remaining_millis: self.state.phase.remaining_millis(),
            expected_transition: expected_transition(&self.state).cloned(),
            clock_millis: a.clock_millis,
            instruction_text: self.display.text.clone(),
            pending_media: self.display.media.clone(),
            suggestion: self.display.suggestion.clone(),
            appliance: ApplianceReadout {
                door_open: a.door_open,
                load_grams: a.load_grams,
                food_temp_c: a.food_temp_c,
                smoke_active: a.smoke_active,
                magnetron_on: a.magnetron_on,
                carousel_on: a.carousel_on,
                light_on: a.light_on,
            },
            alerts: self.alerts.clone(),
            faults: a.faults.clone(),
            last_effects: self.last_effects.clone(),
        }
    }
}
