//! A deterministic microwave: door, weight and smoke sensors, actuators, and a
//! lumped first-order thermal model of the food load.
//!
//! The heating term is `P·η·dt / (m·c)`; cooling relaxes the load toward
//! ambient at `k·(T − ambient)` per second. Both are integrated with explicit
//! Euler, one step per tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Effect, Event};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimConfig {
    pub efficiency: f64,
    pub specific_heat_j_per_kg_k: f64,
    pub cooling_coeff_per_sec: f64,
    pub smoke_point_c: f64,
    pub ambient_c: f64,
    pub tick_millis: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            efficiency: 0.5,
            specific_heat_j_per_kg_k: 4186.0,
            cooling_coeff_per_sec: 0.005,
            smoke_point_c: 150.0,
            ambient_c: 20.0,
            tick_millis: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimConfigError {
    #[error("efficiency must be in (0, 1], got {0}")]
    Efficiency(f64),
    #[error("specific heat must be positive, got {0}")]
    SpecificHeat(f64),
    #[error("cooling coefficient must be non-negative, got {0}")]
    Cooling(f64),
    #[error("tick must be positive")]
    Tick,
    #[error("cooling coefficient {k}/s is unstable for {tick_millis} ms ticks")]
    Unstable { k: f64, tick_millis: u64 },
    #[error("temperatures must be finite")]
    Temperature,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(SimConfigError::Efficiency(self.efficiency));
        }
        if !(self.specific_heat_j_per_kg_k > 0.0 && self.specific_heat_j_per_kg_k.is_finite()) {
            return Err(SimConfigError::SpecificHeat(self.specific_heat_j_per_kg_k));
        }
        if !(self.cooling_coeff_per_sec >= 0.0 && self.cooling_coeff_per_sec.is_finite()) {
            return Err(SimConfigError::Cooling(self.cooling_coeff_per_sec));
        }
        if self.tick_millis == 0 {
            return Err(SimConfigError::Tick);
        }
        // Explicit Euler overshoots ambient once k·dt exceeds 1.
        if self.cooling_coeff_per_sec * self.tick_millis as f64 / 1000.0 > 1.0 {
            return Err(SimConfigError::Unstable { k: self.cooling_coeff_per_sec, tick_millis: self.tick_millis });
        }
        if !(self.smoke_point_c.is_finite() && self.ambient_c.is_finite()) {
            return Err(SimConfigError::Temperature);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    MagnetronWithDoorOpen,
    CarouselWithDoorOpen,
}

/// A refused actuator command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HardwareFault {
    pub clock_millis: u64,
    pub kind: FaultKind,
}

/// A physical action taken by the user at the appliance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum UserAction {
    OpenDoor,
    CloseDoor,
    PlaceLoad { grams: u32, initial_temp_c: f64 },
    RemoveLoad,
    Confirm,
    ScanBarcode { digits: String },
}

/// Largest load the weight sensor accepts.
pub const MAX_LOAD_GRAMS: u32 = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("precondition violated: {0}")]
pub struct PreconditionViolated(pub String);

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplianceState {
    pub door_open: bool,
    pub load_grams: u32,
    pub food_temp_c: f64,
    pub ambient_c: f64,
    pub smoke_active: bool,
    pub magnetron_on: bool,
    pub carousel_on: bool,
    pub light_on: bool,
    pub clock_millis: u64,
    /// Magnetron output the host has selected for the running device instruction.
    pub power_watts: u32,
    pub faults: Vec<HardwareFault>,
}

impl ApplianceState {
    /// Door closed, empty cavity at ambient temperature, everything off.
    pub fn new(cfg: &SimConfig) -> Self {
        ApplianceState {
            door_open: false,
            load_grams: 0,
            food_temp_c: cfg.ambient_c,
            ambient_c: cfg.ambient_c,
            smoke_active: false,
            magnetron_on: false,
            carousel_on: false,
            light_on: false,
            clock_millis: 0,
            power_watts: 0,
            faults: Vec::new(),
        }
    }

    fn fault(&mut self, kind: FaultKind) {
        self.faults.push(HardwareFault { clock_millis: self.clock_millis, kind });
    }

    /// Drives an actuator. Commands that would run the magnetron or carousel
    /// with the door open are refused and logged as faults.
    pub fn apply_effect(&mut self, effect: &Effect) {
        match *effect {
            Effect::SetMagnetron { on } => {
                if on && self.door_open {
                    self.fault(FaultKind::MagnetronWithDoorOpen);
                    self.magnetron_on = false;
                } else {
                    self.magnetron_on = on;
                }
            }
            Effect::SetCarousel { on } => {
                if on && self.door_open {
                    self.fault(FaultKind::CarouselWithDoorOpen);
                    self.carousel_on = false;
                } else {
                    self.carousel_on = on;
                }
            }
            Effect::SetLight { on } => self.light_on = on,
            _ => {}
        }
    }

    /// Advances the clock by `dt_millis` and integrates the thermal model.
    ///
    /// Returns `SmokeDetected` (only on the tick whose step crosses the smoke
    /// point upward, then latched until the load is removed) followed by `Tick`.
    pub fn tick(&mut self, cfg: &SimConfig, dt_millis: u64) -> Vec<Event> {
        assert!(dt_millis > 0, "tick requires a positive interval");
        self.clock_millis += dt_millis;
        let dt = dt_millis as f64 / 1000.0;
        let before = self.food_temp_c;
        let mut rate = -cfg.cooling_coeff_per_sec * (before - self.ambient_c);
        if self.magnetron_on && self.load_grams > 0 {
            let mass_kg = self.load_grams as f64 / 1000.0;
            rate += self.power_watts as f64 * cfg.efficiency / (mass_kg * cfg.specific_heat_j_per_kg_k);
        }
        self.food_temp_c = before + rate * dt;

        let mut events = Vec::with_capacity(2);
        if !self.smoke_active
            && self.load_grams > 0
            && before < cfg.smoke_point_c
            && self.food_temp_c >= cfg.smoke_point_c
        {
            self.smoke_active = true;
            events.push(Event::SmokeDetected);
        }
        events.push(Event::Tick { dt_millis });
        events
    }

    /// Applies a user action, returning the sensor events it produces.
    /// A violated precondition leaves the state untouched.
    pub fn user_action(&mut self, action: &UserAction) -> Result<Vec<Event>, PreconditionViolated> {
        let refuse = |why: &str| Err(PreconditionViolated(why.to_owned()));
        match *action {
            UserAction::OpenDoor => {
                if self.door_open {
                    return refuse("the door is already open");
                }
                self.door_open = true;
                // The door switch cuts power to the magnetron and carousel motor.
                self.magnetron_on = false;
                self.carousel_on = false;
                Ok(vec![Event::DoorOpen])
            }
            UserAction::CloseDoor => {
                if !self.door_open {
                    return refuse("the door is already closed");
                }
                self.door_open = false;
                Ok(vec![Event::DoorClosed])
            }
            UserAction::PlaceLoad { grams, initial_temp_c } => {
                if !self.door_open {
                    return refuse("food can only be placed with the door open");
                }
                if self.load_grams > 0 {
                    return refuse("there is already food inside");
                }
                if grams == 0 || grams > MAX_LOAD_GRAMS {
                    return refuse("load must be between 1 g and 20 kg");
                }
                if !initial_temp_c.is_finite() {
                    return refuse("food temperature must be finite");
                }
                self.load_grams = grams;
                self.food_temp_c = initial_temp_c;
                Ok(vec![Event::WeightChange { delta_grams: grams as i32 }])
            }
            UserAction::RemoveLoad => {
                if !self.door_open {
                    return refuse("food can only be removed with the door open");
                }
                if self.load_grams == 0 {
                    return refuse("there is no food inside");
                }
                let grams = std::mem::take(&mut self.load_grams);
                self.food_temp_c = self.ambient_c;
                self.smoke_active = false;
                Ok(vec![Event::WeightChange { delta_grams: -(grams as i32) }])
            }
            UserAction::Confirm => Ok(vec![Event::UserConfirm]),
            UserAction::ScanBarcode { .. } => Ok(vec![]),
        }
    }

    pub fn interlock_holds(&self) -> bool {
        !(self.door_open && (self.magnetron_on || self.carousel_on))
    }
}
