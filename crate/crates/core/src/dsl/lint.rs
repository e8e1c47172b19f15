//! Static checks run before a resource is stored or executed.
//!
//! | rule | severity | checks |
//! |------|----------|--------|
//! | L0 | error | per-value invariants, including a silent smoke alarm (also enforced by the parser) |
//! | L1 | error / warning | heating only with the door provably closed / door state unknown |
//! | L2 | warning | food is placed (WeightChange) before the first heating step |
//! | L3 | error | power, duration and weight-change bounds |
//! | L4 | error | instruction set ids and ability levels are unique |
//! | L5 | error | media fields reference media of the matching kind |
//! | L6 | error / warning | device activations: magnetron on / light on |

use std::collections::HashMap;

use serde::Serialize;

use super::model::*;
use crate::sim::MAX_LOAD_GRAMS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub rule: String,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{severity}[{}] {path}: {}", self.rule, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LintReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl LintReport {
    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    /// Diagnostics whose path lies at or under `prefix`.
    pub fn at<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Diagnostic> + 'a {
        self.diagnostics.iter().filter(move |d| d.path == prefix || d.path.starts_with(&format!("{prefix}/")))
    }

    fn push(&mut self, severity: Severity, rule: &str, path: String, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { severity, rule: rule.to_owned(), path, message: message.into() });
    }
}

/// Door state a step can rely on, tracked statically through a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DoorContext {
    Closed,
    Open,
    Unknown,
}

impl DoorContext {
    fn after(self, until: &TransitionSpec) -> DoorContext {
        match until {
            TransitionSpec::DoorOpen => DoorContext::Open,
            TransitionSpec::DoorClosed => DoorContext::Closed,
            // Food can only be placed or removed through an open door, and nothing says it was shut again.
            TransitionSpec::WeightChange { .. } if self == DoorContext::Closed => DoorContext::Unknown,
            _ => self,
        }
    }
}

/// Produces a deterministic report; diagnostics are ordered by set, then by rule pass.
pub fn lint(r: &ProductResource) -> LintReport {
    let mut report = LintReport::default();

    for v in invariant_violations(r) {
        report.push(Severity::Error, "L0", v.path, v.message);
    }

    if r.product.image.kind != MediaKind::Image {
        report.push(
            Severity::Error,
            "L5",
            "/product/image/kind".into(),
            format!("product image references {} media", r.product.image.kind.as_str()),
        );
    }

    let mut seen_ids: HashMap<&str, usize> = HashMap::new();
    let mut seen_levels: HashMap<u32, usize> = HashMap::new();
    for (si, set) in r.instruction_sets.iter().enumerate() {
        let base = format!("/instructionSets/{si}");
        let first = *seen_ids.entry(&set.id).or_insert(si);
        if first != si {
            report.push(
                Severity::Error,
                "L4",
                format!("{base}/id"),
                format!("instruction set id `{}` already used by /instructionSets/{first}", set.id),
            );
        }
        let first = *seen_levels.entry(set.ability_level).or_insert(si);
        if first != si {
            report.push(
                Severity::Error,
                "L4",
                format!("{base}/abilityLevel"),
                format!("ability level {} already used by /instructionSets/{first}", set.ability_level),
            );
        }
        lint_set(set, &base, &mut report);
    }
    report
}

/// Lints a single instruction set on its own, with paths relative to the set.
pub fn lint_instruction_set(set: &CookingInstructionSet) -> LintReport {
    let mut report = LintReport::default();
    let mut violations = Vec::new();
    set_violations(set, "", &mut violations);
    for v in violations {
        report.push(Severity::Error, "L0", v.path, v.message);
    }
    lint_set(set, "", &mut report);
    report
}

fn lint_set(set: &CookingInstructionSet, base: &str, report: &mut LintReport) {
    let mut door = DoorContext::Closed;
    let mut food_placed = false;
    let mut first_heat_seen = false;

    for (ii, ins) in set.instructions.iter().enumerate() {
        let path = format!("{base}/instructions/{ii}");
        match ins {
            Instruction::User(u) => {
                for (field, media, kind) in [
                    ("image", &u.image, MediaKind::Image),
                    ("audio", &u.audio, MediaKind::Audio),
                    ("video", &u.video, MediaKind::Video),
                ] {
                    if let Some(m) = media.as_ref().filter(|m| m.kind != kind) {
                        report.push(
                            Severity::Error,
                            "L5",
                            format!("{path}/{field}/kind"),
                            format!("{field} field references {} media `{}`", m.kind.as_str(), m.name),
                        );
                    }
                }
                if let TransitionSpec::WeightChange { min_delta_grams } = u.until {
                    if min_delta_grams > 0 {
                        food_placed = true;
                    }
                    if min_delta_grams.unsigned_abs() > MAX_LOAD_GRAMS {
                        report.push(
                            Severity::Error,
                            "L3",
                            format!("{path}/until/minDeltaGrams"),
                            format!(
                                "weight change of {} g exceeds the {MAX_LOAD_GRAMS} g the plate can carry",
                                min_delta_grams.unsigned_abs()
                            ),
                        );
                    }
                }
                door = door.after(&u.until);
            }
            Instruction::Device(d) => {
                match door {
                    DoorContext::Open => report.push(
                        Severity::Error,
                        "L1",
                        path.clone(),
                        "heating step follows an instruction that leaves the door open; add a DoorClosed step first",
                    ),
                    DoorContext::Unknown => report.push(
                        Severity::Warning,
                        "L1",
                        path.clone(),
                        "the door may still be open here; end the previous step with DoorClosed",
                    ),
                    DoorContext::Closed => {}
                }
                if !first_heat_seen && !food_placed {
                    report.push(
                        Severity::Warning,
                        "L2",
                        path.clone(),
                        "no WeightChange step places food before the first heating step",
                    );
                }
                first_heat_seen = true;

                if !(DeviceInstruction::MIN_POWER_WATTS..=DeviceInstruction::MAX_POWER_WATTS).contains(&d.power_watts) {
                    report.push(
                        Severity::Error,
                        "L3",
                        format!("{path}/powerWatts"),
                        format!(
                            "power {} W is outside [{}, {}] W",
                            d.power_watts,
                            DeviceInstruction::MIN_POWER_WATTS,
                            DeviceInstruction::MAX_POWER_WATTS
                        ),
                    );
                }
                if !(DeviceInstruction::MIN_DURATION_SECONDS..=DeviceInstruction::MAX_DURATION_SECONDS)
                    .contains(&d.duration_seconds)
                {
                    report.push(
                        Severity::Error,
                        "L3",
                        format!("{path}/durationSeconds"),
                        format!(
                            "duration {} s is outside [{}, {}] s",
                            d.duration_seconds,
                            DeviceInstruction::MIN_DURATION_SECONDS,
                            DeviceInstruction::MAX_DURATION_SECONDS
                        ),
                    );
                }
                if !d.activations.magnetron {
                    report.push(
                        Severity::Error,
                        "L6",
                        format!("{path}/activations/magnetron"),
                        "a device instruction must heat; magnetron must be true",
                    );
                }
                if !d.activations.light {
                    report.push(
                        Severity::Warning,
                        "L6",
                        format!("{path}/activations/light"),
                        "the light stays on while heating regardless of this setting",
                    );
                }
            }
        }
    }
}
