//! Domain types of the instruction language.
//!
//! Field declaration order is the canonical key order of the wire format, so
//! reordering fields here changes the bytes produced by
//! [`serialize_resource`](super::serialize_resource).

use serde::{Deserialize, Serialize};

use super::barcode::Barcode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Image,
    Audio,
    Video,
    Text,
}

impl MediaKind {
    pub const ALL: [MediaKind; 4] = [MediaKind::Image, MediaKind::Audio, MediaKind::Video, MediaKind::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Image => "image",
            MediaKind::Audio => "audio",
            MediaKind::Video => "video",
            MediaKind::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MediaKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A named media blob held by the repository.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaRef {
    pub name: String,
    pub kind: MediaKind,
}

impl MediaRef {
    pub fn new(name: impl Into<String>, kind: MediaKind) -> Self {
        MediaRef { name: name.into(), kind }
    }
}

/// Returns why `name` is not usable as a repository media name, if it is not.
pub fn media_name_problem(name: &str) -> Option<&'static str> {
    if name.trim().is_empty() {
        Some("media name must not be empty")
    } else if name.contains(['/', '\\']) {
        Some("media name must not contain path separators")
    } else if name == "." || name == ".." || name.starts_with("..") {
        Some("media name must not be a parent-directory segment")
    } else if name.chars().any(|c| c.is_control()) {
        Some("media name must not contain control characters")
    } else if name.len() > 255 {
        Some("media name must be at most 255 bytes")
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FoodProduct {
    pub barcode: Barcode,
    pub name: String,
    pub category: String,
    pub image: MediaRef,
}

/// The event that ends a user instruction.
///
/// `WeightChange` thresholds are signed: a positive value waits for food to be
/// placed, a negative one for food to be removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event")]
pub enum TransitionSpec {
    DoorOpen,
    DoorClosed,
    #[serde(rename_all = "camelCase")]
    WeightChange {
        min_delta_grams: i32,
    },
    #[serde(rename_all = "camelCase")]
    TimerExpired {
        duration_seconds: u32,
    },
    UserConfirm,
}

impl TransitionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionSpec::DoorOpen => "DoorOpen",
            TransitionSpec::DoorClosed => "DoorClosed",
            TransitionSpec::WeightChange { .. } => "WeightChange",
            TransitionSpec::TimerExpired { .. } => "TimerExpired",
            TransitionSpec::UserConfirm => "UserConfirm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Activations {
    pub light: bool,
    pub carousel: bool,
    pub magnetron: bool,
    pub smoke_alarm_audible: bool,
}

impl Activations {
    /// Light, carousel and magnetron on; smoke alarm silent.
    pub const HEAT: Activations =
        Activations { light: true, carousel: true, magnetron: true, smoke_alarm_audible: false };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserInstruction {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<MediaRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio: Option<MediaRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video: Option<MediaRef>,
    pub until: TransitionSpec,
}

impl UserInstruction {
    pub fn text(text: impl Into<String>, until: TransitionSpec) -> Self {
        UserInstruction { text: text.into(), image: None, audio: None, video: None, until }
    }

    /// Visual media in display order (image, then video).
    pub fn visual_media(&self) -> Vec<MediaRef> {
        self.image.iter().chain(self.video.iter()).cloned().collect()
    }

    pub fn has_content(&self) -> bool {
        !self.text.trim().is_empty() || self.image.is_some() || self.audio.is_some() || self.video.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceInstruction {
    pub power_watts: u32,
    pub duration_seconds: u32,
    pub activations: Activations,
}

impl DeviceInstruction {
    pub const MIN_POWER_WATTS: u32 = 50;
    pub const MAX_POWER_WATTS: u32 = 1200;
    pub const MIN_DURATION_SECONDS: u32 = 1;
    pub const MAX_DURATION_SECONDS: u32 = 3600;

    pub fn heat(power_watts: u32, duration_seconds: u32) -> Self {
        DeviceInstruction { power_watts, duration_seconds, activations: Activations::HEAT }
    }

    pub fn duration_millis(&self) -> u64 {
        u64::from(self.duration_seconds) * 1000
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instruction {
    User(UserInstruction),
    Device(DeviceInstruction),
}

impl Instruction {
    pub fn as_user(&self) -> Option<&UserInstruction> {
        match self {
            Instruction::User(u) => Some(u),
            Instruction::Device(_) => None,
        }
    }

    pub fn as_device(&self) -> Option<&DeviceInstruction> {
        match self {
            Instruction::Device(d) => Some(d),
            Instruction::User(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CookingInstructionSet {
    pub id: String,
    pub ability_level: u32,
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductResource {
    pub product: FoodProduct,
    pub instruction_sets: Vec<CookingInstructionSet>,
}

impl ProductResource {
    pub fn set_by_id(&self, id: &str) -> Option<&CookingInstructionSet> {
        self.instruction_sets.iter().find(|s| s.id == id)
    }
}

/// A type invariant violation located by a slash-delimited path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Checks the per-value invariants of a resource in document order.
///
/// Cross-instruction rules (door context, bounds, uniqueness, media kinds)
/// belong to lint, not here.
pub fn invariant_violations(r: &ProductResource) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: &str| out.push(Violation { path, message: message.to_owned() });

    let p = &r.product;
    if p.name.trim().is_empty() {
        push("/product/name".into(), "product name must not be empty");
    }
    if p.category.trim().is_empty() {
        push("/product/category".into(), "product category must not be empty");
    }
    if let Some(problem) = media_name_problem(&p.image.name) {
        push("/product/image/name".into(), problem);
    }
    if r.instruction_sets.is_empty() {
        push("/instructionSets".into(), "at least one instruction set is required");
    }
    for (si, set) in r.instruction_sets.iter().enumerate() {
        set_violations(set, &format!("/instructionSets/{si}"), &mut out);
    }
    out
}

/// Per-value invariants of one instruction set, with paths rooted at `base`.
pub fn set_violations(set: &CookingInstructionSet, base: &str, out: &mut Vec<Violation>) {
    let mut push = |path: String, message: &str| out.push(Violation { path, message: message.to_owned() });
    if set.id.trim().is_empty() {
        push(format!("{base}/id"), "instruction set id must not be empty");
    }
    if set.ability_level == 0 {
        push(format!("{base}/abilityLevel"), "ability level must be at least 1");
    }
    if set.instructions.is_empty() {
        push(format!("{base}/instructions"), "at least one instruction is required");
    }
    for (ii, ins) in set.instructions.iter().enumerate() {
        let ipath = format!("{base}/instructions/{ii}");
        match ins {
            Instruction::User(u) => {
                for (field, media) in [("image", &u.image), ("audio", &u.audio), ("video", &u.video)] {
                    if let Some(problem) = media.as_ref().and_then(|m| media_name_problem(&m.name)) {
                        push(format!("{ipath}/{field}/name"), problem);
                    }
                }
                if !u.has_content() {
                    push(ipath.clone(), "user instruction needs text, image, audio or video");
                }
                match u.until {
                    TransitionSpec::WeightChange { min_delta_grams: 0 } => {
                        push(format!("{ipath}/until/minDeltaGrams"), "weight threshold must be nonzero")
                    }
                    TransitionSpec::TimerExpired { duration_seconds: 0 } => {
                        push(format!("{ipath}/until/durationSeconds"), "timer duration must be at least 1 second")
                    }
                    _ => {}
                }
            }
            Instruction::Device(d) => {
                if d.activations.smoke_alarm_audible {
                    push(
                        format!("{ipath}/activations/smokeAlarmAudible"),
                        "the smoke alarm must never sound; use false",
                    );
                }
            }
        }
    }
}
