//! Generators and helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use csa_core::dsl::{
    lint, parse_resource, Activations, Barcode, CookingInstructionSet, DeviceInstruction, FoodProduct, Instruction,
    MediaKind, MediaRef, ProductResource, TransitionSpec, UserInstruction,
};
use csa_core::host::{happy_path_script, ScriptLine, SessionAction};

pub fn samples_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

/// The checked-in corpus of valid sample products, as (file name, bytes).
pub fn corpus() -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(samples_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

pub fn sample(name: &str) -> Vec<u8> {
    std::fs::read(samples_dir().join(name)).unwrap()
}

pub fn sample_resource(name: &str) -> ProductResource {
    parse_resource(&sample(name)).unwrap()
}

const WORDS: &[&str] = &[
    "soup",
    "Gemüsesuppe",
    "rice",
    "\"quoted\"",
    "back\\slash",
    "tab\tinside",
    "line\nbreak",
    "café",
    "日本語",
    "emoji 🍲",
    "<b>",
    "a/b",
    "100%",
    "",
    " lead",
    "trail ",
];

pub fn text(rng: &mut StdRng) -> String {
    let n = rng.gen_range(1..=4);
    let mut s: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    s.retain(|w| !w.is_empty());
    if s.is_empty() {
        "step".into()
    } else {
        s.join(" ")
    }
}

pub fn media(rng: &mut StdRng, kind: MediaKind) -> MediaRef {
    let ext = match kind {
        MediaKind::Image => "png",
        MediaKind::Audio => "ogg",
        MediaKind::Video => "mp4",
        MediaKind::Text => "txt",
    };
    let stem = ["bowl", "door", "tür-offen", "stir", "plate", "x"].choose(rng).unwrap();
    MediaRef::new(format!("{stem}-{}.{ext}", rng.gen_range(0..1000)), kind)
}

pub fn barcode(rng: &mut StdRng) -> Barcode {
    let payload: String = (0..12).map(|_| char::from(b'0' + rng.gen_range(0..10))).collect();
    Barcode::from_payload(&payload).unwrap()
}

fn door_after(door: Option<bool>, until: &TransitionSpec) -> Option<bool> {
    match until {
        TransitionSpec::DoorOpen => Some(true),
        TransitionSpec::DoorClosed => Some(false),
        TransitionSpec::WeightChange { .. } if door == Some(false) => None,
        _ => door,
    }
}

fn until(rng: &mut StdRng) -> TransitionSpec {
    match rng.gen_range(0..6) {
        0 => TransitionSpec::DoorOpen,
        1 => TransitionSpec::DoorClosed,
        2 => TransitionSpec::UserConfirm,
        3 => TransitionSpec::TimerExpired { duration_seconds: rng.gen_range(1..=90) },
        4 => TransitionSpec::WeightChange { min_delta_grams: rng.gen_range(1..=1500) },
        _ => TransitionSpec::WeightChange { min_delta_grams: -rng.gen_range(1..=1500) },
    }
}

/// A random instruction set with no lint errors (warnings are allowed).
pub fn instruction_set(rng: &mut StdRng, id: String, ability_level: u32) -> CookingInstructionSet {
    let len = rng.gen_range(1..=10);
    let mut door = Some(false);
    let mut instructions = Vec::new();
    for _ in 0..len {
        if rng.gen_bool(0.3) {
            // Door context must not be known-open before heating.
            if door == Some(true) {
                instructions.push(Instruction::User(UserInstruction::text(text(rng), TransitionSpec::DoorClosed)));
                door = Some(false);
            }
            instructions.push(Instruction::Device(DeviceInstruction {
                power_watts: rng.gen_range(DeviceInstruction::MIN_POWER_WATTS..=DeviceInstruction::MAX_POWER_WATTS),
                duration_seconds: rng.gen_range(1..=180),
                activations: Activations { light: rng.gen_bool(0.9), carousel: rng.gen_bool(0.7), ..Activations::HEAT },
            }));
        } else {
            let u = until(rng);
            door = door_after(door, &u);
            let mut ins = UserInstruction::text(text(rng), u);
            if rng.gen_bool(0.4) {
                ins.image = Some(media(rng, MediaKind::Image));
            }
            if rng.gen_bool(0.3) {
                ins.audio = Some(media(rng, MediaKind::Audio));
            }
            if rng.gen_bool(0.2) {
                ins.video = Some(media(rng, MediaKind::Video));
            }
            instructions.push(Instruction::User(ins));
        }
    }
    CookingInstructionSet { id, ability_level, instructions }
}

/// A random lint-clean resource with one to three instruction sets.
pub fn resource(rng: &mut StdRng) -> ProductResource {
    let sets = rng.gen_range(1..=3);
    let mut levels: Vec<u32> = (1..=6).collect();
    levels.shuffle(rng);
    let instruction_sets = (0..sets).map(|i| instruction_set(rng, format!("set-{i}"), levels[i])).collect();
    let r = ProductResource {
        product: FoodProduct {
            barcode: barcode(rng),
            name: text(rng),
            category: ["soups", "snacks", "ready-meals", "Frühstück"].choose(rng).unwrap().to_string(),
            image: media(rng, MediaKind::Image),
        },
        instruction_sets,
    };
    let report = lint(&r);
    assert!(!report.has_errors(), "generator produced a dirty resource: {:?}", report.diagnostics);
    r
}

/// A random action, not necessarily valid for the current appliance state.
pub fn random_action(rng: &mut StdRng) -> SessionAction {
    match rng.gen_range(0..10) {
        0 | 1 => SessionAction::OpenDoor,
        2 | 3 => SessionAction::CloseDoor,
        4 => SessionAction::PlaceLoad {
            grams: rng.gen_range(1..=2000),
            initial_temp_c: f64::from(rng.gen_range(-18..=30)),
        },
        5 => SessionAction::RemoveLoad,
        6 => SessionAction::Confirm,
        7 if rng.gen_bool(0.2) => SessionAction::Abort,
        _ => SessionAction::Wait,
    }
}

/// A script that mostly follows the happy path of `set` with random detours.
pub fn noisy_script(rng: &mut StdRng, set: &CookingInstructionSet) -> Vec<ScriptLine> {
    let happy = happy_path_script(set);
    let mut out = Vec::new();
    let mut t = 0u64;
    let mut i = 0;
    while i < happy.len() || (out.len() < 8 && rng.gen_bool(0.5)) {
        if i < happy.len() && rng.gen_bool(0.7) {
            let line = &happy[i];
            let dt = line.at_millis.saturating_sub(if i == 0 { 0 } else { happy[i - 1].at_millis });
            t += dt;
            out.push(ScriptLine { at_millis: t, action: line.action.clone() });
            i += 1;
        } else {
            t += rng.gen_range(0..=3_000);
            let action = random_action(rng);
            out.push(ScriptLine { at_millis: t, action });
        }
    }
    out
}
