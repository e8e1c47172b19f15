//! The cooking instruction language: barcode-indexed product resources, each
//! holding one or more instruction sets graded by the user's ability level.

use std::cmp::Reverse;

mod barcode;
mod lint;
mod model;
mod parse;

pub use barcode::{check_digit, validate_barcode, Barcode, BarcodeError, EAN13_LEN};
pub use lint::{lint, lint_instruction_set, Diagnostic, LintReport, Severity};
pub use model::*;
pub use parse::{parse_resource, resource_from_value, serialize_resource, ParseError};

/// Picks the set with the greatest ability level not above `ability_level`,
/// falling back to the most detailed set (lowest level) when none qualifies.
///
/// Ties on level resolve to the earliest set, so the choice is deterministic
/// even for resources that fail the uniqueness lint.
pub fn select_instruction_set(r: &ProductResource, ability_level: u32) -> &CookingInstructionSet {
    r.instruction_sets
        .iter()
        .filter(|s| s.ability_level <= ability_level)
        .min_by_key(|s| Reverse(s.ability_level))
        .or_else(|| r.instruction_sets.iter().min_by_key(|s| s.ability_level))
        .expect("a product resource has at least one instruction set")
}
