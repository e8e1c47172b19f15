use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Number of digits in an EAN-13 code.
pub const EAN13_LEN: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BarcodeError {
    #[error("barcode must have exactly 13 digits, got {len}")]
    WrongLength { len: usize },
    #[error("barcode character {position} is {found:?}, expected a decimal digit")]
    NonDigit { position: usize, found: char },
    #[error("barcode check digit is {found}, expected {expected}")]
    ChecksumMismatch { expected: u8, found: u8 },
}

/// A validated EAN-13 barcode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Barcode(String);

impl Barcode {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Builds a barcode from its first twelve digits by appending the check digit.
    pub fn from_payload(payload: &str) -> Result<Self, BarcodeError> {
        let digits = parse_digits(payload, EAN13_LEN - 1)?;
        let mut s = String::with_capacity(EAN13_LEN);
        s.push_str(payload);
        s.push(char::from(b'0' + check_digit(&digits)));
        Ok(Barcode(s))
    }
}

impl fmt::Display for Barcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Barcode {
    type Err = BarcodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        validate_barcode(s)
    }
}

impl Serialize for Barcode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

fn parse_digits(text: &str, expected_len: usize) -> Result<Vec<u8>, BarcodeError> {
    let len = text.chars().count();
    if len != expected_len {
        return Err(BarcodeError::WrongLength { len });
    }
    text.chars()
        .enumerate()
        .map(|(i, c)| {
            c.to_digit(10)
                .filter(|_| c.is_ascii_digit())
                .map(|d| d as u8)
                .ok_or(BarcodeError::NonDigit { position: i + 1, found: c })
        })
        .collect()
}

/// EAN-13 check digit for a 12-digit payload: odd positions weigh 1, even positions weigh 3.
pub fn check_digit(payload: &[u8]) -> u8 {
    let weighted: u32 = payload
        .iter()
        .take(EAN13_LEN - 1)
        .enumerate()
        .map(|(i, &d)| if i % 2 == 0 { d as u32 } else { 3 * d as u32 })
        .sum();
    ((10 - weighted % 10) % 10) as u8
}

/// Validates length, digit class and check digit, in that order.
pub fn validate_barcode(text: &str) -> Result<Barcode, BarcodeError> {
    let digits = parse_digits(text, EAN13_LEN)?;
    let expected = check_digit(&digits[..EAN13_LEN - 1]);
    let found = digits[EAN13_LEN - 1];
    if expected != found {
        return Err(BarcodeError::ChecksumMismatch { expected, found });
    }
    Ok(Barcode(text.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_is_valid() {
        assert!(validate_barcode("0000000000000").is_ok());
    }

    #[test]
    fn known_codes() {
        assert!(validate_barcode("1234567890128").is_ok());
        assert_eq!(validate_barcode("1234567890123"), Err(BarcodeError::ChecksumMismatch { expected: 8, found: 3 }));
        assert_eq!(validate_barcode("12345"), Err(BarcodeError::WrongLength { len: 5 }));
    }

    #[test]
    fn non_digit_reports_position() {
        assert_eq!(validate_barcode("12345678901a8"), Err(BarcodeError::NonDigit { position: 12, found: 'a' }));
        // Non-ASCII digits are not decimal digits for a barcode.
        assert!(matches!(validate_barcode("١٢٣٤٥٦٧٨٩٠١٢٨"), Err(BarcodeError::NonDigit { position: 1, .. })));
    }

    #[test]
    fn payload_completion() {
        assert_eq!(Barcode::from_payload("123456789012").unwrap().as_str(), "1234567890128");
        assert_eq!(Barcode::from_payload("400638133393").unwrap().as_str(), "4006381333931");
        assert!(Barcode::from_payload("12345").is_err());
    }
}
