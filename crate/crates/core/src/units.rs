//! SI-suffixed number parsing and the fixed-precision formatting shared by
//! every text artifact.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid numeric value `{0}`")]
pub struct ParseValueError(pub String);

/// Parses a SPICE-style value such as `160p`, `1.5`, `10meg`, `40pF` or `2e-3`.
///
/// Suffixes are case-insensitive: `f p n u m k meg g t`. Any trailing
/// alphabetic characters after the scale suffix are treated as a unit and
/// ignored, so `40pF` and `40p` are the same value.
pub fn parse_si(text: &str) -> Result<f64, ParseValueError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseValueError(text.to_string()));
    }
    // Longest numeric prefix that Rust's float parser accepts.
    let bytes = s.as_bytes();
    let mut end = 0;
    for i in (1..=bytes.len()).rev() {
        if !s.is_char_boundary(i) {
            continue;
        }
        if s[..i].parse::<f64>().is_ok() {
            end = i;
            break;
        }
    }
    if end == 0 {
        return Err(ParseValueError(text.to_string()));
    }
    let mantissa: f64 = s[..end].parse().map_err(|_| ParseValueError(text.to_string()))?;
    let rest = s[end..].to_ascii_lowercase();
    if !rest.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(ParseValueError(text.to_string()));
    }
    if rest.starts_with('e') {
        return Err(ParseValueError(text.to_string()));
    }
    let exponent = if rest.starts_with("meg") {
        6
    } else {
        match rest.chars().next() {
            None => 0,
            Some('f') => -15,
            Some('p') => -12,
            Some('n') => -9,
            Some('u') => -6,
            Some('m') => -3,
            Some('k') => 3,
            Some('g') => 9,
            Some('t') => 12,
            // Bare units (`V`, `A`, `s`, `ohm`, `Hz`) carry no scale.
            Some(_) => 0,
        }
    };
    let digits = &s[..end];
    // Re-parse as decimal scientific text so `200u` is bit-identical to
    // `200e-6`; a multiply by 1e-6 would round differently.
    let value = if exponent == 0 {
        mantissa
    } else if digits.contains(['e', 'E']) {
        mantissa * 10f64.powi(exponent)
    } else {
        format!("{digits}e{exponent}").parse().map_err(|_| ParseValueError(text.to_string()))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ParseValueError(text.to_string()))
    }
}

/// Scientific notation with `sig` significant digits (`sig >= 1`).
pub fn format_sci(value: f64, sig: usize) -> String {
    let digits = sig.max(1) - 1;
    if value == 0.0 {
        // Avoid `-0` leaking into artifacts.
        return format!("{:.*e}", digits, 0.0);
    }
    format!("{:.*e}", digits, value)
}

/// Nine significant digits, the precision used by every CSV artifact.
pub fn sci9(value: f64) -> String {
    format_sci(value, 9)
}
