//! Exact text encoding of `f64` values as C99-style hexadecimal floats.
//!
//! Model, vocabulary and matrix-cache files persist every real number in
//! this form so that save → load → save is byte-identical and loaded
//! models predict bit-identically. The encoder is canonical (one spelling
//! per value); the parser additionally accepts non-canonical spellings as
//! long as they are exactly representable, and rejects anything that would
//! require rounding.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HexFloatError {
    #[error("malformed hexadecimal float {0:?}")]
    Malformed(String),
    #[error("hexadecimal float {0:?} is not exactly representable as f64")]
    Inexact(String),
    #[error("hexadecimal float {0:?} overflows f64")]
    Overflow(String),
}

const MANT_BITS: u32 = 52;
const EXP_BIAS: i64 = 1023;

/// Encode a finite or non-finite `f64` as canonical hexadecimal-float text.
pub fn format_hex(value: f64) -> String {
    if value.is_nan() {
        return "nan".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let bits = value.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> MANT_BITS) & 0x7ff) as i64;
    let mant = bits & ((1u64 << MANT_BITS) - 1);
    if exp_bits == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        // subnormal: 0.mant * 2^-1022
        ('0', -1022)
    } else {
        ('1', exp_bits - EXP_BIAS)
    };
    let frac = format_mantissa(mant);
    let exp_str = if exp >= 0 {
        format!("+{exp}")
    } else {
        format!("{exp}")
    };
    if frac.is_empty() {
        format!("{sign}0x{lead}p{exp_str}")
    } else {
        format!("{sign}0x{lead}.{frac}p{exp_str}")
    }
}

fn format_mantissa(mant: u64) -> String {
    // 52 bits -> exactly 13 hex digits; trim trailing zeros.
    let mut s = format!("{mant:013x}");
    while s.ends_with('0') {
        s.pop();
    }
    s
}

/// Parse hexadecimal-float text produced by [`format_hex`] (or any exact
/// equivalent spelling). Errors if the value is malformed, inexact, or out
/// of range.
pub fn parse_hex(text: &str) -> Result<f64, HexFloatError> {
    let malformed = || HexFloatError::Malformed(text.to_string());
    let mut s = text;
    let negative = if let Some(rest) = s.strip_prefix('-') {
        s = rest;
        true
    } else if let Some(rest) = s.strip_prefix('+') {
        s = rest;
        false
    } else {
        false
    };
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(if negative { f64::NEG_INFINITY } else { f64::INFINITY }),
        _ => {}
    }
    s = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).ok_or_else(malformed)?;
    let p = s.find(['p', 'P']).ok_or_else(malformed)?;
    let (digits, exp_part) = (&s[..p], &s[p + 1..]);
    let exp: i64 = exp_part.parse().map_err(|_| malformed())?;
    let (int_part, frac_part) = match digits.find('.') {
        Some(dot) => (&digits[..dot], &digits[dot + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(malformed());
    }
    let mut mant: u128 = 0;
    let mut overflowed = false;
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(16).ok_or_else(malformed)? as u128;
        mant = match mant.checked_mul(16).and_then(|m| m.checked_add(d)) {
            Some(m) => m,
            None => {
                overflowed = true;
                break;
            }
        };
    }
    if overflowed {
        return Err(HexFloatError::Inexact(text.to_string()));
    }
    let e2 = exp - 4 * frac_part.len() as i64;
    let value = assemble(mant, e2, text)?;
    Ok(if negative { -value } else { value })
}

/// Build `mant * 2^e2` exactly, or fail.
fn assemble(mut mant: u128, mut e2: i64, text: &str) -> Result<f64, HexFloatError> {
    if mant == 0 {
        return Ok(0.0);
    }
    // Normalize so the highest set bit is bit 52.
    let high = 127 - mant.leading_zeros() as i64;
    let shift = high - MANT_BITS as i64;
    if shift > 0 {
        if mant.trailing_zeros() < shift as u32 {
            return Err(HexFloatError::Inexact(text.to_string()));
        }
        mant >>= shift;
    } else {
        mant <<= -shift;
    }
    e2 += shift;
    // Now value = mant * 2^e2 with mant in [2^52, 2^53).
    let unbiased = e2 + MANT_BITS as i64;
    let biased = unbiased + EXP_BIAS;
    if biased >= 0x7ff {
        return Err(HexFloatError::Overflow(text.to_string()));
    }
    let bits = if biased >= 1 {
        ((biased as u64) << MANT_BITS) | (mant as u64 & ((1u64 << MANT_BITS) - 1))
    } else {
        // subnormal: shift right by 1 - biased, must stay exact
        let down = (1 - biased) as u32;
        if down > MANT_BITS + 1 || (down <= 127 && mant.trailing_zeros() < down) {
            return Err(HexFloatError::Inexact(text.to_string()));
        }
        (mant >> down) as u64
    };
    Ok(f64::from_bits(bits))
}
