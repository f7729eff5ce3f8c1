//! Exact text round-trip of `f64` values in C99 hexadecimal notation
//! (`0x1.8p+1`, `-0x0.0000000000001p-1022`, `inf`, `nan`).

use crate::error::{Error, Result};

pub fn format(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

pub fn parse(s: &str) -> Result<f64> {
    let bad = || Error::Checkpoint(format!("malformed hexadecimal float {s:?}"));
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let value = match body {
        "inf" => f64::INFINITY,
        "nan" => f64::NAN,
        _ => {
            let body = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")).ok_or_else(bad)?;
            let (mantissa, exp) = body.split_once(['p', 'P']).ok_or_else(bad)?;
            let exp: i64 = exp.parse().map_err(|_| bad())?;
            let (int_part, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
            if int_part.is_empty() || int_part.len() > 1 || frac.len() > 13 {
                return Err(bad());
            }
            let lead = u64::from_str_radix(int_part, 16).map_err(|_| bad())?;
            let mut frac_bits = 0u64;
            if !frac.is_empty() {
                let padded = format!("{frac:0<13}");
                frac_bits = u64::from_str_radix(&padded, 16).map_err(|_| bad())?;
            }
            match lead {
                0 if frac_bits == 0 => 0.0,
                0 if exp == -1022 => f64::from_bits(frac_bits),
                1 if (-1022..=1023).contains(&exp) => f64::from_bits((((exp + 1023) as u64) << 52) | frac_bits),
                _ => return Err(bad()),
            }
        }
    };
    Ok(if neg { -value } else { value })
}
