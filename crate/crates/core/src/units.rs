//! Dimensioned config quantities.
//!
//! Each quantity deserializes from a plain SI number or from a string with
//! an SI-prefixed unit (`"7 um"`, `"283 µT"`, `"77.3 nT/um"`, `"0.6 MHz"`)
//! and always serializes back as the SI number.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

fn prefix_exponent(p: &str) -> Option<i32> {
    Some(match p {
        "" => 0,
        "G" => 9,
        "M" => 6,
        "k" => 3,
        "m" => -3,
        "u" | "µ" | "μ" => -6,
        "n" => -9,
        "p" => -12,
        _ => return None,
    })
}

/// Scales by 10^exp, dividing for negative exponents so that e.g. "7 um"
/// gives exactly 7e-6.
fn apply_exponent(v: f64, exp: i32) -> f64 {
    if exp < 0 {
        v / 10f64.powi(-exp)
    } else {
        v * 10f64.powi(exp)
    }
}

fn unit_exponent(text: &str, base: &str) -> Option<i32> {
    let prefix = text.strip_suffix(base)?;
    prefix_exponent(prefix)
}

fn split_number(s: &str) -> Option<(f64, &str)> {
    let end = s
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
        .map_or(s.len(), |(i, _)| i);
    if let Ok(v) = s.trim().parse::<f64>() {
        return Some((v, ""));
    }
    (1..=end)
        .rev()
        .filter(|&i| s.is_char_boundary(i))
        .find_map(|i| s[..i].parse::<f64>().ok().map(|v| (v, &s[i..])))
}

/// Parses `text` as a quantity in `unit` (e.g. `"T/m"`), returning SI.
pub fn parse_quantity(text: &str, unit: &str) -> Result<f64, String> {
    let s = text.trim();
    let (value, rest) = split_number(s).ok_or_else(|| format!("`{text}` is not a number with a unit"))?;
    let rest: String = rest.chars().filter(|c| !c.is_whitespace()).collect();
    if rest.is_empty() {
        return Ok(value);
    }
    let bad = || format!("`{text}`: expected unit {unit} with an optional SI prefix");
    let exp = match (rest.split_once('/'), unit.split_once('/')) {
        (Some((num, den)), Some((un, ud))) => {
            unit_exponent(num, un).ok_or_else(bad)? - unit_exponent(den, ud).ok_or_else(bad)?
        }
        (None, None) => unit_exponent(&rest, unit).ok_or_else(bad)?,
        _ => return Err(bad()),
    };
    Ok(apply_exponent(value, exp))
}

macro_rules! quantity {
    ($(#[$doc:meta])* $name:ident, $unit:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            pub const UNIT: &'static str = $unit;

            pub fn si(self) -> f64 {
                self.0
            }
        }

        impl From<f64> for $name {
            fn from(v: f64) -> Self {
                Self(v)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(QuantityVisitor($unit)).map($name)
            }
        }
    };
}

struct QuantityVisitor(&'static str);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number in SI units or a string like \"1.5 u{}\"", self.0)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

quantity!(
    /// Seconds.
    Seconds, "s"
);
quantity!(
    /// Meters.
    Meters, "m"
);
quantity!(
    /// Tesla.
    Tesla, "T"
);
quantity!(
    /// Tesla per meter.
    TeslaPerMeter, "T/m"
);
quantity!(
    /// Cyclic frequency in Hz; multiply by 2π for rad/s.
    Hertz, "Hz"
);
quantity!(
    /// Kelvin.
    Kelvin, "K"
);

impl Hertz {
    pub fn angular(self) -> f64 {
        std::f64::consts::TAU * self.0
    }
}
