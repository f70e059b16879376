//! Unit-aware config values.
//!
//! A dimensional field accepts either a bare number, read in the field's
//! canonical unit, or a string such as `"0.5 ms"` or `"100 uW"`. Values are
//! always stored and written back in the canonical unit.

use serde::{de, Deserialize, Deserializer};

/// Exponents of (second, watt) plus the factor to SI.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dim {
    time: i8,
    power: i8,
    factor: f64,
}

impl Dim {
    const ONE: Dim = Dim { time: 0, power: 0, factor: 1.0 };

    fn same_dimension(&self, other: &Dim) -> bool {
        self.time == other.time && self.power == other.power
    }

    fn name(&self) -> &'static str {
        match (self.time, self.power) {
            (0, 0) => "dimensionless",
            (1, 0) => "time",
            (-1, 0) => "frequency/rate",
            (-2, 0) => "frequency sweep rate",
            (0, 1) => "power",
            (1, 1) => "energy (power x time)",
            _ => "compound",
        }
    }
}

fn atom(tok: &str) -> Option<Dim> {
    let (t, p, f) = match tok {
        "1" | "counts" | "count" | "" => (0, 0, 1.0),
        "s" => (1, 0, 1.0),
        "ms" => (1, 0, 1e-3),
        "us" | "µs" | "μs" => (1, 0, 1e-6),
        "ns" => (1, 0, 1e-9),
        "ps" => (1, 0, 1e-12),
        "Hz" | "cps" => (-1, 0, 1.0),
        "kHz" => (-1, 0, 1e3),
        "MHz" => (-1, 0, 1e6),
        "GHz" => (-1, 0, 1e9),
        "W" => (0, 1, 1.0),
        "mW" => (0, 1, 1e-3),
        "uW" | "µW" | "μW" => (0, 1, 1e-6),
        "nW" => (0, 1, 1e-9),
        "pW" => (0, 1, 1e-12),
        "rad" => (0, 0, 1.0),
        _ => return None,
    };
    Some(Dim { time: t, power: p, factor: f })
}

fn parse_unit(unit: &str) -> Result<Dim, String> {
    let mut dim = Dim::ONE;
    let mut divide = false;
    let mut tok = String::new();
    let flush = |tok: &mut String, divide: bool, dim: &mut Dim| -> Result<(), String> {
        let t = tok.trim();
        let a = atom(t).ok_or_else(|| format!("unknown unit `{t}`"))?;
        let sign = if divide { -1 } else { 1 };
        dim.time += sign * a.time;
        dim.power += sign * a.power;
        dim.factor *= if divide { 1.0 / a.factor } else { a.factor };
        tok.clear();
        Ok(())
    };
    for ch in unit.chars() {
        match ch {
            '*' | '·' => {
                flush(&mut tok, divide, &mut dim)?;
                divide = false;
            }
            '/' => {
                flush(&mut tok, divide, &mut dim)?;
                divide = true;
            }
            c => tok.push(c),
        }
    }
    flush(&mut tok, divide, &mut dim)?;
    Ok(dim)
}

/// Parse `"<value> <unit>"` into the canonical unit `canonical`.
pub fn parse_quantity(text: &str, canonical: &str) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in `{text}`"))?;
    let target = parse_unit(canonical).expect("canonical unit is valid");
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let given = parse_unit(unit)?;
    if !given.same_dimension(&target) {
        return Err(format!(
            "unit mismatch: `{text}` is {} but the field expects {} ({canonical})",
            given.name(),
            target.name()
        ));
    }
    Ok(value * given.factor / target.factor)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Int(i64),
    Num(f64),
    Text(String),
}

pub(crate) fn deserialize_quantity<'de, D: Deserializer<'de>>(
    d: D,
    canonical: &str,
) -> Result<f64, D::Error> {
    match Raw::deserialize(d)? {
        Raw::Int(v) => Ok(v as f64),
        Raw::Num(v) => Ok(v),
        Raw::Text(s) => parse_quantity(&s, canonical).map_err(de::Error::custom),
    }
}

macro_rules! quantity_fields {
    ($($name:ident => $unit:literal),* $(,)?) => {
        $(
            pub mod $name {
                pub const UNIT: &str = $unit;

                pub fn serialize<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                    s.serialize_f64(*v)
                }

                pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                    super::deserialize_quantity(d, UNIT)
                }
            }
        )*
    };
}

quantity_fields! {
    mhz => "MHz",
    us => "us",
    ns => "ns",
    nw => "nW",
    per_s => "Hz",
    ghz_per_s => "GHz/s",
    nw_us => "nW*us",
    rad => "rad",
}

/// `Vec<f64>` of quantities in a canonical unit.
macro_rules! quantity_vec_fields {
    ($($name:ident => $unit:literal),* $(,)?) => {
        $(
            pub mod $name {
                use serde::Deserialize;

                pub const UNIT: &str = $unit;

                #[derive(Deserialize)]
                struct Item(#[serde(deserialize_with = "item")] f64);

                fn item<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                    super::super::deserialize_quantity(d, UNIT)
                }

                pub fn serialize<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                    serde::Serialize::serialize(v, s)
                }

                pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                    Ok(Vec::<Item>::deserialize(d)?.into_iter().map(|i| i.0).collect())
                }
            }
        )*
    };
}

pub mod vec {
    quantity_vec_fields! {
        ns => "ns",
        nw => "nW",
        mhz => "MHz",
        rad => "rad",
    }
}
