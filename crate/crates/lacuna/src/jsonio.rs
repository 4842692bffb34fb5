//! JSON emission helpers shared by the library and the CLI.
//!
//! Two conventions hold across every structured-text file this project
//! writes:
//!
//! * floats are printed with 17 significant digits, so any consumer can
//!   recover the exact binary value;
//! * infinite privacy budgets serialize as the string `"inf"` (JSON has no
//!   infinity literal) and are accepted back in that form.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::error::{Error, Result};

/// Pretty JSON with full-precision floats.
pub fn to_json_precise<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, PreciseFormatter::new());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::invalid(format!("non-utf8 json: {e}")))
}

/// Parse a user-supplied epsilon: a nonnegative float or `inf`.
pub fn parse_epsilon(text: &str) -> Result<f64> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::invalid(format!("'{text}' is not a valid epsilon")))?;
    if v.is_nan() || v < 0.0 {
        return Err(Error::invalid(format!("epsilon {v} must be >= 0")));
    }
    Ok(v)
}

/// Serde adapter for epsilon fields: finite values as numbers, infinity as
/// the string `"inf"`. Use with `#[serde(with = "crate::jsonio::eps")]`.
pub mod eps {
    use serde::de::{self, Deserializer, Unexpected};
    use serde::ser::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                crate::jsonio::parse_epsilon(v)
                    .map_err(|_| E::invalid_value(Unexpected::Str(v), &self))
            }
        }
        d.deserialize_any(V)
    }
}

/// [`eps`] lifted to vectors: each element is a number or the string
/// `"inf"`. Use with `#[serde(with = "crate::jsonio::eps_vec")]`.
pub mod eps_vec {
    use serde::de::Deserializer;
    use serde::ser::{SerializeSeq, Serializer};
    use serde::Deserialize;

    pub fn serialize<S: Serializer>(vs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(vs.len()))?;
        for v in vs {
            if v.is_infinite() {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element(v)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Elem(#[serde(with = "super::eps")] f64);
        Vec::<Elem>::deserialize(d).map(|v| v.into_iter().map(|e| e.0).collect())
    }
}

/// `PrettyFormatter` with float output widened to 17 significant digits.
struct PreciseFormatter {
    inner: PrettyFormatter<'static>,
}

impl PreciseFormatter {
    fn new() -> Self {
        PreciseFormatter {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.8e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let values = vec![0.1f64, 1.0 / 3.0, 2.0f64.powi(-40), 9.689610461e0];
        let json = to_json_precise(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(values, back);
    }

    #[test]
    fn floats_carry_17_significant_digits() {
        let json = to_json_precise(&vec![0.1f64]).unwrap();
        assert!(json.contains("1.0000000000000001e-1"), "got {json}");
    }

    #[test]
    fn epsilon_parses_inf_and_rejects_negatives() {
        assert_eq!(parse_epsilon("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_epsilon("1.5").unwrap(), 1.5);
        assert!(parse_epsilon("-1").is_err());
        assert!(parse_epsilon("abc").is_err());
    }

    #[derive(serde::Serialize, serde::Deserialize)]
    struct Wrapped {
        #[serde(with = "crate::jsonio::eps")]
        e: f64,
    }

    #[test]
    fn epsilon_field_serializes_infinity_as_string() {
        let json = to_json_precise(&Wrapped { e: f64::INFINITY }).unwrap();
        assert!(json.contains("\"inf\""));
        let back: Wrapped = serde_json::from_str(&json).unwrap();
        assert!(back.e.is_infinite());
        let finite: Wrapped = serde_json::from_str("{\"e\": 0.25}").unwrap();
        assert_eq!(finite.e, 0.25);
    }
}
