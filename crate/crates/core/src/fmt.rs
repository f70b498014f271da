//! Number formatting shared by the report writers.

use serde::ser::{Error as _, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Round-trippable scientific notation with 17 significant digits.
pub fn sci17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Six significant digits for human-readable tables.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return sci17(x);
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round first so that e.g. 0.9999999 reports as 1.00000.
    let x: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        format!("{x:.5e}")
    } else {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// Serialises an `f64` as a JSON number with 17 significant digits;
/// non-finite values become strings.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        RawValue::from_string(sci17(*x)).map_err(S::Error::custom)?.serialize(s)
    } else {
        s.serialize_str(&sci17(*x))
    }
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&F17(*x))?;
    }
    seq.end()
}

/// Wrapper that serialises with [`ser_f64`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ser_f64(&self.0, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            let s = serde_json::to_string(&F17(x)).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back, x, "{s}");
        }
        assert_eq!(serde_json::to_string(&F17(f64::INFINITY)).unwrap(), "\"inf\"");
    }

    #[test]
    fn six_digits() {
        assert_eq!(sig6(1.3862943611198906), "1.38629");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.00012345678), "0.000123457");
        assert_eq!(sig6(0.99999999999995), "1.00000");
    }
}
