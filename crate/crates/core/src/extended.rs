use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A nonnegative extended real: exactly zero, a finite positive value, or +∞.
///
/// Thresholds use the explicit tag because "no length is needed" and "no
/// length suffices" are both legitimate answers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Zero,
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn value(self) -> f64 {
        match self {
            Extended::Zero => 0.0,
            Extended::Finite(v) => v,
            Extended::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        !matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Infinite => None,
            other => Some(other.value()),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Zero => f.write_str("0"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

// Wire form: the strings "0" and "inf", or a bare number.
impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Zero => serializer.serialize_str("0"),
            Extended::Infinite => serializer.serialize_str("inf"),
            Extended::Finite(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Tag(String),
            Number(f64),
        }
        match Wire::deserialize(deserializer)? {
            Wire::Number(v) if v.is_finite() && v > 0.0 => Ok(Extended::Finite(v)),
            Wire::Number(0.0) => Ok(Extended::Zero),
            Wire::Number(v) => Err(serde::de::Error::custom(format!(
                "threshold must be nonnegative, got {v}"
            ))),
            Wire::Tag(s) => match s.as_str() {
                "0" => Ok(Extended::Zero),
                "inf" => Ok(Extended::Infinite),
                other => Err(serde::de::Error::custom(format!("unknown threshold tag {other:?}"))),
            },
        }
    }
}
