use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Comparative label `O_ij`: `Pos` when the first item is preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    /// `sgn(a - b)`, or `None` on a tie.
    pub fn from_order(a: f64, b: f64) -> Option<Label> {
        if a > b {
            Some(Label::Pos)
        } else if a < b {
            Some(Label::Neg)
        } else {
            None
        }
    }

    pub fn from_sign(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Pos),
            -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_i8())
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Pos => f.write_str("+1"),
            Label::Neg => f.write_str("-1"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(deserializer)?;
        Label::from_sign(v).ok_or_else(|| serde::de::Error::custom(format!("label must be +1 or -1, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_as_signed_integer() {
        assert_eq!(serde_json::to_string(&Label::Neg).unwrap(), "-1");
        assert_eq!(serde_json::from_str::<Label>("1").unwrap(), Label::Pos);
        assert!(serde_json::from_str::<Label>("0").is_err());
    }
}
