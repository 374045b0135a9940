//! The closed label alphabet and the three network target classes.

use alloc::format;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;

/// Number of known attack families (`S1`..`S5`).
pub const KNOWN_ATTACKS: u8 = 5;

/// A clip label: authentic speech, a known attack `S1`..`S5`, or an attack
/// family `U<n>` that is never used as a training target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Human,
    Known(u8),
    Unknown(u16),
}

impl Label {
    pub fn is_spoof(self) -> bool {
        !matches!(self, Label::Human)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Human => f.write_str("human"),
            Label::Known(n) => write!(f, "S{n}"),
            Label::Unknown(n) => write!(f, "U{n}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "human" {
            return Ok(Label::Human);
        }
        let bad = || Error::UnknownLabel(s.to_string());
        let (kind, digits) = s.split_at_checked(1).ok_or_else(bad)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(bad());
        }
        match kind {
            "S" => match digits.parse::<u8>() {
                Ok(n) if (1..=KNOWN_ATTACKS).contains(&n) => Ok(Label::Known(n)),
                _ => Err(bad()),
            },
            "U" => digits.parse::<u16>().map(Label::Unknown).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Output class of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TargetClass {
    Human = 0,
    S1 = 1,
    OtherSpoof = 2,
}

impl TargetClass {
    pub const ALL: [TargetClass; 3] = [TargetClass::Human, TargetClass::S1, TargetClass::OtherSpoof];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut t = [0.0; 3];
        t[self.index()] = 1.0;
        t
    }
}

impl TryFrom<Label> for TargetClass {
    type Error = Error;

    fn try_from(label: Label) -> Result<Self, Error> {
        match label {
            Label::Human => Ok(TargetClass::Human),
            Label::Known(1) => Ok(TargetClass::S1),
            Label::Known(_) => Ok(TargetClass::OtherSpoof),
            Label::Unknown(_) => Err(Error::Invalid(format!(
                "label {label} is an unknown-attack label and cannot be a training target"
            ))),
        }
    }
}
