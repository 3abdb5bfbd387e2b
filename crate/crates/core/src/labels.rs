//! Closed label vocabularies shared by the dataset, the classifiers and the
//! trace engine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Fine-grain posture of the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavior {
    Lying,
    Standing,
    Sitting,
    Walking,
}

impl Behavior {
    pub const ALL: [Behavior; 4] = [
        Behavior::Lying,
        Behavior::Standing,
        Behavior::Sitting,
        Behavior::Walking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Lying => "lying",
            Behavior::Standing => "standing",
            Behavior::Sitting => "sitting",
            Behavior::Walking => "walking",
        }
    }

    /// Position in [`Behavior::ALL`], used as a numeric feature.
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Complex activity labels found in the ADL dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Activity {
    Sleeping,
    ChangingClothes,
    Relaxing,
    MovingAround,
    Cooking,
    Eating,
    Emergency,
    Working,
    Defecating,
}

impl Activity {
    pub const ALL: [Activity; 9] = [
        Activity::Sleeping,
        Activity::ChangingClothes,
        Activity::Relaxing,
        Activity::MovingAround,
        Activity::Cooking,
        Activity::Eating,
        Activity::Emergency,
        Activity::Working,
        Activity::Defecating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Sleeping => "sleeping",
            Activity::ChangingClothes => "changing clothes",
            Activity::Relaxing => "relaxing",
            Activity::MovingAround => "moving around",
            Activity::Cooking => "cooking",
            Activity::Eating => "eating",
            Activity::Emergency => "emergency",
            Activity::Working => "working",
            Activity::Defecating => "defecating",
        }
    }
}

/// Lowercase and fold `_`/`-`/repeated whitespace into single spaces.
fn normalize(s: &str) -> String {
    s.trim()
        .to_ascii_lowercase()
        .split(|c: char| c == '_' || c == '-' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        Behavior::ALL
            .into_iter()
            .find(|b| b.as_str() == n)
            .ok_or_else(|| Error::validation(format!("unknown behavior label '{}'", s)))
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        if n == "changing cloth" {
            return Ok(Activity::ChangingClothes);
        }
        Activity::ALL
            .into_iter()
            .find(|a| a.as_str() == n)
            .ok_or_else(|| Error::validation(format!("unknown activity label '{}'", s)))
    }
}

macro_rules! string_label {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_label!(Behavior);
string_label!(Activity);

/// Binary target of the emergency model.
pub const NON_EMERGENCY: &str = "non-emergency";
pub const EMERGENCY: &str = "emergency";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_loose_spellings() {
        assert_eq!("Lying".parse::<Behavior>().unwrap(), Behavior::Lying);
        assert_eq!(" WALKING ".parse::<Behavior>().unwrap(), Behavior::Walking);
        assert_eq!(
            "changing_clothes".parse::<Activity>().unwrap(),
            Activity::ChangingClothes
        );
        assert_eq!(
            "Changing cloth".parse::<Activity>().unwrap(),
            Activity::ChangingClothes
        );
        assert_eq!(
            "moving-around".parse::<Activity>().unwrap(),
            Activity::MovingAround
        );
    }

    #[test]
    fn rejects_unknown() {
        assert!("jumping".parse::<Behavior>().is_err());
        assert!("dancing".parse::<Activity>().is_err());
    }

    #[test]
    fn display_roundtrip() {
        for b in Behavior::ALL {
            assert_eq!(b.to_string().parse::<Behavior>().unwrap(), b);
        }
        for a in Activity::ALL {
            assert_eq!(a.to_string().parse::<Activity>().unwrap(), a);
        }
    }
}
