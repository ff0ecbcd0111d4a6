use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Hand-over-face gesture classes, including the no-contact `Null` class.
///
/// Integer codes are stable (0..=6, in declaration order) and are what the
/// session file format, the checkpoint header and the classifier outputs use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum GestureClass {
    Null = 0,
    MouthGuard = 1,
    PinchNoseBridge = 2,
    Boredom = 3,
    Interested = 4,
    Forgetfulness = 5,
    MakingDecision = 6,
}

impl GestureClass {
    pub const COUNT: usize = 7;

    pub const ALL: [GestureClass; Self::COUNT] = [
        GestureClass::Null,
        GestureClass::MouthGuard,
        GestureClass::PinchNoseBridge,
        GestureClass::Boredom,
        GestureClass::Interested,
        GestureClass::Forgetfulness,
        GestureClass::MakingDecision,
    ];

    /// The six classes that involve hand-face contact.
    pub const GESTURES: [GestureClass; 6] = [
        GestureClass::MouthGuard,
        GestureClass::PinchNoseBridge,
        GestureClass::Boredom,
        GestureClass::Interested,
        GestureClass::Forgetfulness,
        GestureClass::MakingDecision,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Null => "null",
            GestureClass::MouthGuard => "mouth_guard",
            GestureClass::PinchNoseBridge => "pinch_nose_bridge",
            GestureClass::Boredom => "boredom",
            GestureClass::Interested => "interested",
            GestureClass::Forgetfulness => "forgetfulness",
            GestureClass::MakingDecision => "making_decision",
        }
    }

    /// Conveyed meaning commonly attributed to the gesture.
    pub fn meaning(self) -> &'static str {
        match self {
            GestureClass::Null => "no hand-face contact",
            GestureClass::MouthGuard => "suspicious",
            GestureClass::PinchNoseBridge => "skepticism",
            GestureClass::Boredom => "disinterest",
            GestureClass::Interested => "interest or focused attention",
            GestureClass::Forgetfulness => "forgetfulness",
            GestureClass::MakingDecision => "deciding or choosing",
        }
    }

    pub fn is_null(self) -> bool {
        self == GestureClass::Null
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<GestureClass> for u8 {
    fn from(g: GestureClass) -> u8 {
        g.code()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gesture class {0:?}")]
pub struct UnknownGesture(pub String);

impl TryFrom<u8> for GestureClass {
    type Error = UnknownGesture;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Self::from_code(code).ok_or_else(|| UnknownGesture(code.to_string()))
    }
}

impl FromStr for GestureClass {
    type Err = UnknownGesture;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(code) = s.parse::<u8>() {
            return GestureClass::try_from(code);
        }
        GestureClass::ALL
            .iter()
            .copied()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownGesture(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_stable_and_distinct() {
        for (i, g) in GestureClass::ALL.iter().enumerate() {
            assert_eq!(g.code() as usize, i);
            assert_eq!(GestureClass::from_code(i as u8), Some(*g));
        }
        assert_eq!(GestureClass::from_code(7), None);
        assert_eq!(GestureClass::Boredom.code(), 3);
    }

    #[test]
    fn parses_names_and_codes() {
        assert_eq!("boredom".parse::<GestureClass>().unwrap(), GestureClass::Boredom);
        assert_eq!("2".parse::<GestureClass>().unwrap(), GestureClass::PinchNoseBridge);
        assert!("wave".parse::<GestureClass>().is_err());
    }

    #[test]
    fn serializes_as_code() {
        let s = serde_json::to_string(&GestureClass::MakingDecision).unwrap();
        assert_eq!(s, "6");
        let g: GestureClass = serde_json::from_str("5").unwrap();
        assert_eq!(g, GestureClass::Forgetfulness);
        assert!(serde_json::from_str::<GestureClass>("9").is_err());
    }
}
