use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Ground truth. Live samples are the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Live,
    Spoof,
}

impl Label {
    pub fn is_live(self) -> bool {
        self == Label::Live
    }

    /// Class index in evidence vectors: live = 0, spoof = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Live => 0,
            Label::Spoof => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Live => "live",
            Label::Spoof => "spoof",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Label::Live),
            "spoof" => Ok(Label::Spoof),
            other => Err(Error::Config(format!("unknown label {other:?}"))),
        }
    }
}

/// Scene geometry/texture family. Everything except `Live` is an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Live,
    Plane,
    Cylinder,
    PaperOnFace,
    LatexMask,
}

impl SceneKind {
    pub const ALL: [SceneKind; 5] = [
        SceneKind::Live,
        SceneKind::Plane,
        SceneKind::Cylinder,
        SceneKind::PaperOnFace,
        SceneKind::LatexMask,
    ];

    pub fn label(self) -> Label {
        if self == SceneKind::Live {
            Label::Live
        } else {
            Label::Spoof
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SceneKind::Live => "live",
            SceneKind::Plane => "plane",
            SceneKind::Cylinder => "cylinder",
            SceneKind::PaperOnFace => "paper_on_face",
            SceneKind::LatexMask => "latex_mask",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scene kind {s:?}")))
    }
}
