use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Payload kinds the framework moves between modules. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Text,
    Image,
    VideoFrames,
    Audio,
    Action,
    Pose,
    PointCloud,
    DepthMap,
    Scalar,
}

impl Modality {
    pub const ALL: [Modality; 9] = [
        Modality::Text,
        Modality::Image,
        Modality::VideoFrames,
        Modality::Audio,
        Modality::Action,
        Modality::Pose,
        Modality::PointCloud,
        Modality::DepthMap,
        Modality::Scalar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "Text",
            Modality::Image => "Image",
            Modality::VideoFrames => "VideoFrames",
            Modality::Audio => "Audio",
            Modality::Action => "Action",
            Modality::Pose => "Pose",
            Modality::PointCloud => "PointCloud",
            Modality::DepthMap => "DepthMap",
            Modality::Scalar => "Scalar",
        }
    }

    /// Single-byte tag used in binary digests.
    pub fn tag(self) -> u8 {
        Self::ALL.iter().position(|m| *m == self).unwrap_or(0) as u8
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown modality tag {0:?}")]
pub struct UnknownModality(pub alloc::string::String);

impl FromStr for Modality {
    type Err = UnknownModality;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownModality(s.into()))
    }
}
