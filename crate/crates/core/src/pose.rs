//! Agent poses, headings and camera angle normalization.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Cardinal heading. Grid rows grow southwards, so north is `-y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    /// Unit step in grid coordinates for "ahead".
    pub fn forward(self) -> (i32, i32) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }

    /// Unit step for "right", i.e. heading rotated 90 degrees clockwise.
    pub fn right(self) -> (i32, i32) {
        self.clockwise().forward()
    }

    pub fn clockwise(self) -> Heading {
        match self {
            Heading::N => Heading::E,
            Heading::E => Heading::S,
            Heading::S => Heading::W,
            Heading::W => Heading::N,
        }
    }

    pub fn counter_clockwise(self) -> Heading {
        match self {
            Heading::N => Heading::W,
            Heading::W => Heading::S,
            Heading::S => Heading::E,
            Heading::E => Heading::N,
        }
    }

    /// Compass yaw in degrees, north = 0, clockwise positive.
    pub fn yaw_degrees(self) -> f64 {
        match self {
            Heading::N => 0.0,
            Heading::E => 90.0,
            Heading::S => 180.0,
            Heading::W => 270.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Heading::N => "N",
            Heading::E => "E",
            Heading::S => "S",
            Heading::W => "W",
        }
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heading {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" => Ok(Heading::N),
            "E" => Ok(Heading::E),
            "S" => Ok(Heading::S),
            "W" => Ok(Heading::W),
            _ => Err(()),
        }
    }
}

/// Optional camera extension: polar in [0,180], azimuth in [-180,180),
/// yaw in [0,360), all degrees after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraAngles {
    pub polar: f64,
    pub azimuth: f64,
    pub yaw: f64,
}

impl Default for CameraAngles {
    fn default() -> Self {
        Self {
            polar: 0.0,
            azimuth: 0.0,
            yaw: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: i32,
    pub y: i32,
    pub heading: Heading,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraAngles>,
}

impl Pose {
    pub fn new(x: i32, y: i32, heading: Heading) -> Self {
        Self {
            x,
            y,
            heading,
            camera: None,
        }
    }

    pub fn cell(&self) -> (i32, i32) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("camera angle {name} is not finite")]
pub struct NonFiniteAngle {
    pub name: &'static str,
}

/// Named camera controls understood by [`normalize_control`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleKind {
    Polar,
    Azimuth,
    Yaw,
}

impl AngleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AngleKind::Polar => "polar",
            AngleKind::Azimuth => "azimuth",
            AngleKind::Yaw => "yaw",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "polar" => Some(AngleKind::Polar),
            "azimuth" => Some(AngleKind::Azimuth),
            "yaw" => Some(AngleKind::Yaw),
            _ => None,
        }
    }
}

fn wrap(value: f64, lo: f64, span: f64) -> f64 {
    if value >= lo && value < lo + span {
        return value;
    }
    let mut r = libm::fmod(value - lo, span);
    if r < 0.0 {
        r += span;
    }
    // fmod of a tiny negative can round up to exactly `span`.
    if r >= span {
        r = 0.0;
    }
    let out = r + lo;
    if out >= lo + span {
        lo
    } else {
        out
    }
}

pub fn normalize_control(kind: AngleKind, value: f64) -> Result<f64, NonFiniteAngle> {
    if !value.is_finite() {
        return Err(NonFiniteAngle {
            name: kind.as_str(),
        });
    }
    Ok(match kind {
        AngleKind::Polar => value.clamp(0.0, 180.0),
        AngleKind::Azimuth => wrap(value, -180.0, 360.0),
        AngleKind::Yaw => wrap(value, 0.0, 360.0),
    })
}

/// Clamp polar, wrap azimuth and yaw into their half-open ranges.
pub fn normalize_angles(pose: Pose) -> Result<Pose, NonFiniteAngle> {
    let camera = match pose.camera {
        None => None,
        Some(c) => Some(CameraAngles {
            polar: normalize_control(AngleKind::Polar, c.polar)?,
            azimuth: normalize_control(AngleKind::Azimuth, c.azimuth)?,
            yaw: normalize_control(AngleKind::Yaw, c.yaw)?,
        }),
    };
    Ok(Pose { camera, ..pose })
}
