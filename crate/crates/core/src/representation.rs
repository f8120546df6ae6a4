//! Explicit structured representation: occupancy fusion, point export and
//! depth raycasting.
//!
//! The 2D world is lifted into 3D by treating every wall cell as a unit
//! cube spanning z in [0, 1].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::frame::ObservationFrame;
use crate::kernel::{Cell, GridMap, PIXEL_AGENT, PIXEL_FREE, PIXEL_GOAL, PIXEL_WALL};
use crate::pose::Pose;

/// Rays travelling further than this report the no-hit sentinel.
pub const MAX_RANGE: f64 = 100.0;
pub const NO_HIT: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RepresentationError {
    #[error("cell ({x},{y}) is known as {known:?} but the observation says {observed:?}")]
    Conflict {
        x: i32,
        y: i32,
        known: Occupancy,
        observed: Occupancy,
    },
    #[error("observation must be a square window of odd size, got {0}x{1}")]
    BadWindow(u32, u32),
    #[error("pixel value {0} does not encode a cell class")]
    BadPixel(u8),
    #[error("camera at ({0}, {1}) is inside a wall")]
    CameraInWall(f64, f64),
    #[error("ray count must be at least 1 and the field of view finite")]
    BadRays,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Unknown,
    Free,
    Wall,
    Goal,
}

impl From<Cell> for Occupancy {
    fn from(c: Cell) -> Self {
        match c {
            Cell::Free => Occupancy::Free,
            Cell::Wall => Occupancy::Wall,
            Cell::Goal => Occupancy::Goal,
        }
    }
}

fn pixel_class(v: u8) -> Result<Occupancy, RepresentationError> {
    match v {
        PIXEL_WALL => Ok(Occupancy::Wall),
        PIXEL_FREE => Ok(Occupancy::Free),
        PIXEL_GOAL => Ok(Occupancy::Goal),
        other => Err(RepresentationError::BadPixel(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<Occupancy>,
    observed: Vec<u32>,
    poses: Vec<Pose>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![Occupancy::Unknown; width * height],
            observed: vec![0; width * height],
            poses: Vec::new(),
        }
    }

    /// Fully known grid copied from a ground-truth map.
    pub fn from_map(map: &GridMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            cells: map.cells().iter().map(|&c| c.into()).collect(),
            observed: vec![1; map.width() * map.height()],
            poses: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn index(&self, x: i32, y: i32) -> Option<usize> {
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| y as usize * self.width + x as usize)
    }

    pub fn get(&self, x: i32, y: i32) -> Occupancy {
        self.index(x, y).map_or(Occupancy::Unknown, |i| self.cells[i])
    }

    pub fn observed_count(&self, x: i32, y: i32) -> u32 {
        self.index(x, y).map_or(0, |i| self.observed[i])
    }

    pub fn known_cells(&self) -> usize {
        self.cells.iter().filter(|c| **c != Occupancy::Unknown).count()
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    /// Marks one cell as a wall. Used to probe raycast monotonicity.
    pub fn set_wall(&mut self, x: i32, y: i32) {
        if let Some(i) = self.index(x, y) {
            self.cells[i] = Occupancy::Wall;
        }
    }

    /// Writes the cells seen in an egocentric window back into world
    /// coordinates. The agent marker at the centre and off-grid cells are
    /// skipped. A write that would change a known class fails and leaves
    /// the grid untouched.
    pub fn fuse_observation(&mut self, frame: &ObservationFrame, pose: Pose) -> Result<(), RepresentationError> {
        let (w, h) = (frame.width(), frame.height());
        if w != h || w % 2 == 0 {
            return Err(RepresentationError::BadWindow(w, h));
        }
        let r = (w / 2) as i32;
        let (fx, fy) = pose.heading.forward();
        let (rx, ry) = pose.heading.right();
        let mut writes = Vec::with_capacity((w * h) as usize);
        for (k, &v) in frame.pixels().iter().enumerate() {
            let (i, j) = ((k as u32 % w) as i32, (k as u32 / w) as i32);
            if i == r && j == r {
                if v != PIXEL_AGENT {
                    pixel_class(v)?;
                }
                continue;
            }
            let class = pixel_class(v)?;
            let (right, ahead) = (i - r, r - j);
            let x = pose.x + right * rx + ahead * fx;
            let y = pose.y + right * ry + ahead * fy;
            let Some(idx) = self.index(x, y) else { continue };
            let known = self.cells[idx];
            if known != Occupancy::Unknown && known != class {
                return Err(RepresentationError::Conflict {
                    x,
                    y,
                    known,
                    observed: class,
                });
            }
            writes.push((idx, class));
        }
        for (idx, class) in writes {
            self.cells[idx] = class;
            self.observed[idx] += 1;
        }
        self.poses.push(pose);
        Ok(())
    }

    pub fn export_points(&self) -> RepresentationOutput {
        let points = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == Occupancy::Wall)
            .map(|(i, _)| {
                let (x, y) = ((i % self.width) as f64, (i / self.width) as f64);
                [x + 0.5, y + 0.5, 0.5]
            })
            .collect();
        RepresentationOutput {
            points,
            depth: None,
            poses: self.poses.clone(),
            masks: Some(self.cells.iter().map(|c| *c != Occupancy::Unknown).collect()),
        }
    }

    /// Grid-stepping raycast. Ray `k` leaves at compass angle
    /// `yaw - fov/2 + fov*(k+0.5)/rays` (degrees, 0 = north, clockwise) and
    /// reports the distance at which it enters the first wall cell.
    /// Unknown and off-grid cells are traversed as free space.
    pub fn render_depth(&self, camera: DepthCamera, rays: u32, fov: f64) -> Result<DepthMap, RepresentationError> {
        if rays == 0 || !fov.is_finite() || !camera.yaw.is_finite() {
            return Err(RepresentationError::BadRays);
        }
        let (cx, cy) = (libm::floor(camera.x) as i32, libm::floor(camera.y) as i32);
        if self.get(cx, cy) == Occupancy::Wall {
            return Err(RepresentationError::CameraInWall(camera.x, camera.y));
        }
        let depths = (0..rays)
            .map(|k| {
                let deg = camera.yaw - fov / 2.0 + fov * (k as f64 + 0.5) / rays as f64;
                let theta = deg.to_radians();
                self.cast(camera.x, camera.y, libm::sin(theta), -libm::cos(theta))
            })
            .collect();
        Ok(DepthMap { rays, fov, depths })
    }

    fn cast(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> f64 {
        let (mut cx, mut cy) = (libm::floor(ox) as i64, libm::floor(oy) as i64);
        let axis = |o: f64, d: f64, c: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((c + 1) as f64 - o) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (o - c as f64) / -d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (sx, mut tx, ddx) = axis(ox, dx, cx);
        let (sy, mut ty, ddy) = axis(oy, dy, cy);
        loop {
            let t = if tx < ty {
                cx += sx;
                let t = tx;
                tx += ddx;
                t
            } else {
                cy += sy;
                let t = ty;
                ty += ddy;
                t
            };
            if t > MAX_RANGE {
                return NO_HIT;
            }
            let hit = i32::try_from(cx)
                .ok()
                .zip(i32::try_from(cy).ok())
                .is_some_and(|(x, y)| self.get(x, y) == Occupancy::Wall);
            if hit {
                return t;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCamera {
    pub x: f64,
    pub y: f64,
    /// Compass degrees, 0 = north.
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    pub rays: u32,
    pub fov: f64,
    /// Cell-unit distances; [`NO_HIT`] when nothing is hit within range.
    pub depths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationOutput {
    pub points: Vec<[f64; 3]>,
    pub depth: Option<DepthMap>,
    pub poses: Vec<Pose>,
    pub masks: Option<Vec<bool>>,
}

/// `WKPC 1 <count>` header, then one `x y z` line per point with six
/// decimals.
pub fn format_wkpc(points: &[[f64; 3]]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "WKPC 1 {}", points.len());
    for [x, y, z] in points {
        let _ = writeln!(s, "{x:.6} {y:.6} {z:.6}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WkpcError {
    #[error("missing or malformed WKPC header")]
    Header,
    #[error("line {0}: expected three coordinates")]
    Point(usize),
    #[error("header declares {declared} points, found {found}")]
    Count { declared: usize, found: usize },
}

pub fn parse_wkpc(text: &str) -> Result<Vec<[f64; 3]>, WkpcError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(WkpcError::Header)?;
    let mut parts = header.split(' ');
    if parts.next() != Some("WKPC") || parts.next() != Some("1") {
        return Err(WkpcError::Header);
    }
    let declared: usize = parts.next().and_then(|c| c.parse().ok()).ok_or(WkpcError::Header)?;
    let mut points = Vec::with_capacity(declared);
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line.split(' ').filter_map(|t| t.parse().ok()).collect();
        if v.len() != 3 {
            return Err(WkpcError::Point(i + 2));
        }
        points.push([v[0], v[1], v[2]]);
    }
    if points.len() != declared {
        return Err(WkpcError::Count {
            declared,
            found: points.len(),
        });
    }
    Ok(points)
}
