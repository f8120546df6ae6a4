//! Single-channel observation rasters and their portable encoding.
//!
//! Encoding: 8-byte header of two big-endian `u32` (width, height) followed
//! by the raw row-major pixels.

use alloc::vec::Vec;

pub const FRAME_HEADER_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame declares {width}x{height} but carries {actual} pixels")]
    LengthMismatch {
        width: u32,
        height: u32,
        actual: usize,
    },
    #[error("frame payload shorter than the {FRAME_HEADER_LEN}-byte header")]
    TruncatedHeader,
    #[error("frame dimensions must be non-zero")]
    ZeroDimension,
}

/// Row-major grayscale raster. `pixels.len() == width * height` always holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationFrame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ObservationFrame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::ZeroDimension);
        }
        if (width as usize).checked_mul(height as usize) != Some(pixels.len()) {
            return Err(FrameError::LengthMismatch {
                width,
                height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, FrameError> {
        Self::new(
            width,
            height,
            alloc::vec![value; width as usize * height as usize],
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: u32, y: u32) -> Option<u8> {
        if x < self.width && y < self.height {
            Some(self.pixels[(y * self.width + x) as usize])
        } else {
            None
        }
    }

    /// Nearest-neighbour enlargement: each source pixel becomes a
    /// `scale`x`scale` block.
    pub fn upscale(&self, scale: u32) -> Result<Self, FrameError> {
        if scale == 0 {
            return Err(FrameError::ZeroDimension);
        }
        if scale == 1 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width * scale, self.height * scale);
        let mut out = Vec::with_capacity(w as usize * h as usize);
        for y in 0..h {
            let row = (y / scale * self.width) as usize;
            out.extend((0..w).map(|x| self.pixels[row + (x / scale) as usize]));
        }
        Self::new(w, h, out)
    }
}

pub fn encode_frame(frame: &ObservationFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + frame.pixels.len());
    out.extend_from_slice(&frame.width.to_be_bytes());
    out.extend_from_slice(&frame.height.to_be_bytes());
    out.extend_from_slice(&frame.pixels);
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<ObservationFrame, FrameError> {
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(FrameError::TruncatedHeader);
    }
    let width = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let height = u32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    ObservationFrame::new(width, height, bytes[FRAME_HEADER_LEN..].to_vec())
}
