//! Stable 64-bit FNV-1a hashing used for payload and frame digests.

use alloc::string::String;
use core::fmt::Write;

const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a 64 hasher.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Self(OFFSET_BASIS)
    }
}

impl Fnv64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) -> &mut Self {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(PRIME);
        }
        self
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    Fnv64::new().update(bytes).finish()
}

/// Lower-case, zero-padded 16 digit hex.
pub fn hex64(value: u64) -> String {
    let mut s = String::with_capacity(16);
    let _ = write!(s, "{value:016x}");
    s
}

pub fn digest_hex(bytes: &[u8]) -> String {
    hex64(fnv1a64(bytes))
}
