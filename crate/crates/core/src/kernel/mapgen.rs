//! Seeded random map generation for tests, benchmarks and the CLI.

use alloc::string::String;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{unit_draw, GridMap};

/// Random walled map of the given outer size with one start and one
/// reachable goal. Interior cells become walls with probability
/// `wall_density`. Retries internally until the result is valid.
pub fn random_map(seed: u64, width: usize, height: usize, wall_density: f64) -> GridMap {
    assert!(width >= 3 && height >= 3, "maps are at least 3x3");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(m) = attempt(&mut rng, width, height, wall_density) {
            return m;
        }
    }
}

fn attempt(rng: &mut ChaCha8Rng, width: usize, height: usize, density: f64) -> Option<GridMap> {
    let mut grid = alloc::vec![b'#'; width * height];
    let mut free = alloc::vec::Vec::new();
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            if unit_draw(rng) >= density {
                grid[y * width + x] = b'.';
                free.push(y * width + x);
            }
        }
    }
    if free.len() < 2 {
        return None;
    }
    let s = free[(rng.next_u64() % free.len() as u64) as usize];
    let g = free[(rng.next_u64() % free.len() as u64) as usize];
    if s == g {
        return None;
    }
    grid[s] = b'S';
    grid[g] = b'G';
    let mut text = String::with_capacity((width + 1) * height);
    for row in grid.chunks(width) {
        text.extend(row.iter().map(|&b| b as char));
        text.push('\n');
    }
    GridMap::parse(&text).ok()
}
