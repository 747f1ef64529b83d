//! Small shared helpers: 2D vectors, angle wrapping, seed mixing.

use serde::{Deserialize, Serialize};

/// A point or displacement in the 2D arena, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn translate(self, delta: Vec2) -> Vec2 {
        Vec2::new(self.x + delta.x, self.y + delta.y)
    }

    /// Bearing of `other` as seen from `self`, in radians.
    pub fn bearing_to(self, other: Vec2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = theta - two_pi * ((theta + std::f64::consts::PI) / two_pi).floor();
    // floor() lands us in [-pi, pi); map the open end onto pi.
    if wrapped <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        wrapped
    }
}

/// Writes `bytes` to `path` atomically: temp file in the same directory,
/// then rename. Interrupted writers never leave a truncated file behind.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write as _;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// splitmix64 step; the workhorse for deriving seeds and hashing plans.
///
/// Stable by construction (unlike `DefaultHasher`), so seeds derived from
/// it never change across compiler or std releases.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `word` into a running splitmix64 hash.
pub fn mix_u64(acc: u64, word: u64) -> u64 {
    splitmix64(acc ^ word.wrapping_mul(0xff51_afd7_ed55_8ccd))
}

/// Folds raw bytes into a running splitmix64 hash.
pub fn mix_bytes(mut acc: u64, bytes: &[u8]) -> u64 {
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        acc = mix_u64(acc, u64::from_le_bytes(word));
    }
    mix_u64(acc, bytes.len() as u64)
}
