//! Seeded stand-ins for physical sensors.
//!
//! Each source is a bounded random walk that reflects off the edges of a
//! plausible range for its kind.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::registry::SensorKind;

/// Value range of a synthetic source, in the sensor's unit.
pub fn plausible_range(kind: SensorKind) -> (f64, f64) {
    match kind {
        SensorKind::CO => (0.0, 50.0),
        SensorKind::NO => (0.0, 5.0),
        SensorKind::Temperature => (15.0, 35.0),
        SensorKind::Humidity => (20.0, 90.0),
        SensorKind::Smoke => (0.0, 100.0),
        SensorKind::Custom => (0.0, 1.0),
    }
}

fn kind_salt(kind: SensorKind) -> u64 {
    match kind {
        SensorKind::CO => 0x11,
        SensorKind::NO => 0x22,
        SensorKind::Temperature => 0x33,
        SensorKind::Humidity => 0x44,
        SensorKind::Smoke => 0x55,
        SensorKind::Custom => 0x66,
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSource {
    lo: f64,
    hi: f64,
    value: f64,
    rng: ChaCha8Rng,
}

impl SyntheticSource {
    pub fn new(kind: SensorKind, seed: u64) -> Self {
        let (lo, hi) = plausible_range(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(8) ^ kind_salt(kind));
        let value = lo + (hi - lo) * rng.random_range(0.25..0.75);
        Self { lo, hi, value, rng }
    }

    /// Current value, then advance one step.
    pub fn next_value(&mut self) -> f64 {
        let out = self.value;
        let span = self.hi - self.lo;
        let mut v = self.value + span * 0.02 * self.rng.random_range(-1.0..=1.0);
        if v > self.hi {
            v = 2.0 * self.hi - v;
        }
        if v < self.lo {
            v = 2.0 * self.lo - v;
        }
        self.value = v.clamp(self.lo, self.hi);
        out
    }
}

/// Value of the `(kind, seed)` series at step `t`.
pub fn synthetic_source(kind: SensorKind, seed: u64, t: u64) -> f64 {
    let mut src = SyntheticSource::new(kind, seed);
    for _ in 0..t {
        src.next_value();
    }
    src.next_value()
}

/// Stable 64-bit FNV-1a, used to derive per-sensor seeds from ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}
