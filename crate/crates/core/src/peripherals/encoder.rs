//! Opto-coupler wheel rotation counter.
//!
//! A slotted disc passes in front of the sensor and the Schmitt trigger output
//! drives an external interrupt. The interrupt fires on rising edges only, so
//! `segments_per_rev` rising edges make one full revolution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::hbridge::Bit;

pub const DEFAULT_SEGMENTS_PER_REV: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("wheel circumference must be positive and finite, got {0}")]
    Circumference(f64),
    #[error("segments per revolution must be at least 1")]
    Segments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WheelId {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderState {
    pub wheel_id: WheelId,
    pub counts: u64,
    pub segments_per_rev: u32,
    pub last_edge: Bit,
}

impl EncoderState {
    pub fn new(wheel_id: WheelId, segments_per_rev: u32) -> Result<Self, EncoderError> {
        if segments_per_rev == 0 {
            return Err(EncoderError::Segments);
        }
        Ok(Self { wheel_id, counts: 0, segments_per_rev, last_edge: Bit::Low })
    }
}

/// Feeds one sensor level into the counter.
pub fn encoder_edge(mut state: EncoderState, new_level: Bit) -> EncoderState {
    if state.last_edge == Bit::Low && new_level == Bit::High {
        state.counts += 1;
    }
    state.last_edge = new_level;
    state
}

pub fn counts_to_distance(counts: u64, wheel_circumference_m: f64, segments_per_rev: u32) -> Result<f64, EncoderError> {
    if !(wheel_circumference_m.is_finite() && wheel_circumference_m > 0.0) {
        return Err(EncoderError::Circumference(wheel_circumference_m));
    }
    if segments_per_rev == 0 {
        return Err(EncoderError::Segments);
    }
    Ok(counts as f64 / segments_per_rev as f64 * wheel_circumference_m)
}
