//! Ground-truth world for a two-wheel differential-drive chassis with a
//! passive caster.
//!
//! Wheel travel per tick is fixed to whole nanometres so that the pose and the
//! encoder accumulators are driven by the same quantity: the arc a wheel has
//! travelled always equals `counts * segment + residual` exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::{bearing_unit, normalize_degrees};
use crate::peripherals::encoder::{encoder_edge, EncoderState, WheelId, DEFAULT_SEGMENTS_PER_REV};
use crate::peripherals::hbridge::{Bit, MotorState};

const NM_PER_M: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChassisError {
    #[error("{field} must be positive and finite, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("segments_per_rev must be at least 1")]
    Segments,
    #[error("{0} is too small to resolve in nanometres")]
    Resolution(&'static str),
}

/// Planar pose. `x` grows East, `y` grows North, heading is clockwise from North.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading_deg: f64) -> Self {
        Self { x, y, heading_deg: normalize_degrees(heading_deg) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChassisParams {
    pub wheel_circumference_m: f64,
    pub track_width_m: f64,
    pub wheel_speed_mps: f64,
    pub tick_s: f64,
    pub segments_per_rev: u32,
}

impl Default for ChassisParams {
    /// One revolution is 8 counts and 0.2 m; a 10 ms tick moves a wheel 1 mm.
    fn default() -> Self {
        Self {
            wheel_circumference_m: 0.2,
            track_width_m: 0.2,
            wheel_speed_mps: 0.1,
            tick_s: 0.01,
            segments_per_rev: DEFAULT_SEGMENTS_PER_REV,
        }
    }
}

impl ChassisParams {
    pub fn validate(&self) -> Result<(), ChassisError> {
        for (field, value) in [
            ("wheel_circumference_m", self.wheel_circumference_m),
            ("track_width_m", self.track_width_m),
            ("wheel_speed_mps", self.wheel_speed_mps),
            ("tick_s", self.tick_s),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ChassisError::NotPositive { field, value });
            }
        }
        if self.segments_per_rev == 0 {
            return Err(ChassisError::Segments);
        }
        if self.segment_nm() == 0 {
            return Err(ChassisError::Resolution("segment length"));
        }
        if self.tick_arc_nm() == 0 {
            return Err(ChassisError::Resolution("per-tick wheel travel"));
        }
        Ok(())
    }

    /// Arc length between two encoder counts, in nanometres.
    pub fn segment_nm(&self) -> u64 {
        (self.wheel_circumference_m * NM_PER_M / self.segments_per_rev as f64).round() as u64
    }

    /// Distance an active wheel covers in one tick, in nanometres.
    pub fn tick_arc_nm(&self) -> u64 {
        (self.wheel_speed_mps * self.tick_s * NM_PER_M).round() as u64
    }

    pub fn tick_arc_m(&self) -> f64 {
        self.tick_arc_nm() as f64 / NM_PER_M
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DriveCommand {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    #[default]
    Stop,
}

impl DriveCommand {
    pub const ALL: [DriveCommand; 5] = [
        DriveCommand::Forward,
        DriveCommand::Backward,
        DriveCommand::TurnLeft,
        DriveCommand::TurnRight,
        DriveCommand::Stop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DriveCommand::Forward => "Forward",
            DriveCommand::Backward => "Backward",
            DriveCommand::TurnLeft => "TurnLeft",
            DriveCommand::TurnRight => "TurnRight",
            DriveCommand::Stop => "Stop",
        }
    }

    pub fn is_moving(self) -> bool {
        self != DriveCommand::Stop
    }
}

impl fmt::Display for DriveCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DriveCommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DriveCommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown drive command {s:?}"))
    }
}

/// Turning stops the wheel on the inside of the turn.
pub fn drive_to_motor_states(cmd: DriveCommand) -> (MotorState, MotorState) {
    use MotorState::*;
    match cmd {
        DriveCommand::Forward => (Forward, Forward),
        DriveCommand::Backward => (Reverse, Reverse),
        DriveCommand::TurnLeft => (Stop, Forward),
        DriveCommand::TurnRight => (Forward, Stop),
        DriveCommand::Stop => (Stop, Stop),
    }
}

/// Advances the pose by one tick.
///
/// Each wheel moves `±tick_arc` or not at all. The chassis follows the exact
/// arc about the instantaneous centre of rotation, which for a single active
/// wheel is the stopped wheel and for opposed wheels is the chassis centre.
pub fn step(pose: Pose, left: MotorState, right: MotorState, params: &ChassisParams) -> Pose {
    let arc = params.tick_arc_m();
    let dl = left.sign() as f64 * arc;
    let dr = right.sign() as f64 * arc;
    let dc = (dl + dr) / 2.0;
    // counter-clockwise rotation in radians
    let dphi = (dr - dl) / params.track_width_m;

    if dphi == 0.0 {
        let (e, n) = bearing_unit(pose.heading_deg);
        return Pose { x: pose.x + dc * e, y: pose.y + dc * n, heading_deg: pose.heading_deg };
    }

    let (e, n) = bearing_unit(pose.heading_deg);
    // left normal of the heading
    let (lx, ly) = (-n, e);
    let radius = dc / dphi;
    let (cx, cy) = (pose.x + radius * lx, pose.y + radius * ly);
    let (rx, ry) = (pose.x - cx, pose.y - cy);
    let (s, c) = dphi.sin_cos();
    Pose {
        x: cx + rx * c - ry * s,
        y: cy + rx * s + ry * c,
        heading_deg: normalize_degrees(pose.heading_deg - dphi.to_degrees()),
    }
}

/// Per-wheel travel for one tick, in nanometres (unsigned: the disc has no
/// direction sense).
pub fn wheel_arcs_nm(left: MotorState, right: MotorState, params: &ChassisParams) -> [u64; 2] {
    let arc = params.tick_arc_nm();
    [left, right].map(|m| if m == MotorState::Stop { 0 } else { arc })
}

/// Converts wheel travel into encoder sensor levels.
///
/// Each full `segment_nm` consumed yields one High/Low pair; the remainder is
/// carried in `residual`.
pub fn emit_encoder_edges(arc_nm: [u64; 2], residual_nm: [u64; 2], segment_nm: u64) -> ([Vec<Bit>; 2], [u64; 2]) {
    let mut out_residual = [0; 2];
    let edges = [0, 1].map(|w| {
        let total = residual_nm[w] + arc_nm[w];
        let pairs = total / segment_nm;
        out_residual[w] = total % segment_nm;
        (0..pairs).flat_map(|_| [Bit::High, Bit::Low]).collect::<Vec<_>>()
    });
    (edges, out_residual)
}

/// Everything the tick loop needs about the physical robot.
#[derive(Debug, Clone)]
pub struct World {
    params: ChassisParams,
    pose: Pose,
    encoders: [EncoderState; 2],
    residual_nm: [u64; 2],
    travelled_nm: [u64; 2],
}

impl World {
    pub fn new(params: ChassisParams) -> Result<Self, ChassisError> {
        params.validate()?;
        let enc = |id| EncoderState::new(id, params.segments_per_rev).map_err(|_| ChassisError::Segments);
        Ok(Self {
            params,
            pose: Pose::default(),
            encoders: [enc(WheelId::Left)?, enc(WheelId::Right)?],
            residual_nm: [0; 2],
            travelled_nm: [0; 2],
        })
    }

    pub fn params(&self) -> &ChassisParams {
        &self.params
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    /// (left, right) encoder counts.
    pub fn counts(&self) -> (u64, u64) {
        (self.encoders[0].counts, self.encoders[1].counts)
    }

    pub fn residual_nm(&self) -> [u64; 2] {
        self.residual_nm
    }

    /// Ground-truth wheel travel since power-up.
    pub fn travelled_nm(&self) -> [u64; 2] {
        self.travelled_nm
    }

    pub fn advance(&mut self, left: MotorState, right: MotorState) {
        self.pose = step(self.pose, left, right, &self.params);
        let arcs = wheel_arcs_nm(left, right, &self.params);
        let (edges, residual) = emit_encoder_edges(arcs, self.residual_nm, self.params.segment_nm());
        self.residual_nm = residual;
        for w in 0..2 {
            self.travelled_nm[w] += arcs[w];
            for level in &edges[w] {
                self.encoders[w] = encoder_edge(self.encoders[w].clone(), *level);
            }
        }
    }
}

/// One row of the per-tick CSV trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t_ms: u64,
    pub pose: Pose,
    pub counts_l: u64,
    pub counts_r: u64,
    pub bearing_byte: u8,
    pub cmd: DriveCommand,
}

impl TraceRow {
    pub const HEADER: &'static str = "t_ms,x,y,heading_deg,counts_L,counts_R,bearing_byte,cmd";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.9},{:.9},{:.9},{},{},{},{}",
            self.t_ms, self.pose.x, self.pose.y, self.pose.heading_deg, self.counts_l, self.counts_r, self.bearing_byte, self.cmd
        )
    }
}
