//! Position estimation from wheel counters and compass bearings alone.
//!
//! Motion is recorded leg by leg. A leg opens when the robot starts moving (or
//! the drive command changes) and captures the compass bearing and both
//! counters at that instant; it closes at the next stop or command change,
//! taking the mean of the two wheel distances as the leg length. The position
//! is the vector sum of all legs.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::bearing_unit;
use crate::kinematics::ChassisParams;
use crate::peripherals::compass::CompassReading;
use crate::peripherals::encoder::{counts_to_distance, EncoderError};

#[derive(Debug, Error)]
pub enum DeadReckoningError {
    #[error("a segment is already open")]
    AlreadyOpen,
    #[error("no segment is open")]
    NotOpen,
    #[error("{wheel} counter went backwards: {now} < {baseline}")]
    CountsRegressed { wheel: &'static str, baseline: u64, now: u64 },
    #[error("segment would end before it starts ({t_end} < {t_start})")]
    TimeRegressed { t_start: u64, t_end: u64 },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// Which wire encoding of the compass the estimator trusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BearingEncoding {
    #[default]
    Byte,
    Word,
    /// Unquantized bearing, for calibrating the estimator itself.
    Exact,
}

impl BearingEncoding {
    pub fn decode(self, reading: &CompassReading) -> f64 {
        match self {
            BearingEncoding::Byte => reading.byte_bearing(),
            BearingEncoding::Word => reading.word_bearing(),
            BearingEncoding::Exact => reading.bearing_deg,
        }
    }

    /// Worst-case bearing error introduced by the encoding, in degrees.
    pub fn quantum_deg(self) -> f64 {
        match self {
            BearingEncoding::Byte => 360.0 / 256.0,
            BearingEncoding::Word => 0.05,
            BearingEncoding::Exact => 0.0,
        }
    }
}

/// One straight leg. Serialized as a trip-log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSegment {
    #[serde(rename = "t0")]
    pub t_start_ms: u64,
    #[serde(rename = "t1")]
    pub t_end_ms: u64,
    #[serde(rename = "d_m")]
    pub distance_m: f64,
    pub bearing_deg: f64,
}

impl PathSegment {
    pub fn displacement(&self) -> (f64, f64) {
        let (e, n) = bearing_unit(self.bearing_deg);
        (self.distance_m * e, self.distance_m * n)
    }
}

/// Baseline captured when a segment opens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenSegment {
    pub bearing_deg: f64,
    pub counts_l: u64,
    pub counts_r: u64,
    pub t_start_ms: u64,
}

impl OpenSegment {
    pub fn new(bearing: &CompassReading, encoding: BearingEncoding, counts_l: u64, counts_r: u64, t_ms: u64) -> Self {
        Self { bearing_deg: encoding.decode(bearing), counts_l, counts_r, t_start_ms: t_ms }
    }

    pub fn close(self, counts_l: u64, counts_r: u64, params: &ChassisParams, t_ms: u64) -> Result<PathSegment, DeadReckoningError> {
        let delta = |wheel, baseline, now| {
            if now < baseline {
                Err(DeadReckoningError::CountsRegressed { wheel, baseline, now })
            } else {
                Ok(now - baseline)
            }
        };
        let dl = delta("left", self.counts_l, counts_l)?;
        let dr = delta("right", self.counts_r, counts_r)?;
        if t_ms < self.t_start_ms {
            return Err(DeadReckoningError::TimeRegressed { t_start: self.t_start_ms, t_end: t_ms });
        }
        let c = params.wheel_circumference_m;
        let n = params.segments_per_rev;
        let distance_m = (counts_to_distance(dl, c, n)? + counts_to_distance(dr, c, n)?) / 2.0;
        Ok(PathSegment { t_start_ms: self.t_start_ms, t_end_ms: t_ms, distance_m, bearing_deg: self.bearing_deg })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PositionEstimate {
    pub x_m: f64,
    pub y_m: f64,
    pub total_distance_m: f64,
    pub net_displacement_m: f64,
    pub segments: Vec<PathSegment>,
}

pub fn integrate(segments: &[PathSegment]) -> PositionEstimate {
    let (mut x, mut y, mut total) = (0.0, 0.0, 0.0);
    for s in segments {
        let (dx, dy) = s.displacement();
        x += dx;
        y += dy;
        total += s.distance_m;
    }
    PositionEstimate {
        x_m: x,
        y_m: y,
        total_distance_m: total,
        net_displacement_m: x.hypot(y),
        segments: segments.to_vec(),
    }
}

/// Polyline through the trip origin and every segment end point.
pub fn footprints(estimate: &PositionEstimate) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(estimate.segments.len() + 1);
    let (mut x, mut y) = (0.0, 0.0);
    out.push((x, y));
    for s in &estimate.segments {
        let (dx, dy) = s.displacement();
        x += dx;
        y += dy;
        out.push((x, y));
    }
    out
}

/// Segment bookkeeping for one trip.
#[derive(Debug, Clone, Default)]
pub struct DeadReckoner {
    encoding: BearingEncoding,
    open: Option<OpenSegment>,
    segments: Vec<PathSegment>,
}

impl DeadReckoner {
    pub fn new(encoding: BearingEncoding) -> Self {
        Self { encoding, ..Self::default() }
    }

    pub fn encoding(&self) -> BearingEncoding {
        self.encoding
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    pub fn open_segment(&self) -> Option<&OpenSegment> {
        self.open.as_ref()
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn segment_open(&mut self, bearing: &CompassReading, counts: (u64, u64), t_ms: u64) -> Result<(), DeadReckoningError> {
        if self.open.is_some() {
            return Err(DeadReckoningError::AlreadyOpen);
        }
        self.open = Some(OpenSegment::new(bearing, self.encoding, counts.0, counts.1, t_ms));
        Ok(())
    }

    pub fn segment_close(&mut self, counts: (u64, u64), params: &ChassisParams, t_ms: u64) -> Result<PathSegment, DeadReckoningError> {
        let token = self.open.ok_or(DeadReckoningError::NotOpen)?;
        let seg = token.close(counts.0, counts.1, params, t_ms)?;
        self.open = None;
        self.segments.push(seg);
        Ok(seg)
    }

    /// Starts a new trip at the current position.
    pub fn reset(&mut self) {
        self.open = None;
        self.segments.clear();
    }

    /// Estimate over closed segments only.
    pub fn estimate(&self) -> PositionEstimate {
        integrate(&self.segments)
    }

    /// Estimate including the still-open leg measured up to `counts`.
    pub fn live_estimate(&self, counts: (u64, u64), params: &ChassisParams, t_ms: u64) -> Result<PositionEstimate, DeadReckoningError> {
        match self.open {
            None => Ok(self.estimate()),
            Some(token) => {
                let mut segs = self.segments.clone();
                segs.push(token.close(counts.0, counts.1, params, t_ms)?);
                Ok(integrate(&segs))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TripLogError {
    #[error("trip log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_trip_log<W: Write>(mut out: W, segments: &[PathSegment]) -> io::Result<()> {
    for s in segments {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a JSON-lines trip log. Blank lines are skipped.
pub fn read_trip_log<R: BufRead>(input: R) -> Result<Vec<PathSegment>, TripLogError> {
    let mut segments = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| TripLogError::Parse { line: i + 1, message };
        let seg: PathSegment = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if !(seg.distance_m.is_finite() && seg.distance_m >= 0.0) {
            return Err(parse_err(format!("distance {} must be a non-negative number", seg.distance_m)));
        }
        if !(seg.bearing_deg.is_finite() && (0.0..360.0).contains(&seg.bearing_deg)) {
            return Err(parse_err(format!("bearing {} outside [0, 360)", seg.bearing_deg)));
        }
        if seg.t_end_ms < seg.t_start_ms {
            return Err(parse_err("t1 precedes t0".into()));
        }
        segments.push(seg);
    }
    Ok(segments)
}
