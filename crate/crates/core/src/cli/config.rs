//! Run configuration file.
//!
//! ```json
//! {
//!   "chassis": {"wheel_circumference_m": 0.2, "track_width_m": 0.2, "wheel_speed_mps": 0.1},
//!   "sensors": [{"sensor_id": "co-1", "kind": "CO", "unit": "ppm",
//!                "sample_period_ms": 100, "filter": {"kind": "MovingAverage", "window": 4}}],
//!   "listen_addr": "127.0.0.1:8080",
//!   "tick_ms": 10,
//!   "seed": 7,
//!   "bearing_encoding": "byte"
//! }
//! ```
//!
//! Unknown keys anywhere are rejected. Errors carry the 1-based line of the
//! offending key.

use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::daps::{ActuatorDescriptor, Registry, RegistryError, SensorDescriptor};
use crate::deadreckoning::BearingEncoding;
use crate::kinematics::{ChassisError, ChassisParams};
use crate::peripherals::encoder::DEFAULT_SEGMENTS_PER_REV;
use crate::sim::SimConfig;

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_TICK_MS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChassisConfig {
    #[serde(default = "d_circumference")]
    pub wheel_circumference_m: f64,
    #[serde(default = "d_track")]
    pub track_width_m: f64,
    #[serde(default = "d_speed")]
    pub wheel_speed_mps: f64,
    #[serde(default = "d_segments")]
    pub segments_per_rev: u32,
}

fn d_circumference() -> f64 {
    ChassisParams::default().wheel_circumference_m
}
fn d_track() -> f64 {
    ChassisParams::default().track_width_m
}
fn d_speed() -> f64 {
    ChassisParams::default().wheel_speed_mps
}
fn d_segments() -> u32 {
    DEFAULT_SEGMENTS_PER_REV
}
fn d_listen() -> String {
    DEFAULT_LISTEN_ADDR.into()
}
fn d_tick() -> u64 {
    DEFAULT_TICK_MS
}

impl Default for ChassisConfig {
    fn default() -> Self {
        Self {
            wheel_circumference_m: d_circumference(),
            track_width_m: d_track(),
            wheel_speed_mps: d_speed(),
            segments_per_rev: d_segments(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub chassis: ChassisConfig,
    #[serde(default)]
    pub sensors: Vec<SensorDescriptor>,
    #[serde(default)]
    pub actuators: Vec<ActuatorDescriptor>,
    #[serde(default = "d_listen")]
    pub listen_addr: String,
    #[serde(default = "d_tick")]
    pub tick_ms: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bearing_encoding: BearingEncoding,
    /// Jitter compass readings by up to half a byte quantum.
    #[serde(default)]
    pub compass_noise: bool,
    /// Built web panel; absent means headless.
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
    /// Sample store directory when serving interactively.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// 1-based line of the `nth` (0-based) occurrence of `needle`, or 1.
pub(crate) fn line_of(text: &str, needle: &str, nth: usize) -> usize {
    text.match_indices(needle)
        .nth(nth)
        .map(|(i, _)| text[..i].matches('\n').count() + 1)
        .unwrap_or(1)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError { line: e.line().max(1), message: e.to_string() })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::from_json(&text)
    }

    /// Semantic checks; `text` is only used to locate the offending key.
    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let at = |needle: &str, nth: usize, message: String| ConfigError { line: line_of(text, needle, nth), message };
        if self.tick_ms == 0 {
            return Err(at("\"tick_ms\"", 0, "tick_ms must be at least 1".into()));
        }
        if let Err(e) = self.chassis_params().validate() {
            let key = match &e {
                ChassisError::NotPositive { field, .. } => format!("\"{field}\""),
                ChassisError::Segments => "\"segments_per_rev\"".into(),
                ChassisError::Resolution(_) => "\"chassis\"".into(),
            };
            return Err(at(&key, 0, format!("chassis: {e}")));
        }
        if self.listen_addr.parse::<SocketAddr>().is_err() {
            return Err(at("\"listen_addr\"", 0, format!("listen_addr {:?} is not host:port", self.listen_addr)));
        }
        let mut registry = Registry::new(self.tick_ms);
        for (i, s) in self.sensors.iter().enumerate() {
            let located = |e: RegistryError| at("\"sensor_id\"", i, format!("sensors[{i}]: {e}"));
            registry.register_sensor(s.clone()).map_err(located)?;
        }
        for (i, a) in self.actuators.iter().enumerate() {
            registry
                .register_actuator(a.clone())
                .map_err(|e| at("\"actuator_id\"", i, format!("actuators[{i}]: {e}")))?;
        }
        Ok(())
    }

    pub fn chassis_params(&self) -> ChassisParams {
        ChassisParams {
            wheel_circumference_m: self.chassis.wheel_circumference_m,
            track_width_m: self.chassis.track_width_m,
            wheel_speed_mps: self.chassis.wheel_speed_mps,
            tick_s: self.tick_ms as f64 / 1000.0,
            segments_per_rev: self.chassis.segments_per_rev,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            chassis: self.chassis_params(),
            tick_ms: self.tick_ms,
            seed: self.seed,
            bearing_encoding: self.bearing_encoding,
            compass_noise: self.compass_noise,
            sensors: self.sensors.clone(),
            actuators: self.actuators.clone(),
        }
    }
}
