//! Sensor and actuator slots of a DAPS package.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::filter::{FilterError, FilterSpec};

/// Hardware capacity of the main unit.
pub const MAX_SENSORS: usize = 6;
pub const MAX_ACTUATORS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("sensor capacity of {MAX_SENSORS} reached")]
    SensorCapacity,
    #[error("actuator capacity of {MAX_ACTUATORS} reached")]
    ActuatorCapacity,
    #[error("sensor id {0:?} already registered")]
    DuplicateSensor(String),
    #[error("actuator id {0:?} already registered")]
    DuplicateActuator(String),
    #[error("unknown sensor {0:?}")]
    UnknownSensor(String),
    #[error("actuator channel {0} outside 0..{MAX_ACTUATORS}")]
    ChannelRange(i64),
    #[error("actuator channel {0} already taken")]
    ChannelTaken(u8),
    #[error("sensor id {0:?} must be 1-64 characters of [A-Za-z0-9_-]")]
    BadId(String),
    #[error("sample period {period_ms} ms is shorter than the {tick_ms} ms tick")]
    PeriodTooShort { period_ms: u64, tick_ms: u64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    CO,
    NO,
    Temperature,
    Humidity,
    Smoke,
    Custom,
}

impl SensorKind {
    pub const ALL: [SensorKind; 6] =
        [SensorKind::CO, SensorKind::NO, SensorKind::Temperature, SensorKind::Humidity, SensorKind::Smoke, SensorKind::Custom];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorDescriptor {
    pub sensor_id: String,
    pub kind: SensorKind,
    pub unit: String,
    pub sample_period_ms: u64,
    pub filter: FilterSpec,
}

pub(crate) fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorDescriptor {
    pub actuator_id: String,
    pub channel: u8,
}

/// Checks an externally supplied channel number.
pub fn actuator_channel(channel: i64) -> Result<u8, RegistryError> {
    if (0..MAX_ACTUATORS as i64).contains(&channel) {
        Ok(channel as u8)
    } else {
        Err(RegistryError::ChannelRange(channel))
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    tick_ms: u64,
    sensors: Vec<SensorDescriptor>,
    actuators: Vec<ActuatorDescriptor>,
    actuator_values: [i64; MAX_ACTUATORS],
}

impl Registry {
    pub fn new(tick_ms: u64) -> Self {
        Self { tick_ms, sensors: Vec::new(), actuators: Vec::new(), actuator_values: [0; MAX_ACTUATORS] }
    }

    pub fn sensors(&self) -> &[SensorDescriptor] {
        &self.sensors
    }

    pub fn sensor(&self, id: &str) -> Option<&SensorDescriptor> {
        self.sensors.iter().find(|s| s.sensor_id == id)
    }

    pub fn actuators(&self) -> &[ActuatorDescriptor] {
        &self.actuators
    }

    pub fn register_sensor(&mut self, desc: SensorDescriptor) -> Result<(), RegistryError> {
        if !valid_id(&desc.sensor_id) {
            return Err(RegistryError::BadId(desc.sensor_id));
        }
        if self.sensor(&desc.sensor_id).is_some() {
            return Err(RegistryError::DuplicateSensor(desc.sensor_id));
        }
        if self.sensors.len() >= MAX_SENSORS {
            return Err(RegistryError::SensorCapacity);
        }
        if desc.sample_period_ms < self.tick_ms {
            return Err(RegistryError::PeriodTooShort { period_ms: desc.sample_period_ms, tick_ms: self.tick_ms });
        }
        desc.filter.validate()?;
        self.sensors.push(desc);
        Ok(())
    }

    pub fn unregister_sensor(&mut self, id: &str) -> Result<SensorDescriptor, RegistryError> {
        let pos = self
            .sensors
            .iter()
            .position(|s| s.sensor_id == id)
            .ok_or_else(|| RegistryError::UnknownSensor(id.to_string()))?;
        Ok(self.sensors.remove(pos))
    }

    pub fn register_actuator(&mut self, desc: ActuatorDescriptor) -> Result<(), RegistryError> {
        actuator_channel(desc.channel as i64)?;
        if self.actuators.iter().any(|a| a.actuator_id == desc.actuator_id) {
            return Err(RegistryError::DuplicateActuator(desc.actuator_id));
        }
        if self.actuators.len() >= MAX_ACTUATORS {
            return Err(RegistryError::ActuatorCapacity);
        }
        if self.actuators.iter().any(|a| a.channel == desc.channel) {
            return Err(RegistryError::ChannelTaken(desc.channel));
        }
        self.actuators.push(desc);
        Ok(())
    }

    pub fn unregister_actuator(&mut self, id: &str) -> Option<ActuatorDescriptor> {
        let pos = self.actuators.iter().position(|a| a.actuator_id == id)?;
        Some(self.actuators.remove(pos))
    }

    pub fn set_actuator(&mut self, channel: i64, value: i64) -> Result<(), RegistryError> {
        let ch = actuator_channel(channel)?;
        self.actuator_values[ch as usize] = value;
        Ok(())
    }

    pub fn actuator_values(&self) -> [i64; MAX_ACTUATORS] {
        self.actuator_values
    }
}
