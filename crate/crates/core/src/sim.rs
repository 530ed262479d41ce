//! The authoritative simulation state advanced one tick at a time.
//!
//! Within tick `k` (time `k * tick_ms`) the order is fixed:
//!
//! 1. the compass samples the current heading,
//! 2. queued commands are applied (drive changes open/close dead-reckoning legs),
//! 3. due sensors are sampled, filtered and stored,
//! 4. the telemetry frame and trace row for time `k * tick_ms` are taken,
//! 5. the motors run for one tick through the Port 0 / H-bridge path.
//!
//! A command applied in tick `k` is therefore visible in frame `k`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::daps::registry::{actuator_channel, ActuatorDescriptor, Registry, RegistryError, SensorDescriptor};
use crate::daps::source::{fnv1a, SyntheticSource};
use crate::daps::{FilterState, SampleStore, SensorSample, SensorSource, StoreError};
use crate::deadreckoning::{footprints, BearingEncoding, DeadReckoner, DeadReckoningError, PathSegment};
use crate::kinematics::{drive_to_motor_states, ChassisError, ChassisParams, DriveCommand, TraceRow, World};
use crate::peripherals::compass::{compass_sample, CompassError, CompassReading, BYTE_QUANTUM_DEG};
use crate::peripherals::hbridge::{motor_states_to_port, port_to_motor_states, PortError};
use crate::protocol::{CommandMessage, TelemetryFrame};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("tick_ms must be at least 1")]
    TickPeriod,
    #[error(transparent)]
    Chassis(#[from] ChassisError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    DeadReckoning(#[from] DeadReckoningError),
    #[error(transparent)]
    Compass(#[from] CompassError),
    #[error(transparent)]
    Port(#[from] PortError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// `tick_s` is overwritten from `tick_ms`.
    pub chassis: ChassisParams,
    pub tick_ms: u64,
    pub seed: u64,
    pub bearing_encoding: BearingEncoding,
    pub compass_noise: bool,
    pub sensors: Vec<SensorDescriptor>,
    pub actuators: Vec<ActuatorDescriptor>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            chassis: ChassisParams::default(),
            tick_ms: 10,
            seed: 0,
            bearing_encoding: BearingEncoding::Byte,
            compass_noise: false,
            sensors: Vec::new(),
            actuators: Vec::new(),
        }
    }
}

/// Rejects commands whose arguments can never be applied.
pub fn check_command(cmd: &CommandMessage) -> Result<(), RegistryError> {
    if let CommandMessage::ActuatorSet { channel, .. } = cmd {
        actuator_channel(*channel)?;
    }
    Ok(())
}

struct SensorChannel {
    desc: SensorDescriptor,
    source: Box<dyn SensorSource>,
    filter: FilterState,
    next_due_ms: u64,
    last_filtered: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub frame: TelemetryFrame,
    pub trace: TraceRow,
}

pub struct Simulation {
    world: World,
    reckoner: DeadReckoner,
    registry: Registry,
    store: SampleStore,
    channels: Vec<SensorChannel>,
    drive: DriveCommand,
    tick: u64,
    tick_ms: u64,
    noise: Option<ChaCha8Rng>,
}

impl Simulation {
    pub fn new(config: SimConfig, store: SampleStore) -> Result<Self, SimError> {
        if config.tick_ms == 0 {
            return Err(SimError::TickPeriod);
        }
        let chassis = ChassisParams { tick_s: config.tick_ms as f64 / 1000.0, ..config.chassis };
        let world = World::new(chassis)?;
        let mut registry = Registry::new(config.tick_ms);
        let mut channels = Vec::new();
        for desc in config.sensors {
            registry.register_sensor(desc.clone())?;
            store.ensure_sensor(&desc.sensor_id)?;
            let source = SyntheticSource::new(desc.kind, config.seed ^ fnv1a(desc.sensor_id.as_bytes()));
            channels.push(SensorChannel {
                filter: FilterState::new(desc.filter).map_err(RegistryError::from)?,
                source: Box::new(source),
                desc,
                next_due_ms: 0,
                last_filtered: None,
            });
        }
        for a in config.actuators {
            registry.register_actuator(a)?;
        }
        let noise = config.compass_noise.then(|| ChaCha8Rng::seed_from_u64(config.seed ^ 0xC0_C1));
        Ok(Self {
            world,
            reckoner: DeadReckoner::new(config.bearing_encoding),
            registry,
            store,
            channels,
            drive: DriveCommand::Stop,
            tick: 0,
            tick_ms: config.tick_ms,
            noise,
        })
    }

    /// Replaces the synthetic source of a sensor with another driver.
    pub fn attach_source(&mut self, sensor_id: &str, source: Box<dyn SensorSource>) -> Result<(), RegistryError> {
        let ch = self
            .channels
            .iter_mut()
            .find(|c| c.desc.sensor_id == sensor_id)
            .ok_or_else(|| RegistryError::UnknownSensor(sensor_id.to_string()))?;
        ch.source = source;
        Ok(())
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn reckoner(&self) -> &DeadReckoner {
        &self.reckoner
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn store(&self) -> &SampleStore {
        &self.store
    }

    pub fn drive(&self) -> DriveCommand {
        self.drive
    }

    /// Index of the next tick to run.
    pub fn next_tick(&self) -> u64 {
        self.tick
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    fn now_ms(&self) -> u64 {
        self.tick * self.tick_ms
    }

    fn read_compass(&mut self) -> Result<CompassReading, CompassError> {
        let heading = self.world.pose().heading_deg;
        let jitter = match self.noise.as_mut() {
            Some(rng) => rng.random_range(-0.5..0.5) * BYTE_QUANTUM_DEG,
            None => 0.0,
        };
        compass_sample(heading + jitter)
    }

    fn apply(&mut self, cmd: &CommandMessage, compass: &CompassReading) -> Result<(), SimError> {
        let now = self.now_ms();
        let counts = self.world.counts();
        match *cmd {
            CommandMessage::Drive(next) if next != self.drive => {
                if self.reckoner.is_open() {
                    self.reckoner.segment_close(counts, self.world.params(), now)?;
                }
                if next.is_moving() {
                    self.reckoner.segment_open(compass, counts, now)?;
                }
                self.drive = next;
            }
            CommandMessage::Drive(_) => {}
            CommandMessage::TripReset => {
                self.reckoner.reset();
                if self.drive.is_moving() {
                    self.reckoner.segment_open(compass, counts, now)?;
                }
            }
            CommandMessage::ActuatorSet { channel, value } => self.registry.set_actuator(channel, value)?,
            CommandMessage::Subscribe => {}
        }
        Ok(())
    }

    fn sample_sensors(&mut self) -> Result<(), SimError> {
        let now = self.now_ms();
        for ch in &mut self.channels {
            if now < ch.next_due_ms {
                continue;
            }
            let raw = ch.source.read(now);
            let filtered = ch.filter.push(raw);
            self.store.append(&SensorSample { sensor_id: ch.desc.sensor_id.clone(), t_ms: now, raw, filtered })?;
            ch.last_filtered = Some(filtered);
            ch.next_due_ms = now + ch.desc.sample_period_ms;
        }
        Ok(())
    }

    /// Runs one tick, applying `commands` at its start.
    pub fn tick(&mut self, commands: &[CommandMessage]) -> Result<TickOutput, SimError> {
        let compass = self.read_compass()?;
        for cmd in commands {
            check_command(cmd)?;
            self.apply(cmd, &compass)?;
        }
        self.sample_sensors()?;

        let now = self.now_ms();
        let counts = self.world.counts();
        let estimate = self.reckoner.live_estimate(counts, self.world.params(), now)?;
        let sensors: BTreeMap<String, f64> = self
            .channels
            .iter()
            .filter_map(|c| c.last_filtered.map(|v| (c.desc.sensor_id.clone(), v)))
            .collect();
        let frame = TelemetryFrame {
            tick: self.tick,
            t_ms: now,
            bearing_deg: compass.bearing_deg,
            bearing_byte: compass.byte_form,
            pose_est: (estimate.x_m, estimate.y_m),
            footprints: footprints(&estimate),
            total_distance_m: estimate.total_distance_m,
            net_displacement_m: estimate.net_displacement_m,
            sensors,
            drive_state: self.drive,
        };
        let trace = TraceRow {
            t_ms: now,
            pose: self.world.pose(),
            counts_l: counts.0,
            counts_r: counts.1,
            bearing_byte: compass.byte_form,
            cmd: self.drive,
        };

        let (left, right) = drive_to_motor_states(self.drive);
        let (left, right) = port_to_motor_states(motor_states_to_port(left, right))?;
        self.world.advance(left, right);
        self.tick += 1;
        Ok(TickOutput { frame, trace })
    }

    /// Closes any open leg and returns the trip's segments.
    pub fn finish(&mut self) -> Result<Vec<PathSegment>, SimError> {
        if self.reckoner.is_open() {
            let now = self.now_ms();
            self.reckoner.segment_close(self.world.counts(), self.world.params(), now)?;
        }
        Ok(self.reckoner.segments().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daps::{Durability, FilterSpec, SensorKind};

    fn sim(config: SimConfig) -> (Simulation, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        (Simulation::new(config, store).unwrap(), dir)
    }

    fn drive(d: DriveCommand) -> CommandMessage {
        CommandMessage::Drive(d)
    }

    #[test]
    fn forward_one_second() {
        let (mut s, _d) = sim(SimConfig::default());
        s.tick(&[drive(DriveCommand::Forward)]).unwrap();
        for _ in 1..100 {
            s.tick(&[]).unwrap();
        }
        let out = s.tick(&[drive(DriveCommand::Stop)]).unwrap();
        assert_eq!(out.frame.t_ms, 1000);
        assert_eq!(out.trace.counts_l, 4);
        // 0.1 m = 4 counts exactly
        assert!(out.frame.pose_est.0.abs() < 1e-12);
        assert!((out.frame.pose_est.1 - 0.1).abs() < 1e-12);
        assert_eq!(s.finish().unwrap().len(), 1);
    }

    #[test]
    fn command_visible_in_same_frame() {
        let (mut s, _d) = sim(SimConfig::default());
        let out = s.tick(&[drive(DriveCommand::TurnLeft)]).unwrap();
        assert_eq!(out.frame.drive_state, DriveCommand::TurnLeft);
        assert_eq!(out.trace.cmd, DriveCommand::TurnLeft);
        s.tick(&[]).unwrap();
        // left wheel is stopped during a left turn
        let out = s.tick(&[]).unwrap();
        assert!(out.trace.pose.heading_deg > 180.0);
        assert_eq!(s.world().travelled_nm()[0], 0);
    }

    #[test]
    fn repeated_stop_is_idempotent() {
        let (mut s, _d) = sim(SimConfig::default());
        s.tick(&[drive(DriveCommand::Stop), drive(DriveCommand::Stop)]).unwrap();
        assert!(!s.reckoner().is_open());
        assert!(s.finish().unwrap().is_empty());
    }

    #[test]
    fn trip_reset_restarts_origin() {
        let (mut s, _d) = sim(SimConfig::default());
        s.tick(&[drive(DriveCommand::Forward)]).unwrap();
        for _ in 0..50 {
            s.tick(&[]).unwrap();
        }
        let out = s.tick(&[CommandMessage::TripReset]).unwrap();
        assert_eq!(out.frame.footprints, vec![(0.0, 0.0), (0.0, 0.0)]);
        assert!(s.reckoner().is_open());
    }

    #[test]
    fn actuator_range_checked() {
        let (mut s, _d) = sim(SimConfig::default());
        assert!(s.tick(&[CommandMessage::ActuatorSet { channel: 9, value: 1 }]).is_err());
        s.tick(&[CommandMessage::ActuatorSet { channel: 2, value: 5 }]).unwrap();
        assert_eq!(s.registry().actuator_values()[2], 5);
    }

    #[test]
    fn sensors_sampled_on_period() {
        let config = SimConfig {
            sensors: vec![SensorDescriptor {
                sensor_id: "temp".into(),
                kind: SensorKind::Temperature,
                unit: "C".into(),
                sample_period_ms: 50,
                filter: FilterSpec::moving_average(3),
            }],
            ..SimConfig::default()
        };
        let (mut s, _d) = sim(config);
        let mut frames = Vec::new();
        for _ in 0..20 {
            frames.push(s.tick(&[]).unwrap().frame);
        }
        assert!(frames.iter().all(|f| f.sensors.contains_key("temp")));
        let stored = s.store().query("temp", 0, u64::MAX).unwrap();
        let ts: Vec<u64> = stored.iter().map(|x| x.t_ms).collect();
        assert_eq!(ts, vec![0, 50, 100, 150]);
    }

    #[test]
    fn compass_noise_is_seeded() {
        let config = SimConfig { compass_noise: true, seed: 5, ..SimConfig::default() };
        let (mut a, _d1) = sim(config.clone());
        let (mut b, _d2) = sim(config);
        for _ in 0..50 {
            let fa = a.tick(&[]).unwrap().frame;
            let fb = b.tick(&[]).unwrap().frame;
            assert_eq!(fa.bearing_deg.to_bits(), fb.bearing_deg.to_bits());
        }
    }
}
