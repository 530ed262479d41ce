//! L293D-style dual H-bridge driven from microcontroller Port 0.
//!
//! | IN1 | IN2 | Motor   |
//! |-----|-----|---------|
//! | 0   | 0   | Stop    |
//! | 1   | 0   | Forward |
//! | 0   | 1   | Reverse |
//! | 1   | 1   | Stop    |
//!
//! Forward is clockwise rotation of the motor shaft, which moves the wheel
//! forward. On Port 0 the direction of each channel comes from a single pin
//! (bit 0 left, bit 1 right) and an inverter supplies the complementary input,
//! so a per-channel enable line (bit 2 left, bit 3 right) is needed to stop a
//! motor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bit position of the left motor direction pin on Port 0.
pub const LEFT_DIR_BIT: u8 = 0;
/// Bit position of the right motor direction pin on Port 0.
pub const RIGHT_DIR_BIT: u8 = 1;
/// Bit position of the left channel enable line.
pub const LEFT_ENABLE_BIT: u8 = 2;
/// Bit position of the right channel enable line.
pub const RIGHT_ENABLE_BIT: u8 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PortError {
    #[error("motor channels are wired to port 0, got port {0}")]
    WrongPort(u8),
}

/// Logic level on one pin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bit {
    Low,
    High,
}

impl Bit {
    pub fn from_bool(high: bool) -> Self {
        if high {
            Bit::High
        } else {
            Bit::Low
        }
    }

    pub fn is_high(self) -> bool {
        self == Bit::High
    }

    pub fn inverted(self) -> Self {
        match self {
            Bit::Low => Bit::High,
            Bit::High => Bit::Low,
        }
    }
}

/// The two input lines of one H-bridge channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HBridgeInputs {
    pub in1: Bit,
    pub in2: Bit,
}

impl HBridgeInputs {
    pub const fn new(in1: Bit, in2: Bit) -> Self {
        Self { in1, in2 }
    }

    /// All four input combinations, in (IN1, IN2) binary order.
    pub const ALL: [HBridgeInputs; 4] = [
        HBridgeInputs::new(Bit::Low, Bit::Low),
        HBridgeInputs::new(Bit::Low, Bit::High),
        HBridgeInputs::new(Bit::High, Bit::Low),
        HBridgeInputs::new(Bit::High, Bit::High),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotorState {
    Forward,
    Reverse,
    Stop,
}

impl MotorState {
    /// Direction of wheel travel: +1, 0 or -1.
    pub fn sign(self) -> i8 {
        match self {
            MotorState::Forward => 1,
            MotorState::Reverse => -1,
            MotorState::Stop => 0,
        }
    }
}

pub fn hbridge_decode(inputs: HBridgeInputs) -> MotorState {
    match (inputs.in1, inputs.in2) {
        (Bit::High, Bit::Low) => MotorState::Forward,
        (Bit::Low, Bit::High) => MotorState::Reverse,
        // equal potentials on both motor terminals
        (Bit::Low, Bit::Low) | (Bit::High, Bit::High) => MotorState::Stop,
    }
}

/// An 8-bit microcontroller I/O port snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortBits {
    pub port_id: u8,
    pub bits: u8,
}

impl PortBits {
    pub fn port0(bits: u8) -> Self {
        Self { port_id: 0, bits }
    }

    /// Builds a port value from individual pins, pin 0 first.
    pub fn from_pins(port_id: u8, pins: [Bit; 8]) -> Self {
        let bits = pins
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, b)| acc | ((b.is_high() as u8) << i));
        Self { port_id, bits }
    }

    pub fn pin(&self, index: u8) -> Bit {
        Bit::from_bool(self.bits >> index & 1 == 1)
    }
}

fn channel_state(port: &PortBits, dir_bit: u8, enable_bit: u8) -> MotorState {
    if !port.pin(enable_bit).is_high() {
        return MotorState::Stop;
    }
    let dir = port.pin(dir_bit);
    // 74LS04 inverter feeds IN2
    hbridge_decode(HBridgeInputs::new(dir, dir.inverted()))
}

/// Decodes Port 0 into the (left, right) motor states.
pub fn port_to_motor_states(port: PortBits) -> Result<(MotorState, MotorState), PortError> {
    if port.port_id != 0 {
        return Err(PortError::WrongPort(port.port_id));
    }
    Ok((
        channel_state(&port, LEFT_DIR_BIT, LEFT_ENABLE_BIT),
        channel_state(&port, RIGHT_DIR_BIT, RIGHT_ENABLE_BIT),
    ))
}

/// The Port 0 value the wheel controller writes for a pair of motor states.
///
/// Stopped channels have their enable line low and their direction pin low.
pub fn motor_states_to_port(left: MotorState, right: MotorState) -> PortBits {
    fn channel(state: MotorState, dir_bit: u8, enable_bit: u8) -> u8 {
        match state {
            MotorState::Forward => (1 << dir_bit) | (1 << enable_bit),
            MotorState::Reverse => 1 << enable_bit,
            MotorState::Stop => 0,
        }
    }
    PortBits::port0(
        channel(left, LEFT_DIR_BIT, LEFT_ENABLE_BIT) | channel(right, RIGHT_DIR_BIT, RIGHT_ENABLE_BIT),
    )
}
