//! CMPS03 digital compass: bearing encodings, register file and I2C framing.
//!
//! The module reports one bearing in three wire formats:
//!
//! * an 8-bit byte, 0..=255 over the full circle (register 1),
//! * a 16-bit word in tenths of a degree, 0..=3599, big-endian (registers 2-3),
//! * a PWM pulse of 1 ms at 0° growing by 0.1 ms per degree.
//!
//! A register read is framed as `START, 0xC0, reg, RESTART, 0xC1, data.., STOP`
//! and the bus address auto-increments, so a 16-bit read at register 2 returns
//! the high byte followed by the low byte.

use std::fmt;

use thiserror::Error;

use crate::angle::normalize_degrees;

/// Bus address with the read/write bit low.
pub const WRITE_ADDR: u8 = 0xC0;
/// Bus address with the read/write bit high.
pub const READ_ADDR: u8 = 0xC1;

/// Firmware revision reported in register 0.
pub const FIRMWARE_REVISION: u8 = 15;

/// Pulse width at a bearing of 0°.
pub const PWM_MIN_MS: f64 = 1.0;
/// Pulse width grows by this many milliseconds per degree.
pub const PWM_MS_PER_DEG: f64 = 0.1;
/// Upper (exclusive) pulse bound: a bearing of 360° would wrap to 0°.
pub const PWM_LIMIT_MS: f64 = PWM_MIN_MS + 360.0 * PWM_MS_PER_DEG;

/// One byte step of the 8-bit encoding in degrees.
pub const BYTE_QUANTUM_DEG: f64 = 360.0 / 256.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompassError {
    #[error("heading must be finite, got {0}")]
    NonFinite(f64),
    #[error("pulse width {0} ms outside [1.0, 37.0)")]
    InvalidPulse(f64),
    #[error("register {0} not acknowledged")]
    Nack(u8),
    #[error("register {register} is {expected}-bit, requested a {requested}-bit read")]
    WidthMismatch { register: u8, expected: u8, requested: u8 },
}

/// A bearing together with its three wire encodings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompassReading {
    pub bearing_deg: f64,
    pub byte_form: u8,
    pub word_form: u16,
    pub pwm_ms: f64,
}

impl CompassReading {
    /// Bearing decoded back from the 8-bit form.
    pub fn byte_bearing(&self) -> f64 {
        self.byte_form as f64 * BYTE_QUANTUM_DEG
    }

    /// Bearing decoded back from the 16-bit form.
    pub fn word_bearing(&self) -> f64 {
        self.word_form as f64 / 10.0
    }
}

pub fn compass_sample(true_heading: f64) -> Result<CompassReading, CompassError> {
    if !true_heading.is_finite() {
        return Err(CompassError::NonFinite(true_heading));
    }
    let bearing_deg = normalize_degrees(true_heading);
    let byte_form = ((bearing_deg * 256.0 / 360.0).floor() as u32 % 256) as u8;
    // round half up
    let word_form = ((bearing_deg * 10.0 + 0.5).floor() as u32 % 3600) as u16;
    let pwm_ms = PWM_MIN_MS + bearing_deg * PWM_MS_PER_DEG;
    Ok(CompassReading { bearing_deg, byte_form, word_form, pwm_ms })
}

/// Inverse of the PWM encoding.
pub fn pwm_to_bearing(pulse_ms: f64) -> Result<f64, CompassError> {
    if !(PWM_MIN_MS..PWM_LIMIT_MS).contains(&pulse_ms) {
        return Err(CompassError::InvalidPulse(pulse_ms));
    }
    Ok((pulse_ms - PWM_MIN_MS) * 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterWidth {
    Bits8,
    Bits16,
}

impl RegisterWidth {
    pub fn bits(self) -> u8 {
        match self {
            RegisterWidth::Bits8 => 8,
            RegisterWidth::Bits16 => 16,
        }
    }

    fn len(self) -> usize {
        match self {
            RegisterWidth::Bits8 => 1,
            RegisterWidth::Bits16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CompassRegister {
    Revision = 0,
    BearingByte = 1,
    BearingWordHigh = 2,
    BearingWordLow = 3,
}

impl CompassRegister {
    pub fn from_addr(addr: u8) -> Option<Self> {
        match addr {
            0 => Some(Self::Revision),
            1 => Some(Self::BearingByte),
            2 => Some(Self::BearingWordHigh),
            3 => Some(Self::BearingWordLow),
            _ => None,
        }
    }

    pub fn width(self) -> RegisterWidth {
        match self {
            Self::BearingWordHigh => RegisterWidth::Bits16,
            _ => RegisterWidth::Bits8,
        }
    }
}

/// One symbol on the emulated bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusEvent {
    Start,
    AddressWrite(u8),
    Register(u8),
    RepeatedStart,
    AddressRead(u8),
    Data(u8),
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct I2cTransaction {
    pub write_addr: u8,
    pub read_addr: u8,
    pub register: u8,
    pub payload: Vec<u8>,
}

impl I2cTransaction {
    pub fn events(&self) -> Vec<BusEvent> {
        let mut ev = vec![
            BusEvent::Start,
            BusEvent::AddressWrite(self.write_addr),
            BusEvent::Register(self.register),
            BusEvent::RepeatedStart,
            BusEvent::AddressRead(self.read_addr),
        ];
        ev.extend(self.payload.iter().map(|b| BusEvent::Data(*b)));
        ev.push(BusEvent::Stop);
        ev
    }
}

/// Debug trace line, e.g. `S W:C0 R:01 Sr R:C1 80 P`.
impl fmt::Display for I2cTransaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S W:{:02X} R:{:02X} Sr R:{:02X}", self.write_addr, self.register, self.read_addr)?;
        for b in &self.payload {
            write!(f, " {b:02X}")?;
        }
        write!(f, " P")
    }
}

/// Register file of a compass module holding its latest reading.
#[derive(Debug, Clone)]
pub struct Cmps03 {
    reading: CompassReading,
}

impl Cmps03 {
    pub fn new(reading: CompassReading) -> Self {
        Self { reading }
    }

    pub fn at_heading(heading_deg: f64) -> Result<Self, CompassError> {
        compass_sample(heading_deg).map(Self::new)
    }

    pub fn update(&mut self, reading: CompassReading) {
        self.reading = reading;
    }

    pub fn reading(&self) -> &CompassReading {
        &self.reading
    }

    fn register_byte(&self, reg: CompassRegister) -> u8 {
        let [hi, lo] = self.reading.word_form.to_be_bytes();
        match reg {
            CompassRegister::Revision => FIRMWARE_REVISION,
            CompassRegister::BearingByte => self.reading.byte_form,
            CompassRegister::BearingWordHigh => hi,
            CompassRegister::BearingWordLow => lo,
        }
    }

    /// Reads `width` bits starting at `register`.
    pub fn i2c_read(&self, register: u8, width: RegisterWidth) -> Result<I2cTransaction, CompassError> {
        let reg = CompassRegister::from_addr(register).ok_or(CompassError::Nack(register))?;
        if reg.width() != width {
            return Err(CompassError::WidthMismatch {
                register,
                expected: reg.width().bits(),
                requested: width.bits(),
            });
        }
        let payload = (0..width.len() as u8)
            .map(|i| {
                let addr = register + i;
                // auto-increment stays inside the known map for every legal read
                self.register_byte(CompassRegister::from_addr(addr).expect("register in map"))
            })
            .collect();
        Ok(I2cTransaction { write_addr: WRITE_ADDR, read_addr: READ_ADDR, register, payload })
    }
}
