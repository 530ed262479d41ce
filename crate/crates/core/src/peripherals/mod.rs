//! Emulated microcontroller-facing hardware.

pub mod compass;
pub mod encoder;
pub mod hbridge;

pub use compass::{compass_sample, pwm_to_bearing, Cmps03, CompassError, CompassReading, I2cTransaction, RegisterWidth};
pub use encoder::{counts_to_distance, encoder_edge, EncoderError, EncoderState, WheelId};
pub use hbridge::{hbridge_decode, motor_states_to_port, port_to_motor_states, Bit, HBridgeInputs, MotorState, PortBits, PortError};
