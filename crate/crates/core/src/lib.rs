//! Desk-scale simulator and teleoperation service for a two-wheel robot with
//! an I²C compass, slotted-wheel encoders and a pluggable sensor bay.
//!
//! The crate is organised bottom-up:
//!
//! - [`peripherals`]: H-bridge/Port 0 mapping, CMPS03 compass codecs and bus
//!   transactions, wheel encoders.
//! - [`kinematics`]: differential-drive ground truth and the CSV trace format.
//! - [`deadreckoning`]: path segments, vector-sum integration, trip logs.
//! - [`daps`]: sensor registry, filters, synthetic sources and the sample store.
//! - [`sim`]: one tick of the whole robot.
//! - [`service`]: tick loop thread, driver token and the HTTP API.
//! - [`cli`]: run configs, scenario scripts and footprint export.
//!
//! The `examples/` directory has a runnable program for each of these.

pub mod angle;
pub mod cli;
pub mod daps;
pub mod deadreckoning;
pub mod kinematics;
pub mod peripherals;
pub mod protocol;
pub mod service;
pub mod sim;
