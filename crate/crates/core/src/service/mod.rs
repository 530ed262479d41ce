//! The networked control service: tick loop, driver token and HTTP API.

pub mod driver;
pub mod http;
pub mod tickloop;

pub use driver::{DriverGuard, DriverLock};
pub use http::{router, serve, DEFAULT_STREAM_PERIOD_MS, DRIVER_TOKEN_HEADER};
pub use tickloop::{ControlHandle, ControlService, LoopOptions, Pacing, ServiceError};
