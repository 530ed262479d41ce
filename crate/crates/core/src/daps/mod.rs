//! Data acquisition and processing: pluggable sensors, software filtering and
//! local sample persistence.

pub mod filter;
pub mod registry;
pub mod source;
pub mod store;

pub use filter::{filter_apply, FilterError, FilterKind, FilterSpec, FilterState};
pub use registry::{ActuatorDescriptor, Registry, RegistryError, SensorDescriptor, SensorKind, MAX_ACTUATORS, MAX_SENSORS};
pub use source::{synthetic_source, SyntheticSource};
pub use store::{Durability, SampleStore, SensorSample, StoreError};

/// Where a sensor's raw values come from.
///
/// Real drivers implement this; the simulator uses [`SyntheticSource`].
pub trait SensorSource: Send {
    fn read(&mut self, t_ms: u64) -> f64;
}

impl SensorSource for SyntheticSource {
    fn read(&mut self, _t_ms: u64) -> f64 {
        self.next_value()
    }
}
