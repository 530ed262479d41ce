//! Data acquisition end to end: register sensors, sample synthetic sources,
//! smooth with a moving average, persist, and read back after a restart.
//!
//!     cargo run --example daps_pipeline [STORE_DIR]

use deskbot::daps::{
    synthetic_source, Durability, FilterSpec, FilterState, Registry, SampleStore, SensorDescriptor, SensorKind, SensorSample,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("deskbot-daps"));
    let _ = std::fs::remove_dir_all(&dir);

    let mut registry = Registry::new(10);
    let specs = [("co-1", SensorKind::CO, "ppm", 4), ("temp-1", SensorKind::Temperature, "C", 1), ("smoke-1", SensorKind::Smoke, "%", 8)];
    for (id, kind, unit, window) in specs {
        let filter = if window > 1 { FilterSpec::moving_average(window) } else { FilterSpec::NONE };
        registry.register_sensor(SensorDescriptor { sensor_id: id.into(), kind, unit: unit.into(), sample_period_ms: 100, filter })?;
    }
    for i in 3..7 {
        let extra = SensorDescriptor {
            sensor_id: format!("extra-{i}"),
            kind: SensorKind::Custom,
            unit: "-".into(),
            sample_period_ms: 100,
            filter: FilterSpec::NONE,
        };
        if let Err(e) = registry.register_sensor(extra) {
            println!("extra-{i}: {e}");
        }
    }

    {
        let store = SampleStore::open(&dir, Durability::Flush)?;
        for s in registry.sensors() {
            store.ensure_sensor(&s.sensor_id)?;
            let mut filter = FilterState::new(s.filter)?;
            for k in 0..20u64 {
                let raw = synthetic_source(s.kind, 7, k);
                let filtered = filter.push(raw);
                store.append(&SensorSample { sensor_id: s.sensor_id.clone(), t_ms: k * s.sample_period_ms, raw, filtered })?;
            }
        }
    }

    let store = SampleStore::open(&dir, Durability::Flush)?;
    for id in store.sensor_ids() {
        let window = store.query(&id, 500, 900)?;
        println!("{id}: {} stored, 500..=900 ms:", store.len(&id)?);
        for s in window {
            println!("    t={:>4} raw {:>8.3} filtered {:>8.3}", s.t_ms, s.raw, s.filtered);
        }
    }
    println!("store: {}", dir.display());
    Ok(())
}
