//! Append-only per-sensor sample logs with an in-memory index.
//!
//! Each sensor writes `<dir>/<sensor_id>.jsonl`, one sample per line. A sample
//! is written to the file before it becomes visible to queries, and reopening
//! the directory rebuilds the index from the files.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::registry::valid_id;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown sensor {0:?}")]
    UnknownSensor(String),
    #[error("invalid sensor id {0:?}")]
    BadId(String),
    #[error("sample for {id:?} at t={t} is not after the previous sample at t={last}")]
    OutOfOrder { id: String, t: u64, last: u64 },
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("sample store I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSample {
    #[serde(rename = "id")]
    pub sensor_id: String,
    #[serde(rename = "t")]
    pub t_ms: u64,
    pub raw: f64,
    #[serde(rename = "filt")]
    pub filtered: f64,
}

/// How hard an append pushes data towards the disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// Handed to the OS; survives a process restart.
    #[default]
    Flush,
    /// `fsync`ed; survives power loss.
    Sync,
}

#[derive(Debug)]
struct SensorLog {
    file: Mutex<File>,
    samples: RwLock<Vec<SensorSample>>,
}

#[derive(Debug)]
struct Inner {
    dir: PathBuf,
    durability: Durability,
    logs: RwLock<BTreeMap<String, Arc<SensorLog>>>,
}

/// Cheap to clone; clones share the same logs.
#[derive(Debug, Clone)]
pub struct SampleStore {
    inner: Arc<Inner>,
}

impl SampleStore {
    /// Opens (creating if needed) a store directory and loads every log in it.
    pub fn open(dir: impl AsRef<Path>, durability: Durability) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let store = Self { inner: Arc::new(Inner { dir, durability, logs: RwLock::new(BTreeMap::new()) }) };
        let mut ids = Vec::new();
        for entry in fs::read_dir(&store.inner.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            if let Some(id) = path.file_stem().and_then(|s| s.to_str()) {
                if valid_id(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        for id in ids {
            store.ensure_sensor(&id)?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.inner.dir
    }

    fn path_for(&self, id: &str) -> PathBuf {
        self.inner.dir.join(format!("{id}.jsonl"))
    }

    /// Makes `id` known to the store, loading any samples already on disk.
    pub fn ensure_sensor(&self, id: &str) -> Result<(), StoreError> {
        if !valid_id(id) {
            return Err(StoreError::BadId(id.to_string()));
        }
        if self.inner.logs.read().expect("store index poisoned").contains_key(id) {
            return Ok(());
        }
        let path = self.path_for(id);
        let samples = if path.exists() { load(&path, id)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let log = Arc::new(SensorLog { file: Mutex::new(file), samples: RwLock::new(samples) });
        self.inner.logs.write().expect("store index poisoned").entry(id.to_string()).or_insert(log);
        Ok(())
    }

    pub fn sensor_ids(&self) -> Vec<String> {
        self.inner.logs.read().expect("store index poisoned").keys().cloned().collect()
    }

    fn log(&self, id: &str) -> Result<Arc<SensorLog>, StoreError> {
        self.inner
            .logs
            .read()
            .expect("store index poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSensor(id.to_string()))
    }

    /// Durably appends one sample. Returns only after the line is written.
    pub fn append(&self, sample: &SensorSample) -> Result<(), StoreError> {
        let log = self.log(&sample.sensor_id)?;
        let mut file = log.file.lock().expect("log file poisoned");
        if let Some(last) = log.samples.read().expect("log poisoned").last() {
            if sample.t_ms <= last.t_ms {
                return Err(StoreError::OutOfOrder { id: sample.sensor_id.clone(), t: sample.t_ms, last: last.t_ms });
            }
        }
        let mut line = serde_json::to_vec(sample).map_err(io::Error::other)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.flush()?;
        if self.inner.durability == Durability::Sync {
            file.sync_data()?;
        }
        log.samples.write().expect("log poisoned").push(sample.clone());
        Ok(())
    }

    /// Samples of `id` with `from_ms <= t <= to_ms`, in time order.
    pub fn query(&self, id: &str, from_ms: u64, to_ms: u64) -> Result<Vec<SensorSample>, StoreError> {
        let log = self.log(id)?;
        if from_ms > to_ms {
            return Ok(Vec::new());
        }
        let samples = log.samples.read().expect("log poisoned");
        let lo = samples.partition_point(|s| s.t_ms < from_ms);
        let hi = samples.partition_point(|s| s.t_ms <= to_ms);
        Ok(samples[lo..hi].to_vec())
    }

    pub fn len(&self, id: &str) -> Result<usize, StoreError> {
        Ok(self.log(id)?.samples.read().expect("log poisoned").len())
    }
}

fn load(path: &Path, id: &str) -> Result<Vec<SensorSample>, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: Vec<SensorSample> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| StoreError::Corrupt { path: path.to_path_buf(), line: i + 1, message };
        let s: SensorSample = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if s.sensor_id != id {
            return Err(corrupt(format!("sample belongs to {:?}", s.sensor_id)));
        }
        if out.last().is_some_and(|l| l.t_ms >= s.t_ms) {
            return Err(corrupt("timestamps not strictly increasing".into()));
        }
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, t: u64) -> SensorSample {
        SensorSample { sensor_id: id.into(), t_ms: t, raw: t as f64 * 0.5, filtered: t as f64 * 0.25 }
    }

    #[test]
    fn line_format() {
        let s = SensorSample { sensor_id: "co-1".into(), t_ms: 100, raw: 1.5, filtered: 1.25 };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"id":"co-1","t":100,"raw":1.5,"filt":1.25}"#);
    }

    #[test]
    fn round_trip_and_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        store.ensure_sensor("co-1").unwrap();
        for t in 1..=100 {
            store.append(&sample("co-1", t * 10)).unwrap();
        }
        let all = store.query("co-1", 0, u64::MAX).unwrap();
        assert_eq!(all.len(), 100);
        assert!(all.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
        assert_eq!(store.query("co-1", 200, 300).unwrap().len(), 11);
        assert!(store.query("co-1", 5000, 6000).unwrap().is_empty());
        assert!(store.query("co-1", 300, 200).unwrap().is_empty());
        assert!(matches!(store.query("nope", 0, 1), Err(StoreError::UnknownSensor(_))));
    }

    #[test]
    fn rejects_out_of_order_and_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        store.ensure_sensor("t").unwrap();
        store.append(&sample("t", 10)).unwrap();
        assert!(matches!(store.append(&sample("t", 10)), Err(StoreError::OutOfOrder { .. })));
        assert!(matches!(store.append(&sample("x", 10)), Err(StoreError::UnknownSensor(_))));
        assert!(matches!(store.ensure_sensor("a/b"), Err(StoreError::BadId(_))));
    }

    #[test]
    fn survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let written: Vec<_> = (1..=50).map(|t| sample("hum", t * 7)).collect();
        {
            let store = SampleStore::open(dir.path(), Durability::Sync).unwrap();
            store.ensure_sensor("hum").unwrap();
            for s in &written {
                store.append(s).unwrap();
            }
        }
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        assert_eq!(store.sensor_ids(), vec!["hum".to_string()]);
        assert_eq!(store.query("hum", 0, u64::MAX).unwrap(), written);
        store.append(&sample("hum", 1000)).unwrap();
        assert!(store.append(&sample("hum", 7)).is_err());
    }

    #[test]
    fn corrupt_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("co.jsonl"), "{\"id\":\"co\",\"t\":1,\"raw\":1,\"filt\":1}\ngarbage\n").unwrap();
        match SampleStore::open(dir.path(), Durability::Flush) {
            Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn concurrent_readers_see_prefixes() {
        let dir = tempfile::tempdir().unwrap();
        let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
        store.ensure_sensor("s").unwrap();
        let reader = {
            let store = store.clone();
            std::thread::spawn(move || {
                for _ in 0..200 {
                    let got = store.query("s", 0, u64::MAX).unwrap();
                    for (i, s) in got.iter().enumerate() {
                        assert_eq!(s.t_ms, i as u64 + 1);
                    }
                }
            })
        };
        for t in 1..=500 {
            store.append(&sample("s", t)).unwrap();
        }
        reader.join().unwrap();
    }
}
