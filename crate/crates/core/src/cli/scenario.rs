//! Scripted, reproducible runs.
//!
//! A scenario file lists commands with the time they should be issued:
//!
//! ```json
//! {"steps": [
//!   {"at_ms": 0,    "command": {"kind": "Drive", "drive": "Forward"}},
//!   {"at_ms": 2000, "command": {"kind": "Drive", "drive": "Stop"}}
//! ]}
//! ```
//!
//! A step runs at tick `ceil(at_ms / tick_ms)`. The runner goes through the
//! same HTTP API a remote operator would use, with the tick loop paced
//! manually, and stops after the tick of the last step.
//!
//! Files written to the output directory:
//!
//! | file             | content                                                |
//! |------------------|--------------------------------------------------------|
//! | `trace.csv`      | ground-truth trace, one row per tick                   |
//! | `trip.jsonl`     | dead-reckoning segments                                |
//! | `footprints.csv` | footprint polyline and `total,net` summary             |
//! | `acks.jsonl`     | `{"at_ms","kind","applied_tick"}` per step             |
//! | `frames.jsonl`   | telemetry frames, from the first `Subscribe` step on   |
//! | `samples/`       | sensor sample store (replaced on every run)            |

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower::ServiceExt;

use super::config::{line_of, RunConfig};
use super::export::write_footprints;
use crate::daps::{Durability, SampleStore, StoreError};
use crate::deadreckoning::{integrate, write_trip_log, PathSegment, PositionEstimate};
use crate::protocol::{CommandMessage, TelemetryFrame};
use crate::service::{router, ControlHandle, ControlService, LoopOptions, Pacing, DRIVER_TOKEN_HEADER};
use crate::sim::{SimError, Simulation};

/// Ticks run per manual step while no command is due.
const BATCH_TICKS: u64 = 128;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("step at {at_ms} ms ({kind}) rejected with {status}: {error}")]
    Rejected { at_ms: u64, kind: &'static str, status: u16, error: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<StoreError> for ScenarioError {
    fn from(e: StoreError) -> Self {
        ScenarioError::Sim(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioStep {
    pub at_ms: u64,
    pub command: CommandMessage,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub steps: Vec<ScenarioStep>,
}

impl ScenarioScript {
    pub fn new(steps: Vec<ScenarioStep>) -> Result<Self, ScenarioError> {
        let script = Self { steps };
        script.check(None)?;
        Ok(script)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let script: ScenarioScript = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Script { line: e.line().max(1), message: e.to_string() })?;
        script.check(Some(text))?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Script { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::from_json(&text)
    }

    fn check(&self, text: Option<&str>) -> Result<(), ScenarioError> {
        for (i, pair) in self.steps.windows(2).enumerate() {
            if pair[1].at_ms < pair[0].at_ms {
                return Err(ScenarioError::Script {
                    line: text.map_or(0, |t| line_of(t, "\"at_ms\"", i + 1)),
                    message: format!("at_ms {} precedes the previous step's {}", pair[1].at_ms, pair[0].at_ms),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = String::from("{\"steps\": [\n");
        for (i, step) in self.steps.iter().enumerate() {
            let sep = if i + 1 < self.steps.len() { "," } else { "" };
            s += &format!("  {}{sep}\n", serde_json::to_string(step).expect("step serializes"));
        }
        s += "]}\n";
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub at_ms: u64,
    pub kind: String,
    pub applied_tick: u64,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub dir: PathBuf,
    pub ticks: u64,
    pub acks: Vec<Ack>,
    pub segments: Vec<PathSegment>,
    pub estimate: PositionEstimate,
    pub last_frame: Option<TelemetryFrame>,
}

impl ScenarioOutput {
    pub fn trace_path(&self) -> PathBuf {
        self.dir.join("trace.csv")
    }

    pub fn trip_log_path(&self) -> PathBuf {
        self.dir.join("trip.jsonl")
    }
}

/// Runs `script` against a fresh simulation built from `config`.
pub fn run_scenario(config: &RunConfig, script: &ScenarioScript, out_dir: &Path) -> Result<ScenarioOutput, ScenarioError> {
    std::fs::create_dir_all(out_dir)?;
    let samples = out_dir.join("samples");
    if samples.exists() {
        std::fs::remove_dir_all(&samples)?;
    }
    let store = SampleStore::open(&samples, Durability::Flush)?;
    let sim = Simulation::new(config.sim_config(), store)?;
    let trace = BufWriter::new(File::create(out_dir.join("trace.csv"))?);
    let service = ControlService::start(
        sim,
        LoopOptions { pacing: Pacing::Manual, trace: Some(Box::new(trace)), frame_buffer: 2 * BATCH_TICKS as usize },
    );
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    let driven = runtime.block_on(drive(service.handle(), script, config.tick_ms, out_dir));
    let mut sim = service.shutdown()?;
    let (acks, last_frame) = driven?;

    let segments = sim.finish()?;
    let mut trip = BufWriter::new(File::create(out_dir.join("trip.jsonl"))?);
    write_trip_log(&mut trip, &segments)?;
    trip.flush()?;
    let estimate = integrate(&segments);
    let mut fp = BufWriter::new(File::create(out_dir.join("footprints.csv"))?);
    write_footprints(&mut fp, &estimate)?;
    fp.flush()?;
    let mut ack_log = BufWriter::new(File::create(out_dir.join("acks.jsonl"))?);
    for a in &acks {
        writeln!(ack_log, "{}", serde_json::to_string(a).expect("ack serializes"))?;
    }
    ack_log.flush()?;

    Ok(ScenarioOutput { dir: out_dir.to_path_buf(), ticks: sim.next_tick(), acks, segments, estimate, last_frame })
}

struct Client {
    app: Router,
    token: String,
}

impl Client {
    async fn request(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Body) -> axum::response::Response {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(DRIVER_TOKEN_HEADER, t);
        }
        let req = req.body(body).expect("valid request");
        match app.clone().oneshot(req).await {
            Ok(resp) => resp,
            Err(never) => match never {},
        }
    }

    async fn json(resp: axum::response::Response) -> Result<(StatusCode, serde_json::Value), ScenarioError> {
        let status = resp.status();
        let bytes = resp
            .into_body()
            .collect()
            .await
            .map_err(|e| ScenarioError::Protocol(e.to_string()))?
            .to_bytes();
        let value = serde_json::from_slice(&bytes).map_err(|e| ScenarioError::Protocol(e.to_string()))?;
        Ok((status, value))
    }
}

struct FrameReader {
    body: Body,
    buf: Vec<u8>,
}

impl FrameReader {
    async fn next(&mut self) -> Result<TelemetryFrame, ScenarioError> {
        loop {
            if let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
                let line: Vec<u8> = self.buf.drain(..=pos).collect();
                return serde_json::from_slice(&line).map_err(|e| ScenarioError::Protocol(e.to_string()));
            }
            match self.body.frame().await {
                Some(Ok(f)) => {
                    if let Ok(data) = f.into_data() {
                        self.buf.extend_from_slice(&data);
                    }
                }
                Some(Err(e)) => return Err(ScenarioError::Protocol(e.to_string())),
                None => return Err(ScenarioError::Protocol("telemetry stream ended".into())),
            }
        }
    }
}

async fn drive(
    handle: ControlHandle,
    script: &ScenarioScript,
    tick_ms: u64,
    out_dir: &Path,
) -> Result<(Vec<Ack>, Option<TelemetryFrame>), ScenarioError> {
    let app = router(handle.clone(), None);
    let (status, claimed) =
        Client::json(Client::request(&app, Method::POST, "/api/driver/claim", None, Body::empty()).await).await?;
    let token = match claimed.get("token").and_then(|t| t.as_str()) {
        Some(t) if status == StatusCode::OK => t.to_string(),
        _ => return Err(ScenarioError::Protocol(format!("driver claim failed: {claimed}"))),
    };
    let client = Client { app, token };
    let stream_uri = format!("/api/telemetry/stream?period_ms={tick_ms}");
    let resp = Client::request(&client.app, Method::GET, &stream_uri, None, Body::empty()).await;
    if resp.status() != StatusCode::OK {
        return Err(ScenarioError::Protocol(format!("telemetry stream refused with {}", resp.status())));
    }
    let mut frames = FrameReader { body: resp.into_body(), buf: Vec::new() };
    let mut frame_log: Option<BufWriter<File>> = None;
    let mut acks = Vec::new();
    let mut last_frame = None;

    let mut next_tick = 0u64;
    let mut i = 0;
    while i < script.steps.len() {
        let due = script.steps[i].at_ms.div_ceil(tick_ms);
        // run idle ticks up to the step's tick
        while next_tick < due {
            let n = (due - next_tick).min(BATCH_TICKS);
            handle.step(n).await.map_err(|e| ScenarioError::Protocol(e.to_string()))?;
            for _ in 0..n {
                log_frame(&mut frame_log, &frames.next().await?)?;
            }
            next_tick += n;
        }

        let mut pending = Vec::new();
        let mut drive_after = None;
        while i < script.steps.len() && script.steps[i].at_ms.div_ceil(tick_ms) == due {
            let step = script.steps[i];
            let before = handle.queued();
            let app = client.app.clone();
            let token = client.token.clone();
            let body = serde_json::to_vec(&step.command).expect("command serializes");
            let task = tokio::spawn(async move {
                let resp = Client::request(&app, Method::POST, "/api/command", Some(&token), Body::from(body)).await;
                Client::json(resp).await
            });
            while handle.queued() == before && !task.is_finished() {
                tokio::task::yield_now().await;
            }
            if let CommandMessage::Drive(d) = step.command {
                drive_after = Some(d);
            }
            if step.command == CommandMessage::Subscribe && frame_log.is_none() {
                frame_log = Some(BufWriter::new(File::create(out_dir.join("frames.jsonl"))?));
            }
            pending.push((step, task));
            i += 1;
        }

        handle.step(1).await.map_err(|e| ScenarioError::Protocol(e.to_string()))?;
        let frame = frames.next().await?;
        next_tick += 1;
        for (step, task) in pending {
            let (status, body) = task.await.map_err(|e| ScenarioError::Protocol(e.to_string()))??;
            if status != StatusCode::OK {
                return Err(ScenarioError::Rejected {
                    at_ms: step.at_ms,
                    kind: step.command.kind(),
                    status: status.as_u16(),
                    error: body.get("error").and_then(|e| e.as_str()).unwrap_or_default().to_string(),
                });
            }
            let applied_tick = body.get("applied_tick").and_then(|t| t.as_u64()).unwrap_or(u64::MAX);
            if applied_tick != frame.tick {
                return Err(ScenarioError::Protocol(format!(
                    "step at {} ms acknowledged at tick {applied_tick} but first frame after it is tick {}",
                    step.at_ms, frame.tick
                )));
            }
            acks.push(Ack { at_ms: step.at_ms, kind: step.command.kind().to_string(), applied_tick });
        }
        if let Some(d) = drive_after {
            if frame.drive_state != d {
                return Err(ScenarioError::Protocol(format!(
                    "frame {} shows {} after {} was applied",
                    frame.tick, frame.drive_state, d
                )));
            }
        }
        log_frame(&mut frame_log, &frame)?;
        last_frame = Some(frame);
    }

    if let Some(mut log) = frame_log {
        log.flush()?;
    }
    Client::request(&client.app, Method::POST, "/api/driver/release", Some(&client.token), Body::empty()).await;
    Ok((acks, last_frame))
}

fn log_frame(log: &mut Option<BufWriter<File>>, frame: &TelemetryFrame) -> io::Result<()> {
    match log {
        Some(w) => w.write_all(frame.to_json_line().as_bytes()),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::DriveCommand;

    fn step(at_ms: u64, d: DriveCommand) -> ScenarioStep {
        ScenarioStep { at_ms, command: CommandMessage::Drive(d) }
    }

    #[test]
    fn script_round_trip_and_order() {
        let s = ScenarioScript::new(vec![step(0, DriveCommand::Forward), step(100, DriveCommand::Stop)]).unwrap();
        assert_eq!(ScenarioScript::from_json(&s.to_json()).unwrap(), s);
        let text = "{\"steps\": [\n{\"at_ms\": 50, \"command\": {\"kind\": \"TripReset\"}},\n{\"at_ms\": 10, \"command\": {\"kind\": \"TripReset\"}}\n]}";
        match ScenarioScript::from_json(text) {
            Err(ScenarioError::Script { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match ScenarioScript::from_json("{\"steps\": [\n{\"at_ms\": 0, \"command\": {\"kind\": \"Jump\"}}]}") {
            Err(ScenarioError::Script { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("Jump"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forward_then_stop() {
        let dir = tempfile::tempdir().unwrap();
        let script = ScenarioScript::new(vec![
            step(0, DriveCommand::Forward),
            ScenarioStep { at_ms: 500, command: CommandMessage::Subscribe },
            step(1000, DriveCommand::Stop),
        ])
        .unwrap();
        let out = run_scenario(&RunConfig::default(), &script, dir.path()).unwrap();
        assert_eq!(out.ticks, 101);
        assert_eq!(out.acks.iter().map(|a| a.applied_tick).collect::<Vec<_>>(), vec![0, 50, 100]);
        assert_eq!(out.segments.len(), 1);
        assert!((out.estimate.y_m - 0.1).abs() < 1e-12);
        let trace = std::fs::read_to_string(out.trace_path()).unwrap();
        assert_eq!(trace.lines().count(), 1 + 101);
        let frames = std::fs::read_to_string(dir.path().join("frames.jsonl")).unwrap();
        assert_eq!(frames.lines().count(), 51);
    }

    #[test]
    fn rejected_step_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let script = ScenarioScript::new(vec![ScenarioStep {
            at_ms: 20,
            command: CommandMessage::ActuatorSet { channel: 9, value: 1 },
        }])
        .unwrap();
        match run_scenario(&RunConfig::default(), &script, dir.path()) {
            Err(ScenarioError::Rejected { status: 422, at_ms: 20, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
