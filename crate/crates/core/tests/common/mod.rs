//! Helpers shared by the integration suites and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use deskbot::cli::{RunConfig, ScenarioScript, ScenarioStep};
use deskbot::daps::{Durability, SampleStore};
use deskbot::deadreckoning::BearingEncoding;
use deskbot::kinematics::DriveCommand;
use deskbot::protocol::CommandMessage;
use deskbot::service::{router, ControlService, LoopOptions, Pacing, DRIVER_TOKEN_HEADER};
use deskbot::sim::{SimConfig, Simulation};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests/golden")
}

pub fn start(config: SimConfig, pacing: Pacing) -> (ControlService, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let store = SampleStore::open(dir.path(), Durability::Flush).unwrap();
    let sim = Simulation::new(config, store).unwrap();
    (ControlService::start(sim, LoopOptions { pacing, ..LoopOptions::default() }), dir)
}

pub async fn call(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: Vec<u8>) -> (StatusCode, Bytes) {
    let resp = send(app, method, uri, headers, body).await;
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

pub async fn send(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: Vec<u8>) -> axum::response::Response {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap()
}

/// Reads `n` newline-terminated lines from a streaming body.
pub async fn read_lines(body: &mut Body, n: usize) -> Result<Vec<String>, String> {
    let mut buf = Vec::new();
    let mut lines = Vec::new();
    while lines.len() < n {
        if let Some(pos) = buf.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = buf.drain(..=pos).collect();
            lines.push(String::from_utf8(line).map_err(|e| e.to_string())?.trim_end().to_string());
            continue;
        }
        match tokio::time::timeout(Duration::from_secs(10), body.frame()).await {
            Ok(Some(Ok(f))) => {
                if let Ok(d) = f.into_data() {
                    buf.extend_from_slice(&d);
                }
            }
            Ok(Some(Err(e))) => return Err(e.to_string()),
            Ok(None) => return Err(format!("stream ended after {} lines", lines.len())),
            Err(_) => return Err("timed out waiting for a frame".into()),
        }
    }
    Ok(lines)
}

// ---------------------------------------------------------------- goldens

pub fn golden_cases() -> Vec<PathBuf> {
    let mut cases: Vec<PathBuf> = std::fs::read_dir(golden_dir().join("protocol"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    cases.sort();
    cases
}

/// `$TOKEN` must equal the claimed token, `$HEX32` any 32-digit hex string,
/// `$ANY` anything.
fn matches(expected: &Value, actual: &Value, token: Option<&str>) -> bool {
    match (expected, actual) {
        (Value::String(e), _) if e == "$ANY" => true,
        (Value::String(e), Value::String(a)) if e == "$TOKEN" => Some(a.as_str()) == token,
        (Value::String(e), Value::String(a)) if e == "$HEX32" => {
            a.len() == 32 && a.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        }
        (Value::Object(e), Value::Object(a)) => {
            e.len() == a.len() && e.iter().all(|(k, v)| a.get(k).is_some_and(|av| matches(v, av, token)))
        }
        (Value::Array(e), Value::Array(a)) => e.len() == a.len() && e.iter().zip(a).all(|(x, y)| matches(x, y, token)),
        _ => expected == actual,
    }
}

/// Runs one golden request/response file against a fresh, manually paced service.
pub fn run_golden(path: &Path) -> Result<(), String> {
    let case: Value = serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| e.to_string())?)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    rt.block_on(run_golden_case(&case)).map_err(|e| format!("{}: {e}", path.file_name().unwrap().to_string_lossy()))
}

async fn run_golden_case(case: &Value) -> Result<(), String> {
    let config_text = case.get("config").map_or("{}".to_string(), |c| c.to_string());
    let config = RunConfig::from_json(&config_text).map_err(|e| e.to_string())?;
    let (svc, _dir) = start(config.sim_config(), Pacing::Manual);
    let handle = svc.handle();
    let ui_dir = case.get("ui_dir").and_then(Value::as_str).map(|d| manifest_dir().join(d));
    let app = router(handle.clone(), ui_dir);

    let token = if case.get("claim").and_then(Value::as_bool).unwrap_or(false) {
        Some(handle.driver().claim().ok_or("claim failed")?)
    } else {
        None
    };
    let ticks_before = case.get("ticks_before").and_then(Value::as_u64).unwrap_or(0);
    if ticks_before > 0 {
        handle.step(ticks_before).await.map_err(|e| e.to_string())?;
    }

    let req = &case["request"];
    let method: Method = req["method"].as_str().ok_or("request.method")?.parse().map_err(|_| "bad method")?;
    let uri = req["path"].as_str().ok_or("request.path")?.to_string();
    let mut headers: Vec<(String, String)> = Vec::new();
    if let Some(h) = req.get("headers").and_then(Value::as_object) {
        for (k, v) in h {
            let v = v.as_str().ok_or("header values are strings")?;
            let v = if v == "$TOKEN" { token.clone().ok_or("$TOKEN without claim")? } else { v.to_string() };
            headers.push((k.clone(), v));
        }
    }
    let body = match (req.get("body"), req.get("body_text")) {
        (Some(b), _) => serde_json::to_vec(b).unwrap(),
        (None, Some(Value::String(t))) => t.clone().into_bytes(),
        _ => Vec::new(),
    };

    let before = handle.queued();
    let task_app = app.clone();
    let task = tokio::spawn(async move {
        let hdrs: Vec<(&str, &str)> = headers.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        send(&task_app, method, &uri, &hdrs, body).await
    });
    while handle.queued() == before && !task.is_finished() {
        tokio::task::yield_now().await;
    }
    let ticks_after = case.get("ticks_after").and_then(Value::as_u64).unwrap_or(1);
    let resp = if task.is_finished() {
        // answered without waiting for a tick; stepping afterwards feeds streams
        let resp = task.await.unwrap();
        handle.step(ticks_after).await.map_err(|e| e.to_string())?;
        resp
    } else {
        handle.step(ticks_after).await.map_err(|e| e.to_string())?;
        task.await.unwrap()
    };

    let want = &case["response"];
    let status = resp.status().as_u16() as u64;
    if Some(status) != want["status"].as_u64() {
        return Err(format!("status {status}, expected {}", want["status"]));
    }
    if let Some(ct) = want.get("content_type").and_then(Value::as_str) {
        let got = resp.headers().get("content-type").and_then(|v| v.to_str().ok()).unwrap_or("");
        if got != ct {
            return Err(format!("content-type {got:?}, expected {ct:?}"));
        }
    }
    let mut body = resp.into_body();
    if let Some(lines) = want.get("lines").and_then(Value::as_array) {
        let got = read_lines(&mut body, lines.len()).await?;
        for (i, (w, g)) in lines.iter().zip(&got).enumerate() {
            let g: Value = serde_json::from_str(g).map_err(|e| format!("line {i}: {e}"))?;
            if !matches(w, &g, token.as_deref()) {
                return Err(format!("line {i}: got {g}, expected {w}"));
            }
        }
        drop(body);
    } else {
        let bytes = body.collect().await.map_err(|e| e.to_string())?.to_bytes();
        if let Some(text) = want.get("body_text").and_then(Value::as_str) {
            if bytes != text.as_bytes() {
                return Err(format!("body {:?}, expected {text:?}", String::from_utf8_lossy(&bytes)));
            }
        } else {
            let got: Value = serde_json::from_slice(&bytes).map_err(|e| format!("body is not JSON ({e})"))?;
            if !matches(&want["body"], &got, token.as_deref()) {
                return Err(format!("body {got}, expected {}", want["body"]));
            }
        }
    }
    svc.shutdown().map_err(|e| e.to_string())?;
    Ok(())
}

// ---------------------------------------------------------------- fuzzing

fn random_json(rng: &mut ChaCha8Rng, depth: u32) -> Value {
    let pick = if depth > 2 { rng.random_range(0..5) } else { rng.random_range(0..7) };
    match pick {
        0 => Value::Null,
        1 => Value::Bool(rng.random_bool(0.5)),
        2 => json!(rng.random_range(-1_000_000i64..1_000_000)),
        3 => json!(rng.random_range(-1e12..1e12)),
        4 => {
            let words = ["Drive", "TripReset", "ActuatorSet", "Subscribe", "Forward", "Stop", "", "kind", "💥", "\u{0}"];
            Value::String(words[rng.random_range(0..words.len())].to_string())
        }
        5 => Value::Array((0..rng.random_range(0..4)).map(|_| random_json(rng, depth + 1)).collect()),
        _ => {
            let keys = ["kind", "drive", "channel", "value", "extra", "Kind"];
            let mut m = serde_json::Map::new();
            for _ in 0..rng.random_range(0..5) {
                m.insert(keys[rng.random_range(0..keys.len())].to_string(), random_json(rng, depth + 1));
            }
            Value::Object(m)
        }
    }
}

/// Deterministic mix of garbage bytes, random JSON and mutated valid commands.
pub fn fuzz_bodies(seed: u64, n: usize) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let valid = [
        r#"{"kind":"Drive","drive":"Forward"}"#,
        r#"{"kind":"Drive","drive":"Stop"}"#,
        r#"{"kind":"TripReset"}"#,
        r#"{"kind":"Subscribe"}"#,
        r#"{"kind":"ActuatorSet","channel":3,"value":1}"#,
    ];
    (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => (0..rng.random_range(0..64)).map(|_| rng.random::<u8>()).collect(),
            1 => serde_json::to_vec(&random_json(&mut rng, 0)).unwrap(),
            2 => {
                let mut b = valid[rng.random_range(0..valid.len())].as_bytes().to_vec();
                for _ in 0..rng.random_range(1..4) {
                    let i = rng.random_range(0..b.len());
                    match rng.random_range(0..3) {
                        0 => {
                            b.remove(i);
                        }
                        1 => b.insert(i, rng.random_range(0x20..0x7f)),
                        _ => b[i] = rng.random(),
                    }
                    if b.is_empty() {
                        break;
                    }
                }
                b
            }
            _ => valid[rng.random_range(0..valid.len())].as_bytes().to_vec(),
        })
        .collect()
}

/// Checks one reply of `POST /api/command` is a well-formed protocol answer.
pub fn check_structured(status: StatusCode, body: &[u8]) -> Result<(), String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("status {status}: body not JSON: {e}"))?;
    let ok = v.get("ok").and_then(Value::as_bool).ok_or_else(|| format!("no \"ok\" in {v}"))?;
    match status.as_u16() {
        200 if ok && v.get("applied_tick").and_then(Value::as_u64).is_some() && v.as_object().unwrap().len() == 2 => Ok(()),
        400 | 403 | 422 if !ok && v.get("error").and_then(Value::as_str).is_some_and(|e| !e.is_empty()) => Ok(()),
        _ => Err(format!("unexpected reply {status} {v}")),
    }
}

/// Posts `n` fuzz bodies to a real-time service in process, half of them with
/// the driver token. Returns the number of accepted commands.
pub fn fuzz_service(seed: u64, n: usize) -> Result<usize, String> {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    rt.block_on(async {
        let config = SimConfig { tick_ms: 1, ..SimConfig::default() };
        let (svc, _dir) = start(config, Pacing::RealTime);
        let handle = svc.handle();
        let app = router(handle.clone(), None);
        let token = handle.driver().claim().unwrap();
        let mut accepted = 0;
        for (i, body) in fuzz_bodies(seed, n).into_iter().enumerate() {
            let headers: &[(&str, &str)] = if i % 2 == 0 { &[(DRIVER_TOKEN_HEADER, &token)] } else { &[] };
            let (status, bytes) = call(&app, Method::POST, "/api/command", headers, body.clone()).await;
            check_structured(status, &bytes).map_err(|e| format!("body {:?}: {e}", String::from_utf8_lossy(&body)))?;
            if status == StatusCode::OK {
                accepted += 1;
            }
        }
        // still serving normally
        let ok = serde_json::to_vec(&CommandMessage::Drive(DriveCommand::Stop)).unwrap();
        let (status, _) = call(&app, Method::POST, "/api/command", &[(DRIVER_TOKEN_HEADER, &token)], ok).await;
        if status != StatusCode::OK {
            return Err(format!("service unhealthy after fuzzing: {status}"));
        }
        svc.shutdown().map_err(|e| e.to_string())?;
        Ok(accepted)
    })
}

/// Minimal HTTP/1.1 exchange over a real socket.
pub async fn raw_http(addr: std::net::SocketAddr, method: &str, path: &str, headers: &[(&str, &str)], body: &[u8]) -> (u16, Vec<u8>) {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    let mut head = format!("{method} {path} HTTP/1.1\r\nhost: test\r\nconnection: close\r\ncontent-length: {}\r\n", body.len());
    for (k, v) in headers {
        head += &format!("{k}: {v}\r\n");
    }
    head += "\r\n";
    s.write_all(head.as_bytes()).await.unwrap();
    s.write_all(body).await.unwrap();
    let mut out = Vec::new();
    s.read_to_end(&mut out).await.unwrap();
    let split = out.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
    let head = String::from_utf8_lossy(&out[..split]).to_string();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let raw = &out[split + 4..];
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    (status, if chunked { dechunk(raw) } else { raw.to_vec() })
}

fn dechunk(mut raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    while let Some(eol) = raw.windows(2).position(|w| w == b"\r\n") {
        let size = usize::from_str_radix(std::str::from_utf8(&raw[..eol]).unwrap().trim(), 16).unwrap();
        if size == 0 {
            break;
        }
        out.extend_from_slice(&raw[eol + 2..eol + 2 + size]);
        raw = &raw[eol + 2 + size + 2..];
    }
    out
}

// ---------------------------------------------------------------- square path

/// Track width for which a 90° pivot takes exactly 0.2 m of wheel travel.
pub const SQUARE_TRACK_M: f64 = 0.4 / PI;

pub fn square_config(encoding: BearingEncoding) -> RunConfig {
    let mut c = RunConfig::from_json(&std::fs::read_to_string(golden_dir().join("square_config.json")).unwrap()).unwrap();
    c.bearing_encoding = encoding;
    c
}

pub fn square_script() -> ScenarioScript {
    ScenarioScript::from_json(&std::fs::read_to_string(golden_dir().join("square_scenario.json")).unwrap()).unwrap()
}

/// Independent construction of the square: four forward legs of 2 s, each
/// followed by a 2 s right pivot, then stop.
pub fn square_steps() -> Vec<ScenarioStep> {
    let mut steps = Vec::new();
    for k in 0..4u64 {
        steps.push(ScenarioStep { at_ms: 4000 * k, command: CommandMessage::Drive(DriveCommand::Forward) });
        steps.push(ScenarioStep { at_ms: 4000 * k + 2000, command: CommandMessage::Drive(DriveCommand::TurnRight) });
    }
    steps.push(ScenarioStep { at_ms: 16_000, command: CommandMessage::Drive(DriveCommand::Stop) });
    steps
}

/// Worst-case closure error of the dead-reckoned square.
///
/// Every logged bearing may be off by one quantum `q_deg`; a unit vector
/// turned by angle `a` moves by at most `a` (radians), giving the
/// quantization term. A pivot is logged as a straight leg of half the active
/// wheel's travel along the starting heading, while the chassis centre really
/// moves along the chord of a quarter circle of radius W/2, 45° to the right.
/// The arc-chord term is the length of the sum of those four residuals.
pub fn square_bound(q_deg: f64, leg_m: f64, track_m: f64) -> f64 {
    let pivot_logged = leg_m / 2.0;
    let chord = track_m / 2.0 * 2f64.sqrt();
    let (mut ex, mut ey) = (0.0, 0.0);
    for k in 0..4 {
        let th = (90.0 * k as f64).to_radians();
        let diag = th + PI / 4.0;
        ex += pivot_logged * th.sin() - chord * diag.sin();
        ey += pivot_logged * th.cos() - chord * diag.cos();
    }
    let quantization = 4.0 * (leg_m + pivot_logged) * q_deg.to_radians();
    quantization + ex.hypot(ey)
}
