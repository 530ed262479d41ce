//! Starts the HTTP control service and drives the robot from a scripted
//! client over plain TCP, the way any remote operator would.
//!
//!     cargo run --example control_service            # scripted demo, then exit
//!     cargo run --example control_service -- --serve 127.0.0.1:8080
//!
//! With `--serve` the service keeps running until Ctrl-C; try
//!
//!     curl -X POST localhost:8080/api/driver/claim
//!     curl -X POST -H 'x-driver-token: <token>' -d '{"kind":"Drive","drive":"Forward"}' localhost:8080/api/command
//!     curl -N localhost:8080/api/telemetry/stream?period_ms=500

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use deskbot::daps::{Durability, FilterSpec, SampleStore, SensorDescriptor, SensorKind};
use deskbot::protocol::TelemetryFrame;
use deskbot::service::{router, serve, ControlService, LoopOptions, Pacing};
use deskbot::sim::{SimConfig, Simulation};

fn request(addr: SocketAddr, method: &str, path: &str, token: Option<&str>, body: &str) -> std::io::Result<String> {
    let mut s = TcpStream::connect(addr)?;
    let auth = token.map(|t| format!("x-driver-token: {t}\r\n")).unwrap_or_default();
    write!(s, "{method} {path} HTTP/1.1\r\nhost: robot\r\nconnection: close\r\n{auth}content-length: {}\r\n\r\n{body}", body.len())?;
    let mut out = String::new();
    s.read_to_string(&mut out)?;
    Ok(out.split("\r\n\r\n").nth(1).unwrap_or_default().to_string())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let serve_addr = (args.get(1).map(String::as_str) == Some("--serve")).then(|| args.get(2).cloned().unwrap_or("127.0.0.1:8080".into()));

    let store = SampleStore::open(std::env::temp_dir().join("deskbot-service-demo"), Durability::Flush)?;
    let sensor = SensorDescriptor {
        sensor_id: format!("co-{}", std::process::id()),
        kind: SensorKind::CO,
        unit: "ppm".into(),
        sample_period_ms: 200,
        filter: FilterSpec::moving_average(4),
    };
    let sim = Simulation::new(SimConfig { sensors: vec![sensor], ..SimConfig::default() }, store)?;
    let service = ControlService::start(sim, LoopOptions { pacing: Pacing::RealTime, ..LoopOptions::default() });
    let app = router(service.handle(), None);

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(serve_addr.as_deref().unwrap_or("127.0.0.1:0")))?;
    let addr = listener.local_addr()?;
    println!("control service on http://{addr}");

    if serve_addr.is_some() {
        runtime.block_on(serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        }))?;
        service.shutdown()?;
        return Ok(());
    }

    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = runtime.spawn(serve(listener, app, async {
        let _ = stop_rx.await;
    }));

    // a viewer watching two frames a second
    let viewer = std::thread::spawn(move || -> std::io::Result<()> {
        let mut s = TcpStream::connect(addr)?;
        s.set_read_timeout(Some(Duration::from_secs(5)))?;
        write!(s, "GET /api/telemetry/stream?period_ms=500 HTTP/1.1\r\nhost: robot\r\n\r\n")?;
        let lines = BufReader::new(s).lines();
        for line in lines.map_while(Result::ok).filter(|l| l.starts_with('{')).take(8) {
            let f: TelemetryFrame = serde_json::from_str(&line).expect("frame");
            println!(
                "  t={:>5} ms {:<9} bearing {:>6.2} pose ({:>7.4}, {:>7.4}) sensors {:?}",
                f.t_ms, f.drive_state.as_str(), f.bearing_deg, f.pose_est.0, f.pose_est.1, f.sensors
            );
        }
        Ok(())
    });

    let claimed = request(addr, "POST", "/api/driver/claim", None, "")?;
    println!("claim -> {claimed}");
    let token: serde_json::Value = serde_json::from_str(&claimed)?;
    let token = token["token"].as_str().ok_or("no token")?.to_string();
    println!("second claim -> {}", request(addr, "POST", "/api/driver/claim", None, "")?);
    println!("viewer drives -> {}", request(addr, "POST", "/api/command", None, r#"{"kind":"Drive","drive":"Forward"}"#)?);

    for (drive, secs) in [("Forward", 1.5), ("TurnLeft", 1.0), ("Stop", 1.0)] {
        let body = format!(r#"{{"kind":"Drive","drive":"{drive}"}}"#);
        println!("{drive} -> {}", request(addr, "POST", "/api/command", Some(&token), &body)?);
        std::thread::sleep(Duration::from_secs_f64(secs));
    }
    println!("bad channel -> {}", request(addr, "POST", "/api/command", Some(&token), r#"{"kind":"ActuatorSet","channel":9,"value":1}"#)?);
    println!("release -> {}", request(addr, "POST", "/api/driver/release", Some(&token), "")?);

    viewer.join().expect("viewer thread")?;
    let _ = stop_tx.send(());
    runtime.block_on(server)??;
    let mut sim = service.shutdown()?;
    println!("trip log: {:?}", sim.finish()?);
    Ok(())
}
