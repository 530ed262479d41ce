//! Runs a scripted scenario headless, the same way `deskbot --scenario` does,
//! and prints what landed in the output directory.
//!
//!     cargo run --example scenario_replay [OUT_DIR]

use deskbot::cli::{footprints_csv, run_scenario, RunConfig, ScenarioScript, ScenarioStep};
use deskbot::kinematics::DriveCommand;
use deskbot::protocol::CommandMessage;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("deskbot-replay"));
    let config = RunConfig::from_json(
        r#"{
            "seed": 11,
            "sensors": [
                {"sensor_id": "co-1", "kind": "CO", "unit": "ppm", "sample_period_ms": 100,
                 "filter": {"kind": "MovingAverage", "window": 4}}
            ]
        }"#,
    )?;
    let drive = |at_ms, d| ScenarioStep { at_ms, command: CommandMessage::Drive(d) };
    let script = ScenarioScript::new(vec![
        ScenarioStep { at_ms: 0, command: CommandMessage::Subscribe },
        drive(0, DriveCommand::Forward),
        drive(1500, DriveCommand::TurnLeft),
        drive(2300, DriveCommand::Forward),
        ScenarioStep { at_ms: 3000, command: CommandMessage::ActuatorSet { channel: 2, value: 1 } },
        drive(3800, DriveCommand::Stop),
    ])?;
    println!("scenario:\n{}", script.to_json());

    let result = run_scenario(&config, &script, &out)?;
    println!("{} ticks into {}", result.ticks, out.display());
    for ack in &result.acks {
        println!("  {:>5} ms {:<11} applied at tick {}", ack.at_ms, ack.kind, ack.applied_tick);
    }
    for entry in std::fs::read_dir(&out)? {
        let entry = entry?;
        println!("  {:<15} {:>8} bytes", entry.file_name().to_string_lossy(), entry.metadata()?.len());
    }
    print!("{}", footprints_csv(&result.segments));
    Ok(())
}
