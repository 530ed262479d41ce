//! Drives a square (forward 0.2 m, pivot right 90°, four times) through the
//! simulator and compares the dead-reckoned closure for each compass encoding.
//!
//!     cargo run --example dead_reckoning_square

use std::f64::consts::PI;

use deskbot::daps::{Durability, SampleStore};
use deskbot::deadreckoning::BearingEncoding;
use deskbot::kinematics::{ChassisParams, DriveCommand};
use deskbot::protocol::CommandMessage;
use deskbot::sim::{SimConfig, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // with this track width a 90° pivot is exactly 0.2 m of wheel travel
    let chassis = ChassisParams { track_width_m: 0.4 / PI, ..ChassisParams::default() };
    let store_dir = std::env::temp_dir().join(format!("deskbot-square-{}", std::process::id()));

    for encoding in [BearingEncoding::Byte, BearingEncoding::Word, BearingEncoding::Exact] {
        let store = SampleStore::open(&store_dir, Durability::Flush)?;
        let config = SimConfig { chassis, bearing_encoding: encoding, ..SimConfig::default() };
        let mut sim = Simulation::new(config, store)?;
        for _ in 0..4 {
            for (cmd, ticks) in [(DriveCommand::Forward, 200), (DriveCommand::TurnRight, 200)] {
                sim.tick(&[CommandMessage::Drive(cmd)])?;
                for _ in 1..ticks {
                    sim.tick(&[])?;
                }
            }
        }
        let last = sim.tick(&[CommandMessage::Drive(DriveCommand::Stop)])?;
        let truth = sim.world().pose();

        println!("{encoding:?}:");
        for (x, y) in &last.frame.footprints {
            println!("    {x:>9.5} {y:>9.5}");
        }
        println!(
            "    total {:.4} m, net {:.3e} m, ground truth ends at ({:.1e}, {:.1e})",
            last.frame.total_distance_m, last.frame.net_displacement_m, truth.x, truth.y
        );
    }
    std::fs::remove_dir_all(&store_dir)?;
    Ok(())
}
