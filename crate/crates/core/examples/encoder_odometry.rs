//! Drives the ground-truth chassis and watches the slotted-wheel encoders.
//!
//!     cargo run --example encoder_odometry

use deskbot::kinematics::{drive_to_motor_states, ChassisParams, DriveCommand, World};
use deskbot::peripherals::encoder::counts_to_distance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ChassisParams::default();
    let mut world = World::new(params)?;
    let plan = [(DriveCommand::Forward, 130), (DriveCommand::TurnLeft, 157), (DriveCommand::Backward, 45)];

    println!("segment {} mm, {} mm per tick", params.segment_nm() as f64 / 1e6, params.tick_arc_nm() as f64 / 1e6);
    println!("{:<9} {:>6} {:>8} {:>8} {:>8} {:>6} {:>6} {:>9}", "cmd", "ticks", "x", "y", "heading", "cntL", "cntR", "resid mm");
    for (cmd, ticks) in plan {
        let (l, r) = drive_to_motor_states(cmd);
        for _ in 0..ticks {
            world.advance(l, r);
        }
        let p = world.pose();
        let (cl, cr) = world.counts();
        let res = world.residual_nm();
        println!(
            "{:<9} {:>6} {:>8.4} {:>8.4} {:>8.2} {:>6} {:>6} {:>4.0}/{:<4.0}",
            cmd.as_str(),
            ticks,
            p.x,
            p.y,
            p.heading_deg,
            cl,
            cr,
            res[0] as f64 / 1e6,
            res[1] as f64 / 1e6
        );
    }

    let (cl, cr) = world.counts();
    let truth = world.travelled_nm();
    for (name, counts, w) in [("left", cl, 0), ("right", cr, 1)] {
        let counted = counts_to_distance(counts, params.wheel_circumference_m, params.segments_per_rev)?;
        println!(
            "{name}: travelled {:.3} m, encoder says {counted:.3} m, residual {:.3} m",
            truth[w] as f64 / 1e9,
            world.residual_nm()[w] as f64 / 1e9
        );
    }
    Ok(())
}
