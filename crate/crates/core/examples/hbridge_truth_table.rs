//! Prints the H-bridge truth table and the Port 0 byte the microcontroller
//! writes for every drive command.
//!
//!     cargo run --example hbridge_truth_table

use deskbot::kinematics::{drive_to_motor_states, DriveCommand};
use deskbot::peripherals::hbridge::{hbridge_decode, motor_states_to_port, port_to_motor_states, HBridgeInputs};

fn main() {
    println!("IN1 IN2  motor");
    for inputs in HBridgeInputs::ALL {
        println!(" {}   {}   {:?}", inputs.in1.is_high() as u8, inputs.in2.is_high() as u8, hbridge_decode(inputs));
    }

    println!();
    println!("{:<10} {:<9} {:<9} port0", "command", "left", "right");
    for cmd in DriveCommand::ALL {
        let (left, right) = drive_to_motor_states(cmd);
        let port = motor_states_to_port(left, right);
        let decoded = port_to_motor_states(port).expect("port 0");
        assert_eq!(decoded, (left, right));
        println!("{:<10} {:<9} {:<9} {:04b}", cmd.as_str(), format!("{left:?}"), format!("{right:?}"), port.bits);
    }
}
