//! Samples the emulated compass at a few headings and shows the three wire
//! encodings plus the bus traffic of each register read.
//!
//!     cargo run --example compass_i2c [HEADING_DEG...]

use deskbot::peripherals::compass::{pwm_to_bearing, Cmps03, RegisterWidth};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut headings: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    if headings.is_empty() {
        headings = vec![0.0, 45.0, 90.3, 180.0, 359.96];
    }

    for h in headings {
        let compass = Cmps03::at_heading(h)?;
        let r = compass.reading();
        println!(
            "{h:>8.3} deg  byte {:>3} ({:>8.3})  word {:>4} ({:>6.1})  pwm {:>6.3} ms -> {:.3}",
            r.byte_form,
            r.byte_bearing(),
            r.word_form,
            r.word_bearing(),
            r.pwm_ms,
            pwm_to_bearing(r.pwm_ms)?
        );
        for (reg, width) in [(0, RegisterWidth::Bits8), (1, RegisterWidth::Bits8), (2, RegisterWidth::Bits16)] {
            println!("    reg {reg}: {}", compass.i2c_read(reg, width)?);
        }
    }

    // register 2 is a 16-bit register; an 8-bit read is refused
    let compass = Cmps03::at_heading(10.0)?;
    println!("8-bit read of register 2: {}", compass.i2c_read(2, RegisterWidth::Bits8).unwrap_err());
    Ok(())
}
