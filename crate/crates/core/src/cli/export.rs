//! Plot-ready footprint polylines from trip logs.
//!
//! Output is CSV: an `x,y` header, one row per vertex starting at the origin,
//! then a `total,net` header and one summary row.

use std::io::{self, BufRead, Write};

use crate::deadreckoning::{footprints, integrate, read_trip_log, PathSegment, PositionEstimate, TripLogError};

pub fn write_footprints<W: Write>(mut out: W, estimate: &PositionEstimate) -> io::Result<()> {
    writeln!(out, "x,y")?;
    for (x, y) in footprints(estimate) {
        writeln!(out, "{x:.9},{y:.9}")?;
    }
    writeln!(out, "total,net")?;
    writeln!(out, "{:.9},{:.9}", estimate.total_distance_m, estimate.net_displacement_m)
}

pub fn footprints_csv(segments: &[PathSegment]) -> String {
    let mut buf = Vec::new();
    write_footprints(&mut buf, &integrate(segments)).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Reads a trip log and writes its footprint file.
pub fn export_footprints<R: BufRead, W: Write>(trip_log: R, out: W) -> Result<PositionEstimate, TripLogError> {
    let estimate = integrate(&read_trip_log(trip_log)?);
    write_footprints(out, &estimate)?;
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn export(log: &str) -> Result<String, TripLogError> {
        let mut out = Vec::new();
        export_footprints(log.as_bytes(), &mut out)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn empty_log_is_origin() {
        assert_eq!(export("").unwrap(), "x,y\n0.000000000,0.000000000\ntotal,net\n0.000000000,0.000000000\n");
    }

    #[test]
    fn two_legs() {
        let log = "{\"t0\":0,\"t1\":10,\"d_m\":1.0,\"bearing_deg\":0.0}\n{\"t0\":10,\"t1\":20,\"d_m\":1.0,\"bearing_deg\":90.0}\n";
        let text = export(log).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert_eq!(lines[2], "0.000000000,1.000000000");
        assert_eq!(lines[3], "1.000000000,1.000000000");
        let net: f64 = lines[5].split(',').nth(1).unwrap().parse().unwrap();
        assert!((net - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn bad_line_number() {
        let log = "{\"t0\":0,\"t1\":10,\"d_m\":1.0,\"bearing_deg\":0.0}\n\n{\"t0\":0}\n";
        match export(log) {
            Err(TripLogError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
