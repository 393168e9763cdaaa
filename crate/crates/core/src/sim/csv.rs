//! CSV export and parsing for trajectory logs.
//!
//! Floats are written with `Display`, the shortest form that parses back to
//! the identical bit pattern, so a parsed file reproduces the log exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{SimError, TrajectoryLog, TrajectoryRow};
use crate::qp::Region;

pub const CSV_HEADER: &str = "t,x,y,theta,v,omega,rho,alpha,psi,z,omega_err,V,W,h,h0,u_v,\
                              u_omega,tau_l,tau_r,region,f1_residual,f2_residual";

const N_FIELDS: usize = 22;

pub(crate) fn csv_string(log: &TrajectoryLog) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + 192 * log.rows.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &log.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.x,
            r.y,
            r.theta,
            r.v,
            r.omega,
            r.rho,
            r.alpha,
            r.psi,
            r.z,
            r.omega_err,
            r.v_lyap,
            r.w_lyap,
            r.h,
            r.h0,
            r.u_v,
            r.u_omega,
            r.tau_l,
            r.tau_r,
            r.region,
            r.f1_residual,
            r.f2_residual,
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes `log` to `path`; an empty log produces just the header line.
pub fn export_csv(log: &TrajectoryLog, path: &Path) -> Result<(), SimError> {
    std::fs::write(path, csv_string(log)).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a file written by [`export_csv`] back into a log.
pub fn parse_csv(path: &Path) -> Result<TrajectoryLog, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let csv_err = |line: usize, message: String| SimError::Csv {
        path: path.display().to_string(),
        line,
        message,
    };

    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        Some(header) => {
            return Err(csv_err(1, format!("unexpected header {header:?}")));
        }
        None => return Err(csv_err(1, "empty file".to_string())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        rows.push(parse_row(line).map_err(|message| csv_err(i + 2, message))?);
    }
    Ok(TrajectoryLog { rows })
}

fn parse_row(line: &str) -> Result<TrajectoryRow, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != N_FIELDS {
        return Err(format!("expected {N_FIELDS} fields, found {}", fields.len()));
    }
    let num = |i: usize| {
        fields[i]
            .parse::<f64>()
            .map_err(|e| format!("field {}: {:?}: {e}", i + 1, fields[i]))
    };
    Ok(TrajectoryRow {
        t: num(0)?,
        x: num(1)?,
        y: num(2)?,
        theta: num(3)?,
        v: num(4)?,
        omega: num(5)?,
        rho: num(6)?,
        alpha: num(7)?,
        psi: num(8)?,
        z: num(9)?,
        omega_err: num(10)?,
        v_lyap: num(11)?,
        w_lyap: num(12)?,
        h: num(13)?,
        h0: num(14)?,
        u_v: num(15)?,
        u_omega: num(16)?,
        tau_l: num(17)?,
        tau_r: num(18)?,
        region: fields[19]
            .parse::<Region>()
            .map_err(|e| format!("field 20: {e}"))?,
        f1_residual: num(20)?,
        f2_residual: num(21)?,
    })
}
