//! Trajectory CSV: header `t,x1..xn,M,m,D`, optionally followed by
//! `d1..dn` disturbance columns. Numbers are written in shortest
//! round-trip form, so a file reloads bit-exactly.

use std::io::{Read, Write};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

pub fn header(n: usize, with_disturbance: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend(["M", "m", "D"].map(String::from));
    if with_disturbance {
        h.extend((1..=n).map(|i| format!("d{i}")));
    }
    h
}

/// Disturbance columns are written when the trajectory carries a trace.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let n = traj.n();
    let trace = traj.disturbance_trace.as_ref();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n, trace.is_some()))?;
    for k in 0..traj.len() {
        let d = &traj.diagnostics[k];
        let mut row = Vec::with_capacity(2 * n + 4);
        row.push(traj.times[k]);
        row.extend_from_slice(&traj.states[k]);
        row.extend([d.max, d.min, d.spread]);
        if let Some(trace) = trace {
            row.extend_from_slice(&trace[k]);
        }
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory; diagnostics are recomputed from the states.
pub fn read_csv<R: Read>(input: R, consensus_tol: f64) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let names: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let xs = names.iter().filter(|s| s.starts_with('x')).count();
    let ds = names.iter().filter(|s| s.starts_with('d')).count();
    if xs == 0 || (ds != 0 && ds != xs) || names != header(xs, ds > 0) {
        return Err(Error::InvalidParameter(format!(
            "trajectory header {:?} does not match t,x1..xn,M,m,D[,d1..dn]",
            names.join(",")
        )));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut trace = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidParameter(format!("row {}: {e}", line + 2)))?;
        times.push(row[0]);
        states.push(row[1..=xs].to_vec());
        if ds > 0 {
            trace.push(row[xs + 4..].to_vec());
        }
    }
    let mut traj = Trajectory::from_states(times, states, consensus_tol)?;
    if ds > 0 {
        traj.disturbance_trace = Some(trace);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, DisturbanceSpec, SimConfig};
    use crate::testing::example2;

    #[test]
    fn round_trip_is_exact() {
        let cfg = SimConfig { t_end: 0.25, record_disturbance: true, ..SimConfig::default() };
        let spec = DisturbanceSpec::BoundedNoise { seed: 4, params: Default::default() };
        let g = crate::graph::random_graph(4, 9, 0.7, true, 2).unwrap();
        let traj = simulate(&g, &[0.1, 0.2, -0.3, 1.0 / 3.0], &spec, &cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,x4,M,m,D,d1,d2,d3,d4\n"));
        let back = read_csv(&buf[..], cfg.consensus_tol).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn plain_header() {
        let traj = simulate(&example2(), &[0.0, 1.0, 2.0], &DisturbanceSpec::Zero, &SimConfig {
            t_end: 0.01,
            ..SimConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&traj, &mut buf).unwrap();
        assert!(buf.starts_with(b"t,x1,x2,x3,M,m,D\n0,0,1,2,2,0,2\n"));
    }

    #[test]
    fn rejects_bad_headers() {
        for text in ["t,x1,x2,M,m\n0,1,2,2,1\n", "t,x2,x1,M,m,D\n", "time,x1,M,m,D\n", "t,x1,x2,M,m,D,d1\n"] {
            assert!(read_csv(text.as_bytes(), 1e-9).is_err(), "{text}");
        }
        assert!(read_csv("t,x1,M,m,D\n0,abc,0,0,0\n".as_bytes(), 1e-9).is_err());
        assert!(read_csv("t,x1,M,m,D\n1,0,0,0,0\n0,0,0,0,0\n".as_bytes(), 1e-9).is_err());
    }
}
