//! Trajectory CSV output and the run-length mode summary read back from it.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::stepper::{ModeKind, TrajectoryRecord};

pub const HEADER: [&str; 28] = [
    "t", "px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz", "a1x",
    "a1y", "a1z", "a2x", "a2y", "a2z", "p_n", "p_t", "p_o", "p_r", "sigma", "mode",
    "solver_iters", "residual",
];

const NUM_COLUMNS: usize = 28;

fn header_line() -> String {
    HEADER.join(",")
}

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the header and one row per record.
pub fn write_trajectory<W: Write>(records: &[TrajectoryRecord], mut sink: W) -> Result<()> {
    writeln!(sink, "{}", header_line())?;
    for r in records {
        let s = &r.state;
        let c = &r.contact;
        let mut cols: Vec<String> = Vec::with_capacity(NUM_COLUMNS);
        cols.push(num(r.time));
        cols.extend(s.position.iter().map(|&x| num(x)));
        cols.extend(s.orientation.iter().map(|&x| num(x)));
        cols.extend(s.linear_velocity.iter().map(|&x| num(x)));
        cols.extend(s.angular_velocity.iter().map(|&x| num(x)));
        cols.extend(c.a1.iter().map(|&x| num(x)));
        cols.extend(c.a2.iter().map(|&x| num(x)));
        for x in [c.p_n, c.p_t, c.p_o, c.p_r, c.sigma] {
            cols.push(num(x));
        }
        cols.push(r.mode.kind.to_string());
        cols.push(r.solver.iterations.to_string());
        cols.push(num(r.solver.final_residual));
        writeln!(sink, "{}", cols.join(","))?;
    }
    sink.flush()?;
    Ok(())
}

/// One parsed CSV row: the 25 numeric columns before `mode`, the mode, the
/// iteration count and the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub values: [f64; 25],
    pub mode: ModeKind,
    pub iterations: usize,
    pub residual: f64,
}

impl CsvRow {
    pub fn time(&self) -> f64 {
        self.values[0]
    }
}

/// Reads a trajectory written by [`write_trajectory`].
pub fn read_trajectory<R: BufRead>(source: R) -> Result<Vec<CsvRow>> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Scenario("trajectory is empty (no header)".into()))??;
    if header.trim() != header_line() {
        return Err(Error::Scenario("unexpected trajectory header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let bad = |what: &str| Error::Scenario(format!("line {lineno}: {what}"));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != NUM_COLUMNS {
            return Err(bad(&format!("expected {NUM_COLUMNS} columns, got {}", cols.len())));
        }
        let mut values = [0.0; 25];
        for (v, c) in values.iter_mut().zip(&cols[..25]) {
            *v = c.parse().map_err(|_| bad(&format!("invalid number `{c}`")))?;
        }
        let mode = ModeKind::parse(cols[25]).ok_or_else(|| bad("invalid mode"))?;
        let iterations = cols[26].parse().map_err(|_| bad("invalid iteration count"))?;
        let residual = cols[27].parse().map_err(|_| bad("invalid residual"))?;
        rows.push(CsvRow { values, mode, iterations, residual });
    }
    Ok(rows)
}

/// Maximal runs of equal mode: `(mode, start time, end time, steps)`.
pub fn mode_runs(rows: &[CsvRow]) -> Vec<(ModeKind, f64, f64, usize)> {
    let mut runs: Vec<(ModeKind, f64, f64, usize)> = Vec::new();
    for r in rows {
        match runs.last_mut() {
            Some(last) if last.0 == r.mode => {
                last.2 = r.time();
                last.3 += 1;
            }
            _ => runs.push((r.mode, r.time(), r.time(), 1)),
        }
    }
    runs
}

/// Run-length encoding of a mode sequence.
pub fn run_length(modes: impl IntoIterator<Item = ModeKind>) -> Vec<(ModeKind, usize)> {
    let mut out: Vec<(ModeKind, usize)> = Vec::new();
    for m in modes {
        match out.last_mut() {
            Some((k, n)) if *k == m => *n += 1,
            _ => out.push((m, 1)),
        }
    }
    out
}
