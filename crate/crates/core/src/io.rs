//! Columnar text files: `#`-prefixed header lines followed by
//! whitespace-separated numbers, floats written as `{:.16e}`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::analysis::{LandscapeGrid, Spectrum};
use crate::error::{Error, Result};
use crate::grid::{Pulse, TimeGrid};
use crate::krotov::IterationRecord;
use crate::model::LevelSystem;
use crate::propagation::StateTrajectory;

fn row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push_str("  ");
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// `# t_au  eps_au`.
pub fn write_pulse(w: &mut impl Write, pulse: &Pulse) -> std::io::Result<()> {
    let mut s = String::from("# t_au  eps_au\n");
    for (t, e) in pulse.grid().times().zip(pulse.values()) {
        row(&mut s, &[t, *e]);
    }
    w.write_all(s.as_bytes())
}

/// `# iter  J_T  J_a  J_b  J  max|eps|`.
pub fn write_convergence(w: &mut impl Write, records: &[IterationRecord]) -> std::io::Result<()> {
    let mut s = String::from("# iter  J_T  J_a  J_b  J  max|eps|\n");
    for r in records {
        let _ = write!(s, "{}  ", r.iteration);
        row(&mut s, &[r.j_t, r.j_a, r.j_b, r.j, r.max_abs_field]);
    }
    w.write_all(s.as_bytes())
}

/// `# t_au  P_<label>...` for every level of `system`, one block per trajectory.
pub fn write_populations(
    w: &mut impl Write,
    system: &LevelSystem,
    trajectories: &[StateTrajectory],
) -> std::io::Result<()> {
    let mut s = String::from("# t_au");
    for l in system.labels() {
        let _ = write!(s, "  P_{l}");
    }
    s.push('\n');
    let mut line = Vec::with_capacity(system.dim() + 1);
    for (k, traj) in trajectories.iter().enumerate() {
        if trajectories.len() > 1 {
            let _ = writeln!(s, "# state {k}");
        }
        for (t, psi) in traj.grid().times().zip(traj.states()) {
            line.clear();
            line.push(t);
            line.extend(psi.iter().map(|c| c.norm_sqr()));
            row(&mut s, &line);
        }
        if k + 1 < trajectories.len() {
            s.push('\n');
        }
    }
    w.write_all(s.as_bytes())
}

/// `# omega_au  omega_cm1  re  im  power`, all bins in ascending frequency.
pub fn write_spectrum(w: &mut impl Write, spectrum: &Spectrum) -> std::io::Result<()> {
    let mut s = String::from("# omega_au  omega_cm1  re  im  power\n");
    for k in 0..spectrum.len() {
        let a = spectrum.amplitude[k];
        row(&mut s, &[spectrum.omega_au[k], spectrum.omega_cm1[k], a.re, a.im, spectrum.power[k]]);
    }
    w.write_all(s.as_bytes())
}

/// Axes as header lines (`# e1_au ...`, `# e2_au ...`), then one row per `E1`.
pub fn write_landscape(w: &mut impl Write, landscape: &LandscapeGrid, merit: &str) -> std::io::Result<()> {
    let mut s = format!("# merit {merit}\n# rows: e1_au, columns: e2_au\n# e1_au");
    for v in &landscape.e1 {
        let _ = write!(s, "  {v:.16e}");
    }
    s.push_str("\n# e2_au");
    for v in &landscape.e2 {
        let _ = write!(s, "  {v:.16e}");
    }
    s.push('\n');
    for r in &landscape.values {
        row(&mut s, r);
    }
    w.write_all(s.as_bytes())
}

/// Numeric rows of a columnar file; `#` lines and blank lines are skipped.
/// `label` names the source in error messages.
pub fn parse_table(text: &str, label: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::DataFile {
                    file: label.to_string(),
                    line: k + 1,
                    message: format!("not a number: {tok:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

/// Inverse of [`write_pulse`]. The time column must start at 0 and be uniform.
pub fn parse_pulse(text: &str, label: &str) -> Result<Pulse> {
    let bad = |line: usize, message: String| Error::DataFile {
        file: label.to_string(),
        line,
        message,
    };
    let rows = parse_table(text, label)?;
    if rows.len() < 2 {
        return Err(bad(0, "a pulse needs at least two samples".into()));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != 2) {
        return Err(bad(k + 1, "expected two columns `t_au eps_au`".into()));
    }
    let t_final = rows[rows.len() - 1][0];
    let grid = TimeGrid::new(t_final, rows.len())?;
    let tol = 1e-9 * t_final.abs().max(1.0);
    for (k, r) in rows.iter().enumerate() {
        if (r[0] - grid.t(k)).abs() > tol {
            return Err(bad(k + 1, format!("time {} is off the uniform grid", r[0])));
        }
    }
    Pulse::new(grid, rows.into_iter().map(|r| r[1]).collect())
}

pub fn read_pulse(path: &Path) -> Result<Pulse> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pulse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_round_trip_is_exact() {
        let grid = TimeGrid::new(123.4, 257).unwrap();
        let pulse = Pulse::from_fn(grid, |t| (0.37 * t).sin() * 1e-3 + 1e-17 * t);
        let mut buf = Vec::new();
        write_pulse(&mut buf, &pulse).unwrap();
        let back = parse_pulse(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back.values(), pulse.values());
        assert!(back.grid().same_as(pulse.grid()));
    }

    #[test]
    fn table_errors_carry_line_numbers() {
        let err = parse_table("# h\n1 2\n3 x\n", "f.dat").unwrap_err();
        assert!(matches!(err, Error::DataFile { line: 3, .. }), "{err}");
    }

    #[test]
    fn non_uniform_time_column_is_rejected() {
        let err = parse_pulse("0 0\n1 0\n2.5 0\n3 0\n", "p").unwrap_err();
        assert!(matches!(err, Error::DataFile { line: 3, .. }), "{err}");
    }

    #[test]
    fn landscape_layout() {
        let l = LandscapeGrid {
            e1: vec![0.0, 1.0],
            e2: vec![0.0, 0.5, 1.0],
            values: vec![vec![0.0, 0.1, 0.2], vec![0.3, 0.4, 0.5]],
        };
        let mut buf = Vec::new();
        write_landscape(&mut buf, &l, "P_4s").unwrap();
        let rows = parse_table(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(rows, l.values);
    }
}
