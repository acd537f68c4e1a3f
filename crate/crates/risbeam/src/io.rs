//! File formats written and read by the command-line front end.
//!
//! * NPB cuts: comma-delimited text whose first row and column carry the
//!   axis values (frequencies in Hz, angles in degrees) and whose body is
//!   the normalized power beampattern in dB. Axis values use the shortest
//!   round-tripping decimal form, so parsing them back is bit-exact.
//! * Signals: one row per time sample, complex values as (re, im) column
//!   pairs, one pair per source.
//! * Phases: one row per element with the phase in radians; an extended
//!   (re, im) form is also accepted on read and checked for unit modulus.
//! * Summary: a TOML document with the run result and a config echo.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::ConfigDocument;
use crate::error::{Error, Result};
use crate::solver::{PhaseVector, SignalBlock};

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::FileFormat { path: path.display().to_string(), message: message.into() }
}

/// A rectangular slice of values with labeled axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCut {
    pub row_label: String,
    pub col_label: String,
    pub row_axis: Vec<f64>,
    pub col_axis: Vec<f64>,
    /// Row-major body, `rows × cols`.
    pub values: Vec<f64>,
}

pub fn write_grid_cut(path: &Path, cut: &GridCut) -> Result<()> {
    let rows = cut.row_axis.len();
    let cols = cut.col_axis.len();
    if cut.values.len() != rows * cols {
        return Err(Error::Dimension {
            what: "grid cut body",
            expected: rows * cols,
            got: cut.values.len(),
        });
    }
    let mut text = String::new();
    write!(text, "{}\\{}", cut.row_label, cut.col_label).unwrap();
    for c in &cut.col_axis {
        write!(text, ",{c}").unwrap();
    }
    text.push('\n');
    for (r, rv) in cut.row_axis.iter().enumerate() {
        write!(text, "{rv}").unwrap();
        for c in 0..cols {
            write!(text, ",{}", cut.values[r * cols + c]).unwrap();
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_grid_cut(path: &Path) -> Result<GridCut> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let mut cells = header.split(',');
    let labels = cells.next().unwrap_or_default();
    let (row_label, col_label) = labels
        .split_once('\\')
        .ok_or_else(|| format_err(path, "header must start with rowlabel\\collabel"))?;
    let col_axis: Vec<f64> = cells
        .enumerate()
        .map(|(i, c)| {
            c.parse::<f64>()
                .map_err(|_| format_err(path, format!("bad column axis value {i}: `{c}`")))
        })
        .collect::<Result<_>>()?;
    let mut row_axis = Vec::new();
    let mut values = Vec::new();
    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let head = cells.next().unwrap();
        row_axis.push(
            head.parse::<f64>()
                .map_err(|_| format_err(path, format!("bad row axis value {r}: `{head}`")))?,
        );
        let mut count = 0;
        for (c, cell) in cells.enumerate() {
            values.push(cell.parse::<f64>().map_err(|_| {
                format_err(path, format!("bad value at row {r}, column {c}: `{cell}`"))
            })?);
            count += 1;
        }
        if count != col_axis.len() {
            return Err(format_err(
                path,
                format!("row {r} has {count} values, expected {}", col_axis.len()),
            ));
        }
    }
    Ok(GridCut {
        row_label: row_label.to_string(),
        col_label: col_label.to_string(),
        row_axis,
        col_axis,
        values,
    })
}

/// Writes the stacked source samples as `n, s1_re, s1_im, s2_re, …`.
pub fn write_signals(path: &Path, s: &SignalBlock) -> Result<()> {
    let j = s.source_count();
    let mut text = String::from("n");
    for jj in 1..=j {
        write!(text, ",s{jj}_re,s{jj}_im").unwrap();
    }
    text.push('\n');
    for n0 in 0..s.samples_per_source() {
        write!(text, "{}", n0 + 1).unwrap();
        for jj in 0..j {
            let v = s.at(jj, n0);
            write!(text, ",{},{}", v.re, v.im).unwrap();
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_signals(path: &Path) -> Result<SignalBlock> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"n") || cols.len() < 3 || (cols.len() - 1) % 2 != 0 {
        return Err(format_err(path, "header must be n, s1_re, s1_im, …"));
    }
    let j = (cols.len() - 1) / 2;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 1 + 2 * j {
            return Err(format_err(
                path,
                format!("row {r} has {} cells, expected {}", cells.len(), 1 + 2 * j),
            ));
        }
        let mut row = Vec::with_capacity(j);
        for jj in 0..j {
            let re: f64 = cells[1 + 2 * jj].parse().map_err(|_| {
                format_err(path, format!("bad real part at row {r}, source {}", jj + 1))
            })?;
            let im: f64 = cells[2 + 2 * jj].parse().map_err(|_| {
                format_err(path, format!("bad imaginary part at row {r}, source {}", jj + 1))
            })?;
            row.push(Complex64::new(re, im));
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(format_err(path, "no sample rows"));
    }
    let mut samples = Vec::with_capacity(j * n);
    for row in rows {
        samples.extend(row);
    }
    SignalBlock::new(samples, j, n)
}

/// Writes the RIS configuration as one phase (radians) per element.
pub fn write_phases(path: &Path, x: &PhaseVector) -> Result<()> {
    let mut text = String::from("i,phase_rad\n");
    for (i, p) in x.phases().iter().enumerate() {
        writeln!(text, "{},{}", i + 1, p).unwrap();
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads phases back. Accepts the `i, phase_rad` form and an extended
/// `i, re, im` form; the latter must hold unit-modulus entries.
pub fn read_phases(path: &Path) -> Result<PhaseVector> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let complex_form = match cols.as_slice() {
        ["i", "phase_rad"] => false,
        ["i", "re", "im"] => true,
        _ => {
            return Err(format_err(path, "header must be `i,phase_rad` or `i,re,im`"));
        }
    };
    let mut out = Vec::new();
    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(format_err(path, format!("row {r} has {} cells", cells.len())));
        }
        if complex_form {
            let re: f64 = cells[1]
                .parse()
                .map_err(|_| format_err(path, format!("bad real part at row {r}")))?;
            let im: f64 = cells[2]
                .parse()
                .map_err(|_| format_err(path, format!("bad imaginary part at row {r}")))?;
            out.push(Complex64::new(re, im));
        } else {
            let p: f64 = cells[1]
                .parse()
                .map_err(|_| format_err(path, format!("bad phase at row {r}")))?;
            out.push(Complex64::new(p.cos(), p.sin()));
        }
    }
    if out.is_empty() {
        return Err(format_err(path, "no phase rows"));
    }
    if complex_form {
        for (i, v) in out.iter().enumerate() {
            if (v.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::NotUnitModulus { index: i, modulus: v.norm(), tolerance: 1e-6 });
            }
        }
        let normalized: Vec<Complex64> = out.iter().map(|v| v / v.norm()).collect();
        return PhaseVector::try_from_complex(normalized);
    }
    PhaseVector::try_from_complex(out)
}

/// Run summary written next to the grids; the config echo re-parses to
/// an equivalent document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rse: Option<f64>,
    pub final_objective: f64,
    pub cycles: usize,
    pub converged: bool,
    pub seed: u64,
    pub wall_seconds: f64,
    pub scene_fingerprint: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated_height: Option<f64>,
    pub objective_history: Vec<f64>,
    pub config: ConfigDocument,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = toml::to_string_pretty(summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn grid_cut_round_trips_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cut.csv");
        let cut = GridCut {
            row_label: "theta_deg".into(),
            col_label: "phi_deg".into(),
            row_axis: vec![-87.5, -82.5, 1.0 / 3.0],
            col_axis: vec![-1.2345678901234567e8, 0.1],
            values: vec![0.0, -60.0, -3.25, 1.0 / 7.0, f64::MIN_POSITIVE, 2.5e-300],
        };
        write_grid_cut(&path, &cut).unwrap();
        let back = read_grid_cut(&path).unwrap();
        assert_eq!(cut, back);
    }

    #[test]
    fn signals_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("signals.csv");
        let s = SignalBlock::new(
            vec![
                Complex64::new(0.1, -0.2),
                Complex64::new(1.0 / 3.0, 0.0),
                Complex64::new(-5.5, 2.25),
                Complex64::new(0.0, -1.0 / 7.0),
            ],
            2,
            2,
        )
        .unwrap();
        write_signals(&path, &s).unwrap();
        let back = read_signals(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn phases_round_trip_and_tamper_detection() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("phases.csv");
        let x = PhaseVector::from_phases(&[0.1, -2.5, 3.0]);
        write_phases(&path, &x).unwrap();
        let back = read_phases(&path).unwrap();
        for (a, b) in x.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).norm() < 1e-15);
        }
        // extended complex form with a broken modulus is rejected
        std::fs::write(&path, "i,re,im\n1,0.5,0.0\n").unwrap();
        assert!(matches!(read_phases(&path), Err(Error::NotUnitModulus { .. })));
        std::fs::write(&path, "i,re,im\n1,0.6,0.8\n").unwrap();
        assert!(read_phases(&path).is_ok());
    }

    #[test]
    fn malformed_inputs_report_location() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("signals.csv");
        std::fs::write(&path, "n,s1_re,s1_im\n1,0.5\n").unwrap();
        let err = read_signals(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0"), "{msg}");
    }
}
