//! Trajectory serialization. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Format;
use crate::dynamics::{ForceBreakdown, Trajectory};

pub fn column_names(dof: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dof).map(|j| format!("q{j}")));
    cols.extend((1..=dof).map(|j| format!("v{j}")));
    cols.extend(["H", "T", "V", "D", "R", "W"].map(String::from));
    cols
}

/// One row per sample, in [`column_names`] order.
pub fn rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.samples
        .iter()
        .map(|s| {
            let d = &s.diagnostics;
            let mut row = vec![s.state.t];
            row.extend_from_slice(&s.state.q);
            row.extend_from_slice(&s.state.v);
            row.extend([d.total_energy, d.kinetic, d.potential, d.dissipation, d.dissipation_potential, d.power]);
            row
        })
        .collect()
}

fn dof_of(traj: &Trajectory) -> usize {
    traj.samples.first().map_or(0, |s| s.state.q.len())
}

pub fn write_csv(path: &Path, traj: &Trajectory) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", column_names(dof_of(traj)).join(","))?;
    let mut line = String::new();
    for row in rows(traj) {
        line.clear();
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{x:?}").expect("writing to a String");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Header and numeric rows of a trajectory CSV.
pub fn read_csv(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().split(',').map(String::from).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|x| {
                    x.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{x:?}: {e}")))
                })
                .collect()
        })
        .collect::<io::Result<_>>()?;
    Ok((header, rows))
}

#[derive(Serialize)]
struct JsonRow<'a> {
    t: f64,
    q: &'a [f64],
    v: &'a [f64],
    #[serde(rename = "H")]
    h: f64,
    #[serde(rename = "T")]
    t_kin: f64,
    #[serde(rename = "V")]
    v_pot: f64,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    forces: Option<&'a ForceBreakdown>,
}

pub fn write_jsonl(path: &Path, traj: &Trajectory) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for s in &traj.samples {
        let d = &s.diagnostics;
        let row = JsonRow {
            t: s.state.t,
            q: &s.state.q,
            v: &s.state.v,
            h: d.total_energy,
            t_kin: d.kinetic,
            v_pot: d.potential,
            d: d.dissipation,
            r: d.dissipation_potential,
            w: d.power,
            forces: s.forces.as_ref(),
        };
        serde_json::to_writer(&mut w, &row)?;
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, format: Format) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(path, traj),
        Format::Jsonl => write_jsonl(path, traj),
    }
}

/// Writes `<dir>/<column>.dat` with `t value` lines for every non-time
/// column and returns the paths.
pub fn write_plot_data(dir: &Path, traj: &Trajectory) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let names = column_names(dof_of(traj));
    let rows = rows(traj);
    let mut paths = Vec::with_capacity(names.len() - 1);
    for (c, name) in names.iter().enumerate().skip(1) {
        let path = dir.join(format!("{name}.dat"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# t {name}")?;
        for row in &rows {
            writeln!(w, "{:?} {:?}", row[0], row[c])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Diagnostics, IntegratorConfig, IntegratorMeta, Sample, State};

    fn tiny() -> Trajectory {
        let diag = |x: f64| Diagnostics {
            total_energy: x,
            kinetic: 0.1,
            potential: x - 0.1,
            dissipation: 1e-300,
            dissipation_potential: 0.0,
            power: -1.0 / 3.0,
            lagrangian: 0.2 - x,
        };
        let cfg = IntegratorConfig::default();
        Trajectory {
            samples: vec![
                Sample { state: State::new(0.0, vec![1.0], vec![-0.0]), diagnostics: diag(0.5), forces: None },
                Sample {
                    state: State::new(0.1, vec![0.1 + 0.2], vec![std::f64::consts::PI]),
                    diagnostics: diag(1e20),
                    forces: None,
                },
            ],
            meta: IntegratorMeta {
                method: cfg.method,
                steps_taken: 1,
                steps_rejected: 0,
                dt: 0.1,
                rel_tol: cfg.rel_tol,
                abs_tol: cfg.abs_tol,
                sample_every: 1,
            },
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = tiny();
        write_csv(&path, &traj).unwrap();
        let (header, back) = read_csv(&path).unwrap();
        assert_eq!(header, ["t", "q1", "v1", "H", "T", "V", "D", "R", "W"]);
        let expect = rows(&traj);
        for (a, b) in back.iter().zip(&expect) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn jsonl_has_one_object_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_jsonl(&path, &tiny()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1]["v"][0].as_f64(), Some(std::f64::consts::PI));
        assert_eq!(lines[0]["H"].as_f64(), Some(0.5));
    }

    #[test]
    fn plot_data_has_one_file_per_column() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_plot_data(&dir.path().join("plot"), &tiny()).unwrap();
        assert_eq!(paths.len(), 8);
        let h = fs::read_to_string(dir.path().join("plot/H.dat")).unwrap();
        assert_eq!(h.lines().nth(2), Some("0.1 1e20"));
    }
}
