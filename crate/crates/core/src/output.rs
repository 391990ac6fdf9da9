//! CSV trajectories, summary files and gnuplot companions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{SampleRecord, Trajectory};

/// The columns that make it to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_star: Vec<f64>,
    pub err: f64,
    pub err_sq: f64,
    pub phi_minus_gamma: f64,
    pub grad_norm: f64,
    pub cost: f64,
}

impl From<&SampleRecord> for CsvRow {
    fn from(r: &SampleRecord) -> Self {
        Self {
            t: r.t,
            x: r.x.clone(),
            u: r.u.clone(),
            u_star: r.u_star.clone(),
            err: r.err,
            err_sq: r.err_sq,
            phi_minus_gamma: r.phi_minus_gamma,
            grad_norm: r.grad_norm,
            cost: r.cost,
        }
    }
}

pub fn csv_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=m).map(|i| format!("u{i}")));
    h.extend((1..=m).map(|i| format!("ustar{i}")));
    h.extend(["err", "err_sq", "phi_minus_gamma", "grad_norm", "cost"].map(String::from));
    h
}

/// 17 significant digits, which round-trips every `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err(path))
}

pub fn emit_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(csv_header(traj.meta.state_dim, traj.meta.input_dim))
        .map_err(csv_err(path))?;
    for r in &traj.records {
        let mut row = vec![format_value(r.t)];
        row.extend(r.x.iter().chain(&r.u).chain(&r.u_star).map(|&v| format_value(v)));
        row.extend([r.err, r.err_sq, r.phi_minus_gamma, r.grad_norm, r.cost].map(format_value));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a trajectory CSV written by [`emit_csv`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    let count = |prefix: &str| {
        header
            .iter()
            .filter(|h| h.strip_prefix(prefix).is_some_and(|d| d.parse::<usize>().is_ok()))
            .count()
    };
    let n = count("x");
    let m = count("u");
    if header.iter().collect::<Vec<_>>() != csv_header(n, m) {
        return Err(Error::Parse(format!("{}: unexpected CSV header", path.display())));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("{} row {}: {e}", path.display(), line + 2)))?;
        let tail = &vals[1 + n + 2 * m..];
        rows.push(CsvRow {
            t: vals[0],
            x: vals[1..1 + n].to_vec(),
            u: vals[1 + n..1 + n + m].to_vec(),
            u_star: vals[1 + n + m..1 + n + 2 * m].to_vec(),
            err: tail[0],
            err_sq: tail[1],
            phi_minus_gamma: tail[2],
            grad_norm: tail[3],
            cost: tail[4],
        });
    }
    Ok(rows)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    create_parent(path)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Log-scale plot of tracking error and gradient norm next to `csv`.
pub fn gnuplot_script(csv: &Path, n: usize, m: usize) -> String {
    let name = csv.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let col = |c: &str| csv_header(n, m).iter().position(|h| h == c).map_or(0, |i| i + 1);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set xlabel 't [s]'");
    let _ = writeln!(
        s,
        "plot '{name}' using 1:{} with lines title '|u - u*|', '' using 1:{} with lines title '|grad_u J~|'",
        col("err"),
        col("grad_norm")
    );
    s
}

/// `stem.csv`, `stem.summary.txt`, `stem.gp` inside `dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        Self {
            csv: dir.join(format!("{stem}.csv")),
            summary: dir.join(format!("{stem}.summary.txt")),
            plot: dir.join(format!("{stem}.gp")),
        }
    }
}
