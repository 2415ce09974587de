//! CSV tables: deterministic writing and coefficient table loading.

use std::fs::File;
use std::path::Path;

use heatobs_core::domain::{Domain, Metric};

use crate::RunError;

/// One CSV field. Reals are written in `{:.12e}` so output is byte-stable.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Flag(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Real(v) => format!("{v:.12e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Flag(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::io::Cell::from($x)),*] };
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), RunError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != header.len() {
            return Err(RunError::Internal(format!(
                "{}: row {i} has {} fields, header has {}",
                path.display(),
                r.len(),
                header.len()
            )));
        }
        w.write_record(r.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-node coefficient table: `node,g,kappa` in 1-D and
/// `node,g_xx,g_xy,g_yx,g_yy,kappa` in 2-D, one row per grid node, with an
/// optional header row.
pub fn read_coefficient_table(
    path: &Path,
    domain: &Domain,
) -> Result<(Vec<Metric>, Vec<f64>), RunError> {
    let bad =
        |line: usize, msg: String| RunError::Input(format!("{}:{line}: {msg}", path.display()));
    let width = if domain.dim() == 1 { 3 } else { 6 };
    let n = domain.node_count();
    let mut metric = vec![None; n];
    let mut kappa = vec![0.0; n];
    let file = File::open(path)
        .map_err(|e| RunError::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() != width {
            return Err(bad(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let node: usize = rec[0]
            .parse()
            .map_err(|_| bad(line, format!("bad node index `{}`", &rec[0])))?;
        let vals: Vec<f64> = (1..width)
            .map(|k| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| bad(line, format!("bad number `{}`", &rec[k])))
            })
            .collect::<Result<_, _>>()?;
        if node >= n {
            return Err(bad(
                line,
                format!("node {node} outside the grid of {n} nodes"),
            ));
        }
        if metric[node].is_some() {
            return Err(bad(line, format!("node {node} listed twice")));
        }
        let g = if width == 3 {
            Metric::scalar(vals[0])
        } else {
            if (vals[1] - vals[2]).abs() > 1e-12 * (vals[1].abs() + vals[2].abs()).max(1.0) {
                return Err(bad(line, "metric is not symmetric".into()));
            }
            Metric {
                xx: vals[0],
                xy: vals[1],
                yy: vals[3],
            }
        };
        metric[node] = Some(g);
        kappa[node] = vals[width - 2];
    }
    let metric: Vec<Metric> = metric
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| RunError::Input(format!("{}: node {i} missing", path.display())))
        })
        .collect::<Result<_, _>>()?;
    Ok((metric, kappa))
}
