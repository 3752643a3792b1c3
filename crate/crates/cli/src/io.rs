//! File formats: demonstration and prediction CSV, query grids, temporal
//! datasets and desired states.

use std::io::Write;
use std::path::{Path, PathBuf};

use imitate_core::{DesiredState, ManifoldSpec, Matrix, ProbabilisticTrajectory, TemporalSample, Vector};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to `path`, or stdout when absent.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_cell(path: &Path, row: usize, col: &str, cell: &str) -> CliResult<f64> {
    cell.trim()
        .parse()
        .map_err(|_| CliError::parse(path, format!("row {row}, column '{col}': not a number: '{cell}'")))
}

/// One demonstration: header columns starting with `x` are inputs and columns
/// starting with `y` are outputs, in file order.
pub fn read_demo_csv(path: &Path) -> CliResult<Vec<(Vector, Vector)>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let mut x_cols = Vec::new();
    let mut y_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match h.trim().chars().next() {
            Some('x') => x_cols.push(i),
            Some('y') => y_cols.push(i),
            _ => {
                return Err(CliError::parse(
                    path,
                    format!("column '{h}': expected a name starting with x or y"),
                ))
            }
        }
    }
    if x_cols.is_empty() || y_cols.is_empty() {
        return Err(CliError::parse(path, "need at least one x column and one y column"));
    }
    let mut samples = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let pick = |cols: &[usize]| -> CliResult<Vector> {
            let vals = cols
                .iter()
                .map(|&c| parse_cell(path, r + 1, &headers[c], &record[c]))
                .collect::<CliResult<Vec<f64>>>()?;
            Ok(Vector::from_vec(vals))
        };
        samples.push((pick(&x_cols)?, pick(&y_cols)?));
    }
    Ok(samples)
}

/// One row of prediction output.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub x: Vec<f64>,
    pub mu: Vector,
    pub sigma: Matrix,
    pub flags: String,
}

/// Columns `x0…, mu0…, sigma0_0…` (row-major), `flags`.
pub fn prediction_csv(rows: &[PredictionRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let stdout = Path::new("<output>");
    if let Some(first) = rows.first() {
        let o = first.mu.len();
        let mut header: Vec<String> = (0..first.x.len()).map(|i| format!("x{i}")).collect();
        header.extend((0..o).map(|i| format!("mu{i}")));
        header.extend((0..o * o).map(|k| format!("sigma{}_{}", k / o, k % o)));
        header.push("flags".into());
        w.write_record(&header).map_err(csv_err(stdout))?;
    }
    for row in rows {
        let mut rec: Vec<String> = row.x.iter().map(|&v| fmt_f64(v)).collect();
        rec.extend(row.mu.iter().map(|&v| fmt_f64(v)));
        rec.extend(row.sigma.transpose().iter().map(|&v| fmt_f64(v)));
        rec.push(row.flags.clone());
        w.write_record(&rec).map_err(csv_err(stdout))?;
    }
    w.into_inner().map_err(|e| CliError::parse(stdout, e.to_string()))
}

pub fn read_prediction_csv(path: &Path) -> CliResult<Vec<PredictionRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let count = |prefix: &str| headers.iter().filter(|h| h.starts_with(prefix)).count();
    let (n_x, n_mu, n_sigma) = (count("x"), count("mu"), count("sigma"));
    if n_mu == 0 || n_sigma != n_mu * n_mu || headers.len() != n_x + n_mu + n_sigma + 1 {
        return Err(CliError::parse(
            path,
            "expected columns x…, mu…, sigma… (row-major, mu-count squared), flags",
        ));
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let nums = (0..headers.len() - 1)
            .map(|c| parse_cell(path, r + 1, &headers[c], &record[c]))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(PredictionRow {
            x: nums[..n_x].to_vec(),
            mu: Vector::from_column_slice(&nums[n_x..n_x + n_mu]),
            sigma: Matrix::from_row_slice(n_mu, n_mu, &nums[n_x + n_mu..]),
            flags: record[headers.len() - 1].to_string(),
        });
    }
    Ok(rows)
}

/// Query inputs from a JSON list of numbers (scalar inputs) or of vectors.
pub fn read_grid_file(path: &Path) -> CliResult<Vec<Vector>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Scalar(f64),
        Vector(Vec<f64>),
    }
    let entries: Vec<Entry> =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e.to_string()))?;
    Ok(entries
        .into_iter()
        .map(|e| match e {
            Entry::Scalar(t) => Vector::from_element(1, t),
            Entry::Vector(v) => Vector::from_vec(v),
        })
        .collect())
}

/// `sphere`, `sphere:<radius>`, `cylinder`, inline JSON, or a JSON file.
pub fn parse_manifold(arg: &str) -> CliResult<ManifoldSpec> {
    let spec = if let Some(r) = arg.strip_prefix("sphere:") {
        let radius: f64 = r
            .parse()
            .map_err(|_| CliError::usage(format!("--manifold: bad sphere radius '{r}'")))?;
        ManifoldSpec::sphere(radius)?
    } else if arg == "sphere" {
        ManifoldSpec::sphere(1.0)?
    } else if arg == "cylinder" {
        ManifoldSpec::Cylinder
    } else if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| CliError::usage(format!("--manifold: {e}")))?
    } else {
        let path = Path::new(arg);
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e.to_string()))?
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemporalRecord {
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

/// Either `{times, positions, velocities}` or a trajectory with scalar
/// inputs, whose velocities are then finite differences of the means.
pub fn read_temporal(path: &Path) -> CliResult<Vec<TemporalSample>> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
    if value.get("times").is_some() {
        let rec: TemporalRecord = serde_json::from_value(value).map_err(|e| CliError::parse(path, e.to_string()))?;
        let n = rec.times.len();
        if rec.positions.len() != n || rec.velocities.len() != n {
            return Err(CliError::parse(
                path,
                "times, positions and velocities must have equal lengths",
            ));
        }
        return Ok(rec
            .times
            .into_iter()
            .zip(rec.positions)
            .zip(rec.velocities)
            .map(|((t, p), v)| TemporalSample {
                t,
                position: Vector::from_vec(p),
                velocity: Vector::from_vec(v),
            })
            .collect());
    }
    let traj = ProbabilisticTrajectory::from_json_str(&text)?;
    if traj.input_dim() != 1 {
        return Err(CliError::parse(path, "temporal data needs scalar time inputs"));
    }
    let times: Vec<f64> = traj.inputs().iter().map(|x| x[0]).collect();
    let velocities = finite_difference(&times, traj.means()).map_err(|m| CliError::parse(path, m))?;
    Ok(times
        .into_iter()
        .zip(traj.means())
        .zip(velocities)
        .map(|((t, p), v)| TemporalSample {
            t,
            position: p.clone(),
            velocity: v,
        })
        .collect())
}

/// Central differences inside, one-sided at the ends.
fn finite_difference(times: &[f64], values: &[Vector]) -> Result<Vec<Vector>, String> {
    let n = times.len();
    if n < 2 {
        return Err("need at least two time stamps to difference".into());
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err("times must be strictly increasing".into());
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (&values[b] - &values[a]) / (times[b] - times[a])
        })
        .collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesiredRecord {
    t: f64,
    position: Option<Vec<f64>>,
    velocity: Option<Vec<f64>>,
    weight: f64,
}

/// JSON list of `{t, position?, velocity?, weight}`.
pub fn read_desired(path: &Path) -> CliResult<Vec<DesiredState>> {
    let recs: Vec<DesiredRecord> =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e.to_string()))?;
    Ok(recs
        .into_iter()
        .map(|r| DesiredState {
            t: r.t,
            position: r.position.map(Vector::from_vec),
            velocity: r.velocity.map(Vector::from_vec),
            weight: r.weight,
        })
        .collect())
}
