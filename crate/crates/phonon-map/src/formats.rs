//! On-disk formats: pulse CSV, result JSON, channel JSON and data tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use phonon_map_core::analysis::{RobustnessCurve, ScalingRow};
use phonon_map_core::fidelity::MapReport;
use phonon_map_core::linalg::CMatrix;
use phonon_map_core::model::{PulseSet, SystemParams};
use phonon_map_core::qnd::PhononChannel;
use serde::Serialize;

use crate::error::RunError;

pub const PULSE_HEADER: [&str; 4] = ["t_us", "f_carrier", "f_blue", "f_red"];

/// 17 significant digits: enough for an exact `f64` round trip.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|e| RunError::io(path, e))
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::format(path, e.to_string()))?;
    w.write_record(header).map_err(|e| RunError::format(path, e.to_string()))?;
    Ok(w)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
    let mut w = csv_writer(path, header)?;
    for r in rows {
        w.write_record(&r).map_err(|e| RunError::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| RunError::format(path, e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| RunError::io(path, e))
}

pub fn write_pulse_csv(path: &Path, params: &SystemParams, pulses: &PulseSet) -> Result<(), RunError> {
    pulses.check_grid(params)?;
    let rows = (0..=params.n_steps).map(|j| {
        let [c, b, r] = pulses.amplitudes(j);
        vec![num(params.time(j)), num(c), num(b), num(r)]
    });
    write_rows(path, &PULSE_HEADER, rows)
}

/// Reads a pulse table and checks it sits on the grid of `params`.
pub fn read_pulse_csv(path: &Path, params: &SystemParams) -> Result<PulseSet, RunError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| RunError::format(path, e.to_string()))?;
    let header = r.headers().map_err(|e| RunError::format(path, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != PULSE_HEADER {
        return Err(RunError::format(path, format!("expected header {}", PULSE_HEADER.join(","))));
    }
    let mut pulses = PulseSet::zeros(params.n_steps);
    let mut count = 0;
    for (j, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| RunError::format(path, e.to_string()))?;
        if j > params.n_steps {
            count = j + 1;
            continue;
        }
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RunError::format(path, format!("row {}: {e}", j + 1)))?;
        if vals.len() != 4 {
            return Err(RunError::format(path, format!("row {}: expected 4 columns", j + 1)));
        }
        if (vals[0] - params.time(j)).abs() > 1e-9 * params.total_time {
            return Err(RunError::format(path, format!("row {}: t_us = {} is off the grid", j + 1, vals[0])));
        }
        for f in 0..3 {
            pulses.samples[f][j] = vals[f + 1];
        }
        count = j + 1;
    }
    if count != params.n_steps + 1 {
        return Err(RunError::format(path, format!("expected {} rows, found {count}", params.n_steps + 1)));
    }
    Ok(pulses)
}

pub fn write_map_report_csv(path: &Path, report: &MapReport) -> Result<(), RunError> {
    let rows = report.p_up.iter().enumerate().map(|(n, p)| vec![n.to_string(), num(*p), (n == report.m).to_string()]);
    write_rows(path, &["n", "p_up", "target"], rows)
}

pub fn write_robustness_csv(path: &Path, curve: &RobustnessCurve) -> Result<(), RunError> {
    let rows = curve.xi.iter().zip(&curve.fidelity).map(|(x, f)| vec![num(*x), num(*f)]);
    write_rows(path, &["xi", "F"], rows)
}

pub fn write_scaling_csv(path: &Path, rows: &[ScalingRow]) -> Result<(), RunError> {
    let rows = rows.iter().map(|r| vec![r.n.to_string(), num(r.one_minus_f), num(r.t_opt_us)]);
    write_rows(path, &["N", "one_minus_F", "T_opt_us"], rows)
}

/// One row of the waiting-time table, times in units of `1/Ω0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T_P")]
    pub t_p: f64,
    #[serde(rename = "T_F")]
    pub t_f: Option<f64>,
    #[serde(rename = "T_dphi")]
    pub t_dphi: Option<f64>,
    #[serde(rename = "T_opt")]
    pub t_opt: Option<f64>,
}

pub fn write_poincare_csv(path: &Path, rows: &[PoincareRow]) -> Result<(), RunError> {
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows = rows.iter().map(|r| vec![r.n.to_string(), r.m.to_string(), num(r.t_p), opt(r.t_f), opt(r.t_dphi), opt(r.t_opt)]);
    write_rows(path, &["N", "m", "T_P", "T_F", "T_dphi", "T_opt"], rows)
}

type JsonMatrix = Vec<Vec<[f64; 2]>>;

fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.dim()).map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// Kraus operators as a JSON list of row-major matrices of `[re, im]` pairs.
pub fn read_channel(path: &Path) -> Result<PhononChannel, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let raw: Vec<JsonMatrix> = serde_json::from_str(&text).map_err(|e| RunError::format(path, e.to_string()))?;
    let mats = raw
        .into_iter()
        .enumerate()
        .map(|(i, rows)| {
            let dim = rows.len();
            if rows.iter().any(|r| r.len() != dim) {
                return Err(RunError::format(path, format!("Kraus operator {i} is not square")));
            }
            let data = rows.into_iter().flatten().map(|[re, im]| Complex64::new(re, im)).collect();
            CMatrix::from_row_major(data).map_err(RunError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhononChannel::new(mats)?)
}

pub fn write_channel(path: &Path, channel: &PhononChannel) -> Result<(), RunError> {
    let raw: Vec<JsonMatrix> = channel.kraus().iter().map(matrix_to_json).collect();
    write_json(path, &raw)
}
