//! CSV tables written by the runner.

use std::fs::File;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use entecho::detect::{TransitionEvent, Unclassified};
use entecho::entanglement::RATE_CAP;
use entecho::loschmidt::LoschmidtPoint;
use entecho::series::{SeriesRecord, SpectrumRow};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub echo_mag: f64,
    pub echo_phase: f64,
    /// Capped at 50; see `echo_zero`.
    pub gamma: f64,
    pub echo_zero: bool,
    pub lambda_rate: Option<f64>,
    pub entropy: f64,
    pub variance: f64,
    pub occupied_count: usize,
    pub degenerate: bool,
}

impl From<&SeriesRecord> for SeriesRow {
    fn from(r: &SeriesRecord) -> Self {
        SeriesRow {
            t: r.t,
            echo_mag: r.echo_mag,
            echo_phase: r.echo_phase,
            gamma: r.gamma.min(RATE_CAP),
            echo_zero: r.echo_zero(),
            lambda_rate: r.lambda_rate,
            entropy: r.entropy,
            variance: r.variance,
            occupied_count: r.occupied_count,
            degenerate: r.degenerate,
        }
    }
}

/// Per-`ky` series of a torus run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub t: f64,
    pub ky: f64,
    pub echo_mag: f64,
    pub echo_phase: f64,
    pub gamma: f64,
    pub echo_zero: bool,
    pub entropy: f64,
    pub variance: f64,
    pub occupied_count: usize,
    pub degenerate: bool,
}

impl BlockRow {
    pub fn new(ky: f64, r: &SeriesRecord) -> Self {
        BlockRow {
            t: r.t,
            ky,
            echo_mag: r.echo_mag,
            echo_phase: r.echo_phase,
            gamma: r.gamma.min(RATE_CAP),
            echo_zero: r.echo_zero(),
            entropy: r.entropy,
            variance: r.variance,
            occupied_count: r.occupied_count,
            degenerate: r.degenerate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCsvRow {
    pub t: f64,
    pub index: usize,
    pub xi: f64,
    pub ky: Option<f64>,
}

impl From<&SpectrumRow> for SpectrumCsvRow {
    fn from(r: &SpectrumRow) -> Self {
        SpectrumCsvRow {
            t: r.t,
            index: r.index,
            xi: r.xi,
            ky: r.ky,
        }
    }
}

/// Classified events and unclassified candidates in one table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub t_c: f64,
    /// `jump`, `cusp` or `unclassified`.
    pub kind: String,
    pub ky: Option<f64>,
    pub left_rate: Option<f64>,
    pub right_rate: Option<f64>,
    pub left_slope: Option<f64>,
    pub right_slope: Option<f64>,
    /// Level indices separated by `;`.
    pub crossing_levels: String,
    pub note: String,
}

impl From<&TransitionEvent> for TransitionRow {
    fn from(e: &TransitionEvent) -> Self {
        TransitionRow {
            t_c: e.t_c,
            kind: e.kind.as_str().to_string(),
            ky: e.ky,
            left_rate: Some(e.left_rate),
            right_rate: Some(e.right_rate),
            left_slope: Some(e.left_slope),
            right_slope: Some(e.right_slope),
            crossing_levels: e
                .crossing_levels
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            note: String::new(),
        }
    }
}

impl TransitionRow {
    pub fn unclassified(u: &Unclassified, ky: Option<f64>) -> Self {
        TransitionRow {
            t_c: u.t,
            kind: "unclassified".into(),
            ky,
            left_rate: None,
            right_rate: None,
            left_slope: None,
            right_slope: None,
            crossing_levels: String::new(),
            note: u.reason.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoschmidtRow {
    pub t: f64,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub log_magnitude: f64,
    pub rate: f64,
}

impl From<&LoschmidtPoint> for LoschmidtRow {
    fn from(p: &LoschmidtPoint) -> Self {
        LoschmidtRow {
            t: p.time,
            amplitude_re: p.amplitude.re,
            amplitude_im: p.amplitude.im,
            log_magnitude: p.log_magnitude,
            rate: p.rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub quantity: String,
    pub subsystem: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// A row type with a fixed header, written even for empty tables.
pub trait Table: Serialize {
    const HEADER: &'static [&'static str];
}

macro_rules! table {
    ($t:ty, [$($c:literal),* $(,)?]) => {
        impl Table for $t {
            const HEADER: &'static [&'static str] = &[$($c),*];
        }
    };
}

table!(SeriesRow, [
    "t", "echo_mag", "echo_phase", "gamma", "echo_zero", "lambda_rate", "entropy", "variance",
    "occupied_count", "degenerate",
]);
table!(BlockRow, [
    "t", "ky", "echo_mag", "echo_phase", "gamma", "echo_zero", "entropy", "variance",
    "occupied_count", "degenerate",
]);
table!(SpectrumCsvRow, ["t", "index", "xi", "ky"]);
table!(TransitionRow, [
    "t_c", "kind", "ky", "left_rate", "right_rate", "left_slope", "right_slope",
    "crossing_levels", "note",
]);
table!(LoschmidtRow, ["t", "amplitude_re", "amplitude_im", "log_magnitude", "rate"]);
table!(OracleRow, ["quantity", "subsystem", "max_deviation", "tolerance", "pass"]);

pub fn write_csv<T: Table>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(T::HEADER).map_err(|e| io_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| io_error(path, e))
}
