//! Time-indexed records assembled over a grid.

use crate::detect::TransitionEvent;
use crate::entanglement::{
    entanglement_entropy, particle_number_variance, EchoPoint, EntanglementSnapshot,
};

/// One grid point of a series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRecord {
    pub t: f64,
    pub echo_mag: f64,
    pub echo_phase: f64,
    /// `Γ(t)`; `+∞` when the echo vanishes exactly.
    pub gamma: f64,
    pub lambda_rate: Option<f64>,
    pub entropy: f64,
    pub variance: f64,
    pub occupied_count: usize,
    pub degenerate: bool,
}

impl SeriesRecord {
    pub fn from_echo(point: &EchoPoint, snapshot: &EntanglementSnapshot) -> Self {
        SeriesRecord {
            t: point.time,
            echo_mag: point.magnitude,
            echo_phase: point.echo.arg(),
            gamma: point.rate,
            lambda_rate: None,
            entropy: entanglement_entropy(snapshot),
            variance: particle_number_variance(snapshot),
            occupied_count: snapshot.occupied_count,
            degenerate: point.degenerate,
        }
    }

    pub fn echo_zero(&self) -> bool {
        self.gamma.is_infinite()
    }
}

/// One entanglement level at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub t: f64,
    pub index: usize,
    pub xi: f64,
    pub ky: Option<f64>,
}

impl SpectrumRow {
    pub fn rows_of(snapshot: &EntanglementSnapshot) -> impl Iterator<Item = SpectrumRow> + '_ {
        snapshot.xs.iter().enumerate().map(|(index, &xi)| SpectrumRow {
            t: snapshot.time,
            index,
            xi,
            ky: snapshot.ky,
        })
    }
}

/// Everything recorded for one subsystem (or one `ky` block) of a run.
#[derive(Clone, Debug, Default)]
pub struct SeriesBundle {
    /// Short description of the protocol that produced the series.
    pub label: String,
    pub records: Vec<SeriesRecord>,
    pub spectrum: Vec<SpectrumRow>,
    pub transitions: Vec<TransitionEvent>,
}

impl SeriesBundle {
    pub fn grid(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    /// Grid is strictly increasing.
    pub fn is_well_formed(&self) -> bool {
        self.records.windows(2).all(|w| w[0].t < w[1].t)
    }
}

/// `time_steps + 1` equally spaced times on `[0, time_max]`.
pub fn time_grid(time_max: f64, time_steps: usize) -> Vec<f64> {
    let dt = time_max / time_steps as f64;
    (0..=time_steps).map(|i| i as f64 * dt).collect()
}
