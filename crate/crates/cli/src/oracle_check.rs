//! Cross-validation of the correlation-matrix pipeline against exact
//! many-body states.

use std::path::PathBuf;

use rayon::prelude::*;

use entecho::correlation::{CorrelationSource, GeneralEvolver, PathwayKind};
use entecho::entanglement::{
    entanglement_echo, entanglement_entropy, particle_number_variance, EchoTracker,
};
use entecho::linalg::max_abs_diff;
use entecho::oracle::{
    build_ground_state, oracle_echo, schmidt_region, CutOrdering, FockEvolver, MAX_MODES,
};
use entecho::series::time_grid;

use crate::config::Config;
use crate::output::{write_csv, OracleRow};
use crate::run::{with_threads, RunOptions};
use crate::CliError;

pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub files: Vec<PathBuf>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn worst(&self, quantity: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.quantity == quantity)
            .map(|r| r.max_deviation)
            .reduce(f64::max)
    }
}

fn row(quantity: &str, subsystem: &str, deviation: f64) -> OracleRow {
    OracleRow {
        quantity: quantity.into(),
        subsystem: subsystem.into(),
        max_deviation: deviation,
        tolerance: ORACLE_TOL,
        pass: deviation < ORACLE_TOL,
    }
}

fn numerical(e: entecho::Error) -> CliError {
    CliError::Numerical(e)
}

/// Max deviations over the config grid of the density matrix, echo
/// magnitude (non-degenerate points), entropy and variance.
pub fn run_oracle_check(config: &Config, opts: &RunOptions) -> Result<OracleReport, CliError> {
    if 2 * config.lx() * config.ly() > MAX_MODES {
        return Err(CliError::Config(format!(
            "model.l: the oracle handles at most {} sites, got {}",
            MAX_MODES / 2,
            config.lx() * config.ly()
        )));
    }
    if config.temperature != 0.0 {
        return Err(CliError::Config(
            "temperature: the oracle needs a pure initial state (temperature = 0)".into(),
        ));
    }
    with_threads(opts.threads.or(config.threads), || {
        let (pre, post) = config.models(opts.seed)?;
        let grid = time_grid(config.time.max, config.time.steps);
        let sites = pre.sites();
        let ground = build_ground_state(&pre, sites).map_err(numerical)?;
        let evolver = FockEvolver::new(&post).map_err(numerical)?;
        let full = GeneralEvolver::for_modes(&pre, &post, 0.0, 0..2 * sites).map_err(numerical)?;
        let states = grid
            .par_iter()
            .map(|&t| evolver.evolve(&ground, t))
            .collect::<entecho::Result<Vec<_>>>()
            .map_err(numerical)?;

        let mut rows = Vec::new();
        let mut density: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for (state, &t) in states.iter().zip(&grid) {
            let c = full.snapshot(t).map_err(numerical)?.matrix;
            density = density.max(max_abs_diff(&state.density_matrix(), &c));
            norm = norm.max((state.norm() - 1.0).abs());
        }
        rows.push(row("density_matrix", "", density));
        rows.push(row("norm", "", norm));

        for (name, subsystem) in config.subsystem_list() {
            let protocol = config.protocol(&pre, &post, subsystem)?;
            let modes = protocol.subsystem_modes();
            let tracker = EchoTracker::with_pathway(&protocol, PathwayKind::General, config.detector().eps_deg)
                .map_err(numerical)?;
            let eps = config.detector().eps_deg;
            let initial = schmidt_region(&ground, modes.clone(), CutOrdering::AFirst)
                .map_err(numerical)?;
            let (mut echo, mut entropy, mut variance): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for (state, &t) in states.iter().zip(&grid) {
                let sample = tracker.at(t).map_err(numerical)?;
                let schmidt = schmidt_region(state, modes.clone(), CutOrdering::AFirst)
                    .map_err(numerical)?;
                entropy = entropy.max((schmidt.entropy() - entanglement_entropy(&sample.snapshot)).abs());
                variance = variance.max(
                    (state.number_variance(modes.clone())
                        - particle_number_variance(&sample.snapshot))
                    .abs(),
                );
                if sample.snapshot.degenerate {
                    continue;
                }
                let point = entanglement_echo(tracker.initial(), &sample.snapshot).map_err(numerical)?;
                echo = echo.max((point.magnitude - oracle_echo(&initial, &schmidt, eps)).abs());
            }
            rows.push(row("echo_magnitude", &name, echo));
            rows.push(row("entropy", &name, entropy));
            rows.push(row("variance", &name, variance));
        }

        let mut files = Vec::new();
        if let Some(dir) = opts.out_dir.clone().or_else(|| config.output.dir.clone()) {
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join("oracle_report.csv");
            write_csv(&path, rows.iter().cloned())?;
            files.push(path);
        }
        Ok(OracleReport { rows, files })
    })
}
