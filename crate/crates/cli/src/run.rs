//! Experiment runner: grid evaluation, detection and output files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use entecho::correlation::{auto_pathway, PathwayKind, QuenchProtocol, Subsystem};
use entecho::detect::{
    detect_in_rates, detect_transitions, DetectorConfig, Probe, TransitionEvent, Unclassified,
};
use entecho::entanglement::{
    echo_rate, EchoPoint, EchoSample, EchoTracker, MomentumEchoTracker, RATE_CAP,
};
use entecho::loschmidt::{LoschmidtEvaluator, LoschmidtPoint};
use entecho::models::ModelSpec;
use entecho::series::{time_grid, SeriesBundle, SeriesRecord, SpectrumRow};
use entecho::C64;

use crate::config::Config;
use crate::output::{
    read_csv, write_csv, BlockRow, LoschmidtRow, SeriesRow, SpectrumCsvRow, TransitionRow,
};
use crate::CliError;

/// Command-line overrides of config values.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// One `ky` block of a torus subsystem.
#[derive(Clone, Debug)]
pub struct KyBlock {
    pub ky: f64,
    pub records: Vec<SeriesRecord>,
    /// Entanglement gap `min |ξ - 1/2|` at `t = 0`.
    pub initial_gap: f64,
}

#[derive(Clone, Debug)]
pub struct SubsystemRun {
    pub name: String,
    pub subsystem: Subsystem,
    /// Total echo; on a torus its transitions are those of the blocks.
    pub bundle: SeriesBundle,
    pub blocks: Vec<KyBlock>,
    pub unclassified: Vec<(Option<f64>, Unclassified)>,
}

impl SubsystemRun {
    pub fn events(&self) -> &[TransitionEvent] {
        &self.bundle.transitions
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub pre: ModelSpec,
    pub post: ModelSpec,
    pub runs: Vec<SubsystemRun>,
    pub loschmidt: Option<Vec<LoschmidtPoint>>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn run(&self, name: &str) -> Option<&SubsystemRun> {
        self.runs.iter().find(|r| r.name == name)
    }
}

fn numerical(e: entecho::Error) -> CliError {
    CliError::Numerical(e)
}

/// Run `f` on a pool of the requested size, or on the global pool.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?
            .install(f),
    }
}

fn out_dir(config: &Config, opts: &RunOptions) -> Option<PathBuf> {
    opts.out_dir.clone().or_else(|| config.output.dir.clone())
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let config = Config::load(config_path)?;
    run_config(&config, opts)
}

pub fn run_config(config: &Config, opts: &RunOptions) -> Result<RunOutput, CliError> {
    with_threads(opts.threads.or(config.threads), || run_inner(config, opts))
}

fn run_inner(config: &Config, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let (pre, post) = config.models(opts.seed)?;
    let grid = time_grid(config.time.max, config.time.steps);
    let detector = config.detector();
    let override_kind = config.pathway_kind()?;

    let subsystems = config.subsystem_list();
    let first = config.protocol(&pre, &post, subsystems[0].1)?;
    let loschmidt = if config.output.loschmidt && config.temperature == 0.0 {
        Some(LoschmidtEvaluator::new(&first).map_err(numerical)?.series(&grid))
    } else {
        None
    };
    let lambda: Option<Vec<f64>> = loschmidt
        .as_ref()
        .map(|points| points.iter().map(|p| p.rate).collect());

    let mut runs = Vec::with_capacity(subsystems.len());
    for (name, subsystem) in subsystems {
        let protocol = config.protocol(&pre, &post, subsystem)?;
        let kind = override_kind.unwrap_or_else(|| auto_pathway(&protocol));
        let mut run = if kind == PathwayKind::MomentumResolved {
            run_torus(&protocol, &grid, &detector, config.output.spectrum)?
        } else {
            run_segment(&protocol, kind, &grid, &detector)?
        };
        if let Some(rates) = &lambda {
            for (record, &rate) in run.bundle.records.iter_mut().zip(rates) {
                record.lambda_rate = Some(rate);
            }
        }
        run.name = name.clone();
        run.bundle.label = label(config, &name, subsystem, kind);
        run.subsystem = subsystem;
        runs.push(run);
    }

    let mut files = Vec::new();
    if let Some(dir) = out_dir(config, opts) {
        prepare_dir(&dir)?;
        for run in &runs {
            files.extend(write_run(&dir, run, config.output.spectrum)?);
        }
        if let Some(points) = &loschmidt {
            let path = dir.join("loschmidt.csv");
            write_csv(&path, points.iter().map(LoschmidtRow::from))?;
            files.push(path);
        }
    }
    Ok(RunOutput {
        pre,
        post,
        runs,
        loschmidt,
        files,
    })
}

fn label(config: &Config, name: &str, s: Subsystem, kind: PathwayKind) -> String {
    format!(
        "{name}: {:?} L={} Ly={} sites {}..{} T={} pathway {kind:?}",
        config.model.kind,
        config.lx(),
        config.ly(),
        s.start,
        s.start + s.len,
        config.temperature
    )
}

fn probe_of(sample: EchoSample) -> Probe {
    Probe {
        rate: sample.point.capped_rate(),
        degenerate: sample.point.degenerate,
        snapshot: Some(sample.snapshot),
    }
}

/// Chain subsystem, or a torus treated as one matrix.
fn run_segment(
    protocol: &QuenchProtocol,
    kind: PathwayKind,
    grid: &[f64],
    detector: &DetectorConfig,
) -> Result<SubsystemRun, CliError> {
    let tracker = EchoTracker::with_pathway(protocol, kind, detector.eps_deg).map_err(numerical)?;
    let samples: Vec<EchoSample> = grid
        .par_iter()
        .map(|&t| tracker.at(t))
        .collect::<entecho::Result<_>>()
        .map_err(numerical)?;
    let mut bundle = SeriesBundle::default();
    for s in &samples {
        bundle.records.push(SeriesRecord::from_echo(&s.point, &s.snapshot));
        bundle.spectrum.extend(SpectrumRow::rows_of(&s.snapshot));
    }
    drop(samples);
    let detection = detect_transitions(&bundle, |t| tracker.at(t).map(probe_of), detector)
        .map_err(numerical)?;
    bundle.transitions = detection.events;
    Ok(SubsystemRun {
        name: String::new(),
        subsystem: protocol.subsystem,
        bundle,
        blocks: Vec::new(),
        unclassified: detection.unclassified.into_iter().map(|u| (None, u)).collect(),
    })
}

fn entanglement_gap(xs: &[f64]) -> f64 {
    xs.iter().map(|x| (x - 0.5).abs()).fold(f64::INFINITY, f64::min)
}

/// Torus subsystem, block by block in `ky`.
fn run_torus(
    protocol: &QuenchProtocol,
    grid: &[f64],
    detector: &DetectorConfig,
    keep_spectrum: bool,
) -> Result<SubsystemRun, CliError> {
    let tracker = MomentumEchoTracker::new(protocol, detector.eps_deg).map_err(numerical)?;
    let kys = tracker.kys();

    // one block at a time keeps only the records, never the eigenvectors
    struct BlockOutcome {
        block: KyBlock,
        echoes: Vec<C64>,
        spectrum: Vec<SpectrumRow>,
        events: Vec<TransitionEvent>,
        unclassified: Vec<Unclassified>,
    }
    let outcomes: Vec<BlockOutcome> = (0..tracker.block_count())
        .into_par_iter()
        .map(|i| -> entecho::Result<BlockOutcome> {
            let mut records = Vec::with_capacity(grid.len());
            let mut echoes = Vec::with_capacity(grid.len());
            let mut spectrum = Vec::new();
            let mut initial_gap = f64::INFINITY;
            for &t in grid {
                let s = tracker.block_at(i, t)?;
                if t == 0.0 {
                    initial_gap = entanglement_gap(&s.snapshot.xs);
                }
                records.push(SeriesRecord::from_echo(&s.point, &s.snapshot));
                echoes.push(s.point.echo);
                if keep_spectrum {
                    spectrum.extend(SpectrumRow::rows_of(&s.snapshot));
                }
            }
            let rates: Vec<f64> = records.iter().map(|r| r.gamma.min(RATE_CAP)).collect();
            let detection = detect_in_rates(
                grid,
                &rates,
                |t| tracker.block_at(i, t).map(probe_of),
                detector,
                Some(kys[i]),
            )?;
            Ok(BlockOutcome {
                block: KyBlock {
                    ky: kys[i],
                    records,
                    initial_gap,
                },
                echoes,
                spectrum,
                events: detection.events,
                unclassified: detection.unclassified,
            })
        })
        .collect::<entecho::Result<_>>()
        .map_err(numerical)?;

    let omega_a = protocol.omega_a();
    let mut bundle = SeriesBundle::default();
    for (j, &t) in grid.iter().enumerate() {
        let mut echo = C64::new(1.0, 0.0);
        let (mut entropy, mut variance, mut occupied, mut degenerate) = (0.0, 0.0, 0, false);
        for o in &outcomes {
            let r = &o.block.records[j];
            echo *= o.echoes[j];
            entropy += r.entropy;
            variance += r.variance;
            occupied += r.occupied_count;
            degenerate |= r.degenerate;
        }
        let mut point = EchoPoint {
            time: t,
            echo,
            magnitude: echo.norm(),
            rate: 0.0,
            degenerate,
        };
        point.rate = echo_rate(&point, omega_a);
        bundle.records.push(SeriesRecord {
            t,
            echo_mag: point.magnitude,
            echo_phase: echo.arg(),
            gamma: point.rate,
            lambda_rate: None,
            entropy,
            variance,
            occupied_count: occupied,
            degenerate,
        });
    }
    let mut blocks = Vec::with_capacity(outcomes.len());
    let mut unclassified = Vec::new();
    for o in outcomes {
        bundle.spectrum.extend(o.spectrum);
        bundle.transitions.extend(o.events);
        unclassified.extend(o.unclassified.into_iter().map(|u| (Some(o.block.ky), u)));
        blocks.push(o.block);
    }
    bundle
        .transitions
        .sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
    Ok(SubsystemRun {
        name: String::new(),
        subsystem: protocol.subsystem,
        bundle,
        blocks,
        unclassified,
    })
}

fn transition_rows(run: &SubsystemRun) -> Vec<TransitionRow> {
    let mut rows: Vec<TransitionRow> = run.events().iter().map(TransitionRow::from).collect();
    rows.extend(
        run.unclassified
            .iter()
            .map(|(ky, u)| TransitionRow::unclassified(u, *ky)),
    );
    rows.sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
    rows
}

fn write_run(dir: &Path, run: &SubsystemRun, spectrum: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    let series = dir.join(format!("{}_series.csv", run.name));
    write_csv(&series, run.bundle.records.iter().map(SeriesRow::from))?;
    files.push(series);
    if spectrum {
        let path = dir.join(format!("{}_spectrum.csv", run.name));
        write_csv(&path, run.bundle.spectrum.iter().map(SpectrumCsvRow::from))?;
        files.push(path);
    }
    if !run.blocks.is_empty() {
        let path = dir.join(format!("{}_blocks.csv", run.name));
        let rows = run
            .blocks
            .iter()
            .flat_map(|b| b.records.iter().map(move |r| BlockRow::new(b.ky, r)));
        write_csv(&path, rows)?;
        files.push(path);
    }
    let path = dir.join(format!("{}_transitions.csv", run.name));
    write_csv(&path, transition_rows(run))?;
    files.push(path);
    Ok(files)
}

/// `λ(t)` over the config grid, with cusps located by the detector.
pub struct LoschmidtRun {
    pub points: Vec<LoschmidtPoint>,
    pub events: Vec<TransitionEvent>,
    pub unclassified: Vec<Unclassified>,
    pub files: Vec<PathBuf>,
}

pub fn run_loschmidt(config: &Config, opts: &RunOptions) -> Result<LoschmidtRun, CliError> {
    with_threads(opts.threads.or(config.threads), || {
        let (pre, post) = config.models(opts.seed)?;
        let protocol = config.protocol(&pre, &post, config.subsystem_list()[0].1)?;
        if config.temperature != 0.0 {
            return Err(CliError::Config(
                "temperature: the Loschmidt echo needs temperature = 0".into(),
            ));
        }
        let evaluator = LoschmidtEvaluator::new(&protocol).map_err(numerical)?;
        let grid = time_grid(config.time.max, config.time.steps);
        let points = evaluator.series(&grid);
        let rates: Vec<f64> = points.iter().map(|p| p.rate.min(RATE_CAP)).collect();
        let probe = |t: f64| {
            let p = evaluator.at(t);
            Ok(Probe {
                rate: p.rate.min(RATE_CAP),
                degenerate: false,
                snapshot: None,
            })
        };
        let detection =
            detect_in_rates(&grid, &rates, probe, &config.detector(), None).map_err(numerical)?;
        let mut files = Vec::new();
        if let Some(dir) = out_dir(config, opts) {
            prepare_dir(&dir)?;
            let path = dir.join("loschmidt.csv");
            write_csv(&path, points.iter().map(LoschmidtRow::from))?;
            files.push(path);
            let path = dir.join("loschmidt_transitions.csv");
            let mut rows: Vec<TransitionRow> =
                detection.events.iter().map(TransitionRow::from).collect();
            rows.extend(
                detection
                    .unclassified
                    .iter()
                    .map(|u| TransitionRow::unclassified(u, None)),
            );
            rows.sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
            write_csv(&path, rows)?;
            files.push(path);
        }
        Ok(LoschmidtRun {
            points,
            events: detection.events,
            unclassified: detection.unclassified,
            files,
        })
    })
}

/// Detection re-run on a written series (or, for torus runs, blocks) file.
/// The config supplies the protocol used to refine candidates.
pub struct TransitionsRun {
    pub events: Vec<TransitionEvent>,
    pub unclassified: Vec<(Option<f64>, Unclassified)>,
    pub files: Vec<PathBuf>,
}

pub fn run_transitions(
    config: &Config,
    series: &Path,
    subsystem: Option<&str>,
    opts: &RunOptions,
) -> Result<TransitionsRun, CliError> {
    with_threads(opts.threads.or(config.threads), || {
        let (pre, post) = config.models(opts.seed)?;
        let list = config.subsystem_list();
        let (name, sub) = match subsystem {
            None => list[0].clone(),
            Some(wanted) => list
                .iter()
                .find(|(n, _)| n == wanted)
                .cloned()
                .ok_or_else(|| CliError::Config(format!("subsystem: no subsystem named {wanted}")))?,
        };
        let protocol = config.protocol(&pre, &post, sub)?;
        let kind = config
            .pathway_kind()?
            .unwrap_or_else(|| auto_pathway(&protocol));
        let detector = config.detector();
        let mut events = Vec::new();
        let mut unclassified = Vec::new();
        if kind == PathwayKind::MomentumResolved {
            let rows: Vec<BlockRow> = read_csv(series)?;
            let tracker = MomentumEchoTracker::new(&protocol, detector.eps_deg).map_err(numerical)?;
            for (i, ky) in tracker.kys().into_iter().enumerate() {
                let block: Vec<&BlockRow> =
                    rows.iter().filter(|r| (r.ky - ky).abs() < 1e-9).collect();
                let times: Vec<f64> = block.iter().map(|r| r.t).collect();
                let rates: Vec<f64> = block.iter().map(|r| r.gamma).collect();
                let d = detect_in_rates(
                    &times,
                    &rates,
                    |t| tracker.block_at(i, t).map(probe_of),
                    &detector,
                    Some(ky),
                )
                .map_err(numerical)?;
                events.extend(d.events);
                unclassified.extend(d.unclassified.into_iter().map(|u| (Some(ky), u)));
            }
        } else {
            let rows: Vec<SeriesRow> = read_csv(series)?;
            let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
            if times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::Io(format!(
                    "{}: times are not strictly increasing",
                    series.display()
                )));
            }
            let rates: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
            let tracker =
                EchoTracker::with_pathway(&protocol, kind, detector.eps_deg).map_err(numerical)?;
            let d = detect_in_rates(&times, &rates, |t| tracker.at(t).map(probe_of), &detector, None)
                .map_err(numerical)?;
            events = d.events;
            unclassified = d.unclassified.into_iter().map(|u| (None, u)).collect();
        }
        events.sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
        let mut files = Vec::new();
        if let Some(dir) = out_dir(config, opts) {
            prepare_dir(&dir)?;
            let path = dir.join(format!("{name}_transitions.csv"));
            let mut rows: Vec<TransitionRow> = events.iter().map(TransitionRow::from).collect();
            rows.extend(unclassified.iter().map(|(ky, u)| TransitionRow::unclassified(u, *ky)));
            rows.sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
            write_csv(&path, rows)?;
            files.push(path);
        }
        Ok(TransitionsRun {
            events,
            unclassified,
            files,
        })
    })
}
