//! Entanglement spectrum, entanglement echo and derived observables.
//!
//! For a Gaussian state the eigenvalues `ξ_i` of `C` are occupations of
//! single-particle entanglement levels; the entanglement ground state fills
//! every level with `ξ ≥ 1/2`. The echo between two such Slater determinants is
//! the determinant of the Gram matrix of their occupied levels.

use rayon::prelude::*;

use crate::correlation::{
    build_source, auto_pathway, CorrelationSnapshot, CorrelationSource, MomentumResolvedEvolver,
    PathwayKind, QuenchProtocol,
};
use crate::linalg::{determinant, fix_column_phases, hermitian_eigen, hermiticity_defect};
use crate::{CMatrix, Error, Result, C64};

/// Default half-width around `ξ = 1/2` inside which levels count as degenerate.
pub const DEFAULT_EPS_DEG: f64 = 1e-9;
/// Eigenvalues this far outside `[0, 1]` are clamped; further out is an error.
pub const RANGE_TOL: f64 = 1e-9;
/// Largest tolerated `|C - C†|`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Value written in place of an infinite rate (exact echo zero).
pub const RATE_CAP: f64 = 50.0;

#[derive(Clone, Debug)]
pub struct EntanglementSnapshot {
    pub time: f64,
    pub ky: Option<f64>,
    /// Occupations, descending.
    pub xs: Vec<f64>,
    /// Orthonormal eigenvectors (columns, same order as `xs`), each rotated so
    /// its largest component is real and positive.
    pub vectors: CMatrix,
    /// Levels with `ξ ≥ 1/2`; levels within `eps_deg` of 1/2 are included.
    pub occupied_count: usize,
    /// Some level lies within `eps_deg` of 1/2.
    pub degenerate: bool,
    /// Number of such levels.
    pub degenerate_count: usize,
    pub eps_deg: f64,
}

impl EntanglementSnapshot {
    pub fn dim(&self) -> usize {
        self.xs.len()
    }

    /// Levels strictly above the degenerate window.
    fn sure_count(&self) -> usize {
        self.xs.iter().filter(|&&x| x > 0.5 + self.eps_deg).count()
    }

    /// Columns `range` of the eigenvector matrix.
    fn columns(&self, start: usize, count: usize) -> CMatrix {
        self.vectors.columns(start, count).into_owned()
    }
}

pub fn entanglement_spectrum(
    snapshot: &CorrelationSnapshot,
    eps_deg: f64,
) -> Result<EntanglementSnapshot> {
    let deviation = hermiticity_defect(&snapshot.matrix);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let (values, vectors) = hermitian_eigen(&snapshot.matrix);
    if let Some(&value) = values
        .iter()
        .find(|&&v| v < -RANGE_TOL || v > 1.0 + RANGE_TOL)
    {
        return Err(Error::EigenvalueOutOfRange { value });
    }
    let n = values.len();
    // ascending → descending
    let xs: Vec<f64> = values.iter().rev().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, n - 1 - c)]);
    fix_column_phases(&mut vectors);

    let occupied_count = xs.iter().filter(|&&x| x >= 0.5 - eps_deg).count();
    let degenerate_count = xs.iter().filter(|&&x| (x - 0.5).abs() < eps_deg).count();
    Ok(EntanglementSnapshot {
        time: snapshot.time,
        ky: snapshot.ky,
        xs,
        vectors,
        occupied_count,
        degenerate: degenerate_count > 0,
        degenerate_count,
        eps_deg,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoPoint {
    pub time: f64,
    pub echo: C64,
    pub magnitude: f64,
    /// `-ln|E|² / Ω_A`; `+∞` for an exact zero.
    pub rate: f64,
    /// The current entanglement ground state is degenerate.
    pub degenerate: bool,
}

impl EchoPoint {
    fn new(time: f64, echo: C64, omega_a: usize, degenerate: bool) -> Self {
        let magnitude = echo.norm();
        EchoPoint {
            time,
            echo,
            magnitude,
            rate: rate_from_magnitude(magnitude, omega_a),
            degenerate,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude == 0.0
    }

    /// Rate with the infinite sentinel replaced by [`RATE_CAP`].
    pub fn capped_rate(&self) -> f64 {
        self.rate.min(RATE_CAP)
    }
}

fn rate_from_magnitude(magnitude: f64, omega_a: usize) -> f64 {
    if magnitude == 0.0 {
        f64::INFINITY
    } else {
        -(magnitude * magnitude).ln() / omega_a as f64
    }
}

/// `Γ = -ln|E|² / Ω_A`, `+∞` when the echo vanishes.
pub fn echo_rate(point: &EchoPoint, omega_a: usize) -> f64 {
    rate_from_magnitude(point.magnitude, omega_a)
}

/// Overlap of the entanglement ground states of `initial` and `current`; the
/// rate uses `Ω_A = dim / 2` sites.
///
/// Different occupied counts give an exact zero (different particle-number
/// sectors). When `initial` has levels within `eps_deg` of 1/2 its ground state
/// is degenerate and the returned value is the norm of the projection of the
/// current ground state onto that whole degenerate subspace (real,
/// non-negative).
pub fn entanglement_echo(
    initial: &EntanglementSnapshot,
    current: &EntanglementSnapshot,
) -> Result<EchoPoint> {
    if initial.dim() != current.dim() {
        return Err(Error::DimensionMismatch {
            left: initial.dim(),
            right: current.dim(),
        });
    }
    let omega_a = (initial.dim() / 2).max(1);
    let echo = echo_amplitude(initial, current);
    Ok(EchoPoint::new(current.time, echo, omega_a, current.degenerate))
}

fn echo_amplitude(initial: &EntanglementSnapshot, current: &EntanglementSnapshot) -> C64 {
    let zero = C64::new(0.0, 0.0);
    let n_cur = current.occupied_count;
    let occ_cur = current.columns(0, n_cur);

    if !initial.degenerate {
        if initial.occupied_count != n_cur {
            return zero;
        }
        let gram = initial.columns(0, n_cur).adjoint() * occ_cur;
        return determinant(&gram);
    }

    let sure = initial.sure_count();
    let deg = initial.degenerate_count;
    if n_cur < sure || n_cur > sure + deg {
        return zero;
    }
    let picked = n_cur - sure;
    // Gram rows: sure levels, then degenerate levels
    let g_sure = initial.columns(0, sure).adjoint() * &occ_cur;
    let g_deg = initial.columns(sure, deg).adjoint() * &occ_cur;

    // |P ψ|² = det(G_s G_s†) · det(B† B), B = G_D Q⊥, Q⊥ spanning ker G_s
    let sure_part = if sure == 0 {
        1.0
    } else {
        determinant(&(&g_sure * g_sure.adjoint())).re.max(0.0)
    };
    if picked == 0 {
        return C64::new(sure_part.sqrt(), 0.0);
    }
    let (_, basis) = hermitian_eigen(&(g_sure.adjoint() * &g_sure));
    let kernel = basis.columns(0, picked).into_owned();
    let b = g_deg * kernel;
    let deg_part = determinant(&(b.adjoint() * &b)).re.max(0.0);
    C64::new((sure_part * deg_part).sqrt(), 0.0)
}

/// `S = -Σ [ξ ln ξ + (1-ξ) ln(1-ξ)]`.
pub fn entanglement_entropy(snapshot: &EntanglementSnapshot) -> f64 {
    let h = |x: f64| if x <= 0.0 || x >= 1.0 { 0.0 } else { -x * x.ln() };
    snapshot.xs.iter().map(|&x| h(x) + h(1.0 - x)).sum()
}

/// `Var N_A = Σ (ξ - ξ²)`.
pub fn particle_number_variance(snapshot: &EntanglementSnapshot) -> f64 {
    snapshot.xs.iter().map(|&x| x - x * x).sum()
}

// ---------------------------------------------------------------------------
// Time series helpers

/// Echo and spectrum at one time.
#[derive(Clone, Debug)]
pub struct EchoSample {
    pub point: EchoPoint,
    pub snapshot: EntanglementSnapshot,
}

/// Entanglement echo of a chain subsystem, initial spectrum cached.
pub struct EchoTracker {
    source: Box<dyn CorrelationSource>,
    initial: EntanglementSnapshot,
    omega_a: usize,
    eps_deg: f64,
}

impl EchoTracker {
    pub fn new(protocol: &QuenchProtocol, eps_deg: f64) -> Result<Self> {
        Self::with_pathway(protocol, auto_pathway(protocol), eps_deg)
    }

    pub fn with_pathway(protocol: &QuenchProtocol, kind: PathwayKind, eps_deg: f64) -> Result<Self> {
        let source = build_source(protocol, kind)?;
        Self::from_source(source, protocol.omega_a(), eps_deg)
    }

    pub fn from_source(
        source: Box<dyn CorrelationSource>,
        omega_a: usize,
        eps_deg: f64,
    ) -> Result<Self> {
        let initial = entanglement_spectrum(&source.snapshot(0.0)?, eps_deg)?;
        Ok(EchoTracker {
            source,
            initial,
            omega_a,
            eps_deg,
        })
    }

    pub fn initial(&self) -> &EntanglementSnapshot {
        &self.initial
    }

    pub fn omega_a(&self) -> usize {
        self.omega_a
    }

    pub fn at(&self, t: f64) -> Result<EchoSample> {
        let snap = self
            .source
            .snapshot(t)
            .and_then(|c| entanglement_spectrum(&c, self.eps_deg))
            .map_err(|e| e.at_time(t))?;
        let echo = echo_amplitude(&self.initial, &snap);
        Ok(EchoSample {
            point: EchoPoint::new(t, echo, self.omega_a, snap.degenerate),
            snapshot: snap,
        })
    }
}

/// Per-`ky` echoes and their product at one time.
#[derive(Clone, Debug)]
pub struct MomentumEcho {
    pub blocks: Vec<(f64, EchoPoint)>,
    /// Product over `ky`; the rate uses `Ω_A = L_A · L_y`.
    pub total: EchoPoint,
}

/// Block echoes plus the block spectra.
#[derive(Clone, Debug)]
pub struct MomentumEchoSample {
    pub echo: MomentumEcho,
    pub snapshots: Vec<EntanglementSnapshot>,
}

/// Momentum-resolved echo of a torus subsystem, initial block spectra cached.
pub struct MomentumEchoTracker {
    evolver: MomentumResolvedEvolver,
    initial: Vec<EntanglementSnapshot>,
    omega_a: usize,
    eps_deg: f64,
}

impl MomentumEchoTracker {
    pub fn new(protocol: &QuenchProtocol, eps_deg: f64) -> Result<Self> {
        let evolver = MomentumResolvedEvolver::new(protocol)?;
        let initial = (0..evolver.block_count())
            .into_par_iter()
            .map(|i| entanglement_spectrum(&evolver.block(i, 0.0), eps_deg))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentumEchoTracker {
            evolver,
            initial,
            omega_a: protocol.omega_a(),
            eps_deg,
        })
    }

    pub fn kys(&self) -> Vec<f64> {
        self.evolver.kys()
    }

    pub fn block_count(&self) -> usize {
        self.evolver.block_count()
    }

    /// Echo of one block; the rate uses `Ω = L_A`.
    pub fn block_at(&self, index: usize, t: f64) -> Result<EchoSample> {
        let snap = entanglement_spectrum(&self.evolver.block(index, t), self.eps_deg)
            .map_err(|e| e.at_time(t))?;
        let point = entanglement_echo(&self.initial[index], &snap)?;
        Ok(EchoSample {
            point,
            snapshot: snap,
        })
    }

    pub fn at(&self, t: f64) -> Result<MomentumEchoSample> {
        let samples: Vec<EchoSample> = (0..self.block_count())
            .map(|i| self.block_at(i, t))
            .collect::<Result<_>>()?;
        let kys = self.kys();
        let mut total = C64::new(1.0, 0.0);
        let mut degenerate = false;
        for s in &samples {
            total *= s.point.echo;
            degenerate |= s.point.degenerate;
        }
        let blocks = kys.into_iter().zip(samples.iter().map(|s| s.point)).collect();
        Ok(MomentumEchoSample {
            echo: MomentumEcho {
                blocks,
                total: EchoPoint::new(t, total, self.omega_a, degenerate),
            },
            snapshots: samples.into_iter().map(|s| s.snapshot).collect(),
        })
    }
}

/// Per-`ky` echoes and their product.
pub fn momentum_resolved_echo(protocol: &QuenchProtocol, t: f64) -> Result<MomentumEcho> {
    Ok(MomentumEchoTracker::new(protocol, DEFAULT_EPS_DEG)?.at(t)?.echo)
}
