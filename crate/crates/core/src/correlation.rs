//! Dynamical subsystem correlation matrix `C(t)` after a sudden quench.
//!
//! Every pathway evaluates the same object,
//!
//! ```text
//! C(t) = conj( U_A(t) M U_A(t)† ),   M = Σ_ε n_F(ε) |φ_ε⟩⟨φ_ε|,   U(t) = e^{-i H_post t}
//! ```
//!
//! restricted to the subsystem rows/columns, but uses Bloch data wherever a
//! Hamiltonian is translation invariant:
//!
//! * [`GeneralEvolver`] diagonalizes both real-space Hamiltonians;
//! * [`TranslationInvariantEvolver`] sums `x_k`, `y_k` over the Brillouin zone;
//! * [`PartialTiEvolver`] mixes the two when only one side is uniform;
//! * [`MomentumResolvedEvolver`] returns the `ky` blocks of a torus cut along x.
//!
//! Eigensystems are computed once per evolver; `snapshot` is `&self` and can be
//! called from many threads.

use std::ops::Range;

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::linalg::{hermitian_eigen, momenta, phase};
use crate::models::{bloch_eigensystem, build_real_space_hamiltonian, GaugeChoice, ModelSpec};
use crate::{CMatrix, Error, Result, C64};

/// Pre-quench levels closer than this to the chemical potential make the
/// zero-temperature filling ambiguous.
pub const FERMI_TOL: f64 = 1e-12;

/// Fermi-Dirac occupation at chemical potential 0; a step function at `T = 0`.
pub fn fermi_dirac(energy: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return if energy < 0.0 { 1.0 } else { 0.0 };
    }
    let x = energy / temperature;
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

fn occupations(energies: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if temperature <= 0.0 {
        if let Some(&energy) = energies.iter().find(|e| e.abs() < FERMI_TOL) {
            return Err(Error::DegenerateFermiLevel { energy });
        }
    }
    Ok(energies
        .iter()
        .map(|&e| fermi_dirac(e, temperature))
        .collect())
}

/// Contiguous block of x-coordinates `[start, start + len)`; on a torus it spans
/// every y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Subsystem {
    pub start: usize,
    pub len: usize,
}

impl Subsystem {
    pub fn new(start: usize, len: usize) -> Self {
        Subsystem { start, len }
    }

    /// Mode indices covered on a lattice with `ly` rows.
    pub fn modes(&self, ly: usize) -> Range<usize> {
        2 * self.start * ly..2 * (self.start + self.len) * ly
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuenchProtocol {
    pub pre: ModelSpec,
    pub post: ModelSpec,
    /// `k_B T` of the initial thermal state; 0 selects the ground state.
    pub temperature: f64,
    pub subsystem: Subsystem,
    pub gauge: GaugeChoice,
}

impl QuenchProtocol {
    pub fn new(
        pre: ModelSpec,
        post: ModelSpec,
        temperature: f64,
        subsystem: Subsystem,
    ) -> Result<Self> {
        if !pre.same_lattice(&post) {
            return Err(Error::BadProtocol(format!(
                "pre-quench lattice {}x{} differs from post-quench {}x{}",
                pre.lx(),
                pre.ly(),
                post.lx(),
                post.ly()
            )));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::BadProtocol(format!(
                "temperature must be finite and >= 0, got {temperature}"
            )));
        }
        if subsystem.len == 0 || subsystem.len >= pre.lx() {
            return Err(Error::BadProtocol(format!(
                "subsystem length {} must satisfy 1 <= L_A < {}",
                subsystem.len,
                pre.lx()
            )));
        }
        if subsystem.start + subsystem.len > pre.lx() {
            return Err(Error::BadProtocol(format!(
                "subsystem [{}, {}) exceeds the lattice length {}",
                subsystem.start,
                subsystem.start + subsystem.len,
                pre.lx()
            )));
        }
        Ok(QuenchProtocol {
            pre,
            post,
            temperature,
            subsystem,
            gauge: GaugeChoice::Auto,
        })
    }

    pub fn with_gauge(mut self, gauge: GaugeChoice) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn with_subsystem(mut self, subsystem: Subsystem) -> Result<Self> {
        let p = QuenchProtocol::new(self.pre, self.post, self.temperature, subsystem)?;
        self = p.with_gauge(self.gauge);
        Ok(self)
    }

    pub fn is_2d(&self) -> bool {
        self.pre.is_2d()
    }

    /// Number of sites in the subsystem (`L_A`, or `L_A · L_y` on a torus).
    pub fn omega_a(&self) -> usize {
        self.subsystem.len * self.pre.ly()
    }

    /// Total number of sites.
    pub fn omega(&self) -> usize {
        self.pre.sites()
    }

    pub fn subsystem_modes(&self) -> Range<usize> {
        self.subsystem.modes(self.pre.ly())
    }
}

/// `C(t)` on the subsystem, `2L_A × 2L_A` (site-major) or one `ky` block.
#[derive(Clone, Debug)]
pub struct CorrelationSnapshot {
    pub time: f64,
    pub matrix: CMatrix,
    pub ky: Option<f64>,
}

/// Anything that yields `C(t)` for the subsystem of a fixed protocol.
pub trait CorrelationSource: Send + Sync {
    fn snapshot(&self, t: f64) -> Result<CorrelationSnapshot>;
    /// Dimension of the returned matrices.
    fn dim(&self) -> usize;
}

/// Which side of a partially translation-invariant quench is real-space only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Broken {
    Pre,
    Post,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathwayKind {
    General,
    TranslationInvariant,
    PartialTi(Broken),
    MomentumResolved,
}

/// Uniform → TI, one profile → partial TI, two profiles → general, torus →
/// momentum resolved.
pub fn auto_pathway(protocol: &QuenchProtocol) -> PathwayKind {
    if protocol.is_2d() {
        return PathwayKind::MomentumResolved;
    }
    match (protocol.pre.is_uniform(), protocol.post.is_uniform()) {
        (true, true) => PathwayKind::TranslationInvariant,
        (false, true) => PathwayKind::PartialTi(Broken::Pre),
        (true, false) => PathwayKind::PartialTi(Broken::Post),
        (false, false) => PathwayKind::General,
    }
}

/// Build the evolver for a pathway over the protocol's subsystem. The momentum
/// resolved pathway is served by its own type; asking for it here yields the
/// full translation-invariant matrix on the torus.
pub fn build_source(
    protocol: &QuenchProtocol,
    kind: PathwayKind,
) -> Result<Box<dyn CorrelationSource>> {
    Ok(match kind {
        PathwayKind::General => Box::new(GeneralEvolver::new(protocol)?),
        PathwayKind::TranslationInvariant | PathwayKind::MomentumResolved => {
            Box::new(TranslationInvariantEvolver::new(protocol)?)
        }
        PathwayKind::PartialTi(broken) => Box::new(PartialTiEvolver::new(protocol, broken)?),
    })
}

fn scale_columns(m: &mut CMatrix, factors: impl Iterator<Item = C64>) {
    for (mut col, f) in m.column_iter_mut().zip(factors) {
        col *= f;
    }
}

// ---------------------------------------------------------------------------
// General (real-space) pathway

/// Real-space pathway: both Hamiltonians diagonalized once.
pub struct GeneralEvolver {
    /// Rows of the post-quench eigenvector matrix on the selected modes.
    frame: CMatrix,
    post_energies: Vec<f64>,
    /// `V_post† Φ √n_F`, only columns with nonzero weight.
    overlap: CMatrix,
}

impl GeneralEvolver {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        Self::for_modes(
            &protocol.pre,
            &protocol.post,
            protocol.temperature,
            protocol.subsystem_modes(),
        )
    }

    /// Evolver over an arbitrary mode range (e.g. the whole lattice).
    pub fn for_modes(
        pre: &ModelSpec,
        post: &ModelSpec,
        temperature: f64,
        modes: Range<usize>,
    ) -> Result<Self> {
        let (pre_e, pre_v) = hermitian_eigen(&build_real_space_hamiltonian(pre));
        let (post_e, post_v) = hermitian_eigen(&build_real_space_hamiltonian(post));
        let weights = occupations(&pre_e, temperature)?;
        let kept: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        let mut filled = pre_v.select_columns(kept.iter());
        scale_columns(
            &mut filled,
            kept.iter().map(|&i| C64::new(weights[i].sqrt(), 0.0)),
        );
        let overlap = post_v.adjoint() * filled;
        let frame = post_v.rows(modes.start, modes.len()).into_owned();
        Ok(GeneralEvolver {
            frame,
            post_energies: post_e,
            overlap,
        })
    }

    fn matrix_at(&self, t: f64) -> CMatrix {
        let mut frame = self.frame.clone();
        scale_columns(&mut frame, self.post_energies.iter().map(|&e| phase(e * t)));
        let x = frame * &self.overlap;
        (&x * x.adjoint()).map(|z| z.conj())
    }
}

impl CorrelationSource for GeneralEvolver {
    fn snapshot(&self, t: f64) -> Result<CorrelationSnapshot> {
        Ok(CorrelationSnapshot {
            time: t,
            matrix: self.matrix_at(t),
            ky: None,
        })
    }

    fn dim(&self) -> usize {
        self.frame.nrows()
    }
}

/// Real-space `C(t)` of the subsystem.
pub fn correlation_general(protocol: &QuenchProtocol, t: f64) -> Result<CorrelationSnapshot> {
    GeneralEvolver::new(protocol)?.snapshot(t)
}

// ---------------------------------------------------------------------------
// Bloch-space pathways

/// Post-quench Bloch data and pre-quench overlaps at one momentum.
#[derive(Clone, Debug)]
struct BlochQuench {
    k: f64,
    omega: [f64; 2],
    u: [Vector2<C64>; 2],
    /// `⟨u_s | v_-⟩` for `s ∈ {-, +}`.
    ov_minus: [C64; 2],
    /// `⟨u_s | v_+⟩`.
    ov_plus: [C64; 2],
    /// `n_F(ε_-)`, `n_F(ε_+)`.
    weights: [f64; 2],
}

impl BlochQuench {
    /// `K[σ][σ'] = n_- x*_σ x_σ' + n_+ y*_σ y_σ'` with
    /// `x = Σ_s e^{-iω_s t} u_s ⟨u_s|v_-⟩` and `y` likewise with `v_+`.
    fn kernel(&self, t: f64) -> [[C64; 2]; 2] {
        let ph = [phase(self.omega[0] * t), phase(self.omega[1] * t)];
        let x = self.u[0] * (ph[0] * self.ov_minus[0]) + self.u[1] * (ph[1] * self.ov_minus[1]);
        let y = self.u[0] * (ph[0] * self.ov_plus[0]) + self.u[1] * (ph[1] * self.ov_plus[1]);
        let mut k = [[C64::new(0.0, 0.0); 2]; 2];
        for (s, row) in k.iter_mut().enumerate() {
            for (s2, entry) in row.iter_mut().enumerate() {
                *entry = x[s].conj() * x[s2] * self.weights[0]
                    + y[s].conj() * y[s2] * self.weights[1];
            }
        }
        k
    }
}

/// One-dimensional band quench: all momenta of a ring (or of the x-direction at
/// fixed `ky`).
#[derive(Clone, Debug)]
struct BandQuench {
    ky: f64,
    points: Vec<BlochQuench>,
}

impl BandQuench {
    fn new(protocol: &QuenchProtocol, ky: f64) -> Result<Self> {
        let pre_gauge = protocol.pre.gauge(protocol.gauge);
        let post_gauge = protocol.post.gauge(protocol.gauge);
        let mut points = Vec::with_capacity(protocol.pre.lx());
        for k in momenta(protocol.pre.lx()) {
            let at = Some((k, ky));
            let d_pre = protocol
                .pre
                .d_vector(k, ky)
                .ok_or_else(|| Error::WrongShape("pre-quench model is not uniform".into()))?;
            let d_post = protocol
                .post
                .d_vector(k, ky)
                .ok_or_else(|| Error::WrongShape("post-quench model is not uniform".into()))?;
            let attach = |e: Error| match e {
                Error::GapClosed { norm, .. } => Error::GapClosed { norm, at },
                other => other,
            };
            let pre = bloch_eigensystem(&d_pre, pre_gauge).map_err(attach)?;
            let post = bloch_eigensystem(&d_post, post_gauge).map_err(attach)?;
            let weights = occupations(&[pre.energy_minus, pre.energy_plus], protocol.temperature)?;
            let u = [post.u_minus, post.u_plus];
            let dot = |a: &Vector2<C64>, b: &Vector2<C64>| a.dotc(b);
            points.push(BlochQuench {
                k,
                omega: [post.energy_minus, post.energy_plus],
                ov_minus: [dot(&u[0], &pre.u_minus), dot(&u[1], &pre.u_minus)],
                ov_plus: [dot(&u[0], &pre.u_plus), dot(&u[1], &pre.u_plus)],
                u,
                weights: [weights[0], weights[1]],
            });
        }
        Ok(BandQuench { ky, points })
    }

    /// `(1/L) Σ_k e^{-i(l-m)k} K_k(t)` over `len` consecutive sites.
    fn block(&self, t: f64, len: usize) -> CMatrix {
        let kernels: Vec<[[C64; 2]; 2]> = self.points.iter().map(|p| p.kernel(t)).collect();
        let norm = 1.0 / self.points.len() as f64;
        // Toeplitz in the site offset l - m, phases e^{-iδk} by recurrence
        let mut offsets = vec![[[C64::new(0.0, 0.0); 2]; 2]; 2 * len - 1];
        for (p, kern) in self.points.iter().zip(&kernels) {
            let step = phase(p.k);
            let mut f = phase(-(len as f64 - 1.0) * p.k);
            for acc in offsets.iter_mut() {
                for s in 0..2 {
                    for s2 in 0..2 {
                        acc[s][s2] += f * kern[s][s2];
                    }
                }
                f *= step;
            }
        }
        for acc in offsets.iter_mut() {
            for row in acc.iter_mut() {
                for z in row.iter_mut() {
                    *z *= norm;
                }
            }
        }
        CMatrix::from_fn(2 * len, 2 * len, |r, c| {
            let (l, s) = (r / 2, r % 2);
            let (m, s2) = (c / 2, c % 2);
            offsets[l + len - 1 - m][s][s2]
        })
    }
}

/// Bloch-space pathway for uniform pre- and post-quench models.
///
/// On a torus the full matrix over the x-segment and every y is assembled from
/// the `ky` blocks, `C[(x,y),(x',y')] = (1/L_y) Σ_ky e^{-i ky (y-y')} C_ky[x,x']`.
pub struct TranslationInvariantEvolver {
    bands: Vec<BandQuench>,
    len: usize,
    ly: usize,
}

impl TranslationInvariantEvolver {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        if !(protocol.pre.is_uniform() && protocol.post.is_uniform()) {
            return Err(Error::WrongShape(
                "translation-invariant pathway needs uniform pre- and post-quench models".into(),
            ));
        }
        let ly = protocol.pre.ly();
        let kys = if protocol.is_2d() { momenta(ly) } else { vec![0.0] };
        let bands = kys
            .into_iter()
            .map(|ky| BandQuench::new(protocol, ky))
            .collect::<Result<Vec<_>>>()?;
        Ok(TranslationInvariantEvolver {
            bands,
            len: protocol.subsystem.len,
            ly,
        })
    }
}

impl CorrelationSource for TranslationInvariantEvolver {
    fn snapshot(&self, t: f64) -> Result<CorrelationSnapshot> {
        if self.bands.len() == 1 {
            return Ok(CorrelationSnapshot {
                time: t,
                matrix: self.bands[0].block(t, self.len),
                ky: None,
            });
        }
        let blocks: Vec<(f64, CMatrix)> = self
            .bands
            .iter()
            .map(|b| (b.ky, b.block(t, self.len)))
            .collect();
        let ly = self.ly;
        let n = 2 * self.len * ly;
        let norm = 1.0 / ly as f64;
        // mode index: 2 (x ly + y) + σ
        let matrix = CMatrix::from_fn(n, n, |r, c| {
            let (site_r, s) = (r / 2, r % 2);
            let (site_c, s2) = (c / 2, c % 2);
            let (x, y) = (site_r / ly, site_r % ly);
            let (x2, y2) = (site_c / ly, site_c % ly);
            let dy = y as f64 - y2 as f64;
            let mut acc = C64::new(0.0, 0.0);
            for (ky, block) in &blocks {
                acc += phase(ky * dy) * block[(2 * x + s, 2 * x2 + s2)];
            }
            acc * norm
        });
        Ok(CorrelationSnapshot {
            time: t,
            matrix,
            ky: None,
        })
    }

    fn dim(&self) -> usize {
        2 * self.len * self.ly
    }
}

/// Bloch-space `C(t)` of the subsystem (full matrix on a torus).
pub fn correlation_translation_invariant(
    protocol: &QuenchProtocol,
    t: f64,
) -> Result<CorrelationSnapshot> {
    TranslationInvariantEvolver::new(protocol)?.snapshot(t)
}

/// `ky`-resolved blocks of a torus cut along x.
pub struct MomentumResolvedEvolver {
    bands: Vec<BandQuench>,
    len: usize,
}

impl MomentumResolvedEvolver {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        if !protocol.is_2d() {
            return Err(Error::WrongShape(
                "momentum-resolved pathway needs a Chern2D torus".into(),
            ));
        }
        if !(protocol.pre.is_uniform() && protocol.post.is_uniform()) {
            return Err(Error::WrongShape(
                "momentum-resolved pathway needs uniform models".into(),
            ));
        }
        let bands = momenta(protocol.pre.ly())
            .into_par_iter()
            .map(|ky| BandQuench::new(protocol, ky))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentumResolvedEvolver {
            bands,
            len: protocol.subsystem.len,
        })
    }

    /// Allowed `ky = 2πn/L_y`.
    pub fn kys(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.ky).collect()
    }

    pub fn block_count(&self) -> usize {
        self.bands.len()
    }

    /// Block for the `index`-th transverse momentum.
    pub fn block(&self, index: usize, t: f64) -> CorrelationSnapshot {
        let band = &self.bands[index];
        CorrelationSnapshot {
            time: t,
            matrix: band.block(t, self.len),
            ky: Some(band.ky),
        }
    }

    pub fn block_dim(&self) -> usize {
        2 * self.len
    }
}

/// `C(ky, t)`; `ky` must lie on the grid `2πn/L_y`.
pub fn correlation_momentum_resolved(
    protocol: &QuenchProtocol,
    ky: f64,
    t: f64,
) -> Result<CorrelationSnapshot> {
    let evolver = MomentumResolvedEvolver::new(protocol)?;
    let index = evolver
        .kys()
        .iter()
        .position(|&k| (k - ky).abs() < 1e-12)
        .ok_or_else(|| Error::WrongShape(format!("ky = {ky} is not an allowed momentum")))?;
    Ok(evolver.block(index, t))
}

// ---------------------------------------------------------------------------
// Partial translation invariance (1d)

/// Mixed pathway: Bloch data for the uniform side, Fourier-transformed
/// real-space eigenvectors for the other.
pub struct PartialTiEvolver {
    broken: Broken,
    /// Pre broken: `(1/√L) e^{ikl} u_s(k)_σ` on subsystem rows, columns `(k, s)`.
    /// Post broken: `conj(V_post)` on subsystem rows.
    frame: CMatrix,
    /// Energies attached to the frame columns.
    energies: Vec<f64>,
    /// Pre broken: `⟨u_s(k)|φ_{ε,k}⟩ √n_F(ε)`.
    /// Post broken: `v_s(k)† ψ^E_k √n_F(ε_s(k))`.
    overlap: CMatrix,
}

/// `φ_k(σ) = (1/√L) Σ_l e^{-ikl} φ(l, σ)` for every column of `vectors`;
/// rows are `2·k_index + σ`.
fn fourier_columns(vectors: &CMatrix, ks: &[f64]) -> CMatrix {
    let len = ks.len();
    let norm = 1.0 / (len as f64).sqrt();
    let mut out = CMatrix::zeros(2 * len, vectors.ncols());
    for (ki, &k) in ks.iter().enumerate() {
        let factors: Vec<C64> = (0..len).map(|l| phase(k * l as f64) * norm).collect();
        for c in 0..vectors.ncols() {
            for s in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for (l, f) in factors.iter().enumerate() {
                    acc += f * vectors[(2 * l + s, c)];
                }
                out[(2 * ki + s, c)] = acc;
            }
        }
    }
    out
}

impl PartialTiEvolver {
    pub fn new(protocol: &QuenchProtocol, broken: Broken) -> Result<Self> {
        if protocol.is_2d() {
            return Err(Error::WrongShape(
                "partial translation invariance is implemented for chains".into(),
            ));
        }
        let (uniform, name) = match broken {
            Broken::Pre => (&protocol.post, "post"),
            Broken::Post => (&protocol.pre, "pre"),
        };
        if !uniform.is_uniform() {
            return Err(Error::WrongShape(format!(
                "broken = {broken:?} requires a uniform {name}-quench model"
            )));
        }
        let len = protocol.pre.lx();
        let ks = momenta(len);
        let modes = protocol.subsystem_modes();
        let norm = 1.0 / (len as f64).sqrt();
        let gauge = uniform.gauge(protocol.gauge);

        let mut bloch = Vec::with_capacity(len);
        for &k in &ks {
            let d = uniform.d_vector(k, 0.0).expect("checked uniform");
            bloch.push(bloch_eigensystem(&d, gauge).map_err(|e| match e {
                Error::GapClosed { norm, .. } => Error::GapClosed {
                    norm,
                    at: Some((k, 0.0)),
                },
                other => other,
            })?);
        }

        match broken {
            Broken::Pre => {
                let (pre_e, pre_v) = hermitian_eigen(&build_real_space_hamiltonian(&protocol.pre));
                let weights = occupations(&pre_e, protocol.temperature)?;
                let kept: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
                let mut filled = pre_v.select_columns(kept.iter());
                scale_columns(
                    &mut filled,
                    kept.iter().map(|&i| C64::new(weights[i].sqrt(), 0.0)),
                );
                let phi_k = fourier_columns(&filled, &ks);

                let mut overlap = CMatrix::zeros(2 * len, filled.ncols());
                let mut frame = CMatrix::zeros(modes.len(), 2 * len);
                let mut energies = vec![0.0; 2 * len];
                for (ki, (&k, b)) in ks.iter().zip(&bloch).enumerate() {
                    for (si, plus) in [false, true].into_iter().enumerate() {
                        let (w, u) = b.band(plus);
                        let col = 2 * ki + si;
                        energies[col] = w;
                        for c in 0..filled.ncols() {
                            overlap[(col, c)] =
                                u[0].conj() * phi_k[(2 * ki, c)] + u[1].conj() * phi_k[(2 * ki + 1, c)];
                        }
                        for (row, mode) in modes.clone().enumerate() {
                            let (l, s) = (mode / 2, mode % 2);
                            frame[(row, col)] = phase(-k * l as f64) * u[s] * norm;
                        }
                    }
                }
                Ok(PartialTiEvolver {
                    broken,
                    frame,
                    energies,
                    overlap,
                })
            }
            Broken::Post => {
                let (post_e, post_v) =
                    hermitian_eigen(&build_real_space_hamiltonian(&protocol.post));
                let psi_k = fourier_columns(&post_v, &ks);
                let mut overlap = CMatrix::zeros(post_v.ncols(), 2 * len);
                for (ki, b) in bloch.iter().enumerate() {
                    let w = occupations(&[b.energy_minus, b.energy_plus], protocol.temperature)?;
                    for (si, plus) in [false, true].into_iter().enumerate() {
                        let (_, v) = b.band(plus);
                        let sw = w[si].sqrt();
                        for e in 0..post_v.ncols() {
                            overlap[(e, 2 * ki + si)] = (v[0].conj() * psi_k[(2 * ki, e)]
                                + v[1].conj() * psi_k[(2 * ki + 1, e)])
                                * sw;
                        }
                    }
                }
                let frame = post_v
                    .rows(modes.start, modes.len())
                    .map(|z| z.conj());
                Ok(PartialTiEvolver {
                    broken,
                    frame,
                    energies: post_e,
                    overlap,
                })
            }
        }
    }
}

impl CorrelationSource for PartialTiEvolver {
    fn snapshot(&self, t: f64) -> Result<CorrelationSnapshot> {
        let mut frame = self.frame.clone();
        let matrix = match self.broken {
            Broken::Pre => {
                scale_columns(&mut frame, self.energies.iter().map(|&w| phase(w * t)));
                let x = frame * &self.overlap;
                (&x * x.adjoint()).map(|z| z.conj())
            }
            Broken::Post => {
                scale_columns(&mut frame, self.energies.iter().map(|&e| phase(-e * t)));
                let y = frame * &self.overlap;
                &y * y.adjoint()
            }
        };
        Ok(CorrelationSnapshot {
            time: t,
            matrix,
            ky: None,
        })
    }

    fn dim(&self) -> usize {
        self.frame.nrows()
    }
}

/// Mixed Bloch/real-space `C(t)`.
pub fn correlation_partial_ti(
    protocol: &QuenchProtocol,
    t: f64,
    broken: Broken,
) -> Result<CorrelationSnapshot> {
    PartialTiEvolver::new(protocol, broken)?.snapshot(t)
}
