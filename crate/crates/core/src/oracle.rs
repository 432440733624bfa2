//! Exact many-body reference for small lattices.
//!
//! States live in the fixed-particle-number sector of `M ≤ 16` modes. A basis
//! state is a bitmask (bit `i` = mode `i` occupied) standing for
//! `c†_{a_1} c†_{a_2} … c†_{a_N} |0⟩` with `a_1 < a_2 < …`; the sector basis
//! lists masks in ascending integer order.
//!
//! Nothing here uses the correlation-matrix formalism: the ground state is
//! expanded through Slater minors, evolution acts on the Fock amplitudes
//! through a product of nearest-neighbour mode rotations, and the Schmidt
//! decomposition is an SVD of the reshaped amplitude matrix.

use nalgebra::{DMatrix, DVector as NVector};

use crate::correlation::FERMI_TOL;
use crate::linalg::{determinant, hermitian_eigen, phase};
use crate::models::{build_real_space_hamiltonian, ModelSpec};
use crate::{CMatrix, Error, Result, C64};

/// Largest number of modes the oracle accepts (`L ≤ 8`).
pub const MAX_MODES: usize = 16;

const ZERO: C64 = C64::new(0.0, 0.0);

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Position of `mask` among the masks with the same popcount, ascending.
fn rank(mask: u32) -> usize {
    let mut r = 0;
    let mut m = mask;
    let mut i = 0;
    while m != 0 {
        let a = m.trailing_zeros() as usize;
        i += 1;
        r += binomial(a, i);
        m &= m - 1;
    }
    r
}

fn sector_basis(modes: usize, particles: usize) -> Vec<u32> {
    (0u32..1 << modes)
        .filter(|m| m.count_ones() as usize == particles)
        .collect()
}

/// `(-1)^{number of occupied modes below `mode`}`.
fn sign_below(mask: u32, mode: usize) -> f64 {
    if (mask & ((1u32 << mode) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_size(modes: usize, particles: usize) -> Result<()> {
    if modes > MAX_MODES {
        return Err(Error::SectorTooLarge {
            dim: binomial(modes, particles.min(modes)),
            limit: MAX_MODES,
        });
    }
    if particles > modes {
        return Err(Error::BadProtocol(format!(
            "{particles} particles do not fit in {modes} modes"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    modes: usize,
    particles: usize,
    basis: Vec<u32>,
    pub amplitudes: NVector<C64>,
}

impl FockState {
    /// State with the given amplitudes over the ascending sector basis.
    pub fn from_amplitudes(modes: usize, particles: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_size(modes, particles)?;
        let basis = sector_basis(modes, particles);
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                left: basis.len(),
                right: amplitudes.len(),
            });
        }
        Ok(FockState {
            modes,
            particles,
            basis,
            amplitudes: NVector::from_vec(amplitudes),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn basis(&self) -> &[u32] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn amplitude(&self, mask: u32) -> C64 {
        if mask.count_ones() as usize != self.particles || mask >> self.modes != 0 {
            return ZERO;
        }
        self.amplitudes[rank(mask)]
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &FockState) -> Result<C64> {
        if self.dim() != other.dim() || self.modes != other.modes {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `D[a, b] = ⟨c†_a c_b⟩`.
    pub fn density_matrix(&self) -> CMatrix {
        let m = self.modes;
        let mut d = CMatrix::zeros(m, m);
        for (idx, &mask) in self.basis.iter().enumerate() {
            let amp = self.amplitudes[idx];
            if amp == ZERO {
                continue;
            }
            for b in (0..m).filter(|&b| mask >> b & 1 == 1) {
                let removed = mask & !(1 << b);
                let s_b = sign_below(mask, b);
                for a in (0..m).filter(|&a| removed >> a & 1 == 0) {
                    let target = removed | 1 << a;
                    let s = s_b * sign_below(removed, a);
                    d[(a, b)] += self.amplitudes[rank(target)].conj() * amp * s;
                }
            }
        }
        d
    }

    /// `⟨N_R²⟩ - ⟨N_R⟩²` for the modes in `region`.
    pub fn number_variance(&self, region: std::ops::Range<usize>) -> f64 {
        let region_mask = mode_mask(region);
        let (mut first, mut second) = (0.0, 0.0);
        for (idx, &mask) in self.basis.iter().enumerate() {
            let p = self.amplitudes[idx].norm_sqr();
            let n = (mask & region_mask).count_ones() as f64;
            first += p * n;
            second += p * n * n;
        }
        second - first * first
    }

    /// `⟨H⟩` for a single-particle Hamiltonian matrix `h` (`H = Σ h_ab c†_a c_b`).
    pub fn energy(&self, h: &CMatrix) -> f64 {
        let d = self.density_matrix();
        let mut e = ZERO;
        for a in 0..self.modes {
            for b in 0..self.modes {
                e += h[(a, b)] * d[(a, b)];
            }
        }
        e.re
    }

    /// Many-body action of the single-particle unitary `w`
    /// (`c†_i → Σ_j w_ji c†_j`), given as its rotation decomposition.
    fn apply(&mut self, w: &Rotations) {
        for (idx, &mask) in self.basis.iter().enumerate() {
            let mut f = C64::new(1.0, 0.0);
            for (i, d) in w.diagonal.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    f *= d;
                }
            }
            self.amplitudes[idx] *= f;
        }
        for g in w.givens.iter().rev() {
            self.apply_pair(g);
        }
    }

    fn apply_pair(&mut self, g: &Givens) {
        let (p, q) = (g.p, g.p + 1);
        let det = g.m[0][0] * g.m[1][1] - g.m[0][1] * g.m[1][0];
        for idx in 0..self.basis.len() {
            let mask = self.basis[idx];
            let (has_p, has_q) = (mask >> p & 1 == 1, mask >> q & 1 == 1);
            match (has_p, has_q) {
                (true, true) => self.amplitudes[idx] *= det,
                (true, false) => {
                    // adjacent modes: swapping p for q needs no reordering sign
                    let jdx = rank(mask ^ (1 << p | 1 << q));
                    let alpha = self.amplitudes[idx];
                    let beta = self.amplitudes[jdx];
                    self.amplitudes[idx] = g.m[0][0] * alpha + g.m[0][1] * beta;
                    self.amplitudes[jdx] = g.m[1][0] * alpha + g.m[1][1] * beta;
                }
                _ => {}
            }
        }
    }
}

fn mode_mask(region: std::ops::Range<usize>) -> u32 {
    region.fold(0u32, |acc, i| acc | 1 << i)
}

/// 2×2 unitary on modes `(p, p + 1)`, entries `[[w_pp, w_pq], [w_qp, w_qq]]`.
#[derive(Clone, Copy, Debug)]
struct Givens {
    p: usize,
    m: [[C64; 2]; 2],
}

/// `w = G_1 G_2 … G_K · diag(diagonal)`.
#[derive(Clone, Debug)]
struct Rotations {
    givens: Vec<Givens>,
    diagonal: Vec<C64>,
}

/// Factor a unitary into nearest-neighbour rotations by Givens QR.
fn decompose(w: &CMatrix) -> Rotations {
    let n = w.nrows();
    let mut r = w.clone();
    let mut givens = Vec::new();
    for j in 0..n {
        for i in (j + 1..n).rev() {
            let (a, b) = (r[(i - 1, j)], r[(i, j)]);
            let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if b.norm() == 0.0 || norm == 0.0 {
                continue;
            }
            // G zeroes r[i, j]; G acts on rows (i - 1, i)
            let g = [[a.conj() / norm, b.conj() / norm], [-b / norm, a / norm]];
            for c in 0..n {
                let (x, y) = (r[(i - 1, c)], r[(i, c)]);
                r[(i - 1, c)] = g[0][0] * x + g[0][1] * y;
                r[(i, c)] = g[1][0] * x + g[1][1] * y;
            }
            // store G† so that w = Π G† · R
            givens.push(Givens {
                p: i - 1,
                m: [
                    [g[0][0].conj(), g[1][0].conj()],
                    [g[0][1].conj(), g[1][1].conj()],
                ],
            });
        }
    }
    Rotations {
        givens,
        diagonal: (0..n).map(|i| r[(i, i)]).collect(),
    }
}

/// Slater ground state of `spec` with `particles` fermions in the lowest
/// orbitals.
pub fn build_ground_state(spec: &ModelSpec, particles: usize) -> Result<FockState> {
    let modes = spec.modes();
    check_size(modes, particles)?;
    let (energies, vectors) = hermitian_eigen(&build_real_space_hamiltonian(spec));
    if particles > 0 && particles < modes {
        let (below, above) = (energies[particles - 1], energies[particles]);
        if above - below < FERMI_TOL {
            return Err(Error::DegenerateFermiLevel { energy: below });
        }
    }
    let orbitals = vectors.columns(0, particles).into_owned();
    let basis = sector_basis(modes, particles);
    let amplitudes = basis
        .iter()
        .map(|&mask| {
            let rows: Vec<usize> = (0..modes).filter(|&i| mask >> i & 1 == 1).collect();
            determinant(&orbitals.select_rows(rows.iter()))
        })
        .collect();
    FockState::from_amplitudes(modes, particles, amplitudes)
}

/// Exact evolution under a quadratic post-quench Hamiltonian.
pub struct FockEvolver {
    energies: Vec<f64>,
    to_sites: Rotations,
    to_orbitals: Rotations,
}

impl FockEvolver {
    pub fn new(post: &ModelSpec) -> Result<Self> {
        check_size(post.modes(), 0)?;
        let (energies, v) = hermitian_eigen(&build_real_space_hamiltonian(post));
        Ok(FockEvolver {
            energies,
            to_sites: decompose(&v),
            to_orbitals: decompose(&v.adjoint()),
        })
    }

    /// `e^{-iHt}|state⟩`: rotate to post-quench orbitals, phase each basis
    /// state by `e^{-i Σ E t}`, rotate back.
    pub fn evolve(&self, state: &FockState, t: f64) -> Result<FockState> {
        if state.modes != self.energies.len() {
            return Err(Error::DimensionMismatch {
                left: state.modes,
                right: self.energies.len(),
            });
        }
        let mut out = state.clone();
        out.apply(&self.to_orbitals);
        for (idx, &mask) in out.basis.iter().enumerate() {
            let e: f64 = (0..out.modes)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| self.energies[i])
                .sum();
            out.amplitudes[idx] *= phase(e * t);
        }
        out.apply(&self.to_sites);
        Ok(out)
    }
}

pub fn evolve(state: &FockState, post: &ModelSpec, t: f64) -> Result<FockState> {
    FockEvolver::new(post)?.evolve(state, t)
}

/// Order of the creation operators after splitting a basis state across the
/// cut; the Schmidt values do not depend on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CutOrdering {
    #[default]
    AFirst,
    BFirst,
}

/// One Schmidt term `λ^{1/2} |left⟩ ⊗ |right⟩` in the `n_a`-particle sector of A.
#[derive(Clone, Debug)]
pub struct SchmidtTerm {
    pub value: f64,
    pub n_a: usize,
    /// Over the ascending `n_a`-particle basis of the A modes.
    pub left: NVector<C64>,
    /// Over the ascending `(N - n_a)`-particle basis of the B modes.
    pub right: NVector<C64>,
}

#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    /// Modes of subsystem A (bitmask over the full lattice).
    pub a_modes: u32,
    /// Descending.
    pub terms: Vec<SchmidtTerm>,
}

impl SchmidtDecomposition {
    /// Singular values, descending.
    pub fn values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.value).collect()
    }

    /// Schmidt weights `λ_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.value * t.value).collect()
    }

    /// `-Σ λ ln λ`.
    pub fn entropy(&self) -> f64 {
        self.weights()
            .into_iter()
            .filter(|&w| w > 0.0)
            .map(|w| -w * w.ln())
            .sum()
    }
}

/// Pack the bits of `mask` selected by `region` into the low bits.
fn compress(mask: u32, region: u32) -> u32 {
    let mut out = 0;
    let mut j = 0;
    let mut r = region;
    while r != 0 {
        let i = r.trailing_zeros();
        if mask >> i & 1 == 1 {
            out |= 1 << j;
        }
        j += 1;
        r &= r - 1;
    }
    out
}

/// Sign of reordering `c†…` (ascending) so that all A (or all B) creators come
/// first, each group staying ascending.
fn cut_sign(mask: u32, a_modes: u32, ordering: CutOrdering) -> f64 {
    let (front, back) = match ordering {
        CutOrdering::AFirst => (mask & a_modes, mask & !a_modes),
        CutOrdering::BFirst => (mask & !a_modes, mask & a_modes),
    };
    // pairs (back mode below a front mode) must be exchanged
    let mut swaps = 0;
    let mut f = front;
    while f != 0 {
        let i = f.trailing_zeros();
        swaps += (back & ((1u32 << i) - 1)).count_ones();
        f &= f - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Schmidt decomposition across the modes `a_region` (A) and the rest (B).
pub fn schmidt_region(
    state: &FockState,
    a_region: std::ops::Range<usize>,
    ordering: CutOrdering,
) -> Result<SchmidtDecomposition> {
    if a_region.is_empty() || a_region.end > state.modes || a_region.len() == state.modes {
        return Err(Error::BadProtocol(format!(
            "cut {:?} must be a proper part of {} modes",
            a_region, state.modes
        )));
    }
    let a_modes = mode_mask(a_region.clone());
    let b_modes = mode_mask(0..state.modes) & !a_modes;
    let size_a = a_region.len();
    let size_b = state.modes - size_a;
    let n = state.particles;

    let mut terms = Vec::new();
    for n_a in n.saturating_sub(size_b)..=n.min(size_a) {
        let n_b = n - n_a;
        let rows = binomial(size_a, n_a);
        let cols = binomial(size_b, n_b);
        let mut m = DMatrix::<C64>::zeros(rows, cols);
        for (idx, &mask) in state.basis.iter().enumerate() {
            if (mask & a_modes).count_ones() as usize != n_a {
                continue;
            }
            let mu = rank(compress(mask, a_modes));
            let nu = rank(compress(mask, b_modes));
            m[(mu, nu)] = state.amplitudes[idx] * cut_sign(mask, a_modes, ordering);
        }
        // eigenvectors of the reduced density block; the complex SVD loses
        // accuracy on degenerate singular values
        let rho = &m * m.adjoint();
        let eigen = rho.symmetric_eigen();
        for (k, &w) in eigen.eigenvalues.iter().enumerate() {
            let left = eigen.eigenvectors.column(k).into_owned();
            let mut right = m.adjoint() * &left;
            let norm = right.norm();
            if norm > 0.0 {
                right /= C64::from(norm);
            }
            terms.push(SchmidtTerm {
                value: w.max(0.0).sqrt(),
                n_a,
                left,
                right,
            });
        }
    }
    terms.sort_by(|x, y| y.value.total_cmp(&x.value));
    Ok(SchmidtDecomposition { a_modes, terms })
}

/// Schmidt decomposition with A = the first `cut` sites (two modes each).
pub fn schmidt(state: &FockState, cut: usize) -> Result<SchmidtDecomposition> {
    schmidt_region(state, 0..2 * cut, CutOrdering::AFirst)
}

/// `|⟨λ_0(0)|λ_0(t)⟩|`; when the top initial weight is degenerate the norm of
/// the projection of `λ_0(t)` onto the whole degenerate subspace.
///
/// Weights `λ_i ≥ λ_0 (1 - 4 eps_deg)` count as degenerate, which is the ratio
/// produced by a single entanglement level within `eps_deg` of 1/2.
pub fn oracle_echo(
    initial: &SchmidtDecomposition,
    current: &SchmidtDecomposition,
    eps_deg: f64,
) -> f64 {
    let (Some(top0), Some(top)) = (initial.terms.first(), current.terms.first()) else {
        return 0.0;
    };
    let floor = top0.value * top0.value * (1.0 - 4.0 * eps_deg);
    initial
        .terms
        .iter()
        .take_while(|t| t.value * t.value >= floor)
        .filter(|t| t.n_a == top.n_a)
        .map(|t| t.left.dotc(&top.left).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
