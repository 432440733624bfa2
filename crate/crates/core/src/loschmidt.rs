//! Loschmidt amplitude `𝓛(t) = ⟨Ψ₀|e^{-iH_post t}|Ψ₀⟩` of the whole system and
//! its rate `λ(t) = -ln|𝓛|² / Ω`, `Ω` the number of sites.
//!
//! Both the determinant over occupied pre-quench orbitals and the Bloch
//! product are accumulated as log-magnitude plus phase, so large lattices do
//! not underflow.

use nalgebra::DVector as NVector;
use rayon::prelude::*;

use crate::correlation::{QuenchProtocol, FERMI_TOL};
use crate::linalg::{hermitian_eigen, momenta, phase};
use crate::models::{build_real_space_hamiltonian, GAP_TOL};
use crate::{CMatrix, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoschmidtPoint {
    pub time: f64,
    /// `𝓛(t)`; may underflow to zero even when `log_magnitude` is finite.
    pub amplitude: C64,
    /// `ln|𝓛(t)|`, `-∞` for an exact zero.
    pub log_magnitude: f64,
    /// `λ(t)`.
    pub rate: f64,
}

impl LoschmidtPoint {
    fn from_log(time: f64, log_magnitude: f64, arg: f64, omega: usize) -> Self {
        LoschmidtPoint {
            time,
            amplitude: C64::from_polar(log_magnitude.exp(), arg),
            log_magnitude,
            rate: -2.0 * log_magnitude / omega as f64,
        }
    }
}

fn require_ground_state(protocol: &QuenchProtocol) -> Result<()> {
    if protocol.temperature != 0.0 {
        return Err(Error::BadProtocol(format!(
            "the Loschmidt echo is defined for T = 0 only, got T = {}",
            protocol.temperature
        )));
    }
    Ok(())
}

/// `(ln|det m|, arg det m)` from an LU factorization.
fn log_determinant(m: CMatrix) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let lu = m.lu();
    let sign: f64 = lu.p().determinant();
    let mut log_mag = 0.0;
    let mut arg = if sign < 0.0 { std::f64::consts::PI } else { 0.0 };
    for z in lu.u().diagonal().iter() {
        log_mag += z.norm().ln();
        arg += z.arg();
    }
    (log_mag, arg)
}

/// Determinant formula with both eigensystems computed once.
pub struct LoschmidtGeneral {
    /// `V_post† Φ_occ`.
    overlap: CMatrix,
    post_energies: Vec<f64>,
    omega: usize,
}

impl LoschmidtGeneral {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        require_ground_state(protocol)?;
        let (pre_e, pre_v) = hermitian_eigen(&build_real_space_hamiltonian(&protocol.pre));
        let (post_e, post_v) = hermitian_eigen(&build_real_space_hamiltonian(&protocol.post));
        if let Some(&energy) = pre_e.iter().find(|e| e.abs() < FERMI_TOL) {
            return Err(Error::DegenerateFermiLevel { energy });
        }
        let occupied = pre_e.iter().filter(|&&e| e < 0.0).count();
        // ascending order puts the filled orbitals first
        let overlap = post_v.adjoint() * pre_v.columns(0, occupied);
        Ok(LoschmidtGeneral {
            overlap,
            post_energies: post_e,
            omega: protocol.omega(),
        })
    }

    pub fn at(&self, t: f64) -> LoschmidtPoint {
        let phases = NVector::from_iterator(
            self.post_energies.len(),
            self.post_energies.iter().map(|&e| phase(e * t)),
        );
        let mut phased = self.overlap.clone();
        for (mut row, p) in phased.row_iter_mut().zip(phases.iter()) {
            row *= *p;
        }
        let a = self.overlap.adjoint() * phased;
        let (log_mag, arg) = log_determinant(a);
        LoschmidtPoint::from_log(t, log_mag, arg, self.omega)
    }
}

/// `det 𝒜` with `𝒜_ij = Σ_E ⟨ε_i|E⟩⟨E|ε_j⟩ e^{-iEt}` over occupied `ε_i`.
pub fn loschmidt_general(protocol: &QuenchProtocol, t: f64) -> Result<LoschmidtPoint> {
    Ok(LoschmidtGeneral::new(protocol)?.at(t))
}

/// Per-momentum data of the product formula.
pub struct LoschmidtProduct {
    /// `(|d_f|, cos θ_k)`.
    modes: Vec<(f64, f64)>,
    omega: usize,
}

impl LoschmidtProduct {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        require_ground_state(protocol)?;
        let pre = &protocol.pre;
        let post = &protocol.post;
        if !(pre.is_uniform() && post.is_uniform()) {
            return Err(Error::WrongShape(
                "the product formula needs uniform pre- and post-quench models".into(),
            ));
        }
        let kxs = momenta(pre.lx());
        let kys = if pre.is_2d() { momenta(pre.ly()) } else { vec![0.0] };
        let mut modes = Vec::with_capacity(kxs.len() * kys.len());
        for &kx in &kxs {
            for &ky in &kys {
                let di = pre.d_vector(kx, ky).expect("uniform");
                let df = post.d_vector(kx, ky).expect("uniform");
                for d in [&di, &df] {
                    let norm = d.norm();
                    if norm < GAP_TOL {
                        return Err(Error::GapClosed {
                            norm,
                            at: Some((kx, ky)),
                        });
                    }
                }
                let (a, b) = (di.direction(), df.direction());
                let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                modes.push((df.norm(), cos));
            }
        }
        Ok(LoschmidtProduct {
            modes,
            omega: protocol.omega(),
        })
    }

    pub fn at(&self, t: f64) -> LoschmidtPoint {
        let mut log_mag = 0.0;
        let mut arg = 0.0;
        for &(d, cos) in &self.modes {
            let (s, c) = (d * t).sin_cos();
            let factor = C64::new(c, s * cos);
            log_mag += factor.norm().ln();
            arg += factor.arg();
        }
        LoschmidtPoint::from_log(t, log_mag, arg, self.omega)
    }
}

/// `Π_k [cos(d^f_k t) + i sin(d^f_k t) cos θ_k]`, `cos θ_k = d̂^i_k · d̂^f_k`.
pub fn loschmidt_product(protocol: &QuenchProtocol, t: f64) -> Result<LoschmidtPoint> {
    Ok(LoschmidtProduct::new(protocol)?.at(t))
}

/// Either formula, chosen by the protocol's uniformity.
pub enum LoschmidtEvaluator {
    General(LoschmidtGeneral),
    Product(LoschmidtProduct),
}

impl LoschmidtEvaluator {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        if protocol.pre.is_uniform() && protocol.post.is_uniform() {
            Ok(LoschmidtEvaluator::Product(LoschmidtProduct::new(protocol)?))
        } else {
            Ok(LoschmidtEvaluator::General(LoschmidtGeneral::new(protocol)?))
        }
    }

    pub fn at(&self, t: f64) -> LoschmidtPoint {
        match self {
            LoschmidtEvaluator::General(g) => g.at(t),
            LoschmidtEvaluator::Product(p) => p.at(t),
        }
    }

    pub fn series(&self, times: &[f64]) -> Vec<LoschmidtPoint> {
        times.par_iter().map(|&t| self.at(t)).collect()
    }
}
