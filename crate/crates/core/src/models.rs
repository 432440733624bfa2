//! Two-band lattice models in Bloch and real-space form.
//!
//! Both models are built from `h(k) = d0 + d·σ`:
//!
//! * the 1d chain `d(k) = (0, sin k, 0, m - cos k)` (class BDI, topological for
//!   `|m| < 1`);
//! * the 2d Chern insulator `d(k) = (0, sin kx, sin ky, m - cos kx - cos ky)`.
//!
//! Real-space Hamiltonians are the inverse Fourier transform of the Bloch form
//! with an optional site-dependent mass on the on-site `σz` block.

use nalgebra::{Matrix2, Vector2};

use crate::linalg::momenta;
use crate::{CMatrix, Error, Result, C64};

/// Gap-closing threshold on `|d|`.
pub const GAP_TOL: f64 = 1e-12;
/// Smallest admissible gauge normalization `2d(d ± d3)`.
pub const GAUGE_TOL: f64 = 1e-14;
/// Relative size of `(d1, d2)` below which a gauge pole is treated as the
/// removable point on the `σz` axis.
const POLE_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DVector {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DVector {
    pub fn new(d0: f64, d1: f64, d2: f64, d3: f64) -> Self {
        DVector { d0, d1, d2, d3 }
    }

    /// `|(d1, d2, d3)|`.
    pub fn norm(&self) -> f64 {
        (self.d1 * self.d1 + self.d2 * self.d2 + self.d3 * self.d3).sqrt()
    }

    fn transverse_sq(&self) -> f64 {
        self.d1 * self.d1 + self.d2 * self.d2
    }

    /// `d0 σ0 + d·σ` as a 2×2 matrix.
    pub fn hamiltonian(&self) -> Matrix2<C64> {
        Matrix2::new(
            C64::new(self.d0 + self.d3, 0.0),
            C64::new(self.d1, -self.d2),
            C64::new(self.d1, self.d2),
            C64::new(self.d0 - self.d3, 0.0),
        )
    }

    /// Unit vector along `(d1, d2, d3)`.
    pub fn direction(&self) -> [f64; 3] {
        let n = self.norm();
        [self.d1 / n, self.d2 / n, self.d3 / n]
    }
}

/// `d(k) = (0, sin k, 0, m - cos k)`.
pub fn d_vector_1d(k: f64, m: f64) -> DVector {
    DVector::new(0.0, k.sin(), 0.0, m - k.cos())
}

/// `d(k) = (0, sin kx, sin ky, m - cos kx - cos ky)`.
pub fn d_vector_2d(kx: f64, ky: f64, m: f64) -> DVector {
    DVector::new(0.0, kx.sin(), ky.sin(), m - kx.cos() - ky.cos())
}

/// Phase convention for Bloch eigenvectors.
///
/// `A` is regular except where `d3 = -|d|`, `B` except where `d3 = +|d|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gauge {
    A,
    B,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum GaugeChoice {
    /// Pick per model the gauge whose denominators stay furthest from zero.
    #[default]
    Auto,
    Fixed(Gauge),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlochEigensystem {
    pub energy_minus: f64,
    pub energy_plus: f64,
    pub u_minus: Vector2<C64>,
    pub u_plus: Vector2<C64>,
}

impl BlochEigensystem {
    /// `(energy, vector)` for band `-` (index 0) and `+` (index 1).
    pub fn band(&self, plus: bool) -> (f64, &Vector2<C64>) {
        if plus {
            (self.energy_plus, &self.u_plus)
        } else {
            (self.energy_minus, &self.u_minus)
        }
    }
}

/// Gauge-fixed eigensystem of `d0 + d·σ`.
///
/// Gauge A:
/// `u+ = (d3 + d, d1 + i d2) / N`, `u- = (d1 - i d2, -(d3 + d)) / N`,
/// `N = sqrt(2d(d + d3))`.
/// Gauge B:
/// `u+ = (d1 - i d2, d - d3) / N`, `u- = (d3 - d, d1 + i d2) / N`,
/// `N = sqrt(2d(d - d3))`.
///
/// `d ± d3` is evaluated as `(d1² + d2²)/(d ∓ d3)` where it would otherwise
/// cancel. At a gauge's pole (`d1 = d2 = 0`) the other gauge's value at the same
/// point is substituted: `u+ = (0, 1), u- = (-1, 0)` on the south pole for
/// gauge A and `u+ = (1, 0), u- = (0, -1)` on the north pole for gauge B.
pub fn bloch_eigensystem(d: &DVector, gauge: Gauge) -> Result<BlochEigensystem> {
    let norm = d.norm();
    if norm < GAP_TOL {
        return Err(Error::GapClosed { norm, at: None });
    }
    let perp_sq = d.transverse_sq();
    let on_axis = perp_sq.sqrt() <= POLE_REL_TOL * norm;
    let c = |re: f64, im: f64| C64::new(re, im);

    let (u_plus, u_minus) = match gauge {
        Gauge::A => {
            if d.d3 < 0.0 && on_axis {
                (
                    Vector2::new(c(0.0, 0.0), c(1.0, 0.0)),
                    Vector2::new(c(-1.0, 0.0), c(0.0, 0.0)),
                )
            } else {
                let s = if d.d3 >= 0.0 {
                    norm + d.d3
                } else {
                    perp_sq / (norm - d.d3)
                };
                let denominator = 2.0 * norm * s;
                if denominator < GAUGE_TOL {
                    return Err(Error::GaugeSingular { denominator });
                }
                let inv = 1.0 / denominator.sqrt();
                (
                    Vector2::new(c(s * inv, 0.0), c(d.d1 * inv, d.d2 * inv)),
                    Vector2::new(c(d.d1 * inv, -d.d2 * inv), c(-s * inv, 0.0)),
                )
            }
        }
        Gauge::B => {
            if d.d3 > 0.0 && on_axis {
                (
                    Vector2::new(c(1.0, 0.0), c(0.0, 0.0)),
                    Vector2::new(c(0.0, 0.0), c(-1.0, 0.0)),
                )
            } else {
                let s = if d.d3 <= 0.0 {
                    norm - d.d3
                } else {
                    perp_sq / (norm + d.d3)
                };
                let denominator = 2.0 * norm * s;
                if denominator < GAUGE_TOL {
                    return Err(Error::GaugeSingular { denominator });
                }
                let inv = 1.0 / denominator.sqrt();
                (
                    Vector2::new(c(d.d1 * inv, -d.d2 * inv), c(s * inv, 0.0)),
                    Vector2::new(c(-s * inv, 0.0), c(d.d1 * inv, d.d2 * inv)),
                )
            }
        }
    };

    Ok(BlochEigensystem {
        energy_minus: d.d0 - norm,
        energy_plus: d.d0 + norm,
        u_minus,
        u_plus,
    })
}

/// Gauge A when `min(d + d3) > min(d - d3)` over the given d-vectors, else B.
pub fn select_gauge<'a>(ds: impl IntoIterator<Item = &'a DVector>) -> Gauge {
    let (mut min_a, mut min_b) = (f64::INFINITY, f64::INFINITY);
    for d in ds {
        let n = d.norm();
        min_a = min_a.min(n + d.d3);
        min_b = min_b.min(n - d.d3);
    }
    if min_a > min_b {
        Gauge::A
    } else {
        Gauge::B
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Chain1D,
    Chern2D,
    RealSpaceProfile,
}

#[derive(Clone, Debug, PartialEq)]
enum Mass {
    Uniform(f64),
    Profile(Vec<f64>),
}

/// A two-band model on a periodic lattice. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    lx: usize,
    ly: usize,
    mass: Mass,
}

impl ModelSpec {
    /// Uniform 1d chain of `len` sites.
    pub fn chain(len: usize, mass: f64) -> Result<Self> {
        check_len("L", len)?;
        Ok(ModelSpec {
            kind: ModelKind::Chain1D,
            lx: len,
            ly: 1,
            mass: Mass::Uniform(mass),
        })
    }

    /// Uniform Chern insulator on an `lx × ly` torus.
    pub fn chern(lx: usize, ly: usize, mass: f64) -> Result<Self> {
        check_len("L_x", lx)?;
        check_len("L_y", ly)?;
        Ok(ModelSpec {
            kind: ModelKind::Chern2D,
            lx,
            ly,
            mass: Mass::Uniform(mass),
        })
    }

    /// 1d chain with one mass per site; the ring length is `masses.len()`.
    pub fn profile(masses: Vec<f64>) -> Result<Self> {
        check_len("L", masses.len())?;
        Ok(ModelSpec {
            kind: ModelKind::RealSpaceProfile,
            lx: masses.len(),
            ly: 1,
            mass: Mass::Profile(masses),
        })
    }

    /// Like [`ModelSpec::profile`] but checks the ring length.
    pub fn profile_with_len(len: usize, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != len {
            return Err(Error::BadProfile {
                expected: len,
                got: masses.len(),
            });
        }
        Self::profile(masses)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Length along x (the only direction in 1d).
    pub fn lx(&self) -> usize {
        self.lx
    }

    /// Length along y; 1 for chains.
    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn modes(&self) -> usize {
        2 * self.sites()
    }

    pub fn is_2d(&self) -> bool {
        self.kind == ModelKind::Chern2D
    }

    /// Translation invariant (Bloch form available).
    pub fn is_uniform(&self) -> bool {
        matches!(self.mass, Mass::Uniform(_))
    }

    /// Mass of a site (site index `x * ly + y`).
    pub fn site_mass(&self, site: usize) -> f64 {
        match &self.mass {
            Mass::Uniform(m) => *m,
            Mass::Profile(ms) => ms[site],
        }
    }

    pub fn uniform_mass(&self) -> Option<f64> {
        match self.mass {
            Mass::Uniform(m) => Some(m),
            Mass::Profile(_) => None,
        }
    }

    /// Bloch d-vector; `None` for real-space profiles. `ky` is ignored in 1d.
    pub fn d_vector(&self, kx: f64, ky: f64) -> Option<DVector> {
        let m = self.uniform_mass()?;
        Some(match self.kind {
            ModelKind::Chern2D => d_vector_2d(kx, ky, m),
            _ => d_vector_1d(kx, m),
        })
    }

    /// All d-vectors on the discrete Brillouin zone, `kx`-major.
    pub fn bz_d_vectors(&self) -> Option<Vec<DVector>> {
        let kxs = momenta(self.lx);
        let kys = if self.is_2d() { momenta(self.ly) } else { vec![0.0] };
        let mut out = Vec::with_capacity(kxs.len() * kys.len());
        for &kx in &kxs {
            for &ky in &kys {
                out.push(self.d_vector(kx, ky)?);
            }
        }
        Some(out)
    }

    pub fn gauge(&self, choice: GaugeChoice) -> Gauge {
        match choice {
            GaugeChoice::Fixed(g) => g,
            GaugeChoice::Auto => match self.bz_d_vectors() {
                Some(ds) => select_gauge(&ds),
                None => Gauge::A,
            },
        }
    }

    /// Same lattice as `other`.
    pub fn same_lattice(&self, other: &ModelSpec) -> bool {
        self.lx == other.lx && self.ly == other.ly && self.is_2d() == other.is_2d()
    }
}

fn check_len(name: &str, len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::BadLattice(format!("{name} = {len}, need at least 2")));
    }
    Ok(())
}

/// Hopping block `H[r, r + x̂]` along a direction whose Bloch term is
/// `sin k σ_a - cos k σz`: `-σz/2 + σ_a/(2i)`.
fn hop_block(axis: usize) -> Matrix2<C64> {
    let h = 0.5;
    match axis {
        // σx/(2i) = -i σx / 2
        1 => Matrix2::new(
            C64::new(-h, 0.0),
            C64::new(0.0, -h),
            C64::new(0.0, -h),
            C64::new(h, 0.0),
        ),
        // σy/(2i) = -i σy / 2
        2 => Matrix2::new(
            C64::new(-h, 0.0),
            C64::new(-h, 0.0),
            C64::new(h, 0.0),
            C64::new(h, 0.0),
        ),
        _ => unreachable!("hopping axis must be 1 or 2"),
    }
}

fn add_block(h: &mut CMatrix, r: usize, c: usize, block: &Matrix2<C64>) {
    for a in 0..2 {
        for b in 0..2 {
            h[(2 * r + a, 2 * c + b)] += block[(a, b)];
        }
    }
}

/// Single-particle Hamiltonian on the periodic lattice (`2·sites` square).
///
/// On-site block `m_l σz`; bond `l → l + 1` carries `-σz/2 + σx/(2i)` and its
/// adjoint on the reverse bond. On the torus the y-bonds carry
/// `-σz/2 + σy/(2i)`. Rings of length 2 pick up both bonds between the same
/// pair of sites, as the Bloch form requires.
pub fn build_real_space_hamiltonian(spec: &ModelSpec) -> CMatrix {
    let n = spec.modes();
    let (lx, ly) = (spec.lx(), spec.ly());
    let mut h = CMatrix::zeros(n, n);
    let site = |x: usize, y: usize| x * ly + y;
    let hop_x = hop_block(1);
    let hop_y = hop_block(2);
    for x in 0..lx {
        for y in 0..ly {
            let s = site(x, y);
            let m = spec.site_mass(s);
            h[(2 * s, 2 * s)] += C64::new(m, 0.0);
            h[(2 * s + 1, 2 * s + 1)] -= C64::new(m, 0.0);

            let sx = site((x + 1) % lx, y);
            add_block(&mut h, s, sx, &hop_x);
            add_block(&mut h, sx, s, &hop_x.adjoint());
            if spec.is_2d() {
                let sy = site(x, (y + 1) % ly);
                add_block(&mut h, s, sy, &hop_y);
                add_block(&mut h, sy, s, &hop_y.adjoint());
            }
        }
    }
    h
}
