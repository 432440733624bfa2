use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gap closed: |d| = {norm:e}{}", .at.map(|(x, y)| format!(" at k = ({x}, {y})")).unwrap_or_default())]
    GapClosed { norm: f64, at: Option<(f64, f64)> },

    #[error("gauge denominator {denominator:e} vanishes away from the removable point")]
    GaugeSingular { denominator: f64 },

    #[error("bad mass profile: expected {expected} sites, got {got}")]
    BadProfile { expected: usize, got: usize },

    #[error("invalid lattice: {0}")]
    BadLattice(String),

    #[error("invalid quench protocol: {0}")]
    BadProtocol(String),

    #[error("pre-quench level at {energy:e} lies on the Fermi level; filling is ambiguous")]
    DegenerateFermiLevel { energy: f64 },

    #[error("pathway does not match the protocol: {0}")]
    WrongShape(String),

    #[error("correlation matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("correlation eigenvalue {value} outside [0, 1]")]
    EigenvalueOutOfRange { value: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("Fock sector of dimension {dim} exceeds the oracle limit ({limit} modes max)")]
    SectorTooLarge { dim: usize, limit: usize },

    #[error("numerical failure at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the time at which a pathway failed.
    pub fn at_time(self, time: f64) -> Self {
        match self {
            Error::AtTime { .. } => self,
            other => Error::AtTime {
                time,
                source: Box::new(other),
            },
        }
    }
}
