use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Name of a conserved field, used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldName {
    Density,
    MomentumX,
    MomentumY,
    MomentumZ,
}

impl FieldName {
    pub const ALL: [FieldName; 4] = [
        FieldName::Density,
        FieldName::MomentumX,
        FieldName::MomentumY,
        FieldName::MomentumZ,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldName::Density => "n",
            FieldName::MomentumX => "nu_x",
            FieldName::MomentumY => "nu_y",
            FieldName::MomentumZ => "nu_z",
        }
    }
}

impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid with fewer than two cells in a direction, or a degenerate domain.
    InvalidDimension { nx: usize, ny: usize },
    /// Field or coefficient arrays whose lengths do not agree.
    SizeMismatch { expected: usize, found: usize },
    /// Physical parameters outside their admissible range.
    InvalidParams(&'static str),
    /// A Roe average was requested with a nonpositive density.
    NonPositiveDensity { left: f64, right: f64 },
    /// The sound speed `sqrt(T / epsilon)` was requested with `epsilon = 0`.
    ZeroEpsilon,
    /// Every interface speed vanished, so the CFL condition gives no time step.
    ZeroSpeed,
    /// A pivot fell below the singularity guard in a tridiagonal solve.
    SingularSystem { row: usize, pivot: f64 },
    /// A density at or below zero after a step.
    DensityPositivity { i: usize, j: usize, value: f64 },
    /// A NaN or infinite value after a step.
    NonFinite { field: FieldName, i: usize, j: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension { nx, ny } => {
                write!(f, "invalid grid dimension {nx}x{ny} (need at least 2x2 on a non-degenerate domain)")
            }
            Error::SizeMismatch { expected, found } => {
                write!(f, "size mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::NonPositiveDensity { left, right } => {
                write!(f, "nonpositive density in Roe average (left {left}, right {right})")
            }
            Error::ZeroEpsilon => f.write_str("sound speed undefined for epsilon = 0"),
            Error::ZeroSpeed => f.write_str("all interface speeds vanish; CFL time step undefined"),
            Error::SingularSystem { row, pivot } => {
                write!(f, "singular tridiagonal system at row {row} (pivot {pivot:e})")
            }
            Error::DensityPositivity { i, j, value } => {
                write!(f, "density lost positivity in cell ({i}, {j}): {value:e}")
            }
            Error::NonFinite { field, i, j } => {
                write!(f, "non-finite {field} in cell ({i}, {j})")
            }
        }
    }
}

impl core::error::Error for Error {}
