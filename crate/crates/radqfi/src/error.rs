use thiserror::Error;

/// Errors produced by model construction, discretization, and spectral analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("time step too large: dt * max(|H|, sum|L'L|) = {0:.3} exceeds 0.5")]
    StepTooLarge(f64),

    #[error("normalization matrix not positive definite (min eigenvalue {0:.3e}); dt too large")]
    IndefiniteNormalization(f64),

    #[error("Kraus set is not an isometry: defect {defect:.3e} exceeds tolerance {tol:.1e}")]
    NotIsometry { defect: f64, tol: f64 },

    #[error("channel does not have a unique steady state ({0} peripheral modes)")]
    NonUniqueSteadyState(usize),

    #[error("defective peripheral block at phase {phase:.6}: Gram condition {cond:.3e}")]
    DefectivePeripheralBlock { phase: f64, cond: f64 },

    #[error("PSD basis construction failed; most negative eigenvalue found: {0:.3e}")]
    PsdBasisFailure(f64),

    #[error("transfer spectrum has zero gap; asymptotic expansion undefined")]
    ZeroGap,

    #[error("state dimension {0} exceeds memory guard {1}")]
    MemoryGuard(usize, usize),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("no stationary (phase-zero) peripheral mode found")]
    NoStationaryModes,

    #[error("photon-generator solve residual {0:.3e} exceeds tolerance; Kraus-span condition fails numerically")]
    GeneratorResidual(f64),

    #[error("rotated-tensor condition residual {0:.3e} exceeds tolerance")]
    RotatedTensorResidual(f64),

    #[error("overlap underflow in tilted evolution: |overlap| = {0:.3e}")]
    OverlapUnderflow(f64),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

pub type Result<T> = std::result::Result<T, Error>;
