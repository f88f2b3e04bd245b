use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("outer boundary is not star-shaped: minimum radius {min_radius:.3e}")]
    StarShapeViolation { min_radius: f64 },

    #[error("inclusion too close to the outer boundary: gap {gap:.3e} below margin {margin}")]
    InclusionOverlap { gap: f64, margin: f64 },

    #[error("extension cutoffs must satisfy 0 < inner < 1 < outer (got {inner}, {outer})")]
    CutoffOrdering { inner: f64, outer: f64 },

    #[error("conductivity lost ellipticity: sigma_c + s = {sigma:.3e}")]
    EllipticityLoss { sigma: f64 },

    #[error("resolution too low: {0}")]
    ResolutionTooLow(String),

    #[error("base configuration is not critical: relative defect {relative_defect:.3e} (c = {c:.6})")]
    NotCritical { c: f64, relative_defect: f64 },

    #[error("base is degenerate: smallest/largest singular value ratio {ratio:.3e}")]
    DegenerateBase { ratio: f64 },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("finite-difference step {step:.3e} breaks the geometry: {reason}")]
    StepTooLarge { step: f64, reason: String },

    #[error("parameter outside the trust region: {0}")]
    OutsideTrustRegion(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Violations of the star-shape or inclusion invariants.
    pub fn is_geometry(&self) -> bool {
        matches!(
            self,
            Error::StarShapeViolation { .. } | Error::InclusionOverlap { .. }
        )
    }
}
