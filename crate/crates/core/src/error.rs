use thiserror::Error;

/// Errors raised by the solvers, generators and metrics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point sits on or behind the camera plane.
    #[error("point depth {depth} is not in front of the camera")]
    CheiralityViolation { depth: f64 },
    /// A scalar argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// The 3D side of the correspondences has no spatial extent.
    #[error("degenerate 3d point configuration")]
    DegenerateGeometry,
    /// Every EPnP candidate put most points behind the camera.
    #[error("no EPnP candidate satisfies cheirality")]
    NoValidCandidate,
    #[error("need at least {needed} correspondences, got {got}")]
    NotEnoughCorrespondences { needed: usize, got: usize },
    /// The damped solver rejected too many consecutive steps.
    #[error("solver diverged after {rejections} consecutive rejected steps")]
    Diverged { rejections: usize },
    #[error("invalid options: {0}")]
    InvalidOptions(&'static str),
    #[error("ransac found {best} inliers, need at least {needed}")]
    NoConsensus { best: usize, needed: usize },
    #[error("scene sampling gave up after {attempts} attempts")]
    SamplingExhausted { attempts: usize },
    /// No lattice cell of the location field hit the object.
    #[error("location field is empty")]
    EmptyField,
    #[error("degenerate ground truth: {0}")]
    DegenerateGroundTruth(&'static str),
    /// Failed samples would make a reported median infinite.
    #[error("{failed} of {total} samples failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
