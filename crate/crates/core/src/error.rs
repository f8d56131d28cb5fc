use thiserror::Error;

/// Errors produced by tracking, metric, simulation and file-format code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance matrix is not symmetric: max asymmetry {max_asymmetry:e} exceeds {tol:e}")]
    AsymmetricCovariance { max_asymmetry: f64, tol: f64 },

    #[error("covariance matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("process noise must be symmetric positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    InvalidProcessNoise { min_eigenvalue: f64 },

    #[error("innovation covariance is numerically singular (condition number {cond:e})")]
    SingularInnovation { cond: f64 },

    #[error("covariance is ill-conditioned (condition number {cond:e} > {limit:e})")]
    IllConditionedCovariance { cond: f64, limit: f64 },

    #[error("track {track_id} has an ill-conditioned covariance (condition number {cond:e})")]
    TrackCovarianceIllConditioned { track_id: u64, cond: f64 },

    #[error("feature vector has near-zero or non-finite norm and cannot be normalized")]
    ZeroNormFeature,

    #[error("feature dimensions differ: {left} vs {right}")]
    FeatureDimMismatch { left: usize, right: usize },

    #[error("track feature list is empty")]
    EmptyFeatureList,

    #[error("bounding box has non-positive extent: w={w}, h={h}")]
    InvalidBBox { w: f64, h: f64 },

    #[error("matrix shapes differ: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("lambda must lie in [0, 1], got {0}")]
    InvalidLambda(f64),

    #[error("invalid gate configuration: {0}")]
    InvalidGate(String),

    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },

    #[error("feature gate calibration needs at least one id with two or more occurrences")]
    NoRepeatedIds,

    #[error("detections for frame {got} do not advance the world model (current frame {current})")]
    NonIncreasingFrame { got: u64, current: u64 },

    #[error("detections within one step carry different frame indices: {expected} vs {got}")]
    MixedFrameIndices { expected: u64, got: u64 },

    #[error("frame sequence is not strictly increasing: {prev} followed by {next}")]
    UnorderedFrames { prev: u64, next: u64 },

    #[error("ground-truth trajectory set is empty")]
    EmptyGroundTruth,

    #[error("duplicate trajectory record for frame {frame}, id {id}")]
    DuplicateTrajectoryRecord { frame: u64, id: u64 },

    #[error("2D IoU similarity requested but a record at frame {frame} has no bounding box")]
    MissingBBox { frame: u64 },

    #[error("paired samples must have equal lengths of at least 2 (got {a} and {b})")]
    BadPairedSamples { a: usize, b: usize },

    #[error("scene generation failed: {0}")]
    SceneGeneration(String),

    #[error(
        "could not sample {n} embedding centers with pairwise angle >= {min_angle} rad \
         in dimension {dim} within the retry budget"
    )]
    EmbeddingInfeasible { n: usize, min_angle: f64, dim: usize },

    #[error("subset size {size} exceeds available frame count {available}")]
    SubsetTooLarge { size: usize, available: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config schema version {got} is not supported (expected {expected})")]
    SchemaVersion { got: u32, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
