use alloc::string::String;

/// Errors raised by the core model, training and evaluation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in `{op}`: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("cosine similarity of a zero-norm vector")]
    ZeroNorm,
    #[error("backward requires a scalar root, got {0} elements")]
    NonScalarRoot(usize),
    #[error("empty operand in `{0}`")]
    Empty(&'static str),
    #[error("comment has no tokens")]
    EmptyTokens,
    #[error("keyframe has no member comments")]
    EmptyKeyframe,
    #[error("video `{0}` has zero duration")]
    ZeroDuration(String),
    #[error("need at least 10 examples to split, got {0}")]
    TooFewExamples(usize),
    #[error("variance attention needs at least 2 neighbors, got {0}")]
    TooFewNeighbors(usize),
    #[error("no keyframes available")]
    NoKeyframes,
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("empty keyword list")]
    EmptyKeywords,
    #[error("comment {index} of video `{video}` has no label")]
    MissingLabel { video: String, index: usize },
    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss or gradient")]
    Diverged { epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
