use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: axis {axis} is invalid for rank {rank}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidInput(String),
    #[error("CDR {0} is outside the study classes (0 for CN, >= 1 for AD)")]
    OutsideStudyClasses(f64),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("feature is constant (min == max == {0}); cannot min-max scale")]
    ConstantFeature(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("both classes must be present")]
    SingleClass,
    #[error("zero pooled variance with unequal means")]
    DegenerateVariance,
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
