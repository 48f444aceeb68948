use thiserror::Error;

use crate::rational::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("invalid layer spec: {0}")]
    InvalidLayer(String),

    #[error("invalid hardware config: {0}")]
    InvalidHardware(String),

    #[error(
        "layer {layer}: input cache too small for row-granularity model \
         ({rows_per_fill} rows per fill, kernel {kernel}, stride {stride})"
    )]
    InputCacheTooSmall {
        layer: usize,
        rows_per_fill: usize,
        kernel: usize,
        stride: usize,
    },

    #[error("infeasible budget {budget}: below the input-side energy floor {floor}")]
    InfeasibleBudget {
        budget: Box<Rational>,
        floor: Box<Rational>,
    },

    #[error("negative knapsack capacity {0}")]
    NegativeCapacity(Box<Rational>),

    #[error("knapsack instance too large for the exact solver: {0}")]
    InstanceTooLarge(String),

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at {stage}: {detail}")]
    Diverged { stage: String, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
