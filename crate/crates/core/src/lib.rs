//! Frank-Wolfe with open-loop step sizes, growth certification and rate analysis.

pub mod analysis;
pub mod domains;
pub mod error;
pub mod linalg;
pub mod objectives;
pub mod scalar;
pub mod schedules;
pub mod solver;

pub use analysis::{
    certify_growth, check_trace_against_bound, fit_rate_slope, strong_rate_bound, weak_rate_bound, GrowthCertificate,
    GrowthMode, Measure, RateEnvelope, SlopeFit,
};
pub use domains::{FeasibleRegion, LmoResult, LpBall, NuclearBall, Vertex};
pub use error::{FwError, Result};
pub use linalg::{DenseMatrix, DenseVector};
pub use objectives::{CompletionObjective, Objective, Observation, RegressionObjective};
pub use scalar::{DoubleDouble, Precision, Scalar};
pub use schedules::Schedule;
pub use solver::{fw_run, fw_step, reference_optimum, IterateState, IterationRecord, ReferenceOptimum, RunOptions, Trace};
