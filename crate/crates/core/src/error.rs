//! Error type shared by every module.
//!
//! Failures carry a [`Stage`] tag so the command line can map them onto exit
//! codes and reports can name the pipeline step that stopped the run.

use std::fmt;

/// Pipeline stage that produced an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Geometry,
    Assembly,
    Eigen,
    Gate,
    LocalSolve,
    Continuation,
    Subsolution,
    Supersolution,
    Iteration,
    Normalization,
    Verification,
    Obstruction,
    Routing,
    Config,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Geometry => "geometry",
            Stage::Assembly => "assembly",
            Stage::Eigen => "eigen",
            Stage::Gate => "gate",
            Stage::LocalSolve => "local-solve",
            Stage::Continuation => "continuation",
            Stage::Subsolution => "subsolution",
            Stage::Supersolution => "supersolution",
            Stage::Iteration => "iteration",
            Stage::Normalization => "normalization",
            Stage::Verification => "verification",
            Stage::Obstruction => "obstruction",
            Stage::Routing => "routing",
            Stage::Config => "config",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CywError {
    #[error("[{stage}] invalid input: {message}")]
    InvalidInput { stage: Stage, message: String },

    #[error("[{stage}] precondition failed: {message}")]
    Precondition { stage: Stage, message: String },

    #[error("[{stage}] no convergence after {iterations} iterations (achieved {achieved:.3e})")]
    NonConvergence {
        stage: Stage,
        iterations: usize,
        achieved: f64,
    },

    #[error("[{stage}] {message}")]
    Failure { stage: Stage, message: String },

    #[error("[obstruction] refused: {message}")]
    Obstruction { message: String },

    #[error("[config] line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("[io] {0}")]
    Io(#[from] std::io::Error),
}

impl CywError {
    pub fn invalid(stage: Stage, message: impl Into<String>) -> Self {
        CywError::InvalidInput {
            stage,
            message: message.into(),
        }
    }

    pub fn precondition(stage: Stage, message: impl Into<String>) -> Self {
        CywError::Precondition {
            stage,
            message: message.into(),
        }
    }

    pub fn failure(stage: Stage, message: impl Into<String>) -> Self {
        CywError::Failure {
            stage,
            message: message.into(),
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            CywError::InvalidInput { stage, .. }
            | CywError::Precondition { stage, .. }
            | CywError::NonConvergence { stage, .. }
            | CywError::Failure { stage, .. } => *stage,
            CywError::Obstruction { .. } => Stage::Obstruction,
            CywError::Config { .. } => Stage::Config,
            CywError::Io(_) => Stage::Config,
        }
    }

    /// Returns a copy of the error re-tagged with `stage` when it came from a
    /// generic helper (linear solvers, assembly) called inside that stage.
    pub fn at(self, stage: Stage) -> Self {
        match self {
            CywError::InvalidInput { message, .. } => CywError::InvalidInput { stage, message },
            CywError::Precondition { message, .. } => CywError::Precondition { stage, message },
            CywError::NonConvergence {
                iterations,
                achieved,
                ..
            } => CywError::NonConvergence {
                stage,
                iterations,
                achieved,
            },
            CywError::Failure { message, .. } => CywError::Failure { stage, message },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CywError>;
