use thiserror::Error;

use crate::model::Pair;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("InfeasibleRegime: N >= 2M (M={m}, N={n})")]
    InfeasibleRegime { m: usize, n: usize },

    #[error("AlignmentInfeasible: pair {pair} needs {needed} aligned dimensions, only {available} exist")]
    AlignmentInfeasible {
        pair: Pair,
        needed: usize,
        available: usize,
    },

    #[error("RankDeficient: {what} has rank {rank}, expected {expected}")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        expected: usize,
    },

    #[error("ReducedInfeasible: N > floor(4M/3) (M={m}, N={n})")]
    ReducedInfeasible { m: usize, n: usize },

    #[error("DesignInvalid: {0}")]
    DesignInvalid(String),
}

impl Error {
    /// Short name used in CLI output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InfeasibleRegime { .. } => "InfeasibleRegime",
            Error::AlignmentInfeasible { .. } => "AlignmentInfeasible",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::ReducedInfeasible { .. } => "ReducedInfeasible",
            Error::DesignInvalid(_) => "DesignInvalid",
        }
    }

    /// Regime errors: no generic channel draw can fix them.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleRegime { .. }
                | Error::AlignmentInfeasible { .. }
                | Error::ReducedInfeasible { .. }
        )
    }

    /// Numerical failures tied to one channel draw; a redraw may succeed.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::RankDeficient { .. } | Error::DesignInvalid(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
