use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoarseError {
    #[error("{budget} budget exceeded: needed {needed}, limit {limit}{context}")]
    Budget {
        budget: &'static str,
        needed: u64,
        limit: u64,
        context: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("disconnected: {0}")]
    Disconnected(String),
    #[error("space has no base point")]
    MissingBasePoint,
    #[error("leaves the truncation: {0}")]
    LeavesTruncation(String),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CoarseError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CoarseError::Invalid(msg.into()))
}

/// Resource limits. Every constructor that can blow up takes one of these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub points: usize,
    pub simplices: usize,
    /// Cells of any dense matrix (SNF remainders, transforms, distance tables).
    pub matrix_cells: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            points: 200_000,
            simplices: 5_000_000,
            matrix_cells: 50_000_000,
        }
    }
}

impl Budget {
    pub(crate) fn check(&self, budget: &'static str, needed: usize, context: &str) -> Result<()> {
        let limit = match budget {
            "points" => self.points,
            "simplices" => self.simplices,
            _ => self.matrix_cells,
        };
        if needed > limit {
            return Err(CoarseError::Budget {
                budget,
                needed: needed as u64,
                limit: limit as u64,
                context: if context.is_empty() {
                    String::new()
                } else {
                    format!(" ({context})")
                },
            });
        }
        Ok(())
    }
}
