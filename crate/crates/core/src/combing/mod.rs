//! Combings stored as explicit tables `H[x][n]`, their constructors and auditors.

mod audit;
mod construct;
mod paths;
mod report;

pub use audit::{audit_coherent, audit_controlled, audit_expanding, audit_proper, ExpandingParams};
pub use construct::{
    bresenham_combing, geodesic_combing, noncoherent_example, nonproper_example, normal_form_combing,
    product_combing,
};
pub use paths::{
    audit_quasi_geodesic, check_gromov_fellow, GromovFellowReport, QuasiGeodesicCandidate, QuasiGeodesicParams,
    QuasiGeodesicReport,
};
pub use report::{AuditReport, Constants, Property, Verdict, Witness, WitnessKind};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric_core::{FiniteMetricSpace, PointId};
use crate::FORMAT_VERSION;

/// A synchronous combing on a finite space: `H[x][n]` for `0 ≤ n ≤ horizon`.
/// Stages past the horizon read as the last stage.
#[derive(Clone, Debug)]
pub struct Combing {
    space: Arc<FiniteMetricSpace>,
    base_point: PointId,
    horizon: u32,
    table: Vec<PointId>,
    settle: Vec<Option<u32>>,
}

impl Combing {
    /// Wraps a row-major table of `len × (horizon + 1)` entries, checking
    /// `H[x][0] = p` and `H[p][n] = p`.
    pub fn from_table(space: Arc<FiniteMetricSpace>, horizon: u32, table: Vec<PointId>) -> Result<Self> {
        let p = space.require_base()?;
        let n = space.len();
        let w = horizon as usize + 1;
        if table.len() != n * w {
            return invalid(format!("combing table has {} entries, expected {}", table.len(), n * w));
        }
        if let Some(bad) = table.iter().position(|&v| v as usize >= n) {
            return invalid(format!("combing table entry {bad} is not a point"));
        }
        for x in 0..n {
            if table[x * w] != p {
                return invalid(format!("H[{x}][0] is not the base point"));
            }
        }
        if table[p as usize * w..(p as usize + 1) * w].iter().any(|&v| v != p) {
            return invalid("the base point's path leaves the base point");
        }
        let settle = (0..n)
            .map(|x| {
                let row = &table[x * w..(x + 1) * w];
                if row[horizon as usize] as usize != x {
                    return None;
                }
                let mut s = horizon;
                while s > 0 && row[s as usize - 1] as usize == x {
                    s -= 1;
                }
                Some(s)
            })
            .collect();
        Ok(Combing {
            space,
            base_point: p,
            horizon,
            table,
            settle,
        })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn base_point(&self) -> PointId {
        self.base_point
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn h(&self, x: PointId, n: u32) -> PointId {
        let w = self.horizon as usize + 1;
        self.table[x as usize * w + n.min(self.horizon) as usize]
    }

    /// `H[x][0..=horizon]`.
    pub fn path(&self, x: PointId) -> &[PointId] {
        let w = self.horizon as usize + 1;
        &self.table[x as usize * w..(x as usize + 1) * w]
    }

    /// Least `n` from which the path sits at `x` through the horizon.
    pub fn settle(&self, x: PointId) -> Option<u32> {
        self.settle[x as usize]
    }

    pub fn settles(&self) -> &[Option<u32>] {
        &self.settle
    }

    pub fn is_settled(&self) -> bool {
        self.settle.iter().all(Option::is_some)
    }

    /// Last stage at which the path of `x` can still move.
    pub fn active_until(&self, x: PointId) -> u32 {
        self.settle(x).unwrap_or(self.horizon)
    }

    pub fn to_file(&self, space_ref: &str) -> CombingFile {
        CombingFile {
            format_version: FORMAT_VERSION,
            space_ref: space_ref.to_string(),
            base_point: self.base_point,
            horizon: self.horizon,
            table: self.table.clone(),
            settle: self.settle.clone(),
        }
    }

    pub fn from_file(file: CombingFile, space: Arc<FiniteMetricSpace>) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return invalid(format!("unsupported combing format_version {}", file.format_version));
        }
        if space.base_point() != Some(file.base_point) {
            return invalid("combing base point differs from the space's base point");
        }
        let c = Combing::from_table(space, file.horizon, file.table)?;
        if c.settle != file.settle {
            return invalid("recorded settle times do not match the table");
        }
        Ok(c)
    }
}

/// Serialized combing; the space lives in a separate file named by `space_ref`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombingFile {
    pub format_version: u32,
    pub space_ref: String,
    pub base_point: PointId,
    pub horizon: u32,
    pub table: Vec<PointId>,
    pub settle: Vec<Option<u32>>,
}
