use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::Combing;
use crate::error::{invalid, Result};
use crate::metric_core::{Dist, PointId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Controlled,
    Proper,
    Coherent,
    Expanding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SupportedAtScale,
    RefutedAtScale,
    Inconclusive,
}

/// What a witness measures, and so how it is re-evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `[x]`, `[n]`: `d(H_{n+1}x, H_n x)`.
    Step,
    /// `[x, y]`, `[n]`: `d(H_n x, H_n y)`.
    Fellow,
    /// `[x]`, `[n]`: `d(x, p)` for a point whose `H_n`-image lies in `K`.
    Preimage,
    /// `[x]`, `[m, n]`: `d(H_m H_n x, H_m x)`.
    Coherence,
    /// `[x, y]`, `[n]`: `d(H_n x, H_n y)` for `y` near `x`.
    Expansion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub points: Vec<PointId>,
    pub labels: Vec<String>,
    pub stages: Vec<u32>,
    pub distance: Dist,
}

impl Witness {
    pub(crate) fn new(c: &Combing, kind: WitnessKind, points: Vec<PointId>, stages: Vec<u32>, distance: Dist) -> Self {
        let labels = points.iter().map(|&x| c.space().label(x).to_string()).collect();
        Witness {
            kind,
            points,
            labels,
            stages,
            distance,
        }
    }

    /// Recomputes the distance from the combing table.
    pub fn evaluate(&self, c: &Combing) -> Result<Dist> {
        let s = c.space();
        let n = s.len() as PointId;
        if self.points.iter().any(|&x| x >= n) {
            return invalid("witness point out of range");
        }
        let shape = |np: usize, ns: usize| -> Result<()> {
            if self.points.len() != np || self.stages.len() != ns {
                return invalid(format!("{:?} witness needs {np} points and {ns} stages", self.kind));
            }
            Ok(())
        };
        match self.kind {
            WitnessKind::Step => {
                shape(1, 1)?;
                let (x, k) = (self.points[0], self.stages[0]);
                Ok(s.dist(c.h(x, k + 1), c.h(x, k)))
            }
            WitnessKind::Fellow | WitnessKind::Expansion => {
                shape(2, 1)?;
                let k = self.stages[0];
                Ok(s.dist(c.h(self.points[0], k), c.h(self.points[1], k)))
            }
            WitnessKind::Preimage => {
                shape(1, 1)?;
                Ok(s.dist(self.points[0], c.base_point()))
            }
            WitnessKind::Coherence => {
                shape(1, 2)?;
                let (x, m, k) = (self.points[0], self.stages[0], self.stages[1]);
                Ok(s.dist(c.h(c.h(x, k), m), c.h(x, m)))
            }
        }
    }
}

/// Property-specific tables of an audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constants {
    Controlled {
        /// `step[n] = max d(H_{n+1}x, H_n x)`.
        step: Vec<Dist>,
        fellow_radii: Vec<Dist>,
        /// `fellow[i] = max d(H_n x, H_n y)` over `d(x,y) ≤ fellow_radii[i]` and all stages.
        fellow: Vec<Dist>,
    },
    Proper {
        k_radius: Dist,
        stages: Vec<u32>,
        /// Largest `d(x,p)` with `H_n x` in the ball of radius `k_radius`.
        m: Vec<Dist>,
        /// Largest `d(x,p)` inside the audited window.
        max_available: Dist,
    },
    Coherent {
        radii: Vec<Dist>,
        coh: Vec<Dist>,
        /// Least-squares slope of `coh` against the radius.
        slope: Option<Ratio<i64>>,
        slope_threshold: Ratio<i64>,
    },
    Expanding {
        r_list: Vec<Dist>,
        n_list: Vec<u32>,
        rho_grid: Vec<Dist>,
        /// `f[i][j][k] = f(r_list[i], n_list[j], rho_grid[k])`.
        f: Vec<Vec<Vec<Option<Dist>>>>,
        /// Maximum of `f` over the two largest grid radii.
        tails: Vec<Vec<Option<Dist>>>,
        band: Dist,
        slack: Dist,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub property: Property,
    pub verdict: Verdict,
    pub scale: u32,
    pub horizon: u32,
    pub collar_excluded: Dist,
    pub constants: Constants,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

fn opt(v: Option<Dist>) -> String {
    v.map_or(String::new(), |d| d.to_string())
}

impl AuditReport {
    /// The main table as CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.constants {
            Constants::Controlled { step, fellow_radii, fellow } => {
                out.push_str("table,parameter,value\n");
                for (n, v) in step.iter().enumerate() {
                    out.push_str(&format!("step,{n},{v}\n"));
                }
                for (r, v) in fellow_radii.iter().zip(fellow) {
                    out.push_str(&format!("fellow,{r},{v}\n"));
                }
            }
            Constants::Proper { stages, m, .. } => {
                out.push_str("n,m\n");
                for (n, v) in stages.iter().zip(m) {
                    out.push_str(&format!("{n},{v}\n"));
                }
            }
            Constants::Coherent { radii, coh, .. } => {
                out.push_str("rho,coh\n");
                for (r, v) in radii.iter().zip(coh) {
                    out.push_str(&format!("{r},{v}\n"));
                }
            }
            Constants::Expanding { r_list, n_list, rho_grid, f, .. } => {
                out.push_str("r,n,rho,f\n");
                for (i, r) in r_list.iter().enumerate() {
                    for (j, n) in n_list.iter().enumerate() {
                        for (k, rho) in rho_grid.iter().enumerate() {
                            out.push_str(&format!("{r},{n},{rho},{}\n", opt(f[i][j][k])));
                        }
                    }
                }
            }
        }
        out
    }

    /// `f(r, n, ρ)` for an expanding audit.
    pub fn expanding_value(&self, r: Dist, n: u32, rho: Dist) -> Option<Dist> {
        match &self.constants {
            Constants::Expanding { r_list, n_list, rho_grid, f, .. } => {
                let i = r_list.iter().position(|&v| v == r)?;
                let j = n_list.iter().position(|&v| v == n)?;
                let k = rho_grid.iter().position(|&v| v == rho)?;
                f[i][j][k]
            }
            _ => None,
        }
    }

    /// Tail value for `(r, n)` of an expanding audit.
    pub fn expanding_tail(&self, r: Dist, n: u32) -> Option<Dist> {
        match &self.constants {
            Constants::Expanding { r_list, n_list, tails, .. } => {
                let i = r_list.iter().position(|&v| v == r)?;
                let j = n_list.iter().position(|&v| v == n)?;
                tails[i][j]
            }
            _ => None,
        }
    }
}
