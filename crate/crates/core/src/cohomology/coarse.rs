//! Relative cohomology of `(P_R(ball T), P_R(collar))` tracked across `T` and `R`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cohomology, Ring};
use crate::error::{invalid, Result};
use crate::metric_core::{Dist, FiniteMetricSpace, PointId};
use crate::rips::{closed_full_subcomplex, rips_complex};
use crate::Budget;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseParams {
    pub scales: Vec<Dist>,
    pub degrees: Vec<usize>,
    /// Points farther than `T − collar` from the base point form the collar.
    pub collar: Dist,
    pub dim_cap: usize,
    pub ring: Ring,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseCell {
    pub truncation: Dist,
    pub scale: Dist,
    pub collar_points: usize,
    pub simplex_counts: Vec<usize>,
    pub betti: Vec<usize>,
    pub torsion: Vec<Vec<String>>,
}

impl CoarseCell {
    /// Which degrees carry a nonzero group.
    pub fn signature(&self) -> Vec<bool> {
        self.betti
            .iter()
            .zip(&self.torsion)
            .map(|(&b, t)| b > 0 || !t.is_empty())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseCohomologyReport {
    pub ring: Ring,
    pub truncations: Vec<Dist>,
    pub scales: Vec<Dist>,
    pub degrees: Vec<usize>,
    pub collar: Dist,
    pub dim_cap: usize,
    /// Truncation-major: `cells[i * scales.len() + j]`.
    pub cells: Vec<CoarseCell>,
    /// `(T, R)` pairs of the stabilization window.
    pub window: Vec<(Dist, Dist)>,
    /// Betti numbers and torsion agree across the window.
    pub stable: bool,
    /// The set of nonzero degrees agrees across the window.
    pub signature_stable: bool,
    /// Highest nonzero degree on the window, when the signature is stable.
    pub top_degree: Option<usize>,
}

impl CoarseCohomologyReport {
    pub fn cell(&self, t: Dist, r: Dist) -> Option<&CoarseCell> {
        let i = self.truncations.iter().position(|&v| v == t)?;
        let j = self.scales.iter().position(|&v| v == r)?;
        self.cells.get(i * self.scales.len() + j)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("truncation,scale,degree,betti,torsion\n");
        for c in &self.cells {
            for (k, q) in self.degrees.iter().enumerate() {
                out.push_str(&format!("{},{},{q},{},{}\n", c.truncation, c.scale, c.betti[k], c.torsion[k].join(" ")));
            }
        }
        out
    }
}

/// Builds `P_R` of each truncation with its collar subcomplex and reports
/// relative Betti numbers. The window is the largest two truncations by the
/// largest two scales (one scale if only one is given).
pub fn coarse_cohomology_report(
    family: &[Arc<FiniteMetricSpace>],
    params: &CoarseParams,
    budget: &Budget,
) -> Result<CoarseCohomologyReport> {
    if family.len() < 2 {
        return invalid("need at least two truncations");
    }
    if params.scales.is_empty() || params.degrees.is_empty() {
        return invalid("need at least one scale and one degree");
    }
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by_key(|&i| family[i].truncation_radius());
    let mut scales = params.scales.clone();
    scales.sort_unstable();
    scales.dedup();
    let jobs: Vec<(usize, Dist)> = order.iter().flat_map(|&i| scales.iter().map(move |&r| (i, r))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, r)| {
            let space = &family[i];
            let t = space.truncation_radius();
            let base = space.base_row()?;
            let cut = t.saturating_sub(params.collar);
            let collar: Vec<PointId> = space.points().filter(|&x| base[x as usize] > cut).collect();
            let cx = rips_complex(space, r, params.dim_cap, budget)?;
            let l = closed_full_subcomplex(&cx, &collar);
            let res = cohomology(&cx, params.ring, &params.degrees, Some(&l), budget)?;
            Ok(CoarseCell {
                truncation: t,
                scale: r,
                collar_points: collar.len(),
                simplex_counts: cx.counts(),
                betti: res.betti,
                torsion: res.torsion,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let truncations: Vec<Dist> = order.iter().map(|&i| family[i].truncation_radius()).collect();
    let nt = truncations.len();
    let ns = scales.len();
    let window_idx: Vec<usize> = (nt - 2..nt)
        .flat_map(|i| (ns.saturating_sub(2)..ns).map(move |j| i * ns + j))
        .collect();
    let w: Vec<&CoarseCell> = window_idx.iter().map(|&k| &cells[k]).collect();
    let stable = w.iter().all(|c| c.betti == w[0].betti && c.torsion == w[0].torsion);
    let signature_stable = w.iter().all(|c| c.signature() == w[0].signature());
    let top_degree = if signature_stable {
        let sig = w[0].signature();
        (0..sig.len()).rev().find(|&k| sig[k]).map(|k| params.degrees[k])
    } else {
        None
    };
    Ok(CoarseCohomologyReport {
        ring: params.ring,
        truncations,
        scales,
        degrees: params.degrees.clone(),
        collar: params.collar,
        dim_cap: params.dim_cap,
        window: w.iter().map(|c| (c.truncation, c.scale)).collect(),
        stable,
        signature_stable,
        top_degree,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_core::{build_cayley_graph, GroupSpec};

    fn lattice(rank: u32, t: u32) -> Arc<FiniteMetricSpace> {
        build_cayley_graph(&GroupSpec::FreeAbelian { rank }, t, &Budget::default()).unwrap().space
    }

    #[test]
    fn line_family_is_stable() {
        let fam: Vec<_> = [6, 8, 10].iter().map(|&t| lattice(1, t)).collect();
        let p = CoarseParams {
            scales: vec![1, 2],
            degrees: vec![0, 1],
            collar: 1,
            dim_cap: 2,
            ring: Ring::Integers,
        };
        let r = coarse_cohomology_report(&fam, &p, &Budget::default()).unwrap();
        assert!(r.stable);
        assert_eq!(r.cell(10, 2).unwrap().betti, vec![0, 1]);
        assert_eq!(r.top_degree, Some(1));
        assert_eq!(r.window.len(), 4);
    }

    #[test]
    fn single_points_have_only_degree_zero() {
        let fam = vec![lattice(1, 0), lattice(2, 0)];
        let p = CoarseParams {
            scales: vec![1],
            degrees: vec![0, 1],
            collar: 1,
            dim_cap: 2,
            ring: Ring::Integers,
        };
        let r = coarse_cohomology_report(&fam, &p, &Budget::default()).unwrap();
        assert!(r.cells.iter().all(|c| c.betti == vec![1, 0]));
    }
}
