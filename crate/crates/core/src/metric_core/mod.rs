//! Finite metric spaces: construction, balls, Gromov products and coarse estimates.

mod cayley;
mod chain;
mod estimates;
mod space;

pub use cayley::{build_cayley_graph, lattice_label, parse_lattice_label, CayleyBall, GroupSpec};
pub use chain::chain_metric;
pub use estimates::{asdim_cover, estimate_asdim_upper, estimate_hyperbolicity, AsdimEstimate, HyperbolicityEstimate};
pub use space::{Dist, FiniteMetricSpace, PointId, Row, SpaceFile};

use std::sync::Arc;

use crate::error::Result;

/// The path `{0, …, t}` with `|i − j|`, based at 0.
pub fn interval(t: u32) -> Arc<FiniteMetricSpace> {
    let n = t as usize + 1;
    let labels = (0..n).map(|i| i.to_string()).collect();
    let adjacency = (0..n)
        .map(|i| {
            let mut nb = Vec::new();
            if i > 0 {
                nb.push(i as PointId - 1);
            }
            if i + 1 < n {
                nb.push(i as PointId + 1);
            }
            nb
        })
        .collect();
    Arc::new(FiniteMetricSpace::from_graph(labels, 1, 1, adjacency, Some(0), t).expect("path graph is valid"))
}

/// `points` points pairwise at distance `d` (scale 1), based at point 0.
pub fn uniform_space(points: usize, d: Dist) -> Result<FiniteMetricSpace> {
    let labels = (0..points).map(|i| format!("b{i}")).collect();
    let dist = (0..points * points)
        .map(|k| if k / points == k % points { 0 } else { d })
        .collect();
    FiniteMetricSpace::from_dense(labels, 1, dist, Some(0), d)
}

/// The cycle graph on `points` vertices (scale 1), based at vertex 0.
pub fn cycle_space(points: usize) -> Result<FiniteMetricSpace> {
    let labels = (0..points).map(|i| format!("c{i}")).collect();
    let adjacency = (0..points)
        .map(|i| {
            let mut nb = vec![((i + 1) % points) as PointId, ((i + points - 1) % points) as PointId];
            nb.retain(|&w| w as usize != i);
            nb
        })
        .collect();
    FiniteMetricSpace::from_graph(labels, 1, 1, adjacency, Some(0), (points / 2) as Dist)
}
