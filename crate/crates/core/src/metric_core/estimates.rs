use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::space::{Dist, FiniteMetricSpace, PointId};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityEstimate {
    /// Four-point δ in scaled units.
    pub delta: Ratio<i64>,
    pub sample_size: usize,
    pub exhaustive: bool,
    /// Covering radius of the farthest-point sample used when the space is too large; 0 when exhaustive.
    pub net_separation: Dist,
}

fn choose4(q: u64) -> u64 {
    if q < 4 {
        0
    } else {
        q * (q - 1) * (q - 2) * (q - 3) / 24
    }
}

/// Four-point δ: for each quadruple, half the gap between the largest and
/// the middle of the three pairings `d(x,y)+d(z,w)`, maximized.
///
/// All quadruples are used when at most `sample_budget` of them exist;
/// otherwise the largest farthest-point sample that fits the budget is used
/// exhaustively (seeded at the base point, ties to the lowest index). No
/// randomness is involved.
pub fn estimate_hyperbolicity(space: &FiniteMetricSpace, sample_budget: u64) -> HyperbolicityEstimate {
    let n = space.len();
    let mut q = 4u64;
    while choose4(q + 1) <= sample_budget && q < n as u64 {
        q += 1;
    }
    let (sample, separation): (Vec<PointId>, Dist) = if choose4(n as u64) <= sample_budget {
        (space.points().collect(), 0)
    } else {
        farthest_points(space, q as usize)
    };
    let m = sample.len();
    let mut d = vec![0u64; m * m];
    for (i, &x) in sample.iter().enumerate() {
        let row = space.row(x);
        for (j, &y) in sample.iter().enumerate() {
            d[i * m + j] = row[y as usize] as u64;
        }
    }
    let mut best = 0u64;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for e in c + 1..m {
                    let mut s = [
                        d[a * m + b] + d[c * m + e],
                        d[a * m + c] + d[b * m + e],
                        d[a * m + e] + d[b * m + c],
                    ];
                    s.sort_unstable();
                    best = best.max(s[2] - s[1]);
                }
            }
        }
    }
    HyperbolicityEstimate {
        delta: Ratio::new(best as i64, 2),
        sample_size: m,
        exhaustive: separation == 0,
        net_separation: separation,
    }
}

/// Greedy farthest-point sample of `k` points and its covering radius.
fn farthest_points(space: &FiniteMetricSpace, k: usize) -> (Vec<PointId>, Dist) {
    let seed = space.base_point().unwrap_or(0);
    let mut gap: Vec<Dist> = space.row(seed).to_vec();
    let mut chosen = vec![seed];
    while chosen.len() < k {
        let (x, _) = gap.iter().enumerate().fold((0, 0), |best, (i, &g)| if g > best.1 { (i, g) } else { best });
        if gap[x] == 0 {
            break;
        }
        chosen.push(x as PointId);
        for (g, &d) in gap.iter_mut().zip(space.row(x as PointId).iter()) {
            *g = (*g).min(d);
        }
    }
    let radius = gap.iter().copied().max().unwrap_or(0);
    chosen.sort_unstable();
    (chosen, radius.max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsdimEstimate {
    pub scales: Vec<Dist>,
    /// Per scale, multiplicity of the enlarged cover minus one.
    pub nerve_dims: Vec<usize>,
    /// Per scale, the number of cover sets.
    pub cover_sizes: Vec<usize>,
    /// Per scale, the declared diameter bound of every cover set (six times the scale).
    pub diameter_bounds: Vec<Dist>,
    pub upper_bound: usize,
}

/// Cover at one scale: the cover sets as sorted point lists.
pub fn asdim_cover(space: &FiniteMetricSpace, s: Dist) -> Vec<Vec<PointId>> {
    let n = space.len();
    // Maximal 2s-separated net in index order.
    let mut covered = vec![false; n];
    let mut centers = Vec::new();
    for x in space.points() {
        if !covered[x as usize] {
            centers.push(x);
            for y in space.ball(x, 2 * s) {
                covered[y as usize] = true;
            }
        }
    }
    // Nearest center, ties to the earlier center.
    let mut cell: Vec<(Dist, usize)> = vec![(Dist::MAX, usize::MAX); n];
    for (j, &c) in centers.iter().enumerate() {
        for (y, d) in space.ball_with_dist(c, 2 * s) {
            if (d, j) < cell[y as usize] {
                cell[y as usize] = (d, j);
            }
        }
    }
    // Enlarge each cell by s.
    let mut sets: Vec<BTreeSet<PointId>> = vec![BTreeSet::new(); centers.len()];
    for y in space.points() {
        let j = cell[y as usize].1;
        for x in space.ball(y, s) {
            sets[j].insert(x);
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Upper estimate of asymptotic dimension from greedy covers.
///
/// At scale `s`: a maximal `2s`-separated net is picked in point order, every
/// point joins its nearest net point, and each cell is thickened by `s`, so
/// `s`-balls lie inside single sets (Lebesgue number `s`) and every set has
/// diameter at most `6s`. The reported dimension is the cover multiplicity
/// minus one.
pub fn estimate_asdim_upper(space: &FiniteMetricSpace, scales: &[Dist]) -> Result<AsdimEstimate> {
    if scales.iter().any(|&s| s == 0) || scales.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("scales must be positive and increasing");
    }
    let mut nerve_dims = Vec::new();
    let mut cover_sizes = Vec::new();
    for &s in scales {
        let cover = asdim_cover(space, s);
        let mut mult = vec![0usize; space.len()];
        for set in &cover {
            for &x in set {
                mult[x as usize] += 1;
            }
        }
        nerve_dims.push(mult.iter().copied().max().unwrap_or(1).saturating_sub(1));
        cover_sizes.push(cover.len());
    }
    Ok(AsdimEstimate {
        scales: scales.to_vec(),
        upper_bound: nerve_dims.iter().copied().max().unwrap_or(0),
        nerve_dims,
        cover_sizes,
        diameter_bounds: scales.iter().map(|&s| 6 * s).collect(),
    })
}
