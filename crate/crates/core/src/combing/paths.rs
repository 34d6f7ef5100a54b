use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Witness, WitnessKind};
use super::Combing;
use crate::error::Result;
use crate::metric_core::{Dist, PointId};

/// `λ⁻¹|t−s| − k ≤ d(γ(t), γ(s)) ≤ λ|t−s| + k`, with `|t−s|` measured in
/// unit steps of the space and `k` in scaled units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiGeodesicParams {
    pub lambda: Ratio<i64>,
    pub k: Dist,
}

/// Worst path pair for one candidate `λ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiGeodesicCandidate {
    pub lambda: Ratio<i64>,
    /// Least `k` making every path satisfy the bounds with this `λ`.
    pub needed_k: Ratio<i64>,
    /// `(x, s, t)` attaining `needed_k`, if any pair needs `k > 0`.
    pub witness: Option<(PointId, u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiGeodesicReport {
    /// Least grid pair, or `None` if nothing on the grid works.
    pub params: Option<QuasiGeodesicParams>,
    pub candidates: Vec<QuasiGeodesicCandidate>,
    pub k_grid: Vec<Dist>,
}

/// Numerators `2λ` of the candidate stretch factors 1, 1.5, 2, 3.
const TWO_LAMBDA: [i64; 4] = [2, 3, 4, 6];

/// Least `(λ, k)` on the grid `λ ∈ {1, 1.5, 2, 3}`, `k ∈ {0,…,8}·scale`
/// for which every path `H[x][0..=settle]` is a quasi-geodesic.
pub fn audit_quasi_geodesic(c: &Combing) -> QuasiGeodesicReport {
    let s = c.space();
    let unit = s.unit_step() as i64;
    // With λ = a/2 the bounds read 4Δ − 2ak ≤ 2ad and 2ad ≤ a²Δ + 2ak, so
    // k ≥ N / 2a where N is the larger of the two defects.
    let per_point: Vec<[(i64, u32, u32); 4]> = s
        .points()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&x| {
            let path = c.path(x);
            let last = c.active_until(x) as usize;
            let mut worst = [(0i64, 0u32, 0u32); 4];
            for si in 0..=last {
                let row = s.row(path[si]);
                for ti in si + 1..=last {
                    let d = row[path[ti] as usize] as i64;
                    let delta = (ti - si) as i64 * unit;
                    for (w, &a) in worst.iter_mut().zip(&TWO_LAMBDA) {
                        let need = (4 * delta - 2 * a * d).max(2 * a * d - a * a * delta);
                        if need > w.0 {
                            *w = (need, si as u32, ti as u32);
                        }
                    }
                }
            }
            worst
        })
        .collect();

    let scale = s.scale();
    let k_grid: Vec<Dist> = (0..=8).map(|i| i * scale).collect();
    let mut candidates = Vec::new();
    let mut params = None;
    for (i, &a) in TWO_LAMBDA.iter().enumerate() {
        let mut top: Option<(i64, PointId, u32, u32)> = None;
        for (x, w) in per_point.iter().enumerate() {
            let (need, si, ti) = w[i];
            if need > 0 && top.map_or(true, |t| need > t.0) {
                top = Some((need, x as PointId, si, ti));
            }
        }
        let need = top.map_or(0, |t| t.0);
        let lambda = Ratio::new(a, 2);
        if params.is_none() {
            if let Some(&k) = k_grid.iter().find(|&&k| 2 * a * k as i64 >= need) {
                params = Some(QuasiGeodesicParams { lambda, k });
            }
        }
        candidates.push(QuasiGeodesicCandidate {
            lambda,
            needed_k: Ratio::new(need, 2 * a),
            witness: top.map(|t| (t.1, t.2, t.3)),
        });
    }
    QuasiGeodesicReport {
        params,
        candidates,
        k_grid,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GromovFellowReport {
    pub delta: Dist,
    /// Every `stride`-th point (in index order) was sampled.
    pub stride: usize,
    pub pairs_checked: u64,
    pub max_gap: Dist,
    pub failures: u64,
    pub passed: bool,
    /// Up to 16 failing `(x, y, n)` triples, in sampling order.
    pub witnesses: Vec<Witness>,
}

const MAX_WITNESSES: usize = 16;

/// Checks `d(H_n x, H_n y) ≤ 2δ` for sampled pairs and stages with
/// `n·unit ≤ (x|y) − δ`.
///
/// All pairs are checked when they fit in `sample_budget`; otherwise every
/// `stride`-th point is sampled with the least stride that fits.
pub fn check_gromov_fellow(c: &Combing, delta: Dist, sample_budget: u64) -> Result<GromovFellowReport> {
    let s = c.space();
    let unit = s.unit_step() as i64;
    let n = s.len() as u64;
    let pairs = |m: u64| m * m.saturating_sub(1) / 2;
    let mut stride = 1u64;
    while pairs(n.div_ceil(stride)) > sample_budget && stride < n {
        stride += 1;
    }
    let sample: Vec<PointId> = s.points().step_by(stride as usize).collect();
    let gap_limit = 2 * delta;

    // Per x: (pairs checked, max gap, failures, first failing (y, n) list).
    let per_point: Vec<Result<(u64, Dist, u64, Vec<(PointId, u32, Dist)>)>> = sample
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut checked = 0;
            let mut max_gap = 0;
            let mut failures = 0;
            let mut found = Vec::new();
            for &y in &sample[i + 1..] {
                checked += 1;
                let bound = s.gromov_product_twice(x, y)? - 2 * delta as i64;
                if bound < 0 {
                    continue;
                }
                let n_max = (bound / (2 * unit)).min(c.horizon() as i64) as u32;
                for k in 0..=n_max {
                    let gap = s.dist(c.h(x, k), c.h(y, k));
                    max_gap = max_gap.max(gap);
                    if gap > gap_limit {
                        failures += 1;
                        if found.len() < MAX_WITNESSES {
                            found.push((y, k, gap));
                        }
                    }
                }
            }
            Ok((checked, max_gap, failures, found))
        })
        .collect();

    let mut report = GromovFellowReport {
        delta,
        stride: stride as usize,
        pairs_checked: 0,
        max_gap: 0,
        failures: 0,
        passed: true,
        witnesses: Vec::new(),
    };
    for (&x, r) in sample.iter().zip(per_point) {
        let (checked, max_gap, failures, found) = r?;
        report.pairs_checked += checked;
        report.max_gap = report.max_gap.max(max_gap);
        report.failures += failures;
        for (y, k, gap) in found {
            if report.witnesses.len() < MAX_WITNESSES {
                report
                    .witnesses
                    .push(Witness::new(c, WitnessKind::Fellow, vec![x, y], vec![k], gap));
            }
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combing::nonproper_example;
    use crate::metric_core::interval;

    #[test]
    fn identity_paths_on_an_interval_are_geodesic() {
        let t = 6;
        let table = (0..=t).flat_map(|x| (0..=t).map(move |n| n.min(x))).collect();
        let c = Combing::from_table(interval(t), t, table).unwrap();
        let r = audit_quasi_geodesic(&c);
        assert_eq!(r.params, Some(QuasiGeodesicParams { lambda: Ratio::from_integer(1), k: 0 }));
    }

    #[test]
    fn lingering_paths_fail_the_grid() {
        let r = audit_quasi_geodesic(&nonproper_example(100).unwrap());
        assert_eq!(r.params, None);
        // The path to 100 sits at 0 for 100 stages: with λ = 3, k ≥ 100/3.
        assert_eq!(r.candidates[3].needed_k, Ratio::new(100, 3));
    }

    #[test]
    fn interval_is_a_tree() {
        let t = 8;
        let table = (0..=t).flat_map(|x| (0..=t).map(move |n| n.min(x))).collect();
        let c = Combing::from_table(interval(t), t, table).unwrap();
        let r = check_gromov_fellow(&c, 1, 1000).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_gap, 0);
        assert_eq!(r.pairs_checked, 36);
    }
}
