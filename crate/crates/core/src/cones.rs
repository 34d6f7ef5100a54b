//! Sampled open cones `O_φ(B)` and warped cones with their height-decreasing combings.

use std::sync::Arc;

use crate::combing::Combing;
use crate::error::{invalid, Result};
use crate::metric_core::{chain_metric, Dist, FiniteMetricSpace, PointId};
use crate::Budget;

/// A cone over a finite base sample, cut at height `height_max`.
///
/// Heights run over `Δ, 2Δ, …, height_max` in the base's scaled units, and
/// `phi[k − 1]` is the integer multiplier of base distances at height `kΔ`.
#[derive(Clone, Debug)]
pub struct ConeSpec {
    pub base: Arc<FiniteMetricSpace>,
    pub phi: Vec<u64>,
    pub height_max: Dist,
    pub resolution: Dist,
}

/// A cone with `φ = id` plus unit-length edges `(x,t) ~ (g·x,t)` for each
/// permutation `g` of the base sample.
#[derive(Clone, Debug)]
pub struct WarpSpec {
    pub cone: ConeSpec,
    pub action: Vec<Vec<PointId>>,
}

impl ConeSpec {
    /// Number of heights above the apex.
    pub fn levels(&self) -> usize {
        (self.height_max / self.resolution) as usize
    }

    /// The table for `φ(t) = t`, measured in true units.
    pub fn identity_phi(base_scale: u32, height_max: Dist, resolution: Dist) -> Result<Vec<u64>> {
        if resolution == 0 {
            return invalid("resolution must be positive");
        }
        (1..=height_max / resolution)
            .map(|k| {
                let t = k * resolution;
                if t % base_scale != 0 {
                    return invalid(format!("height {t} is not a whole number of true units"));
                }
                Ok((t / base_scale) as u64)
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.height_max == 0 || self.height_max % self.resolution != 0 {
            return invalid("height_max must be a positive multiple of the resolution");
        }
        if self.phi.len() != self.levels() {
            return invalid(format!("phi has {} entries, expected one per height ({})", self.phi.len(), self.levels()));
        }
        if self.phi.iter().any(|&v| v == 0) {
            return invalid("phi must be positive");
        }
        if self.phi.windows(2).any(|w| w[0] > w[1]) {
            return invalid("phi must be non-decreasing");
        }
        Ok(())
    }

    /// Index of `(b, kΔ)`; the apex is 0.
    pub fn index(&self, b: PointId, level: usize) -> PointId {
        (1 + b as usize * self.levels() + (level - 1)) as PointId
    }

    /// `(base index, level)` of a non-apex point.
    pub fn coords(&self, x: PointId) -> Option<(PointId, usize)> {
        if x == 0 {
            return None;
        }
        let i = x as usize - 1;
        Some(((i / self.levels()) as PointId, i % self.levels() + 1))
    }

    /// `|t − s| + φ(min(t, s))·d_B(x, y)`, or `t` against the apex.
    fn bound(&self, i: usize, j: usize) -> u64 {
        let res = self.resolution as u64;
        match (self.coords(i as PointId), self.coords(j as PointId)) {
            (None, None) => 0,
            (None, Some((_, k))) | (Some((_, k)), None) => k as u64 * res,
            (Some((a, k)), Some((b, l))) => {
                let dt = (k as i64 - l as i64).unsigned_abs() * res;
                dt + self.phi[k.min(l) - 1] * self.base.dist(a, b) as u64
            }
        }
    }

    fn labels(&self) -> Vec<String> {
        let mut labels = vec!["apex".to_string()];
        for b in 0..self.base.len() {
            for k in 1..=self.levels() {
                labels.push(format!("({b},{})", k as Dist * self.resolution));
            }
        }
        labels
    }

    /// `H_n(x, t) = (x, min(nΔ, t))`, `H_0 = apex`.
    fn combing(&self, space: Arc<FiniteMetricSpace>) -> Result<Combing> {
        let levels = self.levels();
        let horizon = levels as u32;
        let mut table = Vec::with_capacity(space.len() * (levels + 1));
        table.extend(std::iter::repeat(0).take(levels + 1));
        for b in 0..self.base.len() as PointId {
            for k in 1..=levels {
                table.push(0);
                for n in 1..=levels {
                    table.push(self.index(b, n.min(k)));
                }
            }
        }
        Combing::from_table(space, horizon, table)
    }
}

fn build(spec: &ConeSpec, extra: impl Fn(usize, usize) -> bool + Sync, budget: &Budget) -> Result<(Arc<FiniteMetricSpace>, Combing)> {
    spec.validate()?;
    let n = 1 + spec.base.len() * spec.levels();
    budget.check("points", n, "cone points")?;
    let scale = spec.base.scale();
    let dist = chain_metric(
        n,
        |i, j| {
            let b = spec.bound(i, j);
            Some(if extra(i, j) { b.min(scale as u64) } else { b })
        },
        budget,
    )?;
    let space = Arc::new(FiniteMetricSpace::from_dense(spec.labels(), scale, dist, Some(0), spec.height_max)?);
    let combing = spec.combing(space.clone())?;
    Ok((space, combing))
}

/// The largest metric below the cone bound, sampled on the height grid.
pub fn open_cone(spec: &ConeSpec, budget: &Budget) -> Result<(Arc<FiniteMetricSpace>, Combing)> {
    build(spec, |_, _| false, budget)
}

/// The cone metric with an extra unit edge between `(x,t)` and `(g·x,t)`.
pub fn warped_cone(spec: &WarpSpec, budget: &Budget) -> Result<(Arc<FiniteMetricSpace>, Combing)> {
    let cone = &spec.cone;
    cone.validate()?;
    let m = cone.base.len();
    for (i, g) in spec.action.iter().enumerate() {
        let mut seen = vec![false; m];
        if g.len() != m || g.iter().any(|&v| (v as usize) >= m || std::mem::replace(&mut seen[v as usize], true)) {
            return invalid(format!("action generator {i} is not a permutation of the base"));
        }
    }
    if cone.phi != ConeSpec::identity_phi(cone.base.scale(), cone.height_max, cone.resolution)? {
        return invalid("warped cones are built over phi = id");
    }
    let warp = |i: usize, j: usize| match (cone.coords(i as PointId), cone.coords(j as PointId)) {
        (Some((a, k)), Some((b, l))) if k == l => spec
            .action
            .iter()
            .any(|g| g[a as usize] == b || g[b as usize] == a),
        _ => false,
    };
    build(cone, warp, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combing::{audit_coherent, Constants, Verdict};
    use crate::metric_core::{cycle_space, uniform_space};

    fn spec(base: FiniteMetricSpace, phi: Vec<u64>, t: Dist) -> ConeSpec {
        ConeSpec {
            base: Arc::new(base),
            phi,
            height_max: t,
            resolution: 1,
        }
    }

    #[test]
    fn one_point_base_is_a_ray() {
        let s = spec(uniform_space(1, 1).unwrap(), vec![1; 5], 5);
        let (space, c) = open_cone(&s, &Budget::default()).unwrap();
        assert_eq!(space.len(), 6);
        assert_eq!(space.dist(0, 5), 5);
        assert_eq!(space.dist(2, 4), 2);
        assert_eq!(c.path(5), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn top_slice_distances() {
        let id = ConeSpec::identity_phi(1, 30, 1).unwrap();
        let s = spec(uniform_space(3, 1).unwrap(), id, 30);
        let (space, _) = open_cone(&s, &Budget::default()).unwrap();
        assert_eq!(space.dist(s.index(0, 30), s.index(1, 30)), 30);

        let s = spec(uniform_space(3, 1).unwrap(), vec![1; 30], 30);
        let (space, _) = open_cone(&s, &Budget::default()).unwrap();
        assert_eq!(space.dist(s.index(0, 30), s.index(1, 30)), 1);
        assert_eq!(space.label(s.index(2, 7)), "(2,7)");
    }

    #[test]
    fn canonical_combing_is_zero_coherent() {
        let id = ConeSpec::identity_phi(1, 8, 1).unwrap();
        let s = spec(cycle_space(5).unwrap(), id, 8);
        let (_, c) = open_cone(&s, &Budget::default()).unwrap();
        let r = audit_coherent(&c, None).unwrap();
        assert_eq!(r.verdict, Verdict::SupportedAtScale);
        match r.constants {
            Constants::Coherent { coh, .. } => assert!(coh.iter().all(|&v| v == 0)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn warp_is_dominated_by_the_cone() {
        let k = 6;
        let base = cycle_space(k).unwrap();
        let id = ConeSpec::identity_phi(1, 10, 1).unwrap();
        let cone = spec(base, id, 10);
        let (plain, _) = open_cone(&cone, &Budget::default()).unwrap();
        let rotation: Vec<PointId> = (0..k as PointId).map(|i| (i + 1) % k as PointId).collect();
        let trivial: Vec<PointId> = (0..k as PointId).collect();

        let (same, _) = warped_cone(&WarpSpec { cone: cone.clone(), action: vec![trivial] }, &Budget::default()).unwrap();
        let (warped, _) = warped_cone(&WarpSpec { cone: cone.clone(), action: vec![rotation] }, &Budget::default()).unwrap();
        for x in plain.points() {
            for y in plain.points() {
                assert_eq!(same.dist(x, y), plain.dist(x, y));
                assert!(warped.dist(x, y) <= plain.dist(x, y));
            }
        }
        for a in 0..k as PointId {
            for b in 0..k as PointId {
                assert!(warped.dist(cone.index(a, 10), cone.index(b, 10)) <= (k / 2) as Dist);
            }
        }
    }

    #[test]
    fn rejects_non_permutations_and_bad_phi() {
        let cone = spec(cycle_space(4).unwrap(), vec![2, 1], 2);
        assert!(open_cone(&cone, &Budget::default()).is_err());
        let cone = spec(cycle_space(4).unwrap(), vec![1, 2], 2);
        let w = WarpSpec { cone, action: vec![vec![0, 0, 1, 2]] };
        assert!(warped_cone(&w, &Budget::default()).is_err());
    }
}
