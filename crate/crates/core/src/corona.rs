//! Finite-stage corona approximation: single-linkage clustering of combing
//! rays over an annulus, the cluster nerve, and comparison with reference models.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohomology::{cohomology, CohomologyResult, Ring};
use crate::combing::Combing;
use crate::error::{invalid, CoarseError, Result};
use crate::metric_core::{parse_lattice_label, Dist, FiniteMetricSpace, PointId};
use crate::rips::SimplicialComplex;
use crate::Budget;

/// `ρ_n(x, y) = max_{0 ≤ m ≤ n} d(H_m x, H_m y)`.
pub fn ray_gap(c: &Combing, x: PointId, y: PointId, n: u32) -> Dist {
    let s = c.space();
    (0..=n).map(|m| s.dist(c.h(x, m), c.h(y, m))).max().unwrap_or(0)
}

/// `ρ_n(x, y) ≤ bound`, stopping at the first stage that exceeds it.
pub fn ray_gap_within(c: &Combing, x: PointId, y: PointId, n: u32, bound: Dist) -> bool {
    let s = c.space();
    (0..=n).rev().all(|m| s.dist(c.h(x, m), c.h(y, m)) <= bound)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub stage: u32,
    pub threshold: Dist,
    pub annulus: (Dist, Dist),
    /// Clusters ordered by their least point; points ascending within each.
    pub clusters: Vec<Vec<PointId>>,
    /// Least point of each cluster.
    pub representatives: Vec<PointId>,
    pub labels: Vec<String>,
}

impl ClusterPartition {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

fn annulus_points(c: &Combing, annulus: (Dist, Dist), n: u32) -> Result<Vec<PointId>> {
    if n > c.horizon() {
        return invalid(format!("stage {n} exceeds the horizon {}", c.horizon()));
    }
    let s = c.space();
    let pts = s.annulus(c.base_point(), annulus.0, annulus.1);
    if pts.is_empty() {
        return invalid(format!("annulus [{}, {}] is empty", annulus.0, annulus.1));
    }
    Ok(pts)
}

/// For each point, the annulus points whose stage-`n` image lies within
/// `bound` of its own, found through a bucket of `H_n` images.
fn near_pairs(c: &Combing, pts: &[PointId], n: u32, bound: Dist) -> Vec<Vec<usize>> {
    let mut bucket: HashMap<PointId, Vec<usize>> = HashMap::new();
    for (i, &x) in pts.iter().enumerate() {
        bucket.entry(c.h(x, n)).or_default().push(i);
    }
    let s = c.space();
    pts.par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut out = Vec::new();
            for z in s.ball(c.h(x, n), bound) {
                if let Some(js) = bucket.get(&z) {
                    out.extend(js.iter().copied().filter(|&j| j > i));
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Single-linkage classes of annulus points under `ρ_n ≤ s`.
pub fn boundary_clusters(c: &Combing, annulus: (Dist, Dist), n: u32, s: Dist) -> Result<ClusterPartition> {
    let pts = annulus_points(c, annulus, n)?;
    let near = near_pairs(c, &pts, n, s);
    let links: Vec<Vec<usize>> = near
        .par_iter()
        .enumerate()
        .map(|(i, js)| {
            js.iter()
                .copied()
                .filter(|&j| ray_gap_within(c, pts[i], pts[j], n, s))
                .collect()
        })
        .collect();
    let mut uf = UnionFind((0..pts.len()).collect());
    for (i, js) in links.iter().enumerate() {
        for &j in js {
            uf.union(i, j);
        }
    }
    let mut groups: BTreeMap<usize, Vec<PointId>> = BTreeMap::new();
    for i in 0..pts.len() {
        let root = uf.find(i);
        groups.entry(root).or_default().push(pts[i]);
    }
    let mut clusters: Vec<Vec<PointId>> = groups.into_values().collect();
    clusters.sort_by_key(|cl| cl[0]);
    let representatives: Vec<PointId> = clusters.iter().map(|cl| cl[0]).collect();
    Ok(ClusterPartition {
        stage: n,
        threshold: s,
        annulus,
        labels: representatives.iter().map(|&x| c.space().label(x).to_string()).collect(),
        clusters,
        representatives,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveEdge {
    pub a: usize,
    pub b: usize,
    /// Least `ρ_n` over cross pairs.
    pub weight: Dist,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveGraph {
    pub stage: u32,
    pub edge_threshold: Dist,
    pub labels: Vec<String>,
    pub sizes: Vec<usize>,
    pub edges: Vec<NerveEdge>,
}

impl NerveGraph {
    pub fn nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph nerve {\n");
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(&format!("  {i} [label=\"{}\"];\n", l.replace('"', "\\\"")));
        }
        for e in &self.edges {
            out.push_str(&format!("  {} -- {} [label=\"{}\"];\n", e.a, e.b, e.weight));
        }
        out.push_str("}\n");
        out
    }

    /// Clique complex with simplices up to dimension `cap`.
    pub fn clique_complex(&self, cap: usize) -> Result<SimplicialComplex> {
        let n = self.nodes();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.a].push(e.b as PointId);
            adj[e.b].push(e.a as PointId);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let mut cliques = Vec::new();
        fn grow(adj: &[Vec<PointId>], stack: &mut Vec<PointId>, cand: &[PointId], limit: usize, out: &mut Vec<Vec<PointId>>) {
            out.push(stack.clone());
            if stack.len() == limit {
                return;
            }
            for (k, &v) in cand.iter().enumerate() {
                stack.push(v);
                let next: Vec<PointId> = cand[k + 1..]
                    .iter()
                    .copied()
                    .filter(|w| adj[v as usize].binary_search(w).is_ok())
                    .collect();
                grow(adj, stack, &next, limit, out);
                stack.pop();
            }
        }
        for v in 0..n {
            let fwd: Vec<PointId> = adj[v].iter().copied().filter(|&w| w as usize > v).collect();
            grow(&adj, &mut vec![v as PointId], &fwd, cap + 2, &mut cliques);
        }
        SimplicialComplex::from_simplices(&cliques, cap)
    }
}

/// Nodes are clusters; an edge joins two clusters whose closest cross pair
/// has `ρ_n ≤ s'`.
pub fn cluster_nerve(c: &Combing, p: &ClusterPartition, s_prime: Dist) -> Result<NerveGraph> {
    if s_prime < p.threshold {
        return invalid("edge threshold must be at least the clustering threshold");
    }
    let n = p.stage;
    let mut pts = Vec::new();
    let mut owner = Vec::new();
    for (k, cl) in p.clusters.iter().enumerate() {
        for &x in cl {
            pts.push(x);
            owner.push(k);
        }
    }
    let near = near_pairs(c, &pts, n, s_prime);
    let found: Vec<Vec<(usize, usize, Dist)>> = near
        .par_iter()
        .enumerate()
        .map(|(i, js)| {
            js.iter()
                .filter(|&&j| owner[i] != owner[j])
                .filter_map(|&j| {
                    let g = ray_gap(c, pts[i], pts[j], n);
                    (g <= s_prime).then(|| (owner[i].min(owner[j]), owner[i].max(owner[j]), g))
                })
                .collect()
        })
        .collect();
    let mut best: BTreeMap<(usize, usize), Dist> = BTreeMap::new();
    for (a, b, g) in found.into_iter().flatten() {
        let e = best.entry((a, b)).or_insert(g);
        *e = (*e).min(g);
    }
    Ok(NerveGraph {
        stage: n,
        edge_threshold: s_prime,
        labels: p.labels.clone(),
        sizes: p.clusters.iter().map(Vec::len).collect(),
        edges: best.into_iter().map(|((a, b), weight)| NerveEdge { a, b, weight }).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveCohomology {
    pub clique_counts: Vec<usize>,
    pub cohomology: CohomologyResult,
    /// Highest degree with nonzero cohomology.
    pub dimension: Option<usize>,
}

/// Cohomology in degrees 0–2 of the clique complex (cliques up to four nodes,
/// so degree 2 is exact).
pub fn nerve_cohomology(g: &NerveGraph, ring: Ring, budget: &Budget) -> Result<NerveCohomology> {
    let cx = g.clique_complex(3)?;
    let res = cohomology(&cx, ring, &[0, 1, 2], None, budget)?;
    Ok(NerveCohomology {
        clique_counts: cx.counts(),
        dimension: res.top_degree(),
        cohomology: res,
    })
}

/// Default clustering parameters for a combing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoronaRecipe {
    pub annulus: (Dist, Dist),
    pub stage: u32,
    pub threshold: Dist,
    pub edge_threshold: Dist,
    /// Largest single-stage step of the combing.
    pub step: Dist,
}

/// Annulus = top tenth of the truncation radius `T`; stage `⌊4T / (10·step)⌋`
/// clamped to the horizon; `s = 2·step`; `s' = 2s`.
pub fn default_recipe(c: &Combing) -> CoronaRecipe {
    let s = c.space();
    let step = s
        .points()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&x| (0..c.active_until(x)).map(|n| s.dist(c.h(x, n + 1), c.h(x, n))).max().unwrap_or(0))
        .max()
        .unwrap_or(0)
        .max(1);
    let t = s.truncation_radius();
    let stage = ((4 * t as u64) / (10 * step as u64)).min(c.horizon() as u64) as u32;
    CoronaRecipe {
        annulus: (t - t / 10, t),
        stage,
        threshold: 2 * step,
        edge_threshold: 4 * step,
        step,
    }
}

/// How representative labels map into a reference space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelMap {
    /// Cone labels `(b,t)` map to reference point `b`.
    BaseIndex,
    /// Planar lattice labels map to one of `sectors` equal ℓ¹-arc sectors,
    /// counterclockwise from the positive first axis.
    LatticeSector { sectors: usize },
    /// Everything maps to reference point 0.
    Constant,
}

fn parse_cone_label(label: &str) -> Option<usize> {
    let inner = label.strip_prefix('(')?.strip_suffix(')')?;
    let (b, _) = inner.split_once(',')?;
    b.trim().parse().ok()
}

/// Exact ℓ¹ angle sector of a nonzero planar point.
pub fn lattice_sector(a: i64, b: i64, sectors: usize) -> Option<usize> {
    let l = a.abs() + b.abs();
    if l == 0 || sectors == 0 {
        return None;
    }
    // Position along the ℓ¹ circle in units of quarter turns, numerator over `l`.
    let (quarter, num) = if a > 0 && b >= 0 {
        (0, b)
    } else if a <= 0 && b > 0 {
        (1, -a)
    } else if a < 0 && b <= 0 {
        (2, -b)
    } else {
        (3, a)
    };
    let pos = quarter * l + num;
    Some(((sectors as i128 * pos as i128) / (4 * l as i128)) as usize)
}

impl LabelMap {
    pub fn map(&self, label: &str, reference: &FiniteMetricSpace) -> Result<PointId> {
        let target = match self {
            LabelMap::BaseIndex => parse_cone_label(label),
            LabelMap::LatticeSector { sectors } => match parse_lattice_label(label).as_deref() {
                Some(&[a, b]) => lattice_sector(a, b, *sectors),
                _ => None,
            },
            LabelMap::Constant => Some(0),
        };
        match target {
            Some(t) if t < reference.len() => Ok(t as PointId),
            _ => Err(CoarseError::Invalid(format!("label {label} does not map into the reference space"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoronaComparison {
    pub clusters: usize,
    pub reference_points: usize,
    /// `clusters − reference_points`.
    pub count_difference: i64,
    /// Reference point of each cluster representative.
    pub mapped: Vec<PointId>,
    /// Clusters sharing a reference point with an earlier cluster.
    pub collisions: usize,
    /// Reference points hit by no cluster.
    pub uncovered: Vec<PointId>,
    /// Largest reference distance from a reference point to the image.
    pub coverage_gap: Dist,
    /// Bijective on representatives.
    pub exact_match: bool,
}

/// Maps representatives into a reference model and measures the mismatch.
pub fn corona_compare(p: &ClusterPartition, reference: &FiniteMetricSpace, map: &LabelMap) -> Result<CoronaComparison> {
    let mapped = p
        .labels
        .iter()
        .map(|l| map.map(l, reference))
        .collect::<Result<Vec<_>>>()?;
    let mut hit = vec![false; reference.len()];
    let mut collisions = 0;
    for &m in &mapped {
        if std::mem::replace(&mut hit[m as usize], true) {
            collisions += 1;
        }
    }
    let uncovered: Vec<PointId> = reference.points().filter(|&y| !hit[y as usize]).collect();
    let coverage_gap = uncovered
        .iter()
        .map(|&y| mapped.iter().map(|&m| reference.dist(y, m)).min().unwrap_or(Dist::MAX))
        .max()
        .unwrap_or(0);
    Ok(CoronaComparison {
        clusters: p.len(),
        reference_points: reference.len(),
        count_difference: p.len() as i64 - reference.len() as i64,
        exact_match: collisions == 0 && uncovered.is_empty(),
        mapped,
        collisions,
        uncovered,
        coverage_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combing::geodesic_combing;
    use crate::metric_core::{build_cayley_graph, cycle_space, GroupSpec};

    fn free_group(r: u32) -> Combing {
        let ball = build_cayley_graph(&GroupSpec::FreeGroup { rank: 2 }, r, &Budget::default()).unwrap();
        geodesic_combing(ball.space, &Budget::default()).unwrap()
    }

    #[test]
    fn stage_zero_is_one_cluster() {
        let c = free_group(4);
        assert_eq!(boundary_clusters(&c, (4, 4), 0, 0).unwrap().len(), 1);
    }

    #[test]
    fn tree_prefixes() {
        let c = free_group(5);
        let p = boundary_clusters(&c, (5, 5), 2, 0).unwrap();
        assert_eq!(p.len(), 12);
        let g = cluster_nerve(&c, &p, 0).unwrap();
        assert!(g.edges.is_empty());
        let h = nerve_cohomology(&g, Ring::Integers, &Budget::default()).unwrap();
        assert_eq!(h.cohomology.betti, vec![12, 0, 0]);
        assert_eq!(h.dimension, Some(0));
    }

    #[test]
    fn ray_gap_is_a_stage_max() {
        let c = free_group(4);
        let s = c.space();
        let idx = s.label_index();
        let (x, y) = (idx["aab"], idx["abb"]);
        assert_eq!(ray_gap(&c, x, y, 3), 4);
        assert_eq!(ray_gap(&c, x, y, 1), 0);
        assert!(ray_gap_within(&c, x, y, 3, 4));
        assert!(!ray_gap_within(&c, x, y, 3, 3));
    }

    #[test]
    fn nerve_shapes() {
        let cycle = NerveGraph {
            stage: 0,
            edge_threshold: 0,
            labels: (0..5).map(|i| i.to_string()).collect(),
            sizes: vec![1; 5],
            edges: (0..5).map(|i| NerveEdge { a: i.min((i + 1) % 5), b: i.max((i + 1) % 5), weight: 1 }).collect(),
        };
        let h = nerve_cohomology(&cycle, Ring::Integers, &Budget::default()).unwrap();
        assert_eq!(h.cohomology.betti, vec![1, 1, 0]);
        let mut path = cycle.clone();
        path.edges.pop();
        let h = nerve_cohomology(&path, Ring::Integers, &Budget::default()).unwrap();
        assert_eq!(h.cohomology.betti, vec![1, 0, 0]);
        assert!(cycle.to_dot().contains("0 -- 1"));
    }

    #[test]
    fn sectors_go_around() {
        assert_eq!(lattice_sector(1, 0, 6), Some(0));
        assert_eq!(lattice_sector(0, 1, 6), Some(1));
        assert_eq!(lattice_sector(-1, 0, 6), Some(3));
        assert_eq!(lattice_sector(1, -1, 6), Some(5));
        assert_eq!(lattice_sector(0, 0, 6), None);
    }

    #[test]
    fn compare_counts_collisions() {
        let p = ClusterPartition {
            stage: 1,
            threshold: 0,
            annulus: (1, 1),
            clusters: vec![vec![1], vec![2], vec![3]],
            representatives: vec![1, 2, 3],
            labels: vec!["(0,5)".into(), "(0,5)".into(), "(2,5)".into()],
        };
        let reference = cycle_space(4).unwrap();
        let r = corona_compare(&p, &reference, &LabelMap::BaseIndex).unwrap();
        assert_eq!(r.collisions, 1);
        assert_eq!(r.uncovered, vec![1, 3]);
        assert_eq!(r.coverage_gap, 1);
        assert!(!r.exact_match);
        let bad = ClusterPartition { labels: vec!["x".into(); 3], ..p };
        assert!(corona_compare(&bad, &reference, &LabelMap::BaseIndex).is_err());
    }
}
