//! Vietoris–Rips complexes with a dimension cap, simplicial neighborhoods and inclusions.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoarseError, Result};
use crate::metric_core::{Dist, FiniteMetricSpace, PointId};
use crate::{Budget, FORMAT_VERSION};

/// Simplices stored per dimension as flat, lexicographically sorted vertex tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex {
    vertices: Vec<PointId>,
    simplices: Vec<Vec<PointId>>,
    dim_cap: usize,
    scale: Option<Dist>,
    truncated: bool,
}

impl SimplicialComplex {
    /// Builds a complex from a list of simplices, closing under faces.
    pub fn from_simplices(simplices: &[Vec<PointId>], dim_cap: usize) -> Result<Self> {
        let mut per_dim: Vec<Vec<Vec<PointId>>> = vec![Vec::new(); dim_cap + 1];
        let mut truncated = false;
        for s in simplices {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return invalid("empty simplex");
            }
            if s.len() > dim_cap + 1 {
                truncated = true;
            }
            // Every nonempty subset up to the cap.
            let k = s.len();
            for mask in 1u64..(1u64 << k.min(63)) {
                let face: Vec<PointId> = (0..k).filter(|&i| mask >> i & 1 == 1).map(|i| s[i]).collect();
                if face.len() <= dim_cap + 1 {
                    per_dim[face.len() - 1].push(face);
                }
            }
        }
        for d in &mut per_dim {
            d.sort_unstable();
            d.dedup();
        }
        let vertices = per_dim[0].iter().map(|v| v[0]).collect();
        Ok(SimplicialComplex {
            vertices,
            simplices: per_dim.into_iter().map(|d| d.concat()).collect(),
            dim_cap,
            scale: None,
            truncated,
        })
    }

    pub fn vertices(&self) -> &[PointId] {
        &self.vertices
    }

    pub fn dim_cap(&self) -> usize {
        self.dim_cap
    }

    pub fn scale(&self) -> Option<Dist> {
        self.scale
    }

    /// Whether some simplex above the cap exists, so degree `dim_cap` is not exact.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn count(&self, q: usize) -> usize {
        self.simplices.get(q).map_or(0, |s| s.len() / (q + 1))
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..=self.dim_cap).map(|q| self.count(q)).collect()
    }

    pub fn total(&self) -> usize {
        self.counts().iter().sum()
    }

    /// Highest dimension with a simplex, or `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        (0..=self.dim_cap).rev().find(|&q| self.count(q) > 0)
    }

    pub fn simplex(&self, q: usize, i: usize) -> &[PointId] {
        &self.simplices[q][i * (q + 1)..(i + 1) * (q + 1)]
    }

    pub fn iter(&self, q: usize) -> impl Iterator<Item = &[PointId]> {
        let chunk = q + 1;
        self.simplices.get(q).map(|s| &s[..]).unwrap_or(&[]).chunks_exact(chunk)
    }

    /// Position of a sorted vertex tuple in its dimension.
    pub fn index_of(&self, simplex: &[PointId]) -> Option<usize> {
        let q = simplex.len().checked_sub(1)?;
        let count = self.count(q);
        let (mut lo, mut hi) = (0, count);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.simplex(q, mid).cmp(simplex) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn to_file(&self) -> ComplexFile {
        ComplexFile {
            format_version: FORMAT_VERSION,
            scale: self.scale,
            dim_cap: self.dim_cap,
            truncated: self.truncated,
            simplices: (0..=self.dim_cap)
                .map(|q| self.iter(q).map(|s| s.to_vec()).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexFile {
    pub format_version: u32,
    pub scale: Option<Dist>,
    pub dim_cap: usize,
    pub truncated: bool,
    pub simplices: Vec<Vec<Vec<PointId>>>,
}

/// `P_R(X)`: simplices of dimension at most `dim_cap` with pairwise distances ≤ `r`.
pub fn rips_complex(space: &FiniteMetricSpace, r: Dist, dim_cap: usize, budget: &Budget) -> Result<SimplicialComplex> {
    let all: Vec<PointId> = space.points().collect();
    rips_complex_on(space, &all, r, dim_cap, budget)
}

/// The Rips complex of a subset of the points (the full subcomplex of `P_R(X)` on it).
pub fn rips_complex_on(
    space: &FiniteMetricSpace,
    points: &[PointId],
    r: Dist,
    dim_cap: usize,
    budget: &Budget,
) -> Result<SimplicialComplex> {
    let mut vertices = points.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    budget.check("simplices", vertices.len(), "Rips vertices")?;
    let mut member = vec![false; space.len()];
    for &v in &vertices {
        member[v as usize] = true;
    }
    // Forward adjacency: neighbors with a larger id.
    let forward: Vec<Vec<PointId>> = vertices
        .par_iter()
        .map(|&v| {
            let mut nb: Vec<PointId> = space
                .ball(v, r)
                .into_iter()
                .filter(|&u| u > v && member[u as usize])
                .collect();
            nb.sort_unstable();
            nb
        })
        .collect();
    let pos = |v: PointId| vertices.binary_search(&v).expect("vertex of the complex");

    let total = AtomicUsize::new(vertices.len());
    let limit = budget.simplices;
    let per_vertex: Vec<Result<(Vec<Vec<PointId>>, bool)>> = vertices
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut out: Vec<Vec<PointId>> = vec![Vec::new(); dim_cap + 1];
            out[0].push(v);
            let mut truncated = false;
            let mut stack = vec![v];
            expand(&mut stack, &forward[i], &forward, &pos, dim_cap, &mut out, &mut truncated, &total, limit)?;
            Ok((out, truncated))
        })
        .collect();

    let mut simplices: Vec<Vec<PointId>> = vec![Vec::new(); dim_cap + 1];
    let mut truncated = false;
    for r in per_vertex {
        let (out, t) = r?;
        truncated |= t;
        for (q, s) in out.into_iter().enumerate() {
            simplices[q].extend(s);
        }
    }
    // Lexicographic order within each dimension.
    for (q, flat) in simplices.iter_mut().enumerate() {
        let mut tuples: Vec<&[PointId]> = flat.chunks_exact(q + 1).collect();
        if !tuples.windows(2).all(|w| w[0] < w[1]) {
            tuples.sort_unstable();
            *flat = tuples.concat();
        }
    }
    Ok(SimplicialComplex {
        vertices,
        simplices,
        dim_cap,
        scale: Some(r),
        truncated,
    })
}

#[allow(clippy::too_many_arguments)]
fn expand(
    stack: &mut Vec<PointId>,
    candidates: &[PointId],
    forward: &[Vec<PointId>],
    pos: &impl Fn(PointId) -> usize,
    dim_cap: usize,
    out: &mut [Vec<PointId>],
    truncated: &mut bool,
    total: &AtomicUsize,
    limit: usize,
) -> Result<()> {
    let q = stack.len();
    if q > dim_cap {
        if !candidates.is_empty() {
            *truncated = true;
        }
        return Ok(());
    }
    for (k, &u) in candidates.iter().enumerate() {
        stack.push(u);
        out[q].extend_from_slice(stack);
        let now = total.fetch_add(1, Ordering::Relaxed) + 1;
        if now > limit {
            return Err(CoarseError::Budget {
                budget: "simplices",
                needed: now as u64,
                limit: limit as u64,
                context: format!(" (Rips expansion reached dimension {q})"),
            });
        }
        let fu = &forward[pos(u)];
        let next: Vec<PointId> = candidates[k + 1..]
            .iter()
            .copied()
            .filter(|w| fu.binary_search(w).is_ok())
            .collect();
        expand(stack, &next, forward, pos, dim_cap, out, truncated, total, limit)?;
        stack.pop();
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandleKind {
    /// Closed under faces.
    Closed,
    /// Complement is closed under faces.
    Open,
}

/// A set of simplices of a particular complex, flagged per dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubcomplexHandle {
    kind: HandleKind,
    members: Vec<Vec<bool>>,
    fingerprint: Vec<usize>,
}

impl SubcomplexHandle {
    fn from_vertex_rule(cx: &SimplicialComplex, kind: HandleKind, rule: impl Fn(&[PointId]) -> bool) -> Self {
        let members = (0..=cx.dim_cap).map(|q| cx.iter(q).map(&rule).collect()).collect();
        SubcomplexHandle {
            kind,
            members,
            fingerprint: cx.counts(),
        }
    }

    pub fn kind(&self) -> HandleKind {
        self.kind
    }

    pub fn contains(&self, q: usize, i: usize) -> bool {
        self.members[q][i]
    }

    pub fn count(&self, q: usize) -> usize {
        self.members.get(q).map_or(0, |m| m.iter().filter(|&&b| b).count())
    }

    /// Member indices in dimension `q`.
    pub fn indices(&self, q: usize) -> Vec<usize> {
        self.members.get(q).map_or(Vec::new(), |m| (0..m.len()).filter(|&i| m[i]).collect())
    }

    pub fn complement(&self) -> SubcomplexHandle {
        SubcomplexHandle {
            kind: match self.kind {
                HandleKind::Closed => HandleKind::Open,
                HandleKind::Open => HandleKind::Closed,
            },
            members: self.members.iter().map(|m| m.iter().map(|b| !b).collect()).collect(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Whether the handle was made for a complex with these simplex counts.
    pub fn belongs_to(&self, cx: &SimplicialComplex) -> bool {
        self.fingerprint == cx.counts()
    }

    /// Checks the closedness the handle claims.
    pub fn is_consistent(&self, cx: &SimplicialComplex) -> bool {
        if !self.belongs_to(cx) {
            return false;
        }
        let closed = match self.kind {
            HandleKind::Closed => self.clone(),
            HandleKind::Open => self.complement(),
        };
        (1..=cx.dim_cap).all(|q| {
            cx.iter(q).enumerate().all(|(i, s)| {
                !closed.members[q][i]
                    || (0..=q).all(|j| {
                        let face: Vec<PointId> = s.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect();
                        cx.index_of(&face).map_or(false, |f| closed.members[q - 1][f])
                    })
            })
        })
    }
}

/// `U(A, r)`: the open subcomplex of simplices with a vertex within `r` of `A`.
pub fn simplicial_neighborhood(
    cx: &SimplicialComplex,
    space: &FiniteMetricSpace,
    a: &[PointId],
    r: Dist,
) -> SubcomplexHandle {
    let mut near = HashSet::new();
    for &x in a {
        near.extend(space.ball(x, r));
    }
    SubcomplexHandle::from_vertex_rule(cx, HandleKind::Open, |s| s.iter().any(|v| near.contains(v)))
}

/// The full subcomplex on a vertex set: simplices with all vertices in it.
pub fn closed_full_subcomplex(cx: &SimplicialComplex, points: &[PointId]) -> SubcomplexHandle {
    let set: HashSet<PointId> = points.iter().copied().collect();
    SubcomplexHandle::from_vertex_rule(cx, HandleKind::Closed, |s| s.iter().all(|v| set.contains(v)))
}

/// Per-dimension simplex index maps of an inclusion of complexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionMap {
    pub maps: Vec<Vec<usize>>,
}

impl InclusionMap {
    pub fn image(&self, q: usize, i: usize) -> usize {
        self.maps[q][i]
    }
}

/// Locates every simplex of `small` (up to the smaller cap) in `big`.
pub fn inclusion(small: &SimplicialComplex, big: &SimplicialComplex) -> Result<InclusionMap> {
    let cap = small.dim_cap.min(big.dim_cap);
    let maps = (0..=cap)
        .map(|q| {
            small
                .iter(q)
                .map(|s| {
                    big.index_of(s)
                        .ok_or_else(|| CoarseError::Internal(format!("simplex {s:?} missing from the larger complex")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InclusionMap { maps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_core::{build_cayley_graph, cycle_space, lattice_label, GroupSpec};

    #[test]
    fn six_cycle_at_scale_one() {
        let s = cycle_space(6).unwrap();
        let cx = rips_complex(&s, 1, 2, &Budget::default()).unwrap();
        assert_eq!(cx.counts(), vec![6, 6, 0]);
        assert!(!cx.truncated());
        let zero = rips_complex(&s, 0, 2, &Budget::default()).unwrap();
        assert_eq!(zero.counts(), vec![6, 0, 0]);
    }

    #[test]
    fn lattice_square_is_a_tetrahedron() {
        let ball = build_cayley_graph(&GroupSpec::FreeAbelian { rank: 2 }, 2, &Budget::default()).unwrap();
        let s = &ball.space;
        let cx = rips_complex(s, 2, 3, &Budget::default()).unwrap();
        let idx = s.label_index();
        let mut sq: Vec<PointId> = [[0, 0], [1, 0], [0, 1], [1, 1]]
            .iter()
            .map(|c| idx[lattice_label(c).as_str()])
            .collect();
        sq.sort_unstable();
        assert!(cx.index_of(&sq).is_some());
    }

    #[test]
    fn star_of_a_vertex() {
        let s = cycle_space(6).unwrap();
        let cx = rips_complex(&s, 1, 2, &Budget::default()).unwrap();
        let u = simplicial_neighborhood(&cx, &s, &[0], 0);
        assert_eq!((u.count(0), u.count(1)), (1, 2));
        assert!(u.is_consistent(&cx));
        let closed = u.complement();
        assert_eq!(closed.kind(), HandleKind::Closed);
        assert!(closed.is_consistent(&cx));
        assert_eq!(simplicial_neighborhood(&cx, &s, &[], 3).count(0), 0);
    }

    #[test]
    fn inclusion_between_scales() {
        let s = cycle_space(6).unwrap();
        let b = Budget::default();
        let c1 = rips_complex(&s, 1, 2, &b).unwrap();
        let c2 = rips_complex(&s, 2, 2, &b).unwrap();
        let m = inclusion(&c1, &c2).unwrap();
        let mut images = m.maps[1].clone();
        images.dedup();
        assert_eq!(images.len(), 6);
        assert!(c2.count(2) > 0);
        assert!(inclusion(&c2, &c1).is_err());
        assert_eq!(inclusion(&c1, &c1).unwrap().maps[1], (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn truncation_flag_and_budget() {
        let s = cycle_space(6).unwrap();
        let full = rips_complex(&s, 3, 1, &Budget::default()).unwrap();
        assert!(full.truncated());
        let tight = Budget {
            simplices: 10,
            ..Budget::default()
        };
        let err = rips_complex(&s, 3, 5, &tight).unwrap_err().to_string();
        assert!(err.contains("simplices"), "{err}");
    }

    #[test]
    fn from_simplices_closes_faces() {
        let cx = SimplicialComplex::from_simplices(&[vec![2, 0, 1]], 2).unwrap();
        assert_eq!(cx.counts(), vec![3, 3, 1]);
        assert_eq!(cx.simplex(1, 2), &[1, 2]);
    }
}
