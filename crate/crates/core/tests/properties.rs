use std::sync::Arc;

use coarse_lab_core::cohomology::{coboundary, cohomology, invariants, Ring, SparseRow};
use coarse_lab_core::combing::{audit_coherent, audit_controlled, geodesic_combing, Combing};
use coarse_lab_core::corona::{boundary_clusters, ray_gap};
use coarse_lab_core::metric_core::{build_cayley_graph, GroupSpec};
use coarse_lab_core::rips::{inclusion, rips_complex};
use coarse_lab_core::{Budget, FiniteMetricSpace, PointId};
use num_bigint::BigInt;
use proptest::prelude::*;

/// A connected graph: a random spanning tree plus extra edges.
fn graph() -> impl Strategy<Value = Arc<FiniteMetricSpace>> {
    (2usize..14)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            let extra = proptest::collection::vec((0..n, 0..n), 0..n);
            (Just(n), parents, extra)
        })
        .prop_map(|(n, parents, extra)| {
            let mut adj = vec![Vec::new(); n];
            let mut add = |a: usize, b: usize| {
                if a != b {
                    adj[a].push(b as PointId);
                    adj[b].push(a as PointId);
                }
            };
            for (i, p) in parents.into_iter().enumerate() {
                add(i + 1, p);
            }
            for (a, b) in extra {
                add(a, b);
            }
            let labels = (0..n).map(|i| i.to_string()).collect();
            let s = FiniteMetricSpace::from_graph(labels, 1, 1, adj, Some(0), 0).unwrap();
            let t = s.base_eccentricity().unwrap();
            let labels = s.labels().to_vec();
            let adj = (0..n as PointId).map(|x| s.graph_neighbors(x).unwrap().to_vec()).collect();
            Arc::new(FiniteMetricSpace::from_graph(labels, 1, 1, adj, Some(0), t).unwrap())
        })
}

fn combing() -> impl Strategy<Value = Combing> {
    graph().prop_map(|s| geodesic_combing(s, &Budget::default()).unwrap())
}

/// Rank and invariant factors above 1, by textbook Smith reduction in i128.
fn naive_smith(mut a: Vec<Vec<i128>>) -> (usize, Vec<i128>) {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        let mut best = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 && best.map_or(true, |(v, _, _)| a[i][j].abs() < v) {
                    best = Some((a[i][j].abs(), i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        a.swap(t, i);
        for r in a.iter_mut() {
            r.swap(t, j);
        }
        let p = a[t][t];
        let mut dirty = false;
        for i in t + 1..rows {
            let q = a[i][t] / p;
            for j in t..cols {
                a[i][j] -= q * a[t][j];
            }
            dirty |= a[i][t] != 0;
        }
        for j in t + 1..cols {
            let q = a[t][j] / p;
            for i in t..rows {
                a[i][j] -= q * a[i][t];
            }
            dirty |= a[t][j] != 0;
        }
        if dirty {
            continue;
        }
        if let Some(i) = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| a[i][j] % p != 0)) {
            for j in t..cols {
                a[t][j] += a[i][j];
            }
            continue;
        }
        diag.push(p.abs());
        t += 1;
    }
    (diag.len(), diag.into_iter().filter(|&d| d > 1).collect())
}

fn rank_mod(a: &[Vec<i64>], p: i64) -> usize {
    let mut a: Vec<Vec<i64>> = a.iter().map(|r| r.iter().map(|v| v.rem_euclid(p)).collect()).collect();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for j in 0..cols {
        let Some(i) = (rank..a.len()).find(|&i| a[i][j] != 0) else { continue };
        a.swap(rank, i);
        let inv = (1..p).find(|&v| v * a[rank][j] % p == 1).unwrap();
        for i in 0..a.len() {
            if i != rank && a[i][j] != 0 {
                let f = a[i][j] * inv % p;
                for k in 0..cols {
                    a[i][k] = (a[i][k] - f * a[rank][k]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn sparse(a: &[Vec<i64>]) -> Vec<SparseRow> {
    a.iter()
        .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, &v)| (j, v)).collect())
        .collect()
}

fn matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| proptest::collection::vec(proptest::collection::vec(-3i64..=3, c), r))
}

fn point_cloud() -> impl Strategy<Value = FiniteMetricSpace> {
    proptest::collection::btree_set((0i64..5, 0i64..5), 2..9).prop_map(|pts| {
        let pts: Vec<_> = pts.into_iter().collect();
        let n = pts.len();
        let mut d = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = ((pts[i].0 - pts[j].0).abs() + (pts[i].1 - pts[j].1).abs()) as u32;
            }
        }
        let labels = pts.iter().map(|(a, b)| format!("{a},{b}")).collect();
        FiniteMetricSpace::from_dense(labels, 1, d, Some(0), 8).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_metrics_satisfy_the_axioms(s in graph()) {
        prop_assert!(s.check_metric_axioms().is_ok());
    }

    #[test]
    fn geodesic_combings_are_well_formed(c in combing()) {
        let s = c.space().clone();
        let p = c.base_point();
        for x in s.points() {
            prop_assert_eq!(c.h(x, 0), p);
            let settle = c.settle(x).unwrap();
            prop_assert_eq!(settle, s.dist(p, x));
            prop_assert_eq!(c.h(x, settle), x);
            prop_assert_eq!(c.h(x, c.horizon() + 3), x);
            for n in 0..settle {
                prop_assert_eq!(s.dist(c.h(x, n), c.h(x, n + 1)), 1);
                prop_assert_eq!(s.dist(p, c.h(x, n)), n);
            }
        }
    }

    #[test]
    fn ray_gap_is_a_pseudometric(c in combing(), n in 0u32..6) {
        let pts: Vec<_> = c.space().points().collect();
        for &x in &pts {
            prop_assert_eq!(ray_gap(&c, x, x, n), 0);
            for &y in &pts {
                prop_assert_eq!(ray_gap(&c, x, y, n), ray_gap(&c, y, x, n));
                for &z in &pts {
                    prop_assert!(ray_gap(&c, x, z, n) <= ray_gap(&c, x, y, n) + ray_gap(&c, y, z, n));
                }
            }
        }
    }

    #[test]
    fn audits_are_deterministic(c in combing()) {
        let a = serde_json::to_string(&audit_controlled(&c, &[1, 2], None).unwrap()).unwrap();
        let b = serde_json::to_string(&audit_controlled(&c, &[1, 2], None).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        let a = serde_json::to_string(&audit_coherent(&c, None).unwrap()).unwrap();
        let b = serde_json::to_string(&audit_coherent(&c, None).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn witnesses_reproduce_their_distances(c in combing()) {
        for r in [audit_controlled(&c, &[1, 2], None).unwrap(), audit_coherent(&c, None).unwrap()] {
            for w in &r.witnesses {
                prop_assert_eq!(w.evaluate(&c).unwrap(), w.distance);
            }
        }
    }

    #[test]
    fn rips_complexes_are_face_closed_and_nested(s in point_cloud(), r in 1u32..4) {
        let b = Budget::default();
        let small = rips_complex(&s, r, 3, &b).unwrap();
        for q in 1..=small.dim_cap() {
            for sx in small.iter(q) {
                for i in 0..sx.len() {
                    let face: Vec<_> = sx.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v).collect();
                    prop_assert!(small.index_of(&face).is_some());
                }
                for (i, &a) in sx.iter().enumerate() {
                    for &v in &sx[i + 1..] {
                        prop_assert!(s.dist(a, v) <= r);
                    }
                }
            }
        }
        let big = rips_complex(&s, r + 1, 3, &b).unwrap();
        prop_assert!(inclusion(&small, &big).is_ok());
    }

    #[test]
    fn coboundary_squares_to_zero(s in point_cloud(), r in 1u32..4) {
        let cx = rips_complex(&s, r, 3, &Budget::default()).unwrap();
        for q in 0..2 {
            let d0 = coboundary(&cx, q, None).unwrap();
            let d1 = coboundary(&cx, q + 1, None).unwrap();
            prop_assert!(d1.compose(&d0).unwrap().iter().flatten().all(|&v| v == 0));
        }
    }

    #[test]
    fn sparse_invariants_match_naive_smith(a in matrix()) {
        let b = Budget::default();
        let ncols = a[0].len();
        let (rank, factors) = invariants(&sparse(&a), ncols, None, &b).unwrap();
        let (r2, f2) = naive_smith(a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect());
        prop_assert_eq!(rank, r2);
        let f2: Vec<BigInt> = f2.into_iter().map(BigInt::from).collect();
        prop_assert_eq!(factors, f2);
        for p in [2u64, 3, 5] {
            prop_assert_eq!(invariants(&sparse(&a), ncols, Some(p), &b).unwrap().0, rank_mod(&a, p as i64));
        }
    }

    #[test]
    fn universal_coefficients(s in point_cloud(), r in 1u32..4) {
        let b = Budget::default();
        let cx = rips_complex(&s, r, 4, &b).unwrap();
        prop_assume!(!cx.truncated());
        let z = cohomology(&cx, Ring::Integers, &[0, 1, 2, 3], None, &b).unwrap();
        let q = cohomology(&cx, Ring::Rationals, &[0, 1, 2, 3], None, &b).unwrap();
        prop_assert_eq!(&z.betti, &q.betti);
        for p in [2u64, 3] {
            let f = cohomology(&cx, Ring::PrimeField { p }, &[0, 1, 2, 3], None, &b).unwrap();
            let divisible = |k: usize| {
                z.torsion[k].iter().filter(|t| t.parse::<u64>().unwrap() % p == 0).count()
            };
            for k in 0..3 {
                prop_assert_eq!(f.betti[k], z.betti[k] + divisible(k) + divisible(k + 1));
            }
        }
    }

    #[test]
    fn cluster_counts_are_monotone(c in combing(), n in 0u32..4, s in 0u32..3) {
        prop_assume!(n < c.horizon());
        let t = c.space().truncation_radius();
        let annulus = (t.saturating_sub(1), t);
        let k = |n, s| boundary_clusters(&c, annulus, n, s).unwrap().len();
        prop_assert!(k(n, s) <= k(n + 1, s));
        prop_assert!(k(n, s + 1) <= k(n, s));
    }
}

#[test]
fn tree_ray_gap_is_the_stage_distance() {
    let b = Budget::default();
    let ball = build_cayley_graph(&GroupSpec::FreeGroup { rank: 2 }, 4, &b).unwrap();
    let c = geodesic_combing(ball.space.clone(), &b).unwrap();
    let s = ball.space;
    for n in 0..=4 {
        let far: Vec<PointId> = s.points().filter(|&x| s.dist(0, x) >= n).collect();
        for &x in &far {
            for &y in &far {
                assert_eq!(ray_gap(&c, x, y, n), s.dist(c.h(x, n), c.h(y, n)));
            }
        }
    }
}
