//! Explicit cohomology bases, coboundary solves, restriction maps and
//! uniform-triviality probes.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::snf::{self, smith, Domain, Integers, Mat, PrimeField};
use super::{check_degree, check_relative, coboundary, cochain_simplices, CochainMatrix, Ring, SparseRow};
use crate::error::{invalid, Result};
use crate::metric_core::{Dist, FiniteMetricSpace, PointId};
use crate::rips::{inclusion, rips_complex_on, simplicial_neighborhood, InclusionMap, SimplicialComplex, SubcomplexHandle};
use crate::Budget;

mod dec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    fn parse<E: serde::de::Error>(s: &str) -> Result<BigInt, E> {
        s.parse().map_err(|_| E::custom(format!("not an integer: {s}")))
    }

    pub mod vec {
        use super::*;
        pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.to_string()))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
            Vec::<String>::deserialize(d)?.iter().map(|s| parse(s)).collect()
        }
    }

    pub mod one {
        use super::*;
        pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&v.to_string())
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
            parse(&String::deserialize(d)?)
        }
    }

    pub mod opt {
        use super::*;
        pub fn serialize<S: Serializer>(v: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => s.serialize_some(&x.to_string()),
                None => s.serialize_none(),
            }
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigInt>, D::Error> {
            Option::<String>::deserialize(d)?.map(|s| parse(&s)).transpose()
        }
    }
}

enum AnyDomain {
    Z(Integers),
    F(PrimeField),
}

impl AnyDomain {
    fn of(ring: Ring) -> Self {
        match ring {
            Ring::PrimeField { p } => AnyDomain::F(PrimeField(p)),
            _ => AnyDomain::Z(Integers),
        }
    }
}

impl Domain for AnyDomain {
    fn reduce(&self, a: BigInt) -> BigInt {
        match self {
            AnyDomain::Z(d) => d.reduce(a),
            AnyDomain::F(d) => d.reduce(a),
        }
    }
    fn size(&self, a: &BigInt) -> BigInt {
        match self {
            AnyDomain::Z(d) => d.size(a),
            AnyDomain::F(d) => d.size(a),
        }
    }
    fn div_rem(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
        match self {
            AnyDomain::Z(d) => d.div_rem(a, b),
            AnyDomain::F(d) => d.div_rem(a, b),
        }
    }
    fn gcd_ext(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
        match self {
            AnyDomain::Z(d) => d.gcd_ext(a, b),
            AnyDomain::F(d) => d.gcd_ext(a, b),
        }
    }
    fn normalizer(&self, a: &BigInt) -> BigInt {
        match self {
            AnyDomain::Z(d) => d.normalizer(a),
            AnyDomain::F(d) => d.normalizer(a),
        }
    }
    fn unit_inverse(&self, u: &BigInt) -> BigInt {
        match self {
            AnyDomain::Z(d) => d.unit_inverse(u),
            AnyDomain::F(d) => d.unit_inverse(u),
        }
    }
    fn is_unit(&self, a: &BigInt) -> bool {
        match self {
            AnyDomain::Z(d) => d.is_unit(a),
            AnyDomain::F(d) => d.is_unit(a),
        }
    }
}

/// A cohomology class representative: a cocycle in the cochain coordinates
/// of its basis, with its additive order (`None` for free generators).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(with = "dec::opt")]
    pub order: Option<BigInt>,
    #[serde(with = "dec::vec")]
    pub cochain: Vec<BigInt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SolveOutcome {
    /// `δξ = denominator · φ`; the denominator is 1 except over ℚ.
    Solved {
        #[serde(with = "dec::vec")]
        primitive: Vec<BigInt>,
        #[serde(with = "dec::one")]
        denominator: BigInt,
    },
    /// A coboundary over ℚ that has no integral primitive.
    NoIntegralPrimitive,
    NotCoboundary,
}

impl SolveOutcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved { .. })
    }
}

/// Generators of `H^q` together with the Smith data needed to express and
/// solve cocycles.
pub struct CohomologyBasis {
    pub degree: usize,
    pub ring: Ring,
    /// Indices of the `q`-simplices indexing cochain coordinates.
    pub simplices: Vec<usize>,
    pub generators: Vec<Generator>,
    dom: AnyDomain,
    diag: Vec<BigInt>,
    u: Mat,
    v: Mat,
    /// `V'^{-1}` of the Smith form of `δ^q` on the complement of `im δ^{q−1}`, and its rank.
    free_v_inv: Mat,
    free_rank: usize,
    torsion_indices: Vec<usize>,
    delta_in: Option<CochainMatrix>,
    delta_out: Option<CochainMatrix>,
}

fn columns(m: &Mat, from: usize, to: usize) -> Mat {
    m.iter().map(|r| r[from..to].to_vec()).collect()
}

/// Basis of `H^q(K, L)` with explicit cocycles: torsion generators first
/// (ℤ only), then free ones.
pub fn cohomology_basis(
    cx: &SimplicialComplex,
    q: usize,
    ring: Ring,
    relative_to: Option<&SubcomplexHandle>,
    budget: &Budget,
) -> Result<CohomologyBasis> {
    ring.validate()?;
    check_relative(cx, relative_to)?;
    check_degree(cx, q)?;
    let dom = AnyDomain::of(ring);
    let simplices = cochain_simplices(cx, q, relative_to);
    let n = simplices.len();
    let delta_in = if q == 0 { None } else { Some(coboundary(cx, q - 1, relative_to)?) };
    let delta_out = if q < cx.dim_cap() { Some(coboundary(cx, q, relative_to)?) } else { None };
    let (a, m) = match &delta_in {
        Some(d) => (d.to_dense(), d.ncols()),
        None => (snf::zeros(n, 0), 0),
    };
    let sa = smith(&dom, a, n, m, true, budget)?;
    let r = sa.rank();
    let ta = sa.transforms.expect("tracked");
    let u_inv_rest = columns(&ta.u_inv, r, n);
    let (b, b_rows) = match &delta_out {
        Some(d) => (d.to_dense(), d.nrows()),
        None => (Vec::new(), 0),
    };
    let mb = snf::mat_mul(&dom, &b, &u_inv_rest, n, n - r);
    let sm = smith(&dom, mb, b_rows, n - r, true, budget)?;
    let r2 = sm.rank();
    let tm = sm.transforms.expect("tracked");

    let mut generators = Vec::new();
    let mut torsion_indices = Vec::new();
    if ring == Ring::Integers {
        for (i, d) in sa.diag.iter().enumerate() {
            if !dom.is_unit(d) {
                torsion_indices.push(i);
                generators.push(Generator {
                    order: Some(d.clone()),
                    cochain: ta.u_inv.iter().map(|row| row[i].clone()).collect(),
                });
            }
        }
    }
    for j in r2..n - r {
        let kernel: Vec<BigInt> = tm.v.iter().map(|row| row[j].clone()).collect();
        generators.push(Generator {
            order: None,
            cochain: snf::mat_vec(&dom, &u_inv_rest, &kernel),
        });
    }
    Ok(CohomologyBasis {
        degree: q,
        ring,
        simplices,
        generators,
        dom,
        diag: sa.diag,
        u: ta.u,
        v: ta.v,
        free_v_inv: tm.v_inv,
        free_rank: r2,
        torsion_indices,
        delta_in,
        delta_out,
    })
}

fn apply_sparse(dom: &AnyDomain, rows: &[SparseRow], x: &[BigInt]) -> Vec<BigInt> {
    rows.iter()
        .map(|r| dom.reduce(r.iter().map(|&(j, v)| BigInt::from(v) * &x[j]).sum()))
        .collect()
}

impl CohomologyBasis {
    pub fn betti(&self) -> usize {
        self.generators.iter().filter(|g| g.order.is_none()).count()
    }

    pub fn torsion(&self) -> Vec<BigInt> {
        self.generators.iter().filter_map(|g| g.order.clone()).collect()
    }

    fn check_len(&self, phi: &[BigInt]) -> Result<()> {
        if phi.len() != self.simplices.len() {
            return invalid(format!("cochain has {} entries, expected {}", phi.len(), self.simplices.len()));
        }
        Ok(())
    }

    pub fn is_cocycle(&self, phi: &[BigInt]) -> Result<bool> {
        self.check_len(phi)?;
        Ok(match &self.delta_out {
            Some(d) => apply_sparse(&self.dom, &d.rows, phi).iter().all(Zero::is_zero),
            None => true,
        })
    }

    /// Coordinates of a cocycle's class against `generators` (torsion
    /// coordinates reduced modulo the order).
    pub fn coordinates(&self, phi: &[BigInt]) -> Result<Vec<BigInt>> {
        if !self.is_cocycle(phi)? {
            return invalid("not a cocycle");
        }
        let c = snf::mat_vec(&self.dom, &self.u, phi);
        let r = self.diag.len();
        let mut out: Vec<BigInt> = self
            .torsion_indices
            .iter()
            .map(|&i| c[i].mod_floor(&self.diag[i]))
            .collect();
        let y = snf::mat_vec(&self.dom, &self.free_v_inv, &c[r..]);
        out.extend(y.into_iter().skip(self.free_rank));
        Ok(out)
    }

    /// Decides whether `phi` is a coboundary over the ring, with a primitive.
    pub fn solve(&self, phi: &[BigInt]) -> Result<SolveOutcome> {
        self.check_len(phi)?;
        let phi: Vec<BigInt> = phi.iter().map(|x| self.dom.reduce(x.clone())).collect();
        let c = snf::mat_vec(&self.dom, &self.u, &phi);
        let r = self.diag.len();
        if c[r..].iter().any(|x| !x.is_zero()) {
            return Ok(SolveOutcome::NotCoboundary);
        }
        let denominator = match self.ring {
            Ring::Rationals => self.diag.iter().fold(BigInt::one(), |acc, d| acc.lcm(d)),
            _ => BigInt::one(),
        };
        let mut y = Vec::with_capacity(r);
        for (ci, d) in c.iter().zip(&self.diag) {
            match self.ring {
                Ring::Integers => {
                    let (quot, rem) = ci.div_rem(d);
                    if !rem.is_zero() {
                        return Ok(SolveOutcome::NoIntegralPrimitive);
                    }
                    y.push(quot);
                }
                Ring::Rationals => y.push(ci * (&denominator / d)),
                Ring::PrimeField { .. } => y.push(self.dom.div_rem(ci, d).0),
            }
        }
        let primitive = match &self.delta_in {
            Some(d) => {
                let v_r = columns(&self.v, 0, r);
                let mut x = snf::mat_vec(&self.dom, &v_r, &y);
                x.resize(d.ncols(), BigInt::zero());
                x
            }
            None => Vec::new(),
        };
        Ok(SolveOutcome::Solved { primitive, denominator })
    }

    /// Re-checks a solve certificate: `δξ = denominator · φ`.
    pub fn check_primitive(&self, phi: &[BigInt], primitive: &[BigInt], denominator: &BigInt) -> bool {
        let want: Vec<BigInt> = phi.iter().map(|x| self.dom.reduce(x * denominator)).collect();
        match &self.delta_in {
            Some(d) => primitive.len() == d.ncols() && apply_sparse(&self.dom, &d.rows, primitive) == want,
            None => want.iter().all(Zero::is_zero),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorImage {
    pub source_generator: usize,
    #[serde(with = "dec::opt")]
    pub order: Option<BigInt>,
    /// The restricted cocycle in the target's cochain coordinates.
    #[serde(with = "dec::vec")]
    pub image: Vec<BigInt>,
    /// Class of the image against the target generators.
    #[serde(with = "dec::vec")]
    pub coordinates: Vec<BigInt>,
    #[serde(flatten)]
    pub outcome: SolveOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictionMap {
    pub degree: usize,
    pub ring: Ring,
    /// Rows: target cochain coordinates; columns: source cochain coordinates.
    pub matrix: Vec<SparseRow>,
    pub source_betti: usize,
    pub source_torsion: Vec<String>,
    pub target_betti: usize,
    pub target_torsion: Vec<String>,
    pub images: Vec<GeneratorImage>,
}

/// Restriction of relative cochains along an inclusion `target ⊂ source`,
/// applied to a basis of the source cohomology.
///
/// Needs the target's relative subcomplex to land in the source's.
#[allow(clippy::too_many_arguments)]
pub fn restriction_map(
    source: &SimplicialComplex,
    source_rel: Option<&SubcomplexHandle>,
    target: &SimplicialComplex,
    target_rel: Option<&SubcomplexHandle>,
    iota: &InclusionMap,
    ring: Ring,
    degree: usize,
    budget: &Budget,
) -> Result<RestrictionMap> {
    if let Some(t) = target_rel {
        for q in 0..iota.maps.len() {
            for i in t.indices(q) {
                let j = iota.image(q, i);
                if !source_rel.map_or(false, |s| s.contains(q, j)) {
                    return invalid("the target's relative subcomplex is not carried into the source's");
                }
            }
        }
    }
    if degree >= iota.maps.len() {
        return invalid("inclusion does not reach the requested degree");
    }
    let src = cohomology_basis(source, degree, ring, source_rel, budget)?;
    let tgt = cohomology_basis(target, degree, ring, target_rel, budget)?;
    let mut col_of = vec![usize::MAX; source.count(degree)];
    for (k, &s) in src.simplices.iter().enumerate() {
        col_of[s] = k;
    }
    let matrix: Vec<SparseRow> = tgt
        .simplices
        .iter()
        .map(|&t| {
            let c = col_of[iota.image(degree, t)];
            if c == usize::MAX {
                Vec::new()
            } else {
                vec![(c, 1)]
            }
        })
        .collect();
    let mut images = Vec::new();
    for (gi, g) in src.generators.iter().enumerate() {
        let image = apply_sparse(&tgt.dom, &matrix, &g.cochain);
        images.push(GeneratorImage {
            source_generator: gi,
            order: g.order.clone(),
            coordinates: tgt.coordinates(&image)?,
            outcome: tgt.solve(&image)?,
            image,
        });
    }
    let strs = |v: Vec<BigInt>| v.iter().map(|x| x.to_string()).collect();
    Ok(RestrictionMap {
        degree,
        ring,
        matrix,
        source_betti: src.betti(),
        source_torsion: strs(src.torsion()),
        target_betti: tgt.betti(),
        target_torsion: strs(tgt.torsion()),
        images,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub degree: usize,
    /// Inner Rips scale `n`.
    pub n: Dist,
    /// Outer Rips scale `N ≥ n`.
    pub big_n: Dist,
    /// Source support radius.
    pub r: Dist,
    /// Target support radius `s ≥ r`.
    pub s: Dist,
    /// Defaults to `degree + 1`.
    pub dim_cap: Option<usize>,
    /// Defaults to the base point plus 8 samples from the outer half of the
    /// region where the local ball is not clipped by the truncation.
    pub centers: Option<Vec<PointId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterProbe {
    pub center: PointId,
    pub label: String,
    pub local_points: usize,
    pub source_betti: usize,
    pub source_torsion: Vec<String>,
    pub images: Vec<GeneratorImage>,
    pub vanishes: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformTrivialityProbe {
    pub params: ProbeParams,
    pub ring: Ring,
    pub centers: Vec<CenterProbe>,
    /// Every source class at every center restricts to a coboundary.
    pub vanishes: bool,
}

fn default_centers(space: &FiniteMetricSpace, reach: Dist) -> Result<Vec<PointId>> {
    let p = space.require_base()?;
    let base = space.base_row()?;
    let mut centers = vec![p];
    if let Some(limit) = space.truncation_radius().checked_sub(reach) {
        let pool: Vec<PointId> = space
            .points()
            .filter(|&x| x != p && base[x as usize] <= limit && 2 * base[x as usize] >= limit)
            .collect();
        let take = pool.len().min(8);
        for k in 0..take {
            centers.push(pool[k * pool.len() / take]);
        }
    }
    Ok(centers)
}

/// Restriction `H_c^k(U_N({x}, r)) → H_c^k(U_n({x}, s))` at each center,
/// with compactly supported classes computed relative to the closed
/// complement of the neighborhood. Complexes are built on the ball of
/// radius `s + N` about the center, which carries every simplex involved.
pub fn uniform_triviality_probe(
    space: &FiniteMetricSpace,
    params: &ProbeParams,
    ring: Ring,
    budget: &Budget,
) -> Result<UniformTrivialityProbe> {
    if params.n > params.big_n || params.r > params.s {
        return invalid("need n ≤ N and r ≤ s");
    }
    let cap = params.dim_cap.unwrap_or(params.degree + 1);
    let reach = params.s + params.big_n;
    let centers = match &params.centers {
        Some(c) => c.clone(),
        None => default_centers(space, reach)?,
    };
    let mut out = Vec::new();
    for &x in &centers {
        if x as usize >= space.len() {
            return invalid(format!("center {x} is not a point"));
        }
        let local = space.ball(x, reach);
        let big = rips_complex_on(space, &local, params.big_n, cap, budget)?;
        let small = rips_complex_on(space, &local, params.n, cap, budget)?;
        let iota = inclusion(&small, &big)?;
        let src_rel = simplicial_neighborhood(&big, space, &[x], params.r).complement();
        let tgt_rel = simplicial_neighborhood(&small, space, &[x], params.s).complement();
        let map = restriction_map(&big, Some(&src_rel), &small, Some(&tgt_rel), &iota, ring, params.degree, budget)?;
        let vanishes = map.images.iter().all(|g| g.outcome.is_solved());
        out.push(CenterProbe {
            center: x,
            label: space.label(x).to_string(),
            local_points: local.len(),
            source_betti: map.source_betti,
            source_torsion: map.source_torsion,
            images: map.images,
            vanishes,
        });
    }
    Ok(UniformTrivialityProbe {
        params: params.clone(),
        ring,
        vanishes: out.iter().all(|c| c.vanishes),
        centers: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_core::cycle_space;
    use crate::rips::{closed_full_subcomplex, rips_complex};

    fn rp2() -> SimplicialComplex {
        // Six-vertex triangulation of the projective plane.
        let t = [
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 5],
            [0, 5, 1],
            [1, 2, 4],
            [2, 3, 5],
            [3, 4, 1],
            [4, 5, 2],
            [5, 1, 3],
        ];
        SimplicialComplex::from_simplices(&t.iter().map(|s| s.to_vec()).collect::<Vec<_>>(), 2).unwrap()
    }

    #[test]
    fn projective_plane_torsion_generator() {
        let b = Budget::default();
        let cx = rp2();
        let h2 = cohomology_basis(&cx, 2, Ring::Integers, None, &b).unwrap();
        assert_eq!(h2.betti(), 0);
        assert_eq!(h2.torsion(), vec![BigInt::from(2)]);
        let g = &h2.generators[0].cochain;
        assert_eq!(h2.solve(g).unwrap(), SolveOutcome::NoIntegralPrimitive);
        let twice: Vec<BigInt> = g.iter().map(|x| x * 2).collect();
        match h2.solve(&twice).unwrap() {
            SolveOutcome::Solved { primitive, denominator } => assert!(h2.check_primitive(&twice, &primitive, &denominator)),
            other => panic!("{other:?}"),
        }
        let q = cohomology_basis(&cx, 2, Ring::Rationals, None, &b).unwrap();
        assert!(q.solve(g).unwrap().is_solved());
        let f2 = cohomology_basis(&cx, 2, Ring::PrimeField { p: 2 }, None, &b).unwrap();
        assert_eq!(f2.betti(), 1);
    }

    #[test]
    fn circle_generator_is_not_a_coboundary() {
        let b = Budget::default();
        let cx = rips_complex(&cycle_space(8).unwrap(), 1, 2, &b).unwrap();
        let h1 = cohomology_basis(&cx, 1, Ring::Integers, None, &b).unwrap();
        assert_eq!(h1.betti(), 1);
        assert_eq!(h1.solve(&h1.generators[0].cochain).unwrap(), SolveOutcome::NotCoboundary);
        assert_eq!(h1.coordinates(&h1.generators[0].cochain).unwrap(), vec![BigInt::one()]);
    }

    #[test]
    fn restriction_to_itself_is_identity() {
        let b = Budget::default();
        let cx = rips_complex(&cycle_space(8).unwrap(), 1, 2, &b).unwrap();
        let id = inclusion(&cx, &cx).unwrap();
        let m = restriction_map(&cx, None, &cx, None, &id, Ring::Integers, 1, &b).unwrap();
        assert_eq!(m.images.len(), 1);
        assert_eq!(m.images[0].coordinates, vec![BigInt::one()]);
    }

    #[test]
    fn circle_survives_a_larger_scale() {
        let b = Budget::default();
        let s = cycle_space(8).unwrap();
        let small = rips_complex(&s, 1, 2, &b).unwrap();
        let big = rips_complex(&s, 2, 2, &b).unwrap();
        let iota = inclusion(&small, &big).unwrap();
        let m = restriction_map(&big, None, &small, None, &iota, Ring::Integers, 1, &b).unwrap();
        assert_eq!((m.source_betti, m.target_betti), (1, 1));
        assert_eq!(m.images[0].coordinates.len(), 1);
        assert!(!m.images[0].coordinates[0].is_zero());
        assert_eq!(m.images[0].outcome, SolveOutcome::NotCoboundary);
    }

    #[test]
    fn relative_handles_must_nest() {
        let b = Budget::default();
        let s = cycle_space(8).unwrap();
        let small = rips_complex(&s, 1, 2, &b).unwrap();
        let big = rips_complex(&s, 2, 2, &b).unwrap();
        let iota = inclusion(&small, &big).unwrap();
        let l = closed_full_subcomplex(&small, &[0]);
        assert!(restriction_map(&big, None, &small, Some(&l), &iota, Ring::Integers, 1, &b).is_err());
    }
}
