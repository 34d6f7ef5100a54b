//! Simplicial cohomology with finite supports, absolute and relative, over ℤ, ℚ and F_p.

mod basis;
mod coarse;
pub mod snf;
mod sparse;

pub use basis::{
    cohomology_basis, restriction_map, uniform_triviality_probe, CenterProbe, CohomologyBasis, Generator,
    GeneratorImage, ProbeParams, RestrictionMap, SolveOutcome, UniformTrivialityProbe,
};
pub use coarse::{coarse_cohomology_report, CoarseCell, CoarseCohomologyReport, CoarseParams};
pub use sparse::{invariants, SparseRow};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoarseError, Result};
use crate::rips::{HandleKind, SimplicialComplex, SubcomplexHandle};
use crate::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ring {
    Integers,
    Rationals,
    PrimeField { p: u64 },
}

impl Ring {
    pub fn validate(&self) -> Result<()> {
        if let Ring::PrimeField { p } = *self {
            if p < 2 || p >= 1 << 31 || (2..).take_while(|d| d * d <= p).any(|d| p % d == 0) {
                return invalid(format!("{p} is not a prime below 2^31"));
            }
        }
        Ok(())
    }

    fn modulus(&self) -> Option<u64> {
        match *self {
            Ring::PrimeField { p } => Some(p),
            _ => None,
        }
    }
}

/// The coboundary `δ: C^q → C^{q+1}` as sparse integer rows, one per
/// `(q+1)`-simplex outside the relative subcomplex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CochainMatrix {
    pub degree: usize,
    /// Simplex indices (dimension `q + 1`) of the rows.
    pub row_simplices: Vec<usize>,
    /// Simplex indices (dimension `q`) of the columns.
    pub col_simplices: Vec<usize>,
    pub rows: Vec<SparseRow>,
}

impl CochainMatrix {
    pub fn nrows(&self) -> usize {
        self.row_simplices.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_simplices.len()
    }

    /// One `row col value` line per nonzero entry.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                out.push_str(&format!("{i} {j} {v}\n"));
            }
        }
        out
    }

    pub fn to_dense(&self) -> snf::Mat {
        let mut m = snf::zeros(self.nrows(), self.ncols());
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[i][j] = BigInt::from(v);
            }
        }
        m
    }

    /// `self ∘ prev` as dense integers (for `δδ = 0` checks).
    pub fn compose(&self, prev: &CochainMatrix) -> Result<Vec<Vec<i64>>> {
        if self.col_simplices != prev.row_simplices {
            return invalid("coboundaries are not consecutive");
        }
        let mut out = vec![vec![0i64; prev.ncols()]; self.nrows()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(k, a) in r {
                for &(j, b) in &prev.rows[k] {
                    out[i][j] += a * b;
                }
            }
        }
        Ok(out)
    }
}

fn check_relative(cx: &SimplicialComplex, rel: Option<&SubcomplexHandle>) -> Result<()> {
    if let Some(h) = rel {
        if h.kind() != HandleKind::Closed {
            return invalid("relative cohomology needs a closed subcomplex");
        }
        if !h.belongs_to(cx) {
            return invalid("subcomplex handle belongs to a different complex");
        }
    }
    Ok(())
}

/// Indices of the `q`-simplices outside the relative subcomplex.
pub fn cochain_simplices(cx: &SimplicialComplex, q: usize, rel: Option<&SubcomplexHandle>) -> Vec<usize> {
    (0..cx.count(q)).filter(|&i| rel.map_or(true, |h| !h.contains(q, i))).collect()
}

/// `δ^q` with entries `(−1)^i` for the face omitting the `i`-th vertex,
/// restricted to simplices outside `relative_to`.
pub fn coboundary(cx: &SimplicialComplex, q: usize, relative_to: Option<&SubcomplexHandle>) -> Result<CochainMatrix> {
    if q >= cx.dim_cap() {
        return invalid(format!("coboundary in degree {q} needs simplices above the cap {}", cx.dim_cap()));
    }
    check_relative(cx, relative_to)?;
    let cols = cochain_simplices(cx, q, relative_to);
    let row_simplices = cochain_simplices(cx, q + 1, relative_to);
    let mut col_of = vec![usize::MAX; cx.count(q)];
    for (k, &c) in cols.iter().enumerate() {
        col_of[c] = k;
    }
    let mut face = Vec::with_capacity(q + 1);
    let rows = row_simplices
        .iter()
        .map(|&r| {
            let s = cx.simplex(q + 1, r);
            let mut row: SparseRow = Vec::with_capacity(q + 2);
            for i in 0..=q + 1 {
                face.clear();
                face.extend(s.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &v)| v));
                let f = cx.index_of(&face).expect("complex is face-closed");
                if col_of[f] != usize::MAX {
                    row.push((col_of[f], if i % 2 == 0 { 1 } else { -1 }));
                }
            }
            row.sort_unstable();
            row
        })
        .collect();
    Ok(CochainMatrix {
        degree: q,
        row_simplices,
        col_simplices: cols,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyResult {
    pub ring: Ring,
    pub degrees: Vec<usize>,
    /// Rank over the fraction field, or dimension over F_p.
    pub betti: Vec<usize>,
    /// Invariant factors above 1, per degree (ℤ only), as decimal strings.
    pub torsion: Vec<Vec<String>>,
}

impl CohomologyResult {
    pub fn betti_of(&self, q: usize) -> Option<usize> {
        self.degrees.iter().position(|&d| d == q).map(|i| self.betti[i])
    }

    /// Highest degree with nonzero rank or torsion.
    pub fn top_degree(&self) -> Option<usize> {
        (0..self.degrees.len())
            .rev()
            .find(|&i| self.betti[i] > 0 || !self.torsion[i].is_empty())
            .map(|i| self.degrees[i])
    }
}

pub(crate) fn check_degree(cx: &SimplicialComplex, q: usize) -> Result<()> {
    if q > cx.dim_cap() || (q == cx.dim_cap() && cx.truncated()) {
        return Err(CoarseError::Invalid(format!(
            "degree {q} is not computable below the dimension cap {} of a truncated complex",
            cx.dim_cap()
        )));
    }
    Ok(())
}

/// `H^q = ker δ^q / im δ^{q−1}` for each requested degree.
pub fn cohomology(
    cx: &SimplicialComplex,
    ring: Ring,
    degrees: &[usize],
    relative_to: Option<&SubcomplexHandle>,
    budget: &Budget,
) -> Result<CohomologyResult> {
    ring.validate()?;
    check_relative(cx, relative_to)?;
    for &q in degrees {
        check_degree(cx, q)?;
    }
    let mut cache: std::collections::HashMap<usize, (usize, Vec<BigInt>)> = Default::default();
    let mut rank_of = |q: usize| -> Result<(usize, Vec<BigInt>)> {
        if q >= cx.dim_cap() {
            return Ok((0, Vec::new()));
        }
        if let Some(v) = cache.get(&q) {
            return Ok(v.clone());
        }
        let d = coboundary(cx, q, relative_to)?;
        let v = invariants(&d.rows, d.ncols(), ring.modulus(), budget)?;
        cache.insert(q, v.clone());
        Ok(v)
    };
    let mut betti = Vec::new();
    let mut torsion = Vec::new();
    for &q in degrees {
        let n = cochain_simplices(cx, q, relative_to).len();
        let (r_out, _) = rank_of(q)?;
        let (r_in, factors) = if q == 0 { (0, Vec::new()) } else { rank_of(q - 1)? };
        betti.push(n - r_out - r_in);
        torsion.push(match ring {
            Ring::Integers => factors.iter().map(|f| f.to_string()).collect(),
            _ => Vec::new(),
        });
    }
    Ok(CohomologyResult {
        ring,
        degrees: degrees.to_vec(),
        betti,
        torsion,
    })
}
