//! Sparse elimination for ranks and invariant factors.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::snf::{smith, Integers};
use crate::error::{CoarseError, Result};
use crate::Budget;

pub type SparseRow = Vec<(usize, i64)>;

/// `a − c·b` on sorted sparse rows, dropping zeros.
fn axpy(a: &[(usize, i64)], b: &[(usize, i64)], c: i64, modulus: Option<i64>) -> Result<SparseRow> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let sub = |x: i64, y: i64| -> Result<i64> {
        let prod = c.checked_mul(y).ok_or(CoarseError::Overflow("sparse elimination"))?;
        let v = x.checked_sub(prod).ok_or(CoarseError::Overflow("sparse elimination"))?;
        Ok(match modulus {
            Some(p) => v.rem_euclid(p),
            None => v,
        })
    };
    while i < a.len() || j < b.len() {
        let (col, v) = if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            i += 1;
            (a[i - 1].0, a[i - 1].1)
        } else if i == a.len() || b[j].0 < a[i].0 {
            j += 1;
            (b[j - 1].0, sub(0, b[j - 1].1)?)
        } else {
            i += 1;
            j += 1;
            (a[i - 1].0, sub(a[i - 1].1, b[j - 1].1)?)
        };
        if v != 0 {
            out.push((col, v));
        }
    }
    Ok(out)
}

fn mod_inverse(a: i64, p: i64) -> i64 {
    let (mut r0, mut r1, mut s0, mut s1) = (p, a.rem_euclid(p), 0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    s0.rem_euclid(p)
}

/// Rank and non-unit invariant factors of an integer matrix over ℤ, or the
/// rank over F_p when `modulus` is set (invariant factors are then empty).
///
/// Unit pivots are eliminated sparsely (first row with a unit, its least
/// occupied unit column); what is left goes through a dense Smith form.
pub fn invariants(rows: &[SparseRow], ncols: usize, modulus: Option<u64>, budget: &Budget) -> Result<(usize, Vec<BigInt>)> {
    let p = modulus.map(|p| p as i64);
    let mut rows: Vec<SparseRow> = rows
        .iter()
        .map(|r| {
            let mut r: SparseRow = r
                .iter()
                .map(|&(c, v)| (c, p.map_or(v, |p| v.rem_euclid(p))))
                .filter(|&(_, v)| v != 0)
                .collect();
            r.sort_unstable();
            r
        })
        .collect();
    let mut occ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncols];
    for (i, r) in rows.iter().enumerate() {
        for &(c, _) in r {
            occ[c].insert(i);
        }
    }
    let is_unit = |v: i64| match p {
        Some(_) => v != 0,
        None => v == 1 || v == -1,
    };
    let mut alive = vec![true; rows.len()];
    let mut rank = 0;
    loop {
        let mut progress = false;
        for i in 0..rows.len() {
            if !alive[i] || rows[i].is_empty() {
                continue;
            }
            let Some(&(pc, pv)) = rows[i]
                .iter()
                .filter(|&&(_, v)| is_unit(v))
                .min_by_key(|&&(c, _)| (occ[c].len(), c))
            else {
                continue;
            };
            progress = true;
            let inv = match p {
                Some(p) => mod_inverse(pv, p),
                None => pv,
            };
            let pivot = std::mem::take(&mut rows[i]);
            let others: Vec<usize> = occ[pc].iter().copied().filter(|&k| k != i).collect();
            for k in others {
                let a = rows[k].iter().find(|&&(c, _)| c == pc).map(|&(_, v)| v).unwrap();
                let coef = match p {
                    Some(p) => ((a as i128 * inv as i128).rem_euclid(p as i128)) as i64,
                    None => a * inv,
                };
                let new = axpy(&rows[k], &pivot, coef, p)?;
                for &(c, _) in &rows[k] {
                    occ[c].remove(&k);
                }
                for &(c, _) in &new {
                    occ[c].insert(k);
                }
                rows[k] = new;
            }
            for &(c, _) in &pivot {
                occ[c].remove(&i);
            }
            alive[i] = false;
            rank += 1;
        }
        if !progress {
            break;
        }
    }
    if p.is_some() {
        // Every nonzero entry is a unit, so nothing survives.
        return Ok((rank, Vec::new()));
    }
    let rest: Vec<usize> = (0..rows.len()).filter(|&i| alive[i] && !rows[i].is_empty()).collect();
    if rest.is_empty() {
        return Ok((rank, Vec::new()));
    }
    let cols: Vec<usize> = (0..ncols).filter(|&c| !occ[c].is_empty()).collect();
    let mut dense = vec![vec![BigInt::from(0); cols.len()]; rest.len()];
    for (ri, &i) in rest.iter().enumerate() {
        for &(c, v) in &rows[i] {
            let ci = cols.binary_search(&c).unwrap();
            dense[ri][ci] = BigInt::from(v);
        }
    }
    let snf = smith(&Integers, dense, rest.len(), cols.len(), false, budget)?;
    let factors = snf.diag.iter().filter(|d| !d.abs().is_one()).cloned().collect();
    Ok((rank + snf.rank(), factors))
}
