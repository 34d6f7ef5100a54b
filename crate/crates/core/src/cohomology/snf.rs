//! Dense Smith normal form over ℤ and F_p, optionally with transforms.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::Result;
use crate::Budget;

pub type Mat = Vec<Vec<BigInt>>;

/// A Euclidean domain whose elements are represented by `BigInt`s.
pub trait Domain: Sync {
    /// Canonical representative.
    fn reduce(&self, a: BigInt) -> BigInt;
    /// Euclidean size; only zero has size zero.
    fn size(&self, a: &BigInt) -> BigInt;
    fn div_rem(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt);
    /// `(g, s, t)` with `g = s·a + t·b` a gcd of `a`, `b` (not both zero).
    fn gcd_ext(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt);
    /// A unit `u` making `u·a` the canonical associate.
    fn normalizer(&self, a: &BigInt) -> BigInt;
    fn unit_inverse(&self, u: &BigInt) -> BigInt;
    fn is_unit(&self, a: &BigInt) -> bool;
}

pub struct Integers;

impl Domain for Integers {
    fn reduce(&self, a: BigInt) -> BigInt {
        a
    }
    fn size(&self, a: &BigInt) -> BigInt {
        a.abs()
    }
    fn div_rem(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
        Integer::div_rem(a, b)
    }
    fn gcd_ext(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
        let e = a.extended_gcd(b);
        (e.gcd, e.x, e.y)
    }
    fn normalizer(&self, a: &BigInt) -> BigInt {
        if a.is_negative() {
            -BigInt::one()
        } else {
            BigInt::one()
        }
    }
    fn unit_inverse(&self, u: &BigInt) -> BigInt {
        u.clone()
    }
    fn is_unit(&self, a: &BigInt) -> bool {
        a.abs().is_one()
    }
}

pub struct PrimeField(pub u64);

impl PrimeField {
    fn inv(&self, a: &BigInt) -> BigInt {
        let p = BigInt::from(self.0);
        a.modpow(&(&p - 2u32), &p)
    }
}

impl Domain for PrimeField {
    fn reduce(&self, a: BigInt) -> BigInt {
        a.mod_floor(&BigInt::from(self.0))
    }
    fn size(&self, a: &BigInt) -> BigInt {
        if a.is_zero() {
            BigInt::zero()
        } else {
            BigInt::one()
        }
    }
    fn div_rem(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
        (self.reduce(a * self.inv(b)), BigInt::zero())
    }
    fn gcd_ext(&self, a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
        if !a.is_zero() {
            (BigInt::one(), self.inv(a), BigInt::zero())
        } else {
            (BigInt::one(), BigInt::zero(), self.inv(b))
        }
    }
    fn normalizer(&self, a: &BigInt) -> BigInt {
        self.inv(a)
    }
    fn unit_inverse(&self, u: &BigInt) -> BigInt {
        self.inv(u)
    }
    fn is_unit(&self, a: &BigInt) -> bool {
        !a.is_zero()
    }
}

/// `U·A·V = diag(d_1, …, d_r, 0, …)` with `d_i | d_{i+1}`, `U`, `V` invertible.
#[derive(Clone, Debug)]
pub struct Snf {
    pub rows: usize,
    pub cols: usize,
    pub diag: Vec<BigInt>,
    pub transforms: Option<Transforms>,
}

#[derive(Clone, Debug)]
pub struct Transforms {
    pub u: Mat,
    pub u_inv: Mat,
    pub v: Mat,
    pub v_inv: Mat,
}

impl Snf {
    pub fn rank(&self) -> usize {
        self.diag.len()
    }
}

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![BigInt::zero(); c]; r]
}

/// 2×2 matrix `[[a, b], [c, d]]`.
type Two = [BigInt; 4];

fn inverse2<D: Domain>(dom: &D, m: &Two) -> Two {
    let det = dom.reduce(&m[0] * &m[3] - &m[1] * &m[2]);
    let di = dom.unit_inverse(&det);
    [
        dom.reduce(&m[3] * &di),
        dom.reduce(-&m[1] * &di),
        dom.reduce(-&m[2] * &di),
        dom.reduce(&m[0] * &di),
    ]
}

/// Rows `(i, j)` ← `m · (row_i, row_j)`.
fn rows2<D: Domain>(dom: &D, a: &mut Mat, i: usize, j: usize, m: &Two) {
    let (ri, rj) = (a[i].clone(), a[j].clone());
    for k in 0..ri.len() {
        if ri[k].is_zero() && rj[k].is_zero() {
            continue;
        }
        a[i][k] = dom.reduce(&m[0] * &ri[k] + &m[1] * &rj[k]);
        a[j][k] = dom.reduce(&m[2] * &ri[k] + &m[3] * &rj[k]);
    }
}

/// Columns `(i, j)` ← `(col_i, col_j) · m`.
fn cols2<D: Domain>(dom: &D, a: &mut Mat, i: usize, j: usize, m: &Two) {
    for row in a.iter_mut() {
        if row[i].is_zero() && row[j].is_zero() {
            continue;
        }
        let (x, y) = (row[i].clone(), row[j].clone());
        row[i] = dom.reduce(&m[0] * &x + &m[2] * &y);
        row[j] = dom.reduce(&m[1] * &x + &m[3] * &y);
    }
}

struct State<'a, D: Domain> {
    dom: &'a D,
    a: Mat,
    t: Option<Transforms>,
}

impl<D: Domain> State<'_, D> {
    /// `A ← M·A` on rows `(i, j)`.
    fn row_op(&mut self, i: usize, j: usize, m: Two) {
        rows2(self.dom, &mut self.a, i, j, &m);
        if let Some(t) = &mut self.t {
            rows2(self.dom, &mut t.u, i, j, &m);
            let mi = inverse2(self.dom, &m);
            cols2(self.dom, &mut t.u_inv, i, j, &mi);
        }
    }

    /// `A ← A·M` on columns `(i, j)`.
    fn col_op(&mut self, i: usize, j: usize, m: Two) {
        cols2(self.dom, &mut self.a, i, j, &m);
        if let Some(t) = &mut self.t {
            cols2(self.dom, &mut t.v, i, j, &m);
            let mi = inverse2(self.dom, &m);
            rows2(self.dom, &mut t.v_inv, i, j, &mi);
        }
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            let one = BigInt::one;
            self.row_op(i, j, [BigInt::zero(), one(), one(), BigInt::zero()]);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            let one = BigInt::one;
            self.col_op(i, j, [BigInt::zero(), one(), one(), BigInt::zero()]);
        }
    }

    fn scale_row(&mut self, i: usize, u: &BigInt) {
        let dom = self.dom;
        for x in self.a[i].iter_mut() {
            *x = dom.reduce(&*x * u);
        }
        if let Some(t) = &mut self.t {
            let ui = dom.unit_inverse(u);
            for x in t.u[i].iter_mut() {
                *x = dom.reduce(&*x * u);
            }
            for row in t.u_inv.iter_mut() {
                row[i] = dom.reduce(&row[i] * &ui);
            }
        }
    }

    /// Clears `a[i][t]` against the pivot `a[t][t]`.
    fn clear_below(&mut self, t: usize, i: usize) {
        let (p, b) = (self.a[t][t].clone(), self.a[i][t].clone());
        let (q, r) = self.dom.div_rem(&b, &p);
        if r.is_zero() {
            self.row_op(t, i, [BigInt::one(), BigInt::zero(), self.dom.reduce(-q), BigInt::one()]);
        } else {
            let (g, s, u) = self.dom.gcd_ext(&p, &b);
            let m = [s, u, self.dom.reduce(-(&b / &g)), self.dom.reduce(&p / &g)];
            self.row_op(t, i, m);
        }
    }

    fn clear_right(&mut self, t: usize, j: usize) {
        let (p, b) = (self.a[t][t].clone(), self.a[t][j].clone());
        let (q, r) = self.dom.div_rem(&b, &p);
        if r.is_zero() {
            self.col_op(t, j, [BigInt::one(), self.dom.reduce(-q), BigInt::zero(), BigInt::one()]);
        } else {
            let (g, s, u) = self.dom.gcd_ext(&p, &b);
            // col_t ← s·col_t + u·col_j, col_j ← −(b/g)·col_t + (p/g)·col_j.
            let m = [s, self.dom.reduce(-(&b / &g)), u, self.dom.reduce(&p / &g)];
            self.col_op(t, j, m);
        }
    }
}

/// Smith normal form of an `rows × cols` matrix. Transforms are tracked when
/// `track` is set; the matrix-cell budget covers the matrix and transforms.
pub fn smith<D: Domain>(dom: &D, a: Mat, rows: usize, cols: usize, track: bool, budget: &Budget) -> Result<Snf> {
    let cells = rows * cols + if track { 2 * rows * rows + 2 * cols * cols } else { 0 };
    budget.check("matrix_cells", cells, "dense Smith normal form")?;
    let a: Mat = a.into_iter().map(|r| r.into_iter().map(|x| dom.reduce(x)).collect()).collect();
    let t = track.then(|| Transforms {
        u: identity(rows),
        u_inv: identity(rows),
        v: identity(cols),
        v_inv: identity(cols),
    });
    let mut st = State { dom, a, t };
    let mut diag = Vec::new();
    for t in 0..rows.min(cols) {
        // Smallest nonzero entry of the remaining block, first in row-major order.
        let mut best: Option<(BigInt, usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !st.a[i][j].is_zero() {
                    let s = dom.size(&st.a[i][j]);
                    if best.as_ref().map_or(true, |b| s < b.0) {
                        best = Some((s, i, j));
                    }
                }
            }
        }
        let Some((_, pi, pj)) = best else { break };
        st.swap_rows(t, pi);
        st.swap_cols(t, pj);
        loop {
            for i in t + 1..rows {
                if !st.a[i][t].is_zero() {
                    st.clear_below(t, i);
                }
            }
            for j in t + 1..cols {
                if !st.a[t][j].is_zero() {
                    st.clear_right(t, j);
                }
            }
            if (t + 1..rows).any(|i| !st.a[i][t].is_zero()) {
                continue;
            }
            let p = st.a[t][t].clone();
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !dom.div_rem(&st.a[i][j], &p).1.is_zero()));
            match bad {
                Some(i) => st.row_op(t, i, [BigInt::one(), BigInt::one(), BigInt::zero(), BigInt::one()]),
                None => break,
            }
        }
        let u = dom.normalizer(&st.a[t][t]);
        if !u.is_one() {
            st.scale_row(t, &u);
        }
        diag.push(st.a[t][t].clone());
    }
    Ok(Snf {
        rows,
        cols,
        diag,
        transforms: st.t,
    })
}

pub fn mat_mul<D: Domain>(dom: &D, a: &Mat, b: &Mat, inner: usize, cols: usize) -> Mat {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut s = BigInt::zero();
                    for k in 0..inner {
                        if !row[k].is_zero() && !b[k][j].is_zero() {
                            s += &row[k] * &b[k][j];
                        }
                    }
                    dom.reduce(s)
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec<D: Domain>(dom: &D, a: &Mat, x: &[BigInt]) -> Vec<BigInt> {
    a.iter()
        .map(|row| {
            let mut s = BigInt::zero();
            for (r, v) in row.iter().zip(x) {
                if !r.is_zero() && !v.is_zero() {
                    s += r * v;
                }
            }
            dom.reduce(s)
        })
        .collect()
}
