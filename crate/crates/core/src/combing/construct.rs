use std::collections::HashMap;
use std::sync::Arc;

use super::Combing;
use crate::error::{invalid, CoarseError, Result};
use crate::metric_core::{interval, lattice_label, parse_lattice_label, CayleyBall, Dist, FiniteMetricSpace, PointId};
use crate::Budget;

fn assemble(space: Arc<FiniteMetricSpace>, paths: Vec<Vec<PointId>>, budget: &Budget) -> Result<Combing> {
    let horizon = paths.iter().map(|p| p.len() - 1).max().unwrap_or(0);
    let w = horizon + 1;
    budget.check("matrix_cells", paths.len() * w, "combing table")?;
    let mut table = Vec::with_capacity(paths.len() * w);
    for p in &paths {
        table.extend_from_slice(p);
        let last = *p.last().expect("paths are nonempty");
        table.extend(std::iter::repeat(last).take(w - p.len()));
    }
    Combing::from_table(space, horizon as u32, table)
}

/// Geodesic combing along a breadth-first tree rooted at the base point.
///
/// The parent of `x` is the lowest-indexed point one step closer to the
/// base point and one step away from `x`, where a step is the graph edge
/// length (or one true unit for dense spaces). Every point must be reachable
/// this way.
pub fn geodesic_combing(space: Arc<FiniteMetricSpace>, budget: &Budget) -> Result<Combing> {
    let p = space.require_base()?;
    let step = space.unit_step();
    let base = space.base_row()?.to_vec();
    if let Some(x) = base.iter().position(|&d| d % step != 0) {
        return Err(CoarseError::Disconnected(format!(
            "point {} is not a whole number of steps from the base point",
            space.label(x as PointId)
        )));
    }
    let mut order: Vec<PointId> = space.points().collect();
    order.sort_by_key(|&x| (base[x as usize], x));
    let mut paths: Vec<Vec<PointId>> = vec![Vec::new(); space.len()];
    paths[p as usize] = vec![p];
    for &x in &order {
        if x == p {
            continue;
        }
        let dx = base[x as usize];
        let parent = space
            .unit_neighbors(x)
            .into_iter()
            .find(|&u| base[u as usize] + step == dx)
            .ok_or_else(|| {
                CoarseError::Disconnected(format!("no geodesic step from {} toward the base point", space.label(x)))
            })?;
        let mut path = paths[parent as usize].clone();
        path.push(x);
        paths[x as usize] = path;
    }
    assemble(space, paths, budget)
}

/// Digital straight segments on a lattice-labelled space.
///
/// At stage `n` (0-based) of the walk to `c` with `L = |c|₁`, the walk steps
/// along the unfinished axis with the largest deficit `(n+1)|cᵢ| − L·|posᵢ|`,
/// lowest axis on ties.
pub fn bresenham_combing(space: Arc<FiniteMetricSpace>, budget: &Budget) -> Result<Combing> {
    let p = space.require_base()?;
    let mut coords = Vec::with_capacity(space.len());
    for x in space.points() {
        coords.push(
            parse_lattice_label(space.label(x))
                .ok_or_else(|| CoarseError::Invalid(format!("label {:?} is not a lattice point", space.label(x))))?,
        );
    }
    let dim = coords[0].len();
    if coords.iter().any(|c| c.len() != dim) {
        return invalid("lattice labels have mixed dimensions");
    }
    if coords[p as usize].iter().any(|&v| v != 0) {
        return invalid("base point is not the origin");
    }
    let index: HashMap<&[i64], PointId> = coords.iter().enumerate().map(|(i, c)| (c.as_slice(), i as PointId)).collect();
    let mut paths = Vec::with_capacity(space.len());
    for c in &coords {
        let l: i64 = c.iter().map(|v| v.abs()).sum();
        let mut pos = vec![0i64; dim];
        let mut path = vec![p];
        for n in 0..l {
            let axis = (0..dim)
                .filter(|&i| pos[i].abs() < c[i].abs())
                .max_by_key(|&i| ((n + 1) * c[i].abs() - l * pos[i].abs(), std::cmp::Reverse(i)))
                .expect("an unfinished axis exists before the walk ends");
            pos[axis] += c[axis].signum();
            let v = *index.get(pos.as_slice()).ok_or_else(|| {
                CoarseError::LeavesTruncation(format!("walk to {} passes {}", lattice_label(c), lattice_label(&pos)))
            })?;
            path.push(v);
        }
        paths.push(path);
    }
    assemble(space, paths, budget)
}

/// Product of two settled combings on the ℓ¹ product: first the `A`-path with
/// `B` at its base point, then the `B`-path with `A` at its target.
///
/// With `radius`, only pairs with `d(a,p_A) + d(b,p_B) ≤ radius` are kept; for
/// graph factors the result is then the induced subgraph of the product
/// graph, matching the convention for Cayley balls.
pub fn product_combing(c_a: &Combing, c_b: &Combing, radius: Option<Dist>, budget: &Budget) -> Result<Combing> {
    let (sa, sb) = (c_a.space(), c_b.space());
    if sa.scale() != sb.scale() {
        return invalid("product factors need the same scale");
    }
    if !c_a.is_settled() || !c_b.is_settled() {
        return invalid("product factors must be settled within their horizons");
    }
    let (ra, rb) = (sa.base_row()?.to_vec(), sb.base_row()?.to_vec());
    let keep = |a: usize, b: usize| radius.map_or(true, |r| ra[a] as u64 + rb[b] as u64 <= r as u64);
    let mut pairs = Vec::new();
    let mut index: HashMap<(PointId, PointId), PointId> = HashMap::new();
    for a in 0..sa.len() {
        for b in 0..sb.len() {
            if keep(a, b) {
                budget.check("points", pairs.len() + 1, "product space")?;
                index.insert((a as PointId, b as PointId), pairs.len() as PointId);
                pairs.push((a as PointId, b as PointId));
            }
        }
    }
    let labels: Vec<String> = pairs
        .iter()
        .map(|&(a, b)| {
            match (parse_lattice_label(sa.label(a)), parse_lattice_label(sb.label(b))) {
                (Some(mut x), Some(y)) => {
                    x.extend(y);
                    lattice_label(&x)
                }
                _ => format!("({}|{})", sa.label(a), sb.label(b)),
            }
        })
        .collect();
    let base = index[&(c_a.base_point(), c_b.base_point())];
    let truncation = radius.unwrap_or(sa.truncation_radius() + sb.truncation_radius());
    let space = match (sa.edge_length(), sb.edge_length()) {
        (Some(la), Some(lb)) if la == lb => {
            let adjacency = pairs
                .iter()
                .map(|&(a, b)| {
                    let mut nb = Vec::new();
                    for &a2 in sa.graph_neighbors(a).unwrap() {
                        if let Some(&j) = index.get(&(a2, b)) {
                            nb.push(j);
                        }
                    }
                    for &b2 in sb.graph_neighbors(b).unwrap() {
                        if let Some(&j) = index.get(&(a, b2)) {
                            nb.push(j);
                        }
                    }
                    nb
                })
                .collect();
            FiniteMetricSpace::from_graph(labels, sa.scale(), la, adjacency, Some(base), truncation)?
        }
        _ => {
            let n = pairs.len();
            budget.check("matrix_cells", n * n, "product distance table")?;
            let rows_a: Vec<Vec<Dist>> = sa.points().map(|a| sa.row(a).to_vec()).collect();
            let rows_b: Vec<Vec<Dist>> = sb.points().map(|b| sb.row(b).to_vec()).collect();
            let mut dist = Vec::with_capacity(n * n);
            for &(a, b) in &pairs {
                for &(a2, b2) in &pairs {
                    dist.push(rows_a[a as usize][a2 as usize] + rows_b[b as usize][b2 as usize]);
                }
            }
            FiniteMetricSpace::from_dense(labels, sa.scale(), dist, Some(base), truncation)?
        }
    };
    let space = Arc::new(space);
    let mut paths = Vec::with_capacity(pairs.len());
    for &(a, b) in &pairs {
        let ta = c_a.settle(a).unwrap();
        let tb = c_b.settle(b).unwrap();
        let mut path = Vec::with_capacity((ta + tb + 1) as usize);
        let lookup = |u: PointId, v: PointId| {
            index.get(&(u, v)).copied().ok_or_else(|| {
                CoarseError::LeavesTruncation(format!(
                    "product path to ({}|{}) passes outside the kept pairs",
                    sa.label(a),
                    sb.label(b)
                ))
            })
        };
        for n in 0..=ta {
            path.push(lookup(c_a.h(a, n), c_b.base_point())?);
        }
        for n in 1..=tb {
            path.push(lookup(a, c_b.h(b, n))?);
        }
        paths.push(path);
    }
    assemble(space, paths, budget)
}

/// Prefix combing of a normal form: `H[x][n]` is the point reached by the
/// length-`n` prefix of `normal_form(x)`.
pub fn normal_form_combing<F>(ball: &CayleyBall, normal_form: F, budget: &Budget) -> Result<Combing>
where
    F: Fn(PointId) -> Result<Vec<usize>>,
{
    let space = ball.space.clone();
    let mut paths = Vec::with_capacity(space.len());
    for x in space.points() {
        let word = normal_form(x)?;
        let path = ball.evaluate(&word)?;
        if *path.last().unwrap() != x {
            return invalid(format!("normal form of {} evaluates elsewhere", space.label(x)));
        }
        paths.push(path);
    }
    assemble(space, paths, budget)
}

/// The non-proper combing on `{0,…,T}`: wait at 0 until stage `x`, then walk
/// to `x` at unit speed. Horizon `2T`.
pub fn nonproper_example(t: u32) -> Result<Combing> {
    if t == 0 {
        return invalid("T must be at least 1");
    }
    let space = interval(t);
    let horizon = 2 * t;
    let mut table = Vec::with_capacity((t as usize + 1) * (horizon as usize + 1));
    for x in 0..=t {
        for n in 0..=horizon {
            table.push(if n <= x {
                0
            } else if n <= 2 * x {
                n - x
            } else {
                x
            });
        }
    }
    Combing::from_table(space, horizon, table)
}

/// The non-coherent combing on `{0,…,T}`: `H(x,n) = n` while `3n ≤ x`,
/// `4n − x` while `2n ≤ x ≤ 3n`, and `x` once `x ≤ 2n`. Horizon `T`.
pub fn noncoherent_example(t: u32) -> Result<Combing> {
    if t == 0 {
        return invalid("T must be at least 1");
    }
    let space = interval(t);
    let mut table = Vec::with_capacity((t as usize + 1) * (t as usize + 1));
    for x in 0..=t {
        for n in 0..=t {
            table.push(if 3 * n <= x {
                n
            } else if 2 * n <= x {
                4 * n - x
            } else {
                x
            });
        }
    }
    Combing::from_table(space, t, table)
}
