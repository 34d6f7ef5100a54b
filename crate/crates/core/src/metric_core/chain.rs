use rayon::prelude::*;

use super::space::Dist;
use crate::error::{invalid, CoarseError, Result};
use crate::Budget;

const INF: u64 = u64::MAX;

/// The largest metric bounded above by `bound`: shortest paths on the complete
/// graph weighted by `bound` (`None` = no edge). Returns a row-major table.
pub fn chain_metric<F>(n: usize, bound: F, budget: &Budget) -> Result<Vec<Dist>>
where
    F: Fn(usize, usize) -> Option<u64> + Sync,
{
    budget.check("matrix_cells", n * n, "chain metric table")?;
    let mut d: Vec<u64> = (0..n * n)
        .into_par_iter()
        .map(|k| bound(k / n, k % n).unwrap_or(INF))
        .collect();
    for i in 0..n {
        if d[i * n + i] != 0 {
            return invalid(format!("bound({i},{i}) must be 0"));
        }
        for j in 0..i {
            if d[i * n + j] != d[j * n + i] {
                return invalid(format!("bound is not symmetric at ({i},{j})"));
            }
        }
    }
    for k in 0..n {
        let row_k: Vec<u64> = d[k * n..(k + 1) * n].to_vec();
        d.par_chunks_mut(n).for_each(|row| {
            let dik = row[k];
            if dik == INF {
                return;
            }
            for (x, &dkj) in row.iter_mut().zip(&row_k) {
                if dkj != INF && dik + dkj < *x {
                    *x = dik + dkj;
                }
            }
        });
    }
    if d.iter().any(|&x| x == INF) {
        return Err(CoarseError::Disconnected(describe_components(n, &d)));
    }
    let mut out = Vec::with_capacity(n * n);
    for (k, &x) in d.iter().enumerate() {
        if x == 0 && k / n != k % n {
            return invalid(format!("points {} and {} end up at distance 0", k / n, k % n));
        }
        out.push(Dist::try_from(x).map_err(|_| CoarseError::Overflow("chain metric"))?);
    }
    Ok(out)
}

fn describe_components(n: usize, d: &[u64]) -> String {
    let mut comp = vec![usize::MAX; n];
    let mut parts = Vec::new();
    for i in 0..n {
        if comp[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| d[i * n + j] != INF).collect();
        for &j in &members {
            comp[j] = parts.len();
        }
        parts.push(members);
    }
    let shown: Vec<String> = parts
        .iter()
        .take(6)
        .map(|m| {
            let head: Vec<String> = m.iter().take(6).map(|v| v.to_string()).collect();
            let more = if m.len() > 6 { ", …" } else { "" };
            format!("{{{}{more}}}", head.join(", "))
        })
        .collect();
    format!("bound graph has {} components: {}", parts.len(), shown.join(" "))
}
