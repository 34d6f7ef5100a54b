use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{AuditReport, Constants, Property, Verdict, Witness, WitnessKind};
use super::Combing;
use crate::error::{invalid, CoarseError, Result};
use crate::metric_core::{Dist, PointId};

/// Points at most `truncation_radius − collar` from the base point, with the
/// base-point distance table.
fn window(c: &Combing, collar: Dist) -> Result<(Vec<PointId>, Vec<Dist>)> {
    let s = c.space();
    let base = s.base_row()?.to_vec();
    let w = match s.truncation_radius().checked_sub(collar) {
        Some(limit) => s.points().filter(|&x| base[x as usize] <= limit).collect(),
        None => Vec::new(),
    };
    Ok((w, base))
}

fn report(
    c: &Combing,
    property: Property,
    verdict: Verdict,
    collar: Dist,
    constants: Constants,
    witnesses: Vec<Witness>,
    mut notes: Vec<String>,
) -> AuditReport {
    if verdict == Verdict::RefutedAtScale {
        notes.push("refutation is evidence from a finite truncation, not a proof of the asymptotic statement".into());
    }
    AuditReport {
        property,
        verdict,
        scale: c.space().scale(),
        horizon: c.horizon(),
        collar_excluded: collar,
        constants,
        witnesses,
        notes,
    }
}

/// Step sizes per stage and fellow-travelling constants per radius, over
/// points outside the collar (default collar: the largest radius).
pub fn audit_controlled(c: &Combing, fellow_radii: &[Dist], collar: Option<Dist>) -> Result<AuditReport> {
    let collar = collar.unwrap_or_else(|| fellow_radii.iter().copied().max().unwrap_or(0));
    let (w, _) = window(c, collar)?;
    let s = c.space();
    let horizon = c.horizon();

    let per_point: Vec<Vec<Dist>> = w
        .par_iter()
        .map(|&x| {
            let active = c.active_until(x).min(horizon);
            (0..active).map(|n| s.dist(c.h(x, n + 1), c.h(x, n))).collect()
        })
        .collect();
    let mut step = vec![0; horizon as usize];
    let mut step_arg: Vec<Option<PointId>> = vec![None; horizon as usize];
    for (&x, vals) in w.iter().zip(&per_point) {
        for (n, &v) in vals.iter().enumerate() {
            if step_arg[n].is_none() || v > step[n] {
                step[n] = v;
                step_arg[n] = Some(x);
            }
        }
    }
    let mut witnesses = Vec::new();
    for (n, arg) in step_arg.iter().enumerate() {
        let x = arg.unwrap_or(c.base_point());
        witnesses.push(Witness::new(c, WitnessKind::Step, vec![x], vec![n as u32], step[n]));
    }

    let mut fellow = Vec::new();
    for &r in fellow_radii {
        let best: Vec<(Dist, PointId, u32)> = w
            .par_iter()
            .map(|&x| {
                let mut best = (0, x, 0);
                for (y, _) in s.ball_with_dist(x, r) {
                    if y == x {
                        continue;
                    }
                    let last = c.active_until(x).max(c.active_until(y)).min(horizon);
                    for n in 0..=last {
                        let v = s.dist(c.h(x, n), c.h(y, n));
                        if v > best.0 {
                            best = (v, y, n);
                        }
                    }
                }
                best
            })
            .collect();
        let mut top: Option<(Dist, PointId, PointId, u32)> = None;
        for (&x, &(v, y, n)) in w.iter().zip(&best) {
            if top.map_or(true, |t| v > t.0) {
                top = Some((v, x, y, n));
            }
        }
        let (v, x, y, n) = top.unwrap_or((0, c.base_point(), c.base_point(), 0));
        fellow.push(v);
        witnesses.push(Witness::new(c, WitnessKind::Fellow, vec![x, y], vec![n], v));
    }

    let (verdict, notes) = if w.is_empty() {
        (Verdict::Inconclusive, vec!["no points outside the collar".to_string()])
    } else {
        (
            Verdict::SupportedAtScale,
            vec!["every table is finite on a finite truncation; the constants are the content".to_string()],
        )
    };
    Ok(report(
        c,
        Property::Controlled,
        verdict,
        collar,
        Constants::Controlled {
            step,
            fellow_radii: fellow_radii.to_vec(),
            fellow,
        },
        witnesses,
        notes,
    ))
}

/// Preimage radii `m(n)` of the ball `K` of radius `k_radius` about the base point.
///
/// Stages run up to the horizon, capped at the window radius in steps (paths
/// of unit-speed combings have settled by then). Supported if `m` is constant
/// over the upper half of the stages at a value below the window radius;
/// refuted if every stage pins the preimage to the window's edge.
pub fn audit_proper(c: &Combing, k_radius: Dist, collar: Option<Dist>) -> Result<AuditReport> {
    let collar = collar.unwrap_or(k_radius);
    let (w, base) = window(c, collar)?;
    let s = c.space();
    let unit = s.unit_step();
    let mut notes = Vec::new();
    let empty = |notes: Vec<String>| {
        report(
            c,
            Property::Proper,
            Verdict::Inconclusive,
            collar,
            Constants::Proper {
                k_radius,
                stages: Vec::new(),
                m: Vec::new(),
                max_available: 0,
            },
            Vec::new(),
            notes,
        )
    };
    if w.is_empty() {
        return Ok(empty(vec!["no points outside the collar".into()]));
    }
    if (c.horizon() as u64) * (unit as u64) < k_radius as u64 {
        return Ok(empty(vec![format!(
            "horizon {} is too small to evaluate K of radius {k_radius}",
            c.horizon()
        )]));
    }
    let limit = s.truncation_radius() - collar;
    let max_available = w.iter().map(|&x| base[x as usize]).max().unwrap_or(0);
    let n_max = c.horizon().min(limit / unit);
    let mut stages = Vec::new();
    let mut m = Vec::new();
    let mut witnesses = Vec::new();
    for n in 0..=n_max {
        let mut best: Option<(Dist, PointId)> = None;
        for &x in &w {
            if base[c.h(x, n) as usize] <= k_radius && best.map_or(true, |b| base[x as usize] > b.0) {
                best = Some((base[x as usize], x));
            }
        }
        let (v, x) = best.expect("the base point maps into K");
        stages.push(n);
        m.push(v);
        witnesses.push(Witness::new(c, WitnessKind::Preimage, vec![x], vec![n], v));
    }
    let upper = &m[m.len() / 2..];
    let verdict = if max_available <= k_radius {
        notes.push("K covers the audited window".into());
        Verdict::SupportedAtScale
    } else if m.iter().all(|&v| v == max_available) {
        notes.push("every audited stage pulls back K to the edge of the window".into());
        Verdict::RefutedAtScale
    } else if upper.iter().all(|&v| v == upper[0]) && upper[0] < limit {
        Verdict::SupportedAtScale
    } else {
        Verdict::Inconclusive
    };
    Ok(report(
        c,
        Property::Proper,
        verdict,
        collar,
        Constants::Proper {
            k_radius,
            stages,
            m,
            max_available,
        },
        witnesses,
        notes,
    ))
}

/// Coherence gaps `coh(ρ) = max d(H_m H_n x, H_m x)` over `m ≤ n` and
/// `d(x,p) ≤ ρ`, for ρ ranging over the distances from the base point.
///
/// Supported if `coh` is constant on the upper half of the radii; refuted if
/// the least-squares slope of `coh` against `ρ` exceeds 1/5.
pub fn audit_coherent(c: &Combing, collar: Option<Dist>) -> Result<AuditReport> {
    let collar = collar.unwrap_or(0);
    let (mut w, base) = window(c, collar)?;
    let s = c.space();
    w.sort_by_key(|&x| (base[x as usize], x));
    let per_point: Vec<(Dist, u32, u32)> = w
        .par_iter()
        .map(|&x| {
            let active = c.active_until(x);
            let mut best = (0, 0, 0);
            for m in 0..active {
                let hm = c.h(x, m);
                for n in m..active {
                    let v = s.dist(c.h(c.h(x, n), m), hm);
                    if v > best.0 {
                        best = (v, m, n);
                    }
                }
            }
            best
        })
        .collect();

    let mut radii = Vec::new();
    let mut coh = Vec::new();
    let mut witnesses = Vec::new();
    let mut best: Option<(Dist, PointId, u32, u32)> = None;
    for (i, &x) in w.iter().enumerate() {
        let (v, m, n) = per_point[i];
        if best.map_or(true, |b| v > b.0) {
            best = Some((v, x, m, n));
        }
        let rho = base[x as usize];
        let last_at_radius = w.get(i + 1).map_or(true, |&y| base[y as usize] != rho);
        if last_at_radius {
            let (v, bx, bm, bn) = best.unwrap();
            radii.push(rho);
            coh.push(v);
            witnesses.push(Witness::new(c, WitnessKind::Coherence, vec![bx], vec![bm, bn], v));
        }
    }

    let threshold = Ratio::new(1i64, 5);
    let slope = least_squares_slope(&radii, &coh)?;
    let upper = &coh[coh.len() / 2..];
    let verdict = if w.is_empty() {
        Verdict::Inconclusive
    } else if upper.iter().all(|&v| v == upper[0]) {
        Verdict::SupportedAtScale
    } else if slope.map_or(false, |s| s > threshold) {
        Verdict::RefutedAtScale
    } else {
        Verdict::Inconclusive
    };
    Ok(report(
        c,
        Property::Coherent,
        verdict,
        collar,
        Constants::Coherent {
            radii,
            coh,
            slope,
            slope_threshold: threshold,
        },
        witnesses,
        vec!["growth threshold: least-squares slope of coh against radius above 1/5".into()],
    ))
}

fn least_squares_slope(xs: &[Dist], ys: &[Dist]) -> Result<Option<Ratio<i64>>> {
    let l = xs.len() as i128;
    let sx: i128 = xs.iter().map(|&v| v as i128).sum();
    let sy: i128 = ys.iter().map(|&v| v as i128).sum();
    let sxy: i128 = xs.iter().zip(ys).map(|(&a, &b)| a as i128 * b as i128).sum();
    let sxx: i128 = xs.iter().map(|&a| a as i128 * a as i128).sum();
    let num = l * sxy - sx * sy;
    let den = l * sxx - sx * sx;
    if den == 0 {
        return Ok(None);
    }
    let r = Ratio::new(num, den);
    let to64 = |v: i128| i64::try_from(v).map_err(|_| CoarseError::Overflow("regression slope"));
    Ok(Some(Ratio::new(to64(*r.numer())?, to64(*r.denom())?)))
}

/// Parameters of an expanding audit. Unset fields take their documented defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpandingParams {
    pub r_list: Vec<Dist>,
    pub n_list: Vec<u32>,
    /// Default: the largest `r`.
    pub collar: Option<Dist>,
    /// Allowed spread of tails across `r`. Default: 3 true units.
    pub band: Option<Dist>,
    /// Slack `c` in the growth test `tail(r) ≥ r − c`. Default: 2 true units.
    pub slack: Option<Dist>,
}

/// Table `f(r, n, ρ) = max d(H_n x, H_n y)` over `y ∈ B_r(x)` and window
/// points `x` with `d(x,p) ≥ ρ`.
///
/// Tails are the maxima over the two largest grid radii. Refuted if for some
/// `n` every tail satisfies `tail(r) ≥ r − slack` and the largest-`r` tail
/// exceeds the band; supported if for every `n` the tails differ across `r`
/// by at most the band.
pub fn audit_expanding(c: &Combing, params: &ExpandingParams) -> Result<AuditReport> {
    if params.r_list.is_empty() || params.n_list.is_empty() {
        return invalid("r_list and n_list must be nonempty");
    }
    let s = c.space();
    let scale = s.scale();
    let r_list = params.r_list.clone();
    let n_list = params.n_list.clone();
    let r_max = *r_list.iter().max().unwrap();
    let collar = params.collar.unwrap_or(r_max);
    let band = params.band.unwrap_or(3 * scale);
    let slack = params.slack.unwrap_or(2 * scale);
    let (w, base) = window(c, collar)?;
    let (nr, nn) = (r_list.len(), n_list.len());

    let empty_report = || {
        report(
            c,
            Property::Expanding,
            Verdict::Inconclusive,
            collar,
            Constants::Expanding {
                r_list: r_list.clone(),
                n_list: n_list.clone(),
                rho_grid: Vec::new(),
                f: vec![vec![Vec::new(); nn]; nr],
                tails: vec![vec![None; nn]; nr],
                band,
                slack,
            },
            Vec::new(),
            vec!["grid is empty after excluding the collar".into()],
        )
    };
    if w.is_empty() {
        return Ok(empty_report());
    }

    // g[x][i*nn + j] = (value, y) maximizing over y ∈ B_{r_i}(x) at stage n_j.
    let per_point: Vec<Vec<(Dist, PointId)>> = w
        .par_iter()
        .map(|&x| {
            let nb = s.ball_with_dist(x, r_max);
            let mut g = vec![(0, x); nr * nn];
            for (j, &n) in n_list.iter().enumerate() {
                let row = s.row(c.h(x, n));
                for &(y, dxy) in &nb {
                    let v = row[c.h(y, n) as usize];
                    for (i, &r) in r_list.iter().enumerate() {
                        if dxy <= r && v > g[i * nn + j].0 {
                            g[i * nn + j] = (v, y);
                        }
                    }
                }
            }
            g
        })
        .collect();

    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(base[w[i] as usize]), w[i]));
    let mut rho_grid: Vec<Dist> = w.iter().map(|&x| base[x as usize]).collect();
    rho_grid.sort_unstable();
    rho_grid.dedup();
    let k_len = rho_grid.len();

    let mut f = vec![vec![vec![None; k_len]; nn]; nr];
    let mut arg: Vec<Vec<Vec<Option<(PointId, PointId)>>>> = vec![vec![vec![None; k_len]; nn]; nr];
    let mut best: Vec<Option<(Dist, PointId, PointId)>> = vec![None; nr * nn];
    let mut pos = 0;
    for k in (0..k_len).rev() {
        let rho = rho_grid[k];
        while pos < order.len() && base[w[order[pos]] as usize] >= rho {
            let idx = order[pos];
            let x = w[idx];
            for (cell, &(v, y)) in best.iter_mut().zip(&per_point[idx]) {
                let better = match *cell {
                    None => true,
                    Some((bv, bx, _)) => v > bv || (v == bv && x < bx),
                };
                if better {
                    *cell = Some((v, x, y));
                }
            }
            pos += 1;
        }
        for i in 0..nr {
            for j in 0..nn {
                if let Some((v, x, y)) = best[i * nn + j] {
                    f[i][j][k] = Some(v);
                    arg[i][j][k] = Some((x, y));
                }
            }
        }
    }

    let mut tails = vec![vec![None; nn]; nr];
    let mut witnesses = Vec::new();
    for i in 0..nr {
        for j in 0..nn {
            let last = k_len - 1;
            let k = if k_len >= 2 && f[i][j][last - 1] > f[i][j][last] { last - 1 } else { last };
            tails[i][j] = f[i][j][k];
            if let (Some(v), Some((x, y))) = (f[i][j][k], arg[i][j][k]) {
                witnesses.push(Witness::new(c, WitnessKind::Expansion, vec![x, y], vec![n_list[j]], v));
            }
        }
    }

    let i_max = r_list.iter().position(|&r| r == r_max).unwrap();
    let refuted = nr >= 2
        && (0..nn).any(|j| {
            (0..nr).all(|i| tails[i][j].map_or(false, |t| t >= r_list[i].saturating_sub(slack)))
                && tails[i_max][j].map_or(false, |t| t > band)
        });
    let supported = (0..nn).all(|j| {
        let vals: Vec<Dist> = (0..nr).filter_map(|i| tails[i][j]).collect();
        vals.len() == nr && vals.iter().max().unwrap() - vals.iter().min().unwrap() <= band
    });
    let verdict = if refuted {
        Verdict::RefutedAtScale
    } else if supported {
        Verdict::SupportedAtScale
    } else {
        Verdict::Inconclusive
    };
    Ok(report(
        c,
        Property::Expanding,
        verdict,
        collar,
        Constants::Expanding {
            r_list,
            n_list,
            rho_grid,
            f,
            tails,
            band,
            slack,
        },
        witnesses,
        vec![format!("tail band {band}, growth slack {slack} (scaled units)")],
    ))
}
