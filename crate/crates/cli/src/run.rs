//! Building spaces and combings from a config and executing tasks.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context};
use coarse_lab_core::cohomology::snf::{smith, Integers};
use coarse_lab_core::cohomology::{
    coarse_cohomology_report, coboundary, cohomology, invariants, uniform_triviality_probe, CoarseParams,
};
use coarse_lab_core::combing::{
    audit_coherent, audit_controlled, audit_expanding, audit_proper, audit_quasi_geodesic, bresenham_combing,
    check_gromov_fellow, geodesic_combing, noncoherent_example, nonproper_example, product_combing, AuditReport,
    Combing, CombingFile, Verdict,
};
use coarse_lab_core::cones::{open_cone, warped_cone, ConeSpec, WarpSpec};
use coarse_lab_core::corona::{
    boundary_clusters, cluster_nerve, corona_compare, default_recipe, nerve_cohomology, CoronaRecipe,
};
use coarse_lab_core::metric_core::{
    build_cayley_graph, cycle_space, estimate_asdim_upper, estimate_hyperbolicity, uniform_space, SpaceFile,
};
use coarse_lab_core::rips::{closed_full_subcomplex, rips_complex};
use coarse_lab_core::{Budget, FiniteMetricSpace, FORMAT_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{AuditProperty, CombingConfig, Expectation, PhiConfig, RunConfig, SpaceConfig, TaskConfig};

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn load_space(path: &Path) -> anyhow::Result<Arc<FiniteMetricSpace>> {
    let file: SpaceFile = read_json(path)?;
    if file.format_version != FORMAT_VERSION {
        bail!("{}: unsupported format_version {}", path.display(), file.format_version);
    }
    Ok(Arc::new(FiniteMetricSpace::from_file(file)?))
}

pub fn load_combing(path: &Path, space: Arc<FiniteMetricSpace>) -> anyhow::Result<Combing> {
    let file: CombingFile = read_json(path)?;
    if file.format_version != FORMAT_VERSION {
        bail!("{}: unsupported format_version {}", path.display(), file.format_version);
    }
    Ok(Combing::from_file(file, space)?)
}

/// A space, plus the combing it comes with when it has one.
pub struct Built {
    pub space: Arc<FiniteMetricSpace>,
    pub intrinsic: Option<Combing>,
}

fn plain(space: FiniteMetricSpace) -> Built {
    Built {
        space: Arc::new(space),
        intrinsic: None,
    }
}

fn with_combing(c: Combing) -> Built {
    Built {
        space: c.space().clone(),
        intrinsic: Some(c),
    }
}

fn cone_spec(base: &SpaceConfig, height: u32, resolution: u32, phi: &PhiConfig, dir: &Path, budget: &Budget) -> anyhow::Result<ConeSpec> {
    let base = build_space(base, None, dir, budget)?.space;
    let levels = if resolution == 0 { 0 } else { (height / resolution) as usize };
    let phi = match phi {
        PhiConfig::Identity => ConeSpec::identity_phi(base.scale(), height, resolution)?,
        PhiConfig::Constant { value } => vec![*value; levels],
        PhiConfig::Table { values } => values.clone(),
    };
    Ok(ConeSpec {
        base,
        phi,
        height_max: height,
        resolution,
    })
}

/// Builds a space. `combing` only matters for products, whose factors are
/// combed before the product is formed.
pub fn build_space(cfg: &SpaceConfig, combing: Option<&CombingConfig>, dir: &Path, budget: &Budget) -> anyhow::Result<Built> {
    Ok(match cfg {
        SpaceConfig::Cayley { group, radius } => Built {
            space: build_cayley_graph(group, *radius, budget)?.space,
            intrinsic: None,
        },
        SpaceConfig::Cycle { points } => plain(cycle_space(*points)?),
        SpaceConfig::Uniform { points, distance } => plain(uniform_space(*points, *distance)?),
        SpaceConfig::Product { left, right, radius } => {
            let factor = match combing {
                Some(CombingConfig::Product { factor }) => factor.as_ref().clone(),
                None | Some(CombingConfig::Intrinsic) => CombingConfig::Geodesic,
                Some(other) => bail!("a product space is combed by `product`, not {other:?}"),
            };
            let comb = |side: &SpaceConfig| -> anyhow::Result<Combing> {
                let b = build_space(side, Some(&factor), dir, budget)?;
                make_combing(&b, Some(&factor), dir, budget)?.ok_or_else(|| anyhow!("product factor has no combing"))
            };
            with_combing(product_combing(&comb(left)?, &comb(right)?, *radius, budget)?)
        }
        SpaceConfig::Cone { base, height, resolution, phi } => {
            let spec = cone_spec(base, *height, *resolution, phi, dir, budget)?;
            let (_, c) = open_cone(&spec, budget)?;
            with_combing(c)
        }
        SpaceConfig::WarpedCone { base, height, resolution, action } => {
            let cone = cone_spec(base, *height, *resolution, &PhiConfig::Identity, dir, budget)?;
            let (_, c) = warped_cone(
                &WarpSpec {
                    cone,
                    action: action.clone(),
                },
                budget,
            )?;
            with_combing(c)
        }
        SpaceConfig::File { path } => Built {
            space: load_space(&dir.join(path))?,
            intrinsic: None,
        },
        SpaceConfig::NonproperExample { t } => with_combing(nonproper_example(*t)?),
        SpaceConfig::NoncoherentExample { t } => with_combing(noncoherent_example(*t)?),
    })
}

pub fn make_combing(b: &Built, cfg: Option<&CombingConfig>, dir: &Path, budget: &Budget) -> anyhow::Result<Option<Combing>> {
    Ok(match cfg {
        None => None,
        Some(CombingConfig::Geodesic) => Some(geodesic_combing(b.space.clone(), budget)?),
        Some(CombingConfig::Bresenham) => Some(bresenham_combing(b.space.clone(), budget)?),
        Some(CombingConfig::Intrinsic) | Some(CombingConfig::Product { .. }) => {
            Some(b.intrinsic.clone().ok_or_else(|| anyhow!("this space has no combing of its own"))?)
        }
        Some(CombingConfig::File { path }) => Some(load_combing(&dir.join(path), b.space.clone())?),
    })
}

/// Everything a task reads besides its own parameters.
pub struct Inputs<'a> {
    pub space: &'a Arc<FiniteMetricSpace>,
    pub combing: Option<&'a Combing>,
    pub family: &'a [Arc<FiniteMetricSpace>],
    pub reference: Option<&'a FiniteMetricSpace>,
    pub budget: &'a Budget,
}

/// One report produced by a task.
pub struct Output {
    /// File stem after the task index, e.g. `audit_proper`.
    pub stem: String,
    /// The task with everything needed to recompute this one report.
    pub task: TaskConfig,
    pub payload: Value,
    pub verdict: Option<Verdict>,
    pub expect: Option<Expectation>,
    pub csv: Option<String>,
    pub dot: Option<String>,
}

fn output(stem: &str, task: &TaskConfig, payload: Value) -> Output {
    Output {
        stem: stem.to_string(),
        task: task.clone(),
        payload,
        verdict: None,
        expect: None,
        csv: None,
        dot: None,
    }
}

/// Stages audited for expansion when the config lists none.
const DEFAULT_STAGES: [u32; 4] = [1, 2, 3, 4];

fn need_combing<'a>(inputs: &Inputs<'a>) -> anyhow::Result<&'a Combing> {
    inputs.combing.ok_or_else(|| anyhow!("task needs a combing"))
}

fn audit_one(c: &Combing, task: &TaskConfig, property: AuditProperty) -> anyhow::Result<AuditReport> {
    let TaskConfig::Audit { fellow_radii, k_radius, collar, expanding, .. } = task else { unreachable!() };
    Ok(match property {
        AuditProperty::Controlled => audit_controlled(c, fellow_radii, *collar)?,
        AuditProperty::Proper => audit_proper(c, *k_radius, *collar)?,
        AuditProperty::Coherent => audit_coherent(c, *collar)?,
        AuditProperty::Expanding => {
            let mut p = expanding.clone();
            p.collar = p.collar.or(*collar);
            audit_expanding(c, &p)?
        }
        AuditProperty::All => unreachable!(),
    })
}

/// Checks `δδ = 0` on every pair of consecutive coboundaries and compares the
/// sparse invariants with a dense Smith form on matrices within `dense_limit`.
pub fn snf_check(
    space: &FiniteMetricSpace,
    r: u32,
    dim_cap: usize,
    dense_limit: usize,
    budget: &Budget,
) -> anyhow::Result<Value> {
    let cx = rips_complex(space, r, dim_cap, budget)?;
    let mut degrees = Vec::new();
    let mut all_ok = true;
    for q in 0..dim_cap {
        let d = coboundary(&cx, q, None)?;
        let square_zero = if q + 1 < dim_cap {
            let d1 = coboundary(&cx, q + 1, None)?;
            Some(d1.compose(&d)?.iter().flatten().all(|&v| v == 0))
        } else {
            None
        };
        let (rank, factors) = invariants(&d.rows, d.ncols(), None, budget)?;
        let dense = if d.nrows() <= dense_limit && d.ncols() <= dense_limit {
            let snf = smith(&Integers, d.to_dense(), d.nrows(), d.ncols(), false, budget)?;
            let dense_factors: Vec<_> = snf.diag.iter().filter(|v| *v != &1.into() && *v != &(-1).into()).cloned().collect();
            Some(snf.rank() == rank && dense_factors == factors)
        } else {
            None
        };
        all_ok &= square_zero != Some(false) && dense != Some(false);
        degrees.push(json!({
            "degree": q,
            "rows": d.nrows(),
            "cols": d.ncols(),
            "rank": rank,
            "torsion": factors.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            "square_zero": square_zero,
            "dense_agrees": dense,
        }));
    }
    Ok(json!({ "scale": r, "dim_cap": dim_cap, "simplex_counts": cx.counts(), "degrees": degrees, "all_ok": all_ok }))
}

/// Runs one task. An `audit` with `property = "all"` yields four outputs.
pub fn execute(task: &TaskConfig, inputs: &Inputs) -> anyhow::Result<Vec<Output>> {
    let budget = inputs.budget;
    let space = inputs.space;
    Ok(match task {
        TaskConfig::Audit { property, expect, .. } => {
            let c = need_combing(inputs)?;
            let props = match property {
                AuditProperty::All => vec![
                    AuditProperty::Controlled,
                    AuditProperty::Proper,
                    AuditProperty::Coherent,
                    AuditProperty::Expanding,
                ],
                p => vec![*p],
            };
            props
                .into_iter()
                .map(|p| {
                    let mut single = task.clone();
                    if let TaskConfig::Audit { property, expanding, fellow_radii, .. } = &mut single {
                        *property = p;
                        if p == AuditProperty::Expanding {
                            if expanding.r_list.is_empty() {
                                expanding.r_list = fellow_radii.clone();
                            }
                            if expanding.n_list.is_empty() {
                                expanding.n_list = DEFAULT_STAGES.to_vec();
                            }
                        }
                    }
                    let report = audit_one(c, &single, p)?;
                    let mut o = output(&format!("audit_{}", p.name()), &single, serde_json::to_value(&report)?);
                    o.verdict = Some(report.verdict);
                    o.expect = *expect;
                    o.csv = Some(report.to_csv());
                    Ok(o)
                })
                .collect::<anyhow::Result<Vec<_>>>()?
        }
        TaskConfig::QuasiGeodesic => {
            vec![output("quasi_geodesic", task, serde_json::to_value(audit_quasi_geodesic(need_combing(inputs)?))?)]
        }
        TaskConfig::GromovFellow { delta, sample_budget } => {
            let r = check_gromov_fellow(need_combing(inputs)?, *delta, *sample_budget)?;
            vec![output("gromov_fellow", task, serde_json::to_value(r)?)]
        }
        TaskConfig::Hyperbolicity { sample_budget } => {
            let r = estimate_hyperbolicity(space, *sample_budget);
            vec![output("hyperbolicity", task, serde_json::to_value(r)?)]
        }
        TaskConfig::Asdim { scales } => {
            vec![output("asdim", task, serde_json::to_value(estimate_asdim_upper(space, scales)?)?)]
        }
        TaskConfig::Rips { r, dim_cap } => {
            let cx = rips_complex(space, *r, *dim_cap, budget)?;
            let payload = json!({
                "scale": r,
                "dim_cap": dim_cap,
                "simplex_counts": cx.counts(),
                "total": cx.total(),
                "dim": cx.dim(),
                "truncated": cx.truncated(),
            });
            vec![output("rips", task, payload)]
        }
        TaskConfig::Cohomology { r, dim_cap, degrees, ring, relative_collar } => {
            let cx = rips_complex(space, *r, *dim_cap, budget)?;
            let rel = match relative_collar {
                Some(w) => {
                    let base = space.base_row()?;
                    let cut = space.truncation_radius().saturating_sub(*w);
                    let pts: Vec<_> = space.points().filter(|&x| base[x as usize] > cut).collect();
                    Some(closed_full_subcomplex(&cx, &pts))
                }
                None => None,
            };
            let res = cohomology(&cx, *ring, degrees, rel.as_ref(), budget)?;
            let payload = json!({
                "scale": r,
                "simplex_counts": cx.counts(),
                "relative_points": rel.as_ref().map(|h| h.count(0)),
                "result": res,
            });
            vec![output("cohomology", task, payload)]
        }
        TaskConfig::SnfCheck { r, dim_cap, dense_limit } => {
            vec![output("snf_check", task, snf_check(space, *r, *dim_cap, *dense_limit, budget)?)]
        }
        TaskConfig::CoarseCohomology { scales, degrees, collar, dim_cap, ring, .. } => {
            let params = CoarseParams {
                scales: scales.clone(),
                degrees: degrees.clone(),
                collar: *collar,
                dim_cap: *dim_cap,
                ring: *ring,
            };
            let r = coarse_cohomology_report(inputs.family, &params, budget)?;
            let mut o = output("coarse_cohomology", task, serde_json::to_value(&r)?);
            o.csv = Some(r.to_csv());
            vec![o]
        }
        TaskConfig::Corona { annulus, stage, threshold, edge_threshold, ring, compare } => {
            let c = need_combing(inputs)?;
            let d = default_recipe(c);
            let recipe = CoronaRecipe {
                annulus: annulus.unwrap_or(d.annulus),
                stage: stage.unwrap_or(d.stage),
                threshold: threshold.unwrap_or(d.threshold),
                edge_threshold: edge_threshold.unwrap_or(d.edge_threshold),
                step: d.step,
            };
            let p = boundary_clusters(c, recipe.annulus, recipe.stage, recipe.threshold)?;
            let g = cluster_nerve(c, &p, recipe.edge_threshold)?;
            let h = nerve_cohomology(&g, *ring, budget)?;
            let comparison = match (compare, inputs.reference) {
                (Some(cmp), Some(reference)) => Some(corona_compare(&p, reference, &cmp.label_map)?),
                (Some(_), None) => bail!("corona comparison needs its reference space"),
                _ => None,
            };
            let payload = json!({
                "recipe": recipe,
                "clusters": p.len(),
                "partition": p,
                "nerve": g,
                "nerve_cohomology": h,
                "comparison": comparison,
            });
            let mut o = output("corona", task, payload);
            o.dot = Some(g.to_dot());
            vec![o]
        }
        TaskConfig::UniformTriviality { params, ring } => {
            let r = uniform_triviality_probe(space, params, *ring, budget)?;
            vec![output("uniform_triviality", task, serde_json::to_value(r)?)]
        }
    })
}

/// The JSON file written for each task output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub config_name: String,
    pub task_index: usize,
    pub kind: String,
    pub task: TaskConfig,
    pub budget: Budget,
    pub space_ref: String,
    pub combing_ref: Option<String>,
    #[serde(default)]
    pub family_refs: Vec<String>,
    #[serde(default)]
    pub reference_ref: Option<String>,
    pub expect: Option<Expectation>,
    pub verdict: Option<Verdict>,
    pub payload: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskTiming {
    pub task_index: usize,
    pub kind: String,
    pub elapsed_ms: u128,
}

/// Wall-clock facts, kept apart from the reports so those stay byte-stable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub format_version: u32,
    pub tool_version: String,
    pub config_name: String,
    pub config_path: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub threads: usize,
    pub tasks: Vec<TaskTiming>,
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub reports: Vec<PathBuf>,
    /// One line per audit whose verdict differs from its declared expectation.
    pub unmet: Vec<String>,
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn run(config_path: &Path, out: Option<&Path>) -> anyhow::Result<RunSummary> {
    let started = unix_ms();
    let mut cfg = RunConfig::load(config_path)?;
    cfg.apply_env()?;
    let dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out_dir = match (out, &cfg.output.dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => dir.join(d),
        (None, None) => {
            let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            PathBuf::from(format!("{stem}_out"))
        }
    };
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let budget = cfg.budget;

    let built = build_space(&cfg.space, cfg.combing.as_ref(), &dir, &budget)?;
    let combing = make_combing(&built, cfg.combing.as_ref(), &dir, &budget)?;
    write_json(&out_dir.join("space.json"), &built.space.to_file())?;
    let combing_ref = match &combing {
        Some(c) => {
            write_json(&out_dir.join("combing.json"), &c.to_file("space.json"))?;
            Some("combing.json".to_string())
        }
        None => None,
    };

    let mut summary = RunSummary {
        out_dir: out_dir.clone(),
        reports: Vec::new(),
        unmet: Vec::new(),
    };
    let mut timings = Vec::new();
    for (i, task) in cfg.tasks.iter().enumerate() {
        let t0 = Instant::now();
        let idx = i + 1;
        let mut family = Vec::new();
        let mut family_refs = Vec::new();
        if let TaskConfig::CoarseCohomology { truncations, .. } = task {
            for &t in truncations {
                let s = build_space(&cfg.space.with_radius(t)?, cfg.combing.as_ref(), &dir, &budget)?.space;
                let name = format!("{idx:02}_family_T{t}.json");
                write_json(&out_dir.join(&name), &s.to_file())?;
                family.push(s);
                family_refs.push(name);
            }
        }
        let mut reference = None;
        let mut reference_ref = None;
        if let TaskConfig::Corona { compare: Some(cmp), .. } = task {
            let s = build_space(&cmp.reference, None, &dir, &budget)?.space;
            let name = format!("{idx:02}_reference.json");
            write_json(&out_dir.join(&name), &s.to_file())?;
            reference = Some(s);
            reference_ref = Some(name);
        }
        let inputs = Inputs {
            space: &built.space,
            combing: combing.as_ref(),
            family: &family,
            reference: reference.as_deref(),
            budget: &budget,
        };
        let outputs = execute(task, &inputs).with_context(|| format!("task {idx} ({})", task.kind()))?;
        for o in outputs {
            if let (Some(e), Some(v)) = (o.expect, o.verdict) {
                if !e.met_by(v) {
                    summary.unmet.push(format!("task {idx} {}: expected {e:?}, got {v:?}", o.stem));
                }
            }
            let report = Report {
                format_version: FORMAT_VERSION,
                config_name: cfg.name.clone(),
                task_index: idx,
                kind: task.kind().to_string(),
                task: o.task,
                budget,
                space_ref: "space.json".into(),
                combing_ref: if task.needs_combing() { combing_ref.clone() } else { None },
                family_refs: family_refs.clone(),
                reference_ref: reference_ref.clone(),
                expect: o.expect,
                verdict: o.verdict,
                payload: o.payload,
            };
            let path = out_dir.join(format!("{idx:02}_{}.json", o.stem));
            write_json(&path, &report)?;
            summary.reports.push(path);
            if cfg.output.csv {
                if let Some(csv) = o.csv {
                    std::fs::write(out_dir.join(format!("{idx:02}_{}.csv", o.stem)), csv)?;
                }
            }
            if cfg.output.dot {
                if let Some(dot) = o.dot {
                    std::fs::write(out_dir.join(format!("{idx:02}_{}.dot", o.stem)), dot)?;
                }
            }
        }
        timings.push(TaskTiming {
            task_index: idx,
            kind: task.kind().to_string(),
            elapsed_ms: t0.elapsed().as_millis(),
        });
    }

    let meta = Metadata {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_name: cfg.name.clone(),
        config_path: config_path.display().to_string(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        threads: rayon::current_num_threads(),
        tasks: timings,
    };
    write_json(&out_dir.join("metadata.json"), &meta)?;
    Ok(summary)
}
