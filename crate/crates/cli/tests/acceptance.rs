//! End-to-end acceptance over the shipped example configs.
//!
//! Every criterion prints one `PASS`/`FAIL` line to stderr; the test fails
//! if any criterion does.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use coarse_lab_cli::config::{RunConfig, TaskConfig};
use coarse_lab_cli::run::{build_space, load_combing, load_space, read_json, Report};
use coarse_lab_core::cohomology::snf::{smith, Integers};
use coarse_lab_core::cohomology::{coboundary, invariants, CoarseCohomologyReport, CohomologyResult};
use coarse_lab_core::combing::{audit_coherent, audit_proper, AuditReport, Constants, Verdict, WitnessKind};
use coarse_lab_core::rips::{closed_full_subcomplex, rips_complex, SimplicialComplex, SubcomplexHandle};
use coarse_lab_core::{Budget, FiniteMetricSpace};
use num_bigint::BigInt;
use serde_json::Value;

/// Wall-clock limit per example run.
const RUN_LIMIT: Duration = Duration::from_secs(60);
/// Criterion 4: Bresenham tails may reach this many scale units.
const BRESENHAM_TAIL_UNITS: u32 = 3;
/// Criterion 4: product tails must reach `r − PRODUCT_TAIL_SLACK`.
const PRODUCT_TAIL_SLACK: u32 = 2;
/// Criterion 6: matrices up to this size in each dimension are cross-checked densely.
const DENSE_LIMIT: usize = 200;
/// Cluster count slack against the circle model of the ℤ² corona.
const CIRCLE_COUNT_SLACK: i64 = 2;

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coarse-lab"))
}

struct Run {
    out: PathBuf,
    code: i32,
    elapsed: Duration,
}

fn run_example(name: &str, out: &Path) -> Run {
    let t = Instant::now();
    let status = bin()
        .arg("run")
        .arg(examples().join(format!("{name}.toml")))
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn coarse-lab");
    if !status.status.success() && status.status.code() != Some(2) {
        panic!("{name}: {}", String::from_utf8_lossy(&status.stderr));
    }
    Run {
        out: out.to_path_buf(),
        code: status.status.code().unwrap_or(-1),
        elapsed: t.elapsed(),
    }
}

fn report(run: &Run, file: &str) -> Report {
    read_json(&run.out.join(file)).unwrap()
}

fn audit(run: &Run, file: &str) -> AuditReport {
    serde_json::from_value(report(run, file).payload).unwrap()
}

struct Ledger {
    failed: Vec<usize>,
}

impl Ledger {
    fn line(&mut self, n: usize, title: &str, ok: bool, detail: String) {
        let mut err = std::io::stderr();
        writeln!(err, "criterion {n:>2} {}: {title} ({detail})", if ok { "PASS" } else { "FAIL" }).unwrap();
        if !ok {
            self.failed.push(n);
        }
    }
}

fn c1(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let r = &runs["c1_nonproper"];
    let a = audit(r, "01_audit_proper.json");
    let Constants::Proper { stages, m, .. } = &a.constants else { panic!() };
    let m10 = stages.iter().position(|&n| n == 10).map(|k| m[k]);
    let w = a.witnesses.iter().find(|w| w.kind == WitnessKind::Preimage && w.stages == [10]);
    let ok = a.verdict == Verdict::RefutedAtScale
        && m10 == Some(100)
        && w.is_some_and(|w| w.labels == ["100"] && w.distance == 100)
        && r.code == 0;
    l.line(1, "nonproper preimages", ok, format!("m(10) = {m10:?}, witness {:?}, {:?}", w.map(|w| &w.labels), a.verdict));
}

fn c2(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let a = audit(&runs["c2_noncoherent"], "01_audit_coherent.json");
    let Constants::Coherent { radii, .. } = &a.constants else { panic!() };
    let mut bad = Vec::new();
    for n in 1..=10u32 {
        let k = radii.iter().position(|&v| v == 12 * n);
        let w = k.map(|k| &a.witnesses[k]);
        let want = (vec![(12 * n).to_string()], vec![4 * n, 5 * n], 4 * n);
        if w.map(|w| (w.labels.clone(), w.stages.clone(), w.distance)) != Some(want) {
            bad.push(n);
        }
    }
    let ok = a.verdict == Verdict::RefutedAtScale && bad.is_empty();
    l.line(2, "noncoherent gaps 4n at (12n, 4n, 5n)", ok, format!("mismatched n: {bad:?}, {:?}", a.verdict));
}

fn c3(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let r = &runs["c3_free_group_tree"];
    let all_supported = ["controlled", "proper", "coherent", "expanding"]
        .iter()
        .all(|p| audit(r, &format!("01_audit_{p}.json")).verdict == Verdict::SupportedAtScale);
    let coh = audit(r, "01_audit_coherent.json");
    let Constants::Coherent { coh: table, .. } = &coh.constants else { panic!() };
    let coh_zero = table.iter().all(|&v| v == 0);
    let e = audit(r, "02_audit_expanding.json");
    let Constants::Expanding { rho_grid, .. } = &e.constants else { panic!() };
    let mut exp_zero = true;
    for r_ in 1..=3 {
        for n in 1..=5 {
            for &rho in rho_grid.iter().filter(|&&rho| rho >= n + r_) {
                exp_zero &= e.expanding_value(r_, n, rho) == Some(0);
            }
        }
    }
    let h = report(r, "03_hyperbolicity.json").payload;
    let delta_zero = h["delta"] == serde_json::json!([0, 1]);
    let clusters = report(r, "04_corona.json").payload["clusters"].as_u64();
    let ok = all_supported && coh_zero && exp_zero && delta_zero && clusters == Some(36) && r.code == 0;
    l.line(
        3,
        "tree suite",
        ok,
        format!(
            "audit all supported {all_supported}, coherence table zero {coh_zero}, expansion zero {exp_zero}, delta {} on {} points, clusters {clusters:?}",
            h["delta"], h["sample_size"]
        ),
    );
}

fn c4(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let b = audit(&runs["c4a_plane_bresenham"], "01_audit_expanding.json");
    let bound = BRESENHAM_TAIL_UNITS * b.scale;
    let mut worst_b = 0;
    for r in 1..=4 {
        for n in 1..=8 {
            worst_b = worst_b.max(b.expanding_tail(r, n).unwrap_or(u32::MAX));
        }
    }
    let p = audit(&runs["c4b_plane_product"], "01_audit_expanding.json");
    let tails: Vec<_> = [4, 6, 8].iter().map(|&r| (r, p.expanding_tail(r, 8))).collect();
    let prod_ok = tails.iter().all(|&(r, t)| t.is_some_and(|t| t >= r - PRODUCT_TAIL_SLACK));
    let ok = b.verdict == Verdict::SupportedAtScale && worst_b <= bound && p.verdict == Verdict::RefutedAtScale && prod_ok;
    l.line(
        4,
        "expansion dichotomy on Z^2",
        ok,
        format!("bresenham {:?} max tail {worst_b} <= {bound}; product {:?} tails {tails:?}", b.verdict, p.verdict),
    );
}

fn betti(run: &Run, file: &str) -> Vec<usize> {
    let r: CohomologyResult = serde_json::from_value(report(run, file).payload["result"].clone()).unwrap();
    r.betti
}

fn c5(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let cyc = betti(&runs["c5a_cycle"], "01_cohomology.json");
    let simplex = betti(&runs["c5b_simplex"], "01_cohomology.json");
    let line = betti(&runs["c5c_line_relative"], "01_cohomology.json");
    let coarse: CoarseCohomologyReport =
        serde_json::from_value(report(&runs["c5d_plane_coarse"], "01_coarse_cohomology.json").payload).unwrap();
    let b2: Vec<_> = [5, 6].iter().map(|&t| coarse.cell(t, 2).map(|c| c.betti[2])).collect();
    let ok = cyc == [1, 1] && simplex == [1, 0, 0] && line == [0, 1] && b2 == [Some(1), Some(1)] && coarse.stable;
    l.line(
        5,
        "cohomology oracles",
        ok,
        format!("C6 {cyc:?}, simplex {simplex:?}, line rel ends {line:?}, Z^2 betti_2 at T=5,6 {b2:?} stable {}", coarse.stable),
    );
}

/// Rank and invariant factors above 1 by plain Smith reduction over big integers.
fn naive_smith(mut a: Vec<Vec<BigInt>>) -> (usize, Vec<BigInt>) {
    let zero = BigInt::from(0);
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        let mut best: Option<(BigInt, usize, usize)> = None;
        for (i, row) in a.iter().enumerate().skip(t) {
            for (j, v) in row.iter().enumerate().skip(t) {
                let m = if v < &zero { -v } else { v.clone() };
                if m != zero && best.as_ref().map_or(true, |b| m < b.0) {
                    best = Some((m, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        a.swap(t, i);
        for r in a.iter_mut() {
            r.swap(t, j);
        }
        let p = a[t][t].clone();
        let mut dirty = false;
        for i in t + 1..rows {
            if a[i][t] != zero {
                let q = &a[i][t] / &p;
                for j in t..cols {
                    let v = &q * &a[t][j];
                    a[i][j] -= v;
                }
                dirty |= a[i][t] != zero;
            }
        }
        for j in t + 1..cols {
            if a[t][j] != zero {
                let q = &a[t][j] / &p;
                for i in t..rows {
                    let v = &q * &a[i][t];
                    a[i][j] -= v;
                }
                dirty |= a[t][j] != zero;
            }
        }
        if dirty {
            continue;
        }
        if let Some(i) = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| &a[i][j] % &p != zero)) {
            for j in t..cols {
                let v = a[i][j].clone();
                a[t][j] += v;
            }
            continue;
        }
        diag.push(if p < zero { -p } else { p });
        t += 1;
    }
    let one = BigInt::from(1);
    (diag.len(), diag.into_iter().filter(|d| d != &one).collect())
}

/// `(checked matrices, dense-checked matrices, failures)` for one complex.
fn check_complex(cx: &SimplicialComplex, rel: Option<&SubcomplexHandle>, fails: &mut Vec<String>, tag: &str) -> (usize, usize) {
    let b = Budget::default();
    let top = cx.dim_cap();
    let (mut checked, mut dense) = (0, 0);
    for q in 0..top {
        let d = coboundary(cx, q, rel).unwrap();
        checked += 1;
        if q + 1 < top {
            let d1 = coboundary(cx, q + 1, rel).unwrap();
            if !d1.compose(&d).unwrap().iter().flatten().all(|&v| v == 0) {
                fails.push(format!("{tag}: delta delta != 0 in degree {q}"));
            }
        }
        if d.nrows() <= DENSE_LIMIT && d.ncols() <= DENSE_LIMIT {
            dense += 1;
            let sparse = invariants(&d.rows, d.ncols(), None, &b).unwrap();
            let naive = naive_smith(d.to_dense());
            let snf = smith(&Integers, d.to_dense(), d.nrows(), d.ncols(), false, &b).unwrap();
            let one = BigInt::from(1);
            let lib_dense: Vec<BigInt> = snf.diag.iter().filter(|v| *v != &one).cloned().collect();
            if sparse != naive || (snf.rank(), lib_dense) != naive {
                fails.push(format!("{tag}: Smith forms disagree in degree {q}"));
            }
        }
    }
    (checked, dense)
}

fn c6(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let mut fails = Vec::new();
    let (mut checked, mut dense, mut reports) = (0, 0, 0);
    for (name, run) in runs {
        let cfg = RunConfig::load(&examples().join(format!("{name}.toml"))).unwrap();
        let space = load_space(&run.out.join("space.json")).unwrap();
        for (i, task) in cfg.tasks.iter().enumerate() {
            let idx = i + 1;
            match task {
                TaskConfig::Rips { r, dim_cap } | TaskConfig::Cohomology { r, dim_cap, .. } => {
                    let cx = rips_complex(&space, *r, *dim_cap, &Budget::default()).unwrap();
                    let (c, d) = check_complex(&cx, None, &mut fails, name);
                    checked += c;
                    dense += d;
                }
                TaskConfig::SnfCheck { r, dim_cap, .. } => {
                    reports += 1;
                    let p = report(run, &format!("{idx:02}_snf_check.json")).payload;
                    if p["all_ok"] != Value::Bool(true) {
                        fails.push(format!("{name}: snf_check report not ok"));
                    }
                    let cx = rips_complex(&space, *r, *dim_cap, &Budget::default()).unwrap();
                    let (c, d) = check_complex(&cx, None, &mut fails, name);
                    checked += c;
                    dense += d;
                }
                TaskConfig::CoarseCohomology { truncations, scales, collar, dim_cap, .. } => {
                    for &t in truncations {
                        let s = load_space(&run.out.join(format!("{idx:02}_family_T{t}.json"))).unwrap();
                        let base = s.base_row().unwrap();
                        let ring: Vec<_> = s.points().filter(|&x| base[x as usize] > t.saturating_sub(*collar)).collect();
                        for &r in scales {
                            let cx = rips_complex(&s, r, *dim_cap, &Budget::default()).unwrap();
                            let h = closed_full_subcomplex(&cx, &ring);
                            let (c, d) = check_complex(&cx, Some(&h), &mut fails, name);
                            checked += c;
                            dense += d;
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let ok = fails.is_empty() && dense > 0;
    l.line(
        6,
        "coboundaries square to zero and Smith forms agree",
        ok,
        format!("{checked} coboundaries, {dense} dense cross-checks, {reports} snf_check reports, failures {fails:?}"),
    );
}

fn c7(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, want) in [("c7a_cone_identity", 3), ("c7b_cone_bounded", 1)] {
        let p = report(&runs[name], "01_corona.json").payload;
        let clusters = p["clusters"].as_u64();
        let exact = p["comparison"]["exact_match"] == Value::Bool(true);
        let recipe = (p["recipe"]["stage"].as_u64(), p["recipe"]["threshold"].as_u64());
        ok &= clusters == Some(want) && exact && recipe == (Some(12), Some(2));
        parts.push(format!("{name}: {clusters:?} clusters, exact {exact}, stage/threshold {recipe:?}"));
    }
    l.line(7, "cone corona dichotomy", ok, parts.join("; "));
}

fn c8(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, want_dim, want_betti) in [("c8a_tree_dimension", 0usize, None), ("c8b_plane_dimension", 1, Some(vec![1, 1, 0]))] {
        let r = &runs[name];
        let p = report(r, "01_corona.json").payload;
        let dim = p["nerve_cohomology"]["dimension"].as_u64().map(|d| d as usize);
        let nb: Vec<usize> = serde_json::from_value(p["nerve_cohomology"]["cohomology"]["betti"].clone()).unwrap();
        let nodes = p["nerve"]["labels"].as_array().map_or(0, |a| a.len());
        let edges = p["nerve"]["edges"].as_array().map_or(0, |a| a.len());
        let coarse: CoarseCohomologyReport = serde_json::from_value(report(r, "02_coarse_cohomology.json").payload).unwrap();
        let top = coarse.top_degree;
        let echo = dim.map(|d| d + 1) == top;
        ok &= dim == Some(want_dim) && coarse.signature_stable && echo && want_betti.as_ref().map_or(edges == 0, |b| &nb == b);
        parts.push(format!(
            "{name}: nerve {nodes} nodes {edges} edges betti {nb:?} dim {dim:?}, top stable degree {top:?}, dim + 1 = top {echo}"
        ));
    }
    let circle = report(&runs["c8b_plane_dimension"], "03_corona.json").payload;
    let diff = circle["comparison"]["count_difference"].as_i64().unwrap_or(i64::MAX);
    ok &= diff.abs() <= CIRCLE_COUNT_SLACK;
    parts.push(format!("circle model count difference {diff}"));
    l.line(8, "nerve dimension + 1 = top coarse degree", ok, parts.join("; "));
}

fn c9(runs: &BTreeMap<String, Run>, l: &mut Ledger) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (name, run) in runs {
        // From the reports the run wrote.
        let mut verdicts: BTreeMap<&str, Verdict> = BTreeMap::new();
        let entries: Vec<_> = std::fs::read_dir(&run.out).unwrap().map(|e| e.unwrap().path()).collect();
        for path in &entries {
            let f = path.file_name().unwrap().to_str().unwrap();
            for prop in ["coherent", "proper"] {
                if f.ends_with(&format!("_audit_{prop}.json")) {
                    let a: AuditReport = serde_json::from_value(read_json::<Report>(path).unwrap().payload).unwrap();
                    verdicts.insert(prop, a.verdict);
                }
            }
        }
        if verdicts.get("coherent") == Some(&Verdict::SupportedAtScale) && verdicts.get("proper") == Some(&Verdict::RefutedAtScale) {
            bad.push(format!("{name} (reports)"));
        }
        // And directly on every combing in the corpus.
        if run.out.join("combing.json").exists() {
            let space = load_space(&run.out.join("space.json")).unwrap();
            let c = load_combing(&run.out.join("combing.json"), space.clone()).unwrap();
            let coh = audit_coherent(&c, None).unwrap().verdict;
            let prop = audit_proper(&c, space.unit_step(), None).unwrap().verdict;
            checked += 1;
            if coh == Verdict::SupportedAtScale && prop == Verdict::RefutedAtScale {
                bad.push(name.clone());
            }
        }
    }
    l.line(9, "coherent combings are not refuted as proper", bad.is_empty() && checked > 0, format!("{checked} combings, violations {bad:?}"));
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "metadata.json")
        .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), std::fs::read(&p).unwrap()))
        .collect()
}

fn c10(runs: &BTreeMap<String, Run>, again: &BTreeMap<String, Run>, l: &mut Ledger) {
    let mut differ = Vec::new();
    let mut unverified = Vec::new();
    let mut verified = 0;
    for (name, run) in runs {
        if files(&run.out) != files(&again[name].out) {
            differ.push(name.clone());
        }
        for (f, _) in files(&run.out) {
            let path = run.out.join(&f);
            let is_report = f.ends_with(".json") && read_json::<Report>(&path).is_ok();
            if is_report {
                let out = bin().arg("verify").arg(&path).output().unwrap();
                if out.status.success() {
                    verified += 1;
                } else {
                    unverified.push(f);
                }
            }
        }
    }
    let ok = differ.is_empty() && unverified.is_empty() && verified > 0;
    l.line(10, "determinism and verification", ok, format!("{verified} reports verified, differing runs {differ:?}, failed verify {unverified:?}"));
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut names: Vec<String> = std::fs::read_dir(examples())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| p.file_stem().unwrap().to_str().unwrap().to_string())
        .collect();
    names.sort();
    let mut runs = BTreeMap::new();
    let mut again = BTreeMap::new();
    for n in &names {
        runs.insert(n.clone(), run_example(n, &tmp.path().join("a").join(n)));
        again.insert(n.clone(), run_example(n, &tmp.path().join("b").join(n)));
    }
    let slow: Vec<_> = runs.iter().filter(|(_, r)| r.elapsed > RUN_LIMIT).map(|(n, r)| (n.clone(), r.elapsed)).collect();
    assert!(slow.is_empty(), "examples over {RUN_LIMIT:?}: {slow:?}");
    let failing: Vec<_> = runs.iter().filter(|(_, r)| r.code != 0).map(|(n, r)| (n.clone(), r.code)).collect();
    assert!(failing.is_empty(), "examples with unmet expectations: {failing:?}");
    // The config parses back into spaces directly as well.
    for n in &names {
        let cfg = RunConfig::load(&examples().join(format!("{n}.toml"))).unwrap();
        let direct: std::sync::Arc<FiniteMetricSpace> = build_space(&cfg.space, cfg.combing.as_ref(), &examples(), &cfg.budget).unwrap().space;
        assert_eq!(direct.to_file(), load_space(&runs[n].out.join("space.json")).unwrap().to_file(), "{n}");
    }

    let mut l = Ledger { failed: Vec::new() };
    c1(&runs, &mut l);
    c2(&runs, &mut l);
    c3(&runs, &mut l);
    c4(&runs, &mut l);
    c5(&runs, &mut l);
    c6(&runs, &mut l);
    c7(&runs, &mut l);
    c8(&runs, &mut l);
    c9(&runs, &mut l);
    c10(&runs, &again, &mut l);
    assert!(l.failed.is_empty(), "failed criteria: {:?}", l.failed);
}
