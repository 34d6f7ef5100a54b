//! Re-checking a report against the artifacts it references.

use std::path::Path;

use anyhow::{bail, Context};
use coarse_lab_core::combing::AuditReport;
use coarse_lab_core::FORMAT_VERSION;
use serde_json::Value;

use crate::run::{execute, load_combing, load_space, read_json, Inputs, Report};

const MAX_DIFFS: usize = 50;

/// Paths where two JSON values differ.
pub fn json_diff(path: &str, recorded: &Value, recomputed: &Value, out: &mut Vec<String>) {
    if out.len() >= MAX_DIFFS {
        return;
    }
    match (recorded, recomputed) {
        (Value::Object(a), Value::Object(b)) => {
            let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
            for k in keys {
                let p = format!("{path}.{k}");
                match (a.get(k), b.get(k)) {
                    (Some(x), Some(y)) => json_diff(&p, x, y, out),
                    (x, y) => out.push(format!("{p}: recorded {}, recomputed {}", show(x), show(y))),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                json_diff(&format!("{path}[{i}]"), x, y, out);
            }
        }
        (a, b) if a != b => out.push(format!("{path}: recorded {}, recomputed {}", short(a), short(b))),
        _ => {}
    }
}

fn show(v: Option<&Value>) -> String {
    v.map_or("nothing".into(), short)
}

fn short(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 80 {
        format!("{}...", &s[..77])
    } else {
        s
    }
}

/// Every mismatch found; empty means the report reproduces exactly.
pub fn verify(report_path: &Path) -> anyhow::Result<Vec<String>> {
    let report: Report = read_json(report_path)?;
    if report.format_version != FORMAT_VERSION {
        bail!("unsupported report format_version {}", report.format_version);
    }
    let dir = report_path.parent().unwrap_or(Path::new("."));
    let space = load_space(&dir.join(&report.space_ref)).context("loading the referenced space")?;
    let combing = match &report.combing_ref {
        Some(r) => Some(load_combing(&dir.join(r), space.clone()).context("loading the referenced combing")?),
        None => None,
    };
    let family = report
        .family_refs
        .iter()
        .map(|r| load_space(&dir.join(r)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let reference = match &report.reference_ref {
        Some(r) => Some(load_space(&dir.join(r))?),
        None => None,
    };

    let mut diffs = Vec::new();
    if report.kind == "audit" {
        let audit: AuditReport = serde_json::from_value(report.payload.clone()).context("audit payload")?;
        let c = combing.as_ref().context("audit report without a combing")?;
        for (i, w) in audit.witnesses.iter().enumerate() {
            match w.evaluate(c) {
                Ok(d) if d == w.distance => {}
                Ok(d) => diffs.push(format!("witness {i} ({:?} at {:?}): recorded {}, re-evaluated {d}", w.kind, w.labels, w.distance)),
                Err(e) => diffs.push(format!("witness {i}: {e}")),
            }
        }
        if report.verdict != Some(audit.verdict) {
            diffs.push(format!("verdict: envelope says {:?}, payload says {:?}", report.verdict, audit.verdict));
        }
    }

    let inputs = Inputs {
        space: &space,
        combing: combing.as_ref(),
        family: &family,
        reference: reference.as_deref(),
        budget: &report.budget,
    };
    let outputs = execute(&report.task, &inputs)?;
    let [out] = outputs.as_slice() else {
        bail!("report task expands to {} outputs; expected one", outputs.len());
    };
    json_diff("payload", &report.payload, &out.payload, &mut diffs);
    Ok(diffs)
}
