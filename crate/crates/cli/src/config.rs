//! TOML run configuration.

use std::path::Path;

use anyhow::{bail, Context};
use coarse_lab_core::cohomology::{ProbeParams, Ring};
use coarse_lab_core::combing::{ExpandingParams, Verdict};
use coarse_lab_core::corona::LabelMap;
use coarse_lab_core::metric_core::GroupSpec;
use coarse_lab_core::{Budget, Dist, PointId, FORMAT_VERSION};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub budget: Budget,
    pub space: SpaceConfig,
    #[serde(default)]
    pub combing: Option<CombingConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths are taken from the config file's directory.
    pub dir: Option<String>,
    pub csv: bool,
    pub dot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            csv: true,
            dot: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Cayley {
        group: GroupSpec,
        radius: u32,
    },
    Cycle {
        points: usize,
    },
    Uniform {
        points: usize,
        distance: Dist,
    },
    /// Product of two spaces; its combing is the product of the factor combings.
    Product {
        left: Box<SpaceConfig>,
        right: Box<SpaceConfig>,
        radius: Option<Dist>,
    },
    Cone {
        base: Box<SpaceConfig>,
        height: Dist,
        resolution: Dist,
        phi: PhiConfig,
    },
    WarpedCone {
        base: Box<SpaceConfig>,
        height: Dist,
        resolution: Dist,
        action: Vec<Vec<PointId>>,
    },
    File {
        path: String,
    },
    NonproperExample {
        t: u32,
    },
    NoncoherentExample {
        t: u32,
    },
}

impl SpaceConfig {
    /// The same space cut at another radius, where that makes sense.
    pub fn with_radius(&self, t: u32) -> anyhow::Result<SpaceConfig> {
        Ok(match self {
            SpaceConfig::Cayley { group, .. } => SpaceConfig::Cayley {
                group: group.clone(),
                radius: t,
            },
            SpaceConfig::NonproperExample { .. } => SpaceConfig::NonproperExample { t },
            SpaceConfig::NoncoherentExample { .. } => SpaceConfig::NoncoherentExample { t },
            _ => bail!("only Cayley balls and the example intervals can be re-truncated"),
        })
    }
}

/// `φ` evaluated into a per-height table of integer multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    /// `φ(t) = t` in true units.
    Identity,
    Constant { value: u64 },
    Table { values: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CombingConfig {
    Geodesic,
    Bresenham,
    /// The combing that comes with the space (cones, example intervals, products).
    Intrinsic,
    /// Product factors are combed with this kind.
    Product { factor: Box<CombingConfig> },
    File { path: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Supported,
    Refuted,
}

impl Expectation {
    pub fn met_by(self, v: Verdict) -> bool {
        matches!(
            (self, v),
            (Expectation::Supported, Verdict::SupportedAtScale) | (Expectation::Refuted, Verdict::RefutedAtScale)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditProperty {
    Controlled,
    Proper,
    Coherent,
    Expanding,
    All,
}

impl AuditProperty {
    pub fn name(self) -> &'static str {
        match self {
            AuditProperty::Controlled => "controlled",
            AuditProperty::Proper => "proper",
            AuditProperty::Coherent => "coherent",
            AuditProperty::Expanding => "expanding",
            AuditProperty::All => "all",
        }
    }
}

fn default_fellow() -> Vec<Dist> {
    vec![1, 2]
}

fn default_samples() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub reference: SpaceConfig,
    pub label_map: LabelMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Audit {
        property: AuditProperty,
        #[serde(default = "default_fellow")]
        fellow_radii: Vec<Dist>,
        #[serde(default)]
        k_radius: Dist,
        #[serde(default)]
        collar: Option<Dist>,
        #[serde(default)]
        expanding: ExpandingParams,
        #[serde(default)]
        expect: Option<Expectation>,
    },
    QuasiGeodesic,
    GromovFellow {
        delta: Dist,
        #[serde(default = "default_samples")]
        sample_budget: u64,
    },
    Hyperbolicity {
        #[serde(default = "default_samples")]
        sample_budget: u64,
    },
    Asdim {
        scales: Vec<Dist>,
    },
    Rips {
        r: Dist,
        dim_cap: usize,
    },
    Cohomology {
        r: Dist,
        dim_cap: usize,
        degrees: Vec<usize>,
        #[serde(default = "integers")]
        ring: Ring,
        /// Relative to the full subcomplex on points farther than `T − collar`.
        #[serde(default)]
        relative_collar: Option<Dist>,
    },
    /// `δδ = 0` and sparse against dense Smith forms on the coboundaries of `P_r`.
    SnfCheck {
        r: Dist,
        dim_cap: usize,
        #[serde(default = "default_dense_limit")]
        dense_limit: usize,
    },
    CoarseCohomology {
        truncations: Vec<u32>,
        scales: Vec<Dist>,
        degrees: Vec<usize>,
        collar: Dist,
        dim_cap: usize,
        #[serde(default = "integers")]
        ring: Ring,
    },
    Corona {
        #[serde(default)]
        annulus: Option<(Dist, Dist)>,
        #[serde(default)]
        stage: Option<u32>,
        #[serde(default)]
        threshold: Option<Dist>,
        #[serde(default)]
        edge_threshold: Option<Dist>,
        #[serde(default = "integers")]
        ring: Ring,
        #[serde(default)]
        compare: Option<CompareConfig>,
    },
    UniformTriviality {
        #[serde(flatten)]
        params: ProbeParams,
        #[serde(default = "integers")]
        ring: Ring,
    },
}

fn integers() -> Ring {
    Ring::Integers
}

fn default_dense_limit() -> usize {
    200
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Audit { .. } => "audit",
            TaskConfig::QuasiGeodesic => "quasi_geodesic",
            TaskConfig::GromovFellow { .. } => "gromov_fellow",
            TaskConfig::Hyperbolicity { .. } => "hyperbolicity",
            TaskConfig::Asdim { .. } => "asdim",
            TaskConfig::Rips { .. } => "rips",
            TaskConfig::Cohomology { .. } => "cohomology",
            TaskConfig::SnfCheck { .. } => "snf_check",
            TaskConfig::CoarseCohomology { .. } => "coarse_cohomology",
            TaskConfig::Corona { .. } => "corona",
            TaskConfig::UniformTriviality { .. } => "uniform_triviality",
        }
    }

    pub fn needs_combing(&self) -> bool {
        matches!(
            self,
            TaskConfig::Audit { .. } | TaskConfig::QuasiGeodesic | TaskConfig::GromovFellow { .. } | TaskConfig::Corona { .. }
        )
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        if cfg.format_version != FORMAT_VERSION {
            bail!("config format_version {} is not supported (expected {FORMAT_VERSION})", cfg.format_version);
        }
        if cfg.combing.is_none() {
            if let Some(t) = cfg.tasks.iter().find(|t| t.needs_combing()) {
                bail!("task `{}` needs a [combing] section", t.kind());
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies `COARSE_LAB_BUDGET_POINTS` if set.
    pub fn apply_env(&mut self) -> anyhow::Result<()> {
        if let Ok(v) = std::env::var("COARSE_LAB_BUDGET_POINTS") {
            self.budget.points = v
                .trim()
                .parse()
                .with_context(|| format!("COARSE_LAB_BUDGET_POINTS={v} is not a count"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_positions() {
        let err = RunConfig::parse("format_version = 1\n[space]\nkind = \"cayley\"\nradius = \"x\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("line"), "{err:#}");
    }

    #[test]
    fn combing_tasks_need_a_combing() {
        let text = "format_version = 1\n[space]\nkind = \"cycle\"\npoints = 6\n[[tasks]]\nkind = \"quasi_geodesic\"\n";
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn probe_params_flatten() {
        let text = "format_version = 1\n[space]\nkind = \"cycle\"\npoints = 6\n[[tasks]]\nkind = \"uniform_triviality\"\ndegree = 1\nn = 1\nbig_n = 2\nr = 1\ns = 2\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert!(matches!(&cfg.tasks[0], TaskConfig::UniformTriviality { params, .. } if params.big_n == 2));
    }

    #[test]
    fn wrong_version_is_refused() {
        assert!(RunConfig::parse("format_version = 9\n[space]\nkind = \"cycle\"\npoints = 3\n").is_err());
    }
}
