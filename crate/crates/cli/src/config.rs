use std::fmt;
use std::path::{Path, PathBuf};

use mcqmc::bounds::ballwalk_gap_bound;
use mcqmc::search::{CandidateKind, Objective};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Experiment description as written in the config file. Keys are kebab-case
/// and anything unrecognised is rejected.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub density: DensitySpec,
    pub gamma: Option<GammaSpec>,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub n: Option<usize>,
    /// Sample sizes for rate studies; defaults to `[n]`.
    pub ns: Option<Vec<usize>>,
    #[serde(default)]
    pub n0: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Seeds for rate studies; defaults to `[seed]`.
    pub seeds: Option<Vec<u64>>,
    pub delta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_replications")]
    pub mc_replications: usize,
    /// star-exact, star-bracket or pullback-mc.
    pub objective: Option<String>,
    pub candidate_kinds: Option<Vec<String>>,
    /// Inputs of the `bounds` experiment.
    pub lambda0: Option<f64>,
    pub norm: Option<f64>,
    pub output: Option<PathBuf>,
}

fn default_dimension() -> usize {
    1
}

fn default_kernel() -> String {
    "metropolis-ballwalk".into()
}

fn default_k() -> usize {
    1
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_replications() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Discrepancy,
    Pullback,
    Search,
    RateStudy,
    Bounds,
    Invert,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Discrepancy => "discrepancy",
            ExperimentKind::Pullback => "pullback",
            ExperimentKind::Search => "search",
            ExperimentKind::RateStudy => "rate-study",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Invert => "invert",
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub name: String,
    #[serde(default)]
    pub alpha: f64,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self { name: "uniform".into(), alpha: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    MetropolisBallwalk,
    Direct,
    LazyDirect(f64),
}

/// A checked config with every derived setting resolved.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub kernel: Kernel,
    /// Step size for the ball walk; `None` for the other kernels.
    pub gamma: Option<f64>,
    pub gamma_from_keyword: bool,
    pub objective: Objective,
    pub candidate_kinds: Vec<CandidateKind>,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

impl Plan {
    pub fn manifest_path(&self) -> PathBuf {
        let stem = self.output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        self.output.with_file_name(format!("{stem}.manifest.json"))
    }
}

/// 1-based line of the first `key = …` assignment, if present.
fn line_of(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

struct Checker<'a> {
    source: &'a str,
}

impl Checker<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::Config { line: line_of(self.source, key), key: key.to_string(), message: message.into() }
    }

    fn ensure(&self, ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<(), CliError> {
        if ok {
            Ok(())
        } else {
            Err(self.err(key, message()))
        }
    }
}

fn parse_kernel(s: &str) -> Option<Kernel> {
    match s {
        "metropolis-ballwalk" => Some(Kernel::MetropolisBallwalk),
        "direct" => Some(Kernel::Direct),
        _ => {
            let a = s.strip_prefix("lazy-direct(")?.strip_suffix(')')?.trim().parse().ok()?;
            Some(Kernel::LazyDirect(a))
        }
    }
}

pub fn parse(source: &str, config_path: &Path) -> Result<Plan, CliError> {
    let config: ExperimentConfig = toml::from_str(source).map_err(|e| CliError::Parse(e.to_string()))?;
    let c = Checker { source };

    c.ensure(config.dimension >= 1, "dimension", || "must be at least 1".into())?;
    let d = config.dimension;
    c.ensure(matches!(config.density.name.as_str(), "uniform" | "exp-linear"), "density", || {
        format!("unknown density {:?}; expected uniform or exp-linear", config.density.name)
    })?;
    let alpha = config.density.alpha;
    c.ensure(alpha.is_finite() && alpha >= 0.0, "density", || format!("alpha = {alpha} must be finite and ≥ 0"))?;
    c.ensure(config.density.name != "uniform" || alpha == 0.0, "density", || "uniform density takes no alpha".into())?;

    let kernel = parse_kernel(&config.kernel).ok_or_else(|| {
        c.err("kernel", format!("unknown kernel {:?}; expected metropolis-ballwalk, direct or lazy-direct(a)", config.kernel))
    })?;
    if let Kernel::LazyDirect(a) = kernel {
        c.ensure(a > 0.0 && a <= 1.0, "kernel", || format!("lazy-direct needs a ∈ (0, 1], got {a}"))?;
    }

    let (gamma, gamma_from_keyword) = match (&config.gamma, kernel) {
        (None, Kernel::MetropolisBallwalk) if config.experiment != ExperimentKind::Bounds => {
            return Err(c.err("gamma", "metropolis-ballwalk needs gamma (a number or \"gamma-star\")"));
        }
        (None, _) => (None, false),
        (Some(GammaSpec::Value(g)), _) => {
            c.ensure(g.is_finite() && *g > 0.0, "gamma", || format!("must be positive, got {g}"))?;
            (Some(*g), false)
        }
        (Some(GammaSpec::Keyword(k)), _) => {
            c.ensure(k == "gamma-star", "gamma", || format!("unknown keyword {k:?}; expected \"gamma-star\""))?;
            let (g, _) = ballwalk_gap_bound(alpha, d).map_err(|e| c.err("gamma", e.to_string()))?;
            (Some(g), true)
        }
    };

    let needs_n = !matches!(config.experiment, ExperimentKind::RateStudy | ExperimentKind::Invert) || config.ns.is_none();
    if needs_n {
        let n = config.n.ok_or_else(|| c.err("n", format!("{} needs n", config.experiment)))?;
        c.ensure(n >= 1, "n", || "must be at least 1".into())?;
    }
    let ns = config.ns.clone().unwrap_or_else(|| config.n.into_iter().collect());
    c.ensure(!ns.is_empty() && ns[0] >= 1, "ns", || "needs at least one positive sample size".into())?;
    c.ensure(ns.windows(2).all(|w| w[0] < w[1]), "ns", || "sample sizes must be strictly increasing".into())?;
    let seeds = config.seeds.clone().unwrap_or_else(|| vec![config.seed]);
    c.ensure(!seeds.is_empty(), "seeds", || "needs at least one seed".into())?;

    c.ensure(config.k >= 1, "k", || "must be at least 1".into())?;
    if let Some(delta) = config.delta {
        c.ensure(delta > 0.0 && delta <= 1.0, "delta", || format!("must lie in (0, 1], got {delta}"))?;
    }
    let eps = config.epsilon;
    c.ensure(eps > 0.0 && eps < 1.0, "epsilon", || format!("must lie in (0, 1), got {eps}"))?;
    c.ensure(config.mc_replications >= 100, "mc-replications", || {
        format!("needs at least 100 replications, got {}", config.mc_replications)
    })?;
    if let Some(l) = config.lambda0 {
        c.ensure((0.0..=1.0).contains(&l), "lambda0", || format!("must lie in [0, 1], got {l}"))?;
    }
    if let Some(norm) = config.norm {
        c.ensure(norm >= 1.0 && norm.is_finite(), "norm", || format!("must be finite and ≥ 1, got {norm}"))?;
    }

    let objective_name = config.objective.clone().unwrap_or_else(|| {
        if config.experiment == ExperimentKind::Pullback { "pullback-mc" } else { "star-exact" }.into()
    });
    let need_delta = || config.delta.ok_or_else(|| c.err("delta", format!("objective {objective_name} needs delta")));
    let objective = match objective_name.as_str() {
        "star-exact" => Objective::StarExact,
        "star-bracket" => Objective::StarBracket { delta: need_delta()? },
        "pullback-mc" => Objective::PullbackMc { m: config.mc_replications, delta: need_delta()? },
        other => {
            return Err(c.err("objective", format!("unknown objective {other:?}; expected star-exact, star-bracket or pullback-mc")))
        }
    };
    if config.experiment == ExperimentKind::Pullback {
        c.ensure(matches!(objective, Objective::PullbackMc { .. }), "objective", || {
            "the pullback experiment only supports pullback-mc".into()
        })?;
    }
    if config.experiment == ExperimentKind::Discrepancy {
        c.ensure(!matches!(objective, Objective::PullbackMc { .. }), "objective", || {
            "use the pullback experiment for pull-back discrepancy".into()
        })?;
    }

    let candidate_kinds = match &config.candidate_kinds {
        None => vec![CandidateKind::UniformRandom],
        Some(names) => names
            .iter()
            .map(|s| s.parse::<CandidateKind>().map_err(|e| c.err("candidate-kinds", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
    };
    c.ensure(!candidate_kinds.is_empty(), "candidate-kinds", || "needs at least one kind".into())?;

    if config.experiment == ExperimentKind::Invert {
        c.ensure(kernel == Kernel::MetropolisBallwalk, "kernel", || "invert needs metropolis-ballwalk".into())?;
        c.ensure(d == 1, "dimension", || "invert uses stratified targets and needs dimension = 1".into())?;
    }

    let base = config_path.parent().unwrap_or(Path::new("."));
    let output = match &config.output {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => base.join(p),
        None => config_path.with_extension("csv"),
    };
    c.ensure(output.file_name().is_some(), "output", || "must name a file".into())?;

    Ok(Plan { config, kernel, gamma, gamma_from_keyword, objective, candidate_kinds, ns, seeds, output })
}
