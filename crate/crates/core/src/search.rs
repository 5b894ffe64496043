//! Driver-sequence search: best-of-k over candidate sequences, and exact
//! construction by inverting the update toward a target point set.

use std::fmt;

use rayon::prelude::*;

use crate::bounds::{beck_bound, corollary_main_bound, cover_size_bound, main_discrepancy_bound, BoundInputs};
use crate::chain::{run_chain, ChainSystem};
use crate::discrepancy::{
    build_quantile_cover, pullback_report, pullback_volumes, star_discrepancy_bracket, star_discrepancy_exact,
    DeltaCover, DiscrepancyReport, PullbackVolumes,
};
use crate::error::{Error, Result};
use crate::measure::TargetMeasure;
use crate::rng::Rng;
use crate::sequences::{halton_sequence, scrambled_halton, uniform_driver};
use crate::types::{DriverSequence, Point, Provenance, UnitCubePoint};

/// Stream label reserved for the Monte Carlo volume terms.
const VOLUME_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    UniformRandom,
    Halton,
    ScrambledHalton,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateKind::UniformRandom => "uniform-random",
            CandidateKind::Halton => "halton",
            CandidateKind::ScrambledHalton => "scrambled-halton",
        })
    }
}

impl std::str::FromStr for CandidateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-random" => Ok(CandidateKind::UniformRandom),
            "halton" => Ok(CandidateKind::Halton),
            "scrambled-halton" => Ok(CandidateKind::ScrambledHalton),
            other => Err(Error::invalid(format!("unknown candidate kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    StarExact,
    StarBracket { delta: f64 },
    PullbackMc { m: usize, delta: f64 },
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::StarExact => f.write_str("star-exact"),
            Objective::StarBracket { delta } => write!(f, "star-bracket({delta})"),
            Objective::PullbackMc { m, delta } => write!(f, "pullback-mc({m}, {delta})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub n: usize,
    pub n0: usize,
    pub k: usize,
    pub seed: u64,
    pub candidate_kinds: Vec<CandidateKind>,
    pub objective: Objective,
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::invalid("search needs n ≥ 1 and k ≥ 1"));
        }
        if self.candidate_kinds.is_empty() {
            return Err(Error::invalid("no candidate kinds configured"));
        }
        match self.objective {
            Objective::StarBracket { delta } | Objective::PullbackMc { delta, .. } if !(delta > 0.0 && delta <= 1.0) => {
                Err(Error::invalid(format!("objective δ = {delta} not in (0, 1]")))
            }
            Objective::PullbackMc { m: 0, .. } => Err(Error::invalid("pull-back objective needs m ≥ 1")),
            _ => Ok(()),
        }
    }

    /// Candidate kinds by index. Halton is deterministic and enters once; the
    /// remaining slots go round-robin to the seeded kinds.
    pub fn candidate_plan(&self) -> Vec<CandidateKind> {
        let mut plan = Vec::with_capacity(self.k);
        if self.candidate_kinds.contains(&CandidateKind::Halton) {
            plan.push(CandidateKind::Halton);
        }
        let seeded: Vec<CandidateKind> =
            self.candidate_kinds.iter().copied().filter(|k| *k != CandidateKind::Halton).collect();
        if !seeded.is_empty() {
            let mut i = 0;
            while plan.len() < self.k {
                plan.push(seeded[i % seeded.len()]);
                i += 1;
            }
        }
        plan
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_index: usize,
    pub best_driver: DriverSequence,
    pub best_report: DiscrepancyReport,
    pub all_scores: Vec<(Provenance, f64)>,
    pub theory_bound: f64,
}

enum Prepared {
    Exact,
    Bracket(DeltaCover),
    Pullback(DeltaCover, PullbackVolumes),
}

fn prepare(system: &ChainSystem, config: &SearchConfig) -> Result<Prepared> {
    Ok(match config.objective {
        Objective::StarExact => {
            if system.dim() > 3 {
                return Err(Error::Unsupported(format!("exact scan needs d ≤ 3, got d = {}", system.dim())));
            }
            Prepared::Exact
        }
        Objective::StarBracket { delta } => Prepared::Bracket(build_quantile_cover(system.target(), delta)?),
        Objective::PullbackMc { m, delta } => {
            let cover = build_quantile_cover(system.target(), delta)?;
            let rng = Rng::new(config.seed).split(VOLUME_STREAM);
            let volumes = pullback_volumes(system, config.n0, config.n, &cover, m, &rng)?;
            Prepared::Pullback(cover, volumes)
        }
    })
}

fn candidate_driver(kind: CandidateKind, index: usize, len: usize, s: usize, seed: u64) -> Result<DriverSequence> {
    let stream = Rng::new(seed).split(index as u64);
    match kind {
        CandidateKind::UniformRandom => uniform_driver(len, s, &stream),
        CandidateKind::Halton => halton_sequence(len, s),
        CandidateKind::ScrambledHalton => scrambled_halton(len, s, &stream),
    }
}

fn score(system: &ChainSystem, driver: &DriverSequence, n0: usize, prepared: &Prepared) -> Result<DiscrepancyReport> {
    match prepared {
        Prepared::Exact => star_discrepancy_exact(run_chain(system, driver, n0)?.retained(), system.target()),
        Prepared::Bracket(cover) => star_discrepancy_bracket(run_chain(system, driver, n0)?.retained(), cover),
        Prepared::Pullback(cover, volumes) => pullback_report(system, driver, cover, volumes),
    }
}

/// Theoretical star-discrepancy bound for the system at sample size n.
pub fn theory_bound(system: &ChainSystem, n: usize) -> Result<f64> {
    let inputs = BoundInputs {
        n: n as u64,
        d: system.dim(),
        lambda0: system.lambda0(),
        nu_norm: system.nu_norm(),
        ..Default::default()
    };
    if system.lambda0() >= 1.0 {
        return Ok(f64::INFINITY);
    }
    if n >= 16 {
        return corollary_main_bound(&inputs);
    }
    let delta = (8.0 / (n as f64).powf(0.75)).min(1.0);
    let cover_size = cover_size_bound(delta, system.dim(), 0.25)?;
    Ok(main_discrepancy_bound(&BoundInputs { cover_size, delta, ..inputs })?.value)
}

/// Evaluate the configured candidates and keep the one with the smallest
/// upper value; ties go to the lower index.
pub fn best_of_k(system: &ChainSystem, config: &SearchConfig) -> Result<SearchResult> {
    config.validate()?;
    let prepared = prepare(system, config)?;
    let plan = config.candidate_plan();
    let (len, s) = (config.n0 + config.n, system.driver_dim());
    let evaluated: Vec<(DriverSequence, DiscrepancyReport)> = plan
        .par_iter()
        .enumerate()
        .map(|(i, kind)| {
            let driver = candidate_driver(*kind, i, len, s, config.seed)?;
            let report = score(system, &driver, config.n0, &prepared)?;
            Ok((driver, report))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, (_, r)) in evaluated.iter().enumerate() {
        if r.upper < evaluated[best].1.upper {
            best = i;
        }
    }
    let all_scores = evaluated.iter().map(|(d, r)| (d.provenance().clone(), r.upper)).collect();
    let (best_driver, best_report) = evaluated[best].clone();
    Ok(SearchResult { best_index: best, best_driver, best_report, all_scores, theory_bound: theory_bound(system, config.n)? })
}

/// Driver whose chain visits `targets` in order. The first point comes from
/// `x1_driver` when given, otherwise from inverting the generator.
pub fn invert_to_target(
    system: &ChainSystem,
    targets: &[Point],
    x1_driver: Option<&UnitCubePoint>,
) -> Result<DriverSequence> {
    let Some(first) = targets.first() else {
        return Err(Error::invalid("target list is empty"));
    };
    let s = system.driver_dim();
    let mut u0 = match x1_driver {
        Some(u) => u.coords().to_vec(),
        None => system.generator().invert(first).map_err(|e| Error::Precondition { index: 0, reason: e.to_string() })?,
    };
    if u0.len() > s {
        return Err(Error::DimensionMismatch { expected: s, found: u0.len() });
    }
    u0.resize(s, 0.0);
    let mut x = system.generator().apply(&u0);
    if x.sup_distance(first) > 1e-9 {
        return Err(Error::Precondition { index: 0, reason: format!("generator maps u₀ to {:?}, not the first target", x.coords()) });
    }
    let mut data = u0;
    for (i, y) in targets.iter().enumerate().skip(1) {
        let u = system.update().invert(&x, y).map_err(|e| Error::Precondition { index: i, reason: e.to_string() })?;
        x = system.update().apply(&x, &u);
        data.extend_from_slice(&u);
    }
    DriverSequence::new(s, data, Provenance::Inverted)
}

/// x_i = F⁻¹((i + 1/2)/n) for a one-dimensional measure.
pub fn stratified_targets(measure: &TargetMeasure, n: usize) -> Result<Vec<Point>> {
    (0..n).map(|i| Point::new(vec![measure.quantile((i as f64 + 0.5) / n as f64)?])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub seed: u64,
    pub disc_lower: f64,
    pub disc_upper: f64,
    pub theory_bound: f64,
    pub beck_bound: f64,
}

/// One best-of-k search per (n, seed).
pub fn rate_study(system: &ChainSystem, ns: &[usize], config: &SearchConfig, seeds: &[u64]) -> Result<Vec<RateRow>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sample sizes must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(ns.len() * seeds.len());
    for &n in ns {
        for &seed in seeds {
            let r = best_of_k(system, &SearchConfig { n, seed, ..config.clone() })?;
            rows.push(RateRow {
                n,
                seed,
                disc_lower: r.best_report.lower,
                disc_upper: r.best_report.upper,
                theory_bound: r.theory_bound,
                beck_bound: beck_bound(n as u64, system.dim())?,
            });
        }
    }
    Ok(rows)
}

/// Star discrepancy of inverted paths toward stratified targets, d = 1.
pub fn inversion_rate_study(system: &ChainSystem, ns: &[usize]) -> Result<Vec<RateRow>> {
    if system.dim() != 1 {
        return Err(Error::Unsupported("stratified inversion targets are one-dimensional".into()));
    }
    ns.iter()
        .map(|&n| {
            let targets = stratified_targets(system.target(), n)?;
            let driver = invert_to_target(system, &targets, None)?;
            let path = run_chain(system, &driver, 0)?;
            let r = star_discrepancy_exact(&path.states, system.target())?;
            Ok(RateRow {
                n,
                seed: 0,
                disc_lower: r.lower,
                disc_upper: r.upper,
                theory_bound: theory_bound(system, n)?,
                beck_bound: beck_bound(n as u64, 1)?,
            })
        })
        .collect()
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballwalk::{density_presets, metropolis_system};
    use crate::chain::make_direct_kernel;
    use crate::measure::Domain;

    fn direct() -> ChainSystem {
        make_direct_kernel(TargetMeasure::uniform(Domain::ball(1).unwrap()).unwrap()).unwrap()
    }

    fn config(k: usize) -> SearchConfig {
        SearchConfig {
            n: 64,
            n0: 0,
            k,
            seed: 1,
            candidate_kinds: vec![CandidateKind::UniformRandom],
            objective: Objective::StarExact,
        }
    }

    #[test]
    fn singleton_search() {
        let sys = direct();
        let r = best_of_k(&sys, &config(1)).unwrap();
        assert_eq!(r.all_scores.len(), 1);
        assert_eq!(r.best_report.upper, r.all_scores[0].1);
    }

    #[test]
    fn best_beats_median_and_is_deterministic() {
        let sys = direct();
        let a = best_of_k(&sys, &config(32)).unwrap();
        let b = best_of_k(&sys, &config(32)).unwrap();
        assert_eq!(a.best_index, b.best_index);
        assert_eq!(a.best_driver, b.best_driver);
        let uppers: Vec<f64> = a.all_scores.iter().map(|s| s.1).collect();
        assert!(a.best_report.upper <= median(&uppers));
        assert!(a.best_report.upper <= a.theory_bound);
    }

    #[test]
    fn plan_puts_halton_first_once() {
        let c = SearchConfig {
            candidate_kinds: vec![CandidateKind::Halton, CandidateKind::UniformRandom, CandidateKind::ScrambledHalton],
            ..config(5)
        };
        use CandidateKind::*;
        assert_eq!(c.candidate_plan(), vec![Halton, UniformRandom, ScrambledHalton, UniformRandom, ScrambledHalton]);
        let only = SearchConfig { candidate_kinds: vec![Halton], ..config(5) };
        assert_eq!(only.candidate_plan(), vec![Halton]);
    }

    #[test]
    fn exact_objective_refused_in_high_dimension() {
        let sys = metropolis_system(4, density_presets("uniform", 0.0, 4).unwrap(), 0.3).unwrap();
        let r = best_of_k(&sys, &SearchConfig { n: 8, ..config(1) });
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn inversion_reproduces_stratified_targets() {
        let sys = metropolis_system(1, density_presets("uniform", 0.0, 1).unwrap(), 2.0).unwrap();
        let targets = stratified_targets(sys.target(), 4).unwrap();
        let driver = invert_to_target(&sys, &targets, None).unwrap();
        let path = run_chain(&sys, &driver, 0).unwrap();
        for (a, b) in path.states.iter().zip(&targets) {
            assert!(a.sup_distance(b) <= 1e-9);
        }
        let r = star_discrepancy_exact(&path.states, sys.target()).unwrap();
        assert!((r.upper - 0.125).abs() < 1e-12);
        let single = invert_to_target(&sys, &targets[..1], None).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn inversion_reports_offending_index() {
        let sys = metropolis_system(1, density_presets("uniform", 0.0, 1).unwrap(), 0.5).unwrap();
        let targets: Vec<Point> = [-0.5, -0.2, 0.9].iter().map(|x| Point::new(vec![*x]).unwrap()).collect();
        match invert_to_target(&sys, &targets, None) {
            Err(Error::Precondition { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
