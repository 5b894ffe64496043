use rayon::prelude::*;

use super::cover::{corner_frequencies, DeltaCover};
use super::{DiscrepancyReport, Method};
use crate::chain::{run_chain, ChainSystem};
use crate::error::{Error, Result};
use crate::quadrature::Estimate;
use crate::rng::Rng;
use crate::sequences::uniform_driver;
use crate::types::{AnchoredBox, DriverSequence};

const MIN_REPLICATIONS: usize = 100;

/// Volume terms (1/n) Σ_{i=n₀}^{n₀+n−1} νPⁱ(A) for every cover corner.
#[derive(Debug, Clone)]
pub struct PullbackVolumes {
    pub n0: usize,
    pub n: usize,
    /// In the order of [`DeltaCover::corners`].
    pub values: Vec<Estimate>,
    /// Largest Monte Carlo standard error; zero on the exact-marginal path.
    pub mc_stderr: f64,
    /// sup over the cover of |volume − π|.
    pub bias: f64,
    pub replications: usize,
}

/// Volume terms from the system's exact marginals when it has them, otherwise
/// from `m` independent chains on uniform drivers.
pub fn pullback_volumes(
    system: &ChainSystem,
    n0: usize,
    n: usize,
    cover: &DeltaCover,
    m: usize,
    rng: &Rng,
) -> Result<PullbackVolumes> {
    if n == 0 {
        return Err(Error::invalid("pull-back discrepancy needs n ≥ 1"));
    }
    if cover.measure().dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: cover.measure().dim() });
    }
    let corners: Vec<AnchoredBox> = cover.corners().collect();
    let exact: Option<Vec<Estimate>> = corners
        .par_iter()
        .map(|c| system.averaged_marginal(n0, n, c.corner()))
        .collect::<Option<Vec<Result<Estimate>>>>()
        .map(|v| v.into_iter().collect::<Result<Vec<_>>>())
        .transpose()?;

    let (values, mc_stderr, replications) = match exact {
        Some(values) => (values, 0.0, 0),
        None => {
            if m < MIN_REPLICATIONS {
                return Err(Error::invalid(format!("need at least {MIN_REPLICATIONS} replications, got {m}")));
            }
            let s = system.driver_dim();
            let per_chain: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|r| {
                    let driver = uniform_driver(n0 + n, s, &rng.split(r as u64))?;
                    let path = run_chain(system, &driver, n0)?;
                    Ok(corner_frequencies(cover, path.retained()))
                })
                .collect::<Result<_>>()?;
            let mf = m as f64;
            let mut worst: f64 = 0.0;
            let values = (0..corners.len())
                .map(|k| {
                    let mean = per_chain.iter().map(|v| v[k]).sum::<f64>() / mf;
                    let var = per_chain.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (mf - 1.0);
                    worst = worst.max((var / mf).sqrt());
                    Estimate { value: mean, error: 0.0 }
                })
                .collect();
            (values, worst, m)
        }
    };
    let bias = values
        .iter()
        .zip(cover.corner_masses())
        .map(|(v, p)| (v.value - p.value).abs() + v.error + p.error)
        .fold(0.0, f64::max);
    Ok(PullbackVolumes { n0, n, values, mc_stderr, bias, replications })
}

/// Pull-back discrepancy of `driver` against precomputed volume terms.
///
/// lower is the largest |Δ(A)| over the cover. For a box bracketed by C ⊆ A ⊆ D
/// the volume term of D \ C exceeds π(D \ C) ≤ δ by at most twice the bias, so
/// upper = lower + δ + 2·bias + mc_stderr.
pub fn pullback_report(
    system: &ChainSystem,
    driver: &DriverSequence,
    cover: &DeltaCover,
    volumes: &PullbackVolumes,
) -> Result<DiscrepancyReport> {
    let n0 = volumes.n0;
    if driver.len() != n0 + volumes.n {
        return Err(Error::invalid(format!(
            "driver has {} points but the volumes were computed for n₀ + n = {}",
            driver.len(),
            n0 + volumes.n
        )));
    }
    let path = run_chain(system, driver, n0)?;
    let freq = corner_frequencies(cover, path.retained());
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    for (f, v) in freq.iter().zip(&volumes.values) {
        let local = (f - v.value).abs();
        lower = lower.max(local - v.error);
        upper = upper.max(local + v.error);
    }
    let upper = upper + cover.delta() + 2.0 * volumes.bias + volumes.mc_stderr;
    let mut report = DiscrepancyReport::new(lower, upper, Method::PullbackMc, cover.delta());
    report.mc_stderr = volumes.mc_stderr;
    report.marginal_bias = volumes.bias;
    Ok(report)
}

/// Pull-back discrepancy of the driver; n = driver length − n₀.
pub fn pullback_discrepancy_mc(
    system: &ChainSystem,
    driver: &DriverSequence,
    burn_in: usize,
    cover: &DeltaCover,
    m: usize,
    rng: &Rng,
) -> Result<DiscrepancyReport> {
    if driver.len() <= burn_in {
        return Err(Error::invalid("driver must be longer than the burn-in"));
    }
    let volumes = pullback_volumes(system, burn_in, driver.len() - burn_in, cover, m, rng)?;
    pullback_report(system, driver, cover, &volumes)
}
