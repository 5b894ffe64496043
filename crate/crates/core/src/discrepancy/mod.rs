//! Star and pull-back discrepancies over anchored boxes.

mod cover;
mod exact;
mod koksma;
mod pullback;

use std::fmt;

pub use cover::{build_quantile_cover, star_discrepancy_bracket, DeltaCover};
pub use exact::star_discrepancy_exact;
pub use koksma::{hq_norm, kh_error_bound, weighted_star_discrepancy, H1Function, KhReport, WeightMeasure};
pub use pullback::{pullback_discrepancy_mc, pullback_report, pullback_volumes, PullbackVolumes};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactScan,
    CoverBracket,
    PullbackMc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactScan => "exact-scan",
            Method::CoverBracket => "cover-bracket",
            Method::PullbackMc => "pullback-mc",
        })
    }
}

/// Bracket [lower, upper] on a discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyReport {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    pub delta_used: f64,
    pub mc_stderr: f64,
    /// sup over cover sets of |(1/n) Σ νPⁱ(A) − π(A)|; zero for star discrepancies.
    pub marginal_bias: f64,
}

impl DiscrepancyReport {
    pub(crate) fn new(lower: f64, upper: f64, method: Method, delta_used: f64) -> Self {
        let lower = lower.clamp(0.0, 1.0);
        let upper = upper.clamp(lower, 1.0);
        Self { lower, upper, method, delta_used, mc_stderr: 0.0, marginal_bias: 0.0 }
    }
}

/// Counts of points in every grid box, from a d-dimensional prefix sum over
/// per-axis bucket indices.
pub(crate) struct PrefixCounts {
    dims: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<u32>,
}

impl PrefixCounts {
    /// `buckets[i][j]` ∈ 0..sizes[j] is the bucket of point i along axis j.
    pub(crate) fn new(buckets: impl Iterator<Item = Vec<usize>>, sizes: &[usize]) -> Self {
        // Slot 0 on each axis holds "below every bucket".
        let dims: Vec<usize> = sizes.iter().map(|m| m + 1).collect();
        let mut strides = vec![1; dims.len()];
        for j in (0..dims.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * dims[j + 1];
        }
        let total = dims.iter().product();
        let mut table = vec![0u32; total];
        for b in buckets {
            let idx: usize = b.iter().zip(&strides).map(|(k, s)| (k + 1) * s).sum();
            table[idx] += 1;
        }
        for (axis, &stride) in strides.iter().enumerate() {
            let len = dims[axis];
            for flat in 0..total {
                if (flat / stride) % len != 0 {
                    table[flat] += table[flat - stride];
                }
            }
        }
        Self { dims, strides, table }
    }

    /// Number of points whose bucket is < `upto[j]` on every axis.
    pub(crate) fn count_below(&self, upto: &[usize]) -> u32 {
        let idx: usize = upto.iter().zip(&self.strides).map(|(k, s)| k * s).sum();
        self.table[idx]
    }

    /// Every multi-index with upto[j] ∈ 0..dims[j].
    pub(crate) fn grid(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        grid_indices(self.dims.clone())
    }
}

/// Row-major enumeration of {0..dims[0]} × … × {0..dims[d−1]}.
pub(crate) fn grid_indices(dims: Vec<usize>) -> impl Iterator<Item = Vec<usize>> {
    let total: usize = dims.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; dims.len()];
        for j in (0..dims.len()).rev() {
            idx[j] = flat % dims[j];
            flat /= dims[j];
        }
        idx
    })
}
