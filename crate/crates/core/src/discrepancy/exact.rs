use rayon::prelude::*;

use super::{DiscrepancyReport, Method, PrefixCounts};
use crate::error::{Error, Result};
use crate::measure::TargetMeasure;
use crate::types::Point;

/// Exact star discrepancy over the critical grid, for d ≤ 3.
///
/// Per axis the grid is the distinct point coordinates plus +∞. At each grid
/// corner the local discrepancy is taken both with the points on the corner
/// counted (limit from above) and not counted (the open box itself).
pub fn star_discrepancy_exact(points: &[Point], measure: &TargetMeasure) -> Result<DiscrepancyReport> {
    let d = measure.dim();
    if d > 3 {
        return Err(Error::Unsupported(format!("exact scan limited to d ≤ 3 (got d = {d}); use the cover bracket")));
    }
    if points.is_empty() {
        return Err(Error::invalid("point set is empty"));
    }
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    let values: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = points.iter().map(|p| p[j]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let sizes: Vec<usize> = values.iter().map(Vec::len).collect();
    let ranks = points.iter().map(|p| {
        (0..d).map(|j| values[j].partition_point(|v| *v < p[j])).collect::<Vec<_>>()
    });
    let counts = PrefixCounts::new(ranks, &sizes);
    let n = points.len() as f64;

    let locals: Vec<(f64, f64)> = counts
        .grid()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|pos| {
            let corner: Vec<f64> =
                pos.iter().enumerate().map(|(j, &p)| values[j].get(p).copied().unwrap_or(f64::INFINITY)).collect();
            let closed: Vec<usize> = pos.iter().zip(&sizes).map(|(&p, &m)| (p + 1).min(m)).collect();
            let open = counts.count_below(&pos) as f64 / n;
            let closed = counts.count_below(&closed) as f64 / n;
            let mass = measure.mass_below(&corner)?;
            let local = (closed - mass.value).abs().max((mass.value - open).abs());
            Ok((local, mass.error))
        })
        .collect::<Result<_>>()?;

    let lower = locals.iter().map(|(l, e)| l - e).fold(0.0, f64::max);
    let upper = locals.iter().map(|(l, e)| l + e).fold(0.0, f64::max);
    Ok(DiscrepancyReport::new(lower, upper, Method::ExactScan, 0.0))
}
