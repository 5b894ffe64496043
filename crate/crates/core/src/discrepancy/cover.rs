use rayon::prelude::*;

use super::{grid_indices, DiscrepancyReport, Method, PrefixCounts};
use crate::error::{Error, Result};
use crate::measure::TargetMeasure;
use crate::quadrature::Estimate;
use crate::types::{AnchoredBox, Point};

const MAX_COVER_SETS: usize = 4_000_000;
const SLAB_SLACK: f64 = 1e-9;

/// Finite family of anchored boxes bracketing every anchored box to within δ
/// in π-mass. Members are ∅ and all corners of a per-axis quantile grid.
#[derive(Debug, Clone)]
pub struct DeltaCover {
    delta: f64,
    measure: TargetMeasure,
    /// Per axis: [lower edge, interior quantiles…, +∞].
    cuts: Vec<Vec<f64>>,
    /// π-mass of every grid corner, row-major over `cuts`.
    masses: Vec<Estimate>,
    achieved: f64,
}

impl DeltaCover {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// d · (largest slab mass); never above δ.
    pub fn achieved_delta(&self) -> f64 {
        self.achieved
    }

    pub fn measure(&self) -> &TargetMeasure {
        &self.measure
    }

    pub fn cuts(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    /// Number of members, counting ∅.
    pub fn len(&self) -> usize {
        self.masses.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn empty_set(&self) -> AnchoredBox {
        AnchoredBox::new(vec![f64::NEG_INFINITY; self.cuts.len()]).expect("no NaN")
    }

    pub(crate) fn grid_shape(&self) -> Vec<usize> {
        self.cuts.iter().map(Vec::len).collect()
    }

    pub(crate) fn corner_masses(&self) -> &[Estimate] {
        &self.masses
    }

    fn corner_at(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(j, &k)| self.cuts[j][k]).collect()
    }

    /// Grid corners in row-major order; ∅ is not included.
    pub fn corners(&self) -> impl Iterator<Item = AnchoredBox> + '_ {
        grid_indices(self.grid_shape()).map(|idx| AnchoredBox::new(self.corner_at(&idx)).expect("finite or +∞"))
    }

    /// All members: ∅ followed by the grid corners.
    pub fn sets(&self) -> impl Iterator<Item = AnchoredBox> + '_ {
        std::iter::once(self.empty_set()).chain(self.corners())
    }

    /// (C, D) in the cover with C ⊆ A ⊆ D.
    pub fn bracket(&self, a: &AnchoredBox) -> Result<(AnchoredBox, AnchoredBox)> {
        let d = self.cuts.len();
        if a.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.dim() });
        }
        let corner = a.corner();
        if corner.iter().zip(&self.cuts).any(|(c, cuts)| *c < cuts[0]) {
            return Ok((self.empty_set(), self.empty_set()));
        }
        let (mut inner, mut outer) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for (c, cuts) in corner.iter().zip(&self.cuts) {
            let k = cuts.partition_point(|x| x <= c);
            inner.push(cuts[k - 1]);
            outer.push(if cuts[k - 1] == *c { *c } else { cuts[k] });
        }
        Ok((AnchoredBox::new(inner)?, AnchoredBox::new(outer)?))
    }

    /// π(D \ C) for the bracket of A.
    pub fn bracket_gap(&self, a: &AnchoredBox) -> Result<Estimate> {
        let (c, d) = self.bracket(a)?;
        if c.corner().contains(&f64::NEG_INFINITY) {
            return Ok(Estimate::ZERO);
        }
        let (mc, md) = (self.measure.box_mass(&c)?, self.measure.box_mass(&d)?);
        Ok(Estimate { value: md.value - mc.value, error: mc.error + md.error })
    }
}

/// Quantile-grid δ-cover: every axis is cut into ⌈d/δ⌉ slabs of marginal mass
/// at most δ/d, so bracketing each corner coordinate to adjacent cuts loses at
/// most δ.
pub fn build_quantile_cover(measure: &TargetMeasure, delta: f64) -> Result<DeltaCover> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("δ = {delta} not in (0, 1]")));
    }
    let d = measure.dim();
    let slabs = (d as f64 / delta - 1e-9).ceil().max(1.0) as usize;
    let sets = (slabs as f64 + 1.0).powi(d as i32);
    if sets > MAX_COVER_SETS as f64 {
        return Err(Error::Unsupported(format!(
            "quantile cover with δ = {delta} in d = {d} would need {sets:.0} sets (limit {MAX_COVER_SETS})"
        )));
    }
    let lower = measure.domain().lower();
    let cuts: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut axis = vec![lower[j]];
            for k in 1..slabs {
                axis.push(measure.marginal_quantile(j, k as f64 / slabs as f64)?);
            }
            axis.push(f64::INFINITY);
            axis.dedup();
            Ok(axis)
        })
        .collect::<Result<_>>()?;

    let mut worst: f64 = 0.0;
    for (j, axis) in cuts.iter().enumerate() {
        let mut prev = 0.0;
        for &c in &axis[1..] {
            let cdf = measure.marginal_cdf(j, c)?;
            worst = worst.max(cdf.value - prev - cdf.error);
            prev = cdf.value;
        }
    }
    let achieved = d as f64 * worst;
    if achieved > delta + SLAB_SLACK {
        return Err(Error::CoverUnreachable { requested: delta, achieved });
    }

    let shape: Vec<usize> = cuts.iter().map(Vec::len).collect();
    let masses = grid_indices(shape)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|idx| {
            let corner: Vec<f64> = idx.iter().enumerate().map(|(j, &k)| cuts[j][k]).collect();
            measure.mass_below(&corner)
        })
        .collect::<Result<_>>()?;
    Ok(DeltaCover { delta, measure: measure.clone(), cuts, masses, achieved: achieved.min(delta) })
}

/// Per-point bucket along each cover axis: the number of cuts ≤ y_j.
pub(crate) fn cover_buckets<'a>(cover: &'a DeltaCover, points: &'a [Point]) -> impl Iterator<Item = Vec<usize>> + 'a {
    points.iter().map(move |p| cover.cuts.iter().enumerate().map(|(j, c)| c.partition_point(|x| *x <= p[j])).collect())
}

/// Empirical frequency of every cover corner, in `corners()` order.
pub(crate) fn corner_frequencies(cover: &DeltaCover, points: &[Point]) -> Vec<f64> {
    let shape = cover.grid_shape();
    let counts = PrefixCounts::new(cover_buckets(cover, points), &shape);
    let n = points.len() as f64;
    grid_indices(shape)
        .map(|idx| {
            let upto: Vec<usize> = idx.iter().map(|k| k + 1).collect();
            counts.count_below(&upto) as f64 / n
        })
        .collect()
}

/// Star discrepancy bracketed by a δ-cover: lower is the largest local
/// discrepancy over the cover, upper adds δ.
pub fn star_discrepancy_bracket(points: &[Point], cover: &DeltaCover) -> Result<DiscrepancyReport> {
    let d = cover.cuts.len();
    if points.is_empty() {
        return Err(Error::invalid("point set is empty"));
    }
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    let freq = corner_frequencies(cover, points);
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    for (f, m) in freq.iter().zip(&cover.masses) {
        let local = (f - m.value).abs();
        lower = lower.max(local - m.error);
        upper = upper.max(local + m.error);
    }
    Ok(DiscrepancyReport::new(lower, upper + cover.delta, Method::CoverBracket, cover.delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::star_discrepancy_exact;
    use crate::measure::{Density, Domain};
    use crate::rng::Rng;

    fn unit_interval() -> TargetMeasure {
        TargetMeasure::uniform(Domain::interval(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn quarter_cover_cuts() {
        let c = build_quantile_cover(&unit_interval(), 0.25).unwrap();
        assert_eq!(c.cuts()[0], vec![0.0, 0.25, 0.5, 0.75, f64::INFINITY]);
        assert_eq!(c.len(), 6);
        assert!(c.achieved_delta() <= 0.25);
    }

    #[test]
    fn coarsest_cover() {
        let c = build_quantile_cover(&unit_interval(), 1.0).unwrap();
        assert_eq!(c.len(), 3);
        let p = vec![Point::new(vec![0.1]).unwrap()];
        let r = star_discrepancy_bracket(&p, &c).unwrap();
        assert_eq!(r.lower, 0.0);
        assert_eq!(r.upper, 1.0);
    }

    #[test]
    fn midpoint_bracket() {
        let c = build_quantile_cover(&unit_interval(), 0.01).unwrap();
        let p: Vec<Point> = [0.125, 0.375, 0.625, 0.875].iter().map(|x| Point::new(vec![*x]).unwrap()).collect();
        let r = star_discrepancy_bracket(&p, &c).unwrap();
        assert!((0.115..=0.125 + 1e-12).contains(&r.lower), "{r:?}");
        assert!(r.upper <= 0.135 + 1e-12);
    }

    #[test]
    fn bracketing_audit_exp_linear_disc() {
        let m = TargetMeasure::new(Domain::ball(2).unwrap(), Density::ExpLinear { alpha: 1.0 }).unwrap();
        let c = build_quantile_cover(&m, 0.1).unwrap();
        let mut rng = Rng::new(6);
        for _ in 0..200 {
            let a = AnchoredBox::new(vec![2.4 * rng.next_f64() - 1.2, 2.4 * rng.next_f64() - 1.2]).unwrap();
            let (inner, outer) = c.bracket(&a).unwrap();
            let empty_on_domain = a.corner().iter().any(|x| *x < -1.0);
            assert!(inner.is_subset_of(&a) && (empty_on_domain || a.is_subset_of(&outer)));
            assert!(c.bracket_gap(&a).unwrap().value <= 0.1 + 1e-8);
        }
    }

    #[test]
    fn bracket_contains_exact() {
        let m = unit_interval();
        let c = build_quantile_cover(&m, 0.05).unwrap();
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let p: Vec<Point> = (0..10).map(|_| Point::new(vec![rng.next_f64()]).unwrap()).collect();
            let e = star_discrepancy_exact(&p, &m).unwrap();
            let b = star_discrepancy_bracket(&p, &c).unwrap();
            assert!(b.lower <= e.upper + 1e-12 && e.lower <= b.upper + 1e-12);
        }
    }
}
