//! Target measures on bounded domains and the box-mass oracle.
//!
//! Box masses come from closed forms where the density allows it, adaptive
//! Gauss–Kronrod in d = 1 and d = 2, and a randomly shifted Halton estimate
//! with a 3-sigma error bound in d ≥ 3.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Estimate};
use crate::rng::Rng;
use crate::sequences::{primes, radical_inverse};
use crate::types::{AnchoredBox, Point};

const TOL_1D: f64 = 1e-10;
const TOL_2D: f64 = 1e-10;
const TOL_2D_INNER: f64 = 1e-12;
const MAX_SEGMENTS: usize = 4000;
const CDF_TABLE_SEGMENTS: usize = 256;
const QMC_POINTS: usize = 8192;
const QMC_REPLICATES: usize = 16;
const QMC_SEED: u64 = 0x51ed_270b_27d5_0d91;
const BISECTION_TOL: f64 = 1e-12;

/// Bounded region G.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Closed Euclidean unit ball centred at the origin.
    Ball { d: usize },
    /// Axis-aligned box [lo, hi].
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn ball(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("ball dimension must be positive"));
        }
        Ok(Domain::Ball { d })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::rect(vec![lo], vec![hi])
    }

    pub fn rect(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("box bounds must be non-empty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::invalid("box bounds must be finite with lo < hi"));
        }
        Ok(Domain::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { d } => *d,
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball { .. } => x.iter().map(|v| v * v).sum::<f64>() <= 1.0,
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| a <= v && v <= b),
        }
    }

    /// Lower corner of the bounding box.
    pub fn lower(&self) -> Vec<f64> {
        match self {
            Domain::Ball { d } => vec![-1.0; *d],
            Domain::Box { lo, .. } => lo.clone(),
        }
    }

    /// Upper corner of the bounding box.
    pub fn upper(&self) -> Vec<f64> {
        match self {
            Domain::Ball { d } => vec![1.0; *d],
            Domain::Box { hi, .. } => hi.clone(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Ball { d } => unit_ball_volume(*d),
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
        }
    }
}

/// Lebesgue measure of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        let next = v[(k - 2) % 2] * 2.0 * PI / k as f64;
        v[k % 2] = next;
    }
    v[d % 2]
}

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Unnormalized density ρ > 0, given through log ρ.
#[derive(Clone)]
pub enum Density {
    Uniform,
    /// log ρ(x) = α·x₁.
    ExpLinear { alpha: f64 },
    /// Arbitrary log-density with a known upper bound on log ρ over the domain.
    Custom { name: String, log_rho: Arc<LogDensityFn>, log_sup: f64 },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Uniform => f.write_str("Uniform"),
            Density::ExpLinear { alpha } => write!(f, "ExpLinear {{ alpha: {alpha} }}"),
            Density::Custom { name, log_sup, .. } => write!(f, "Custom {{ name: {name:?}, log_sup: {log_sup} }}"),
        }
    }
}

impl Density {
    pub fn custom<F>(name: impl Into<String>, log_sup: f64, log_rho: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Density::Custom { name: name.into(), log_rho: Arc::new(log_rho), log_sup }
    }

    #[inline]
    pub fn log_value(&self, x: &[f64]) -> f64 {
        match self {
            Density::Uniform => 0.0,
            Density::ExpLinear { alpha } => alpha * x[0],
            Density::Custom { log_rho, .. } => log_rho(x),
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.log_value(x).exp()
    }

    /// Upper bound on log ρ over the bounding box of `domain`.
    pub fn log_sup(&self, domain: &Domain) -> f64 {
        match self {
            Density::Uniform => 0.0,
            Density::ExpLinear { alpha } => {
                let (lo, hi) = (domain.lower()[0], domain.upper()[0]);
                (alpha * lo).max(alpha * hi)
            }
            Density::Custom { log_sup, .. } => *log_sup,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Density::Uniform => "uniform",
            Density::ExpLinear { .. } => "exp-linear",
            Density::Custom { name, .. } => name,
        }
    }

    /// Densities that factor over a box as a product of closed-form marginals.
    fn has_closed_form_box(&self) -> bool {
        matches!(self, Density::Uniform | Density::ExpLinear { .. })
    }

    /// Densities that depend on the first coordinate only.
    fn depends_on_first_only(&self) -> bool {
        self.has_closed_form_box()
    }
}

/// Mass of [lo, c) for the first-coordinate marginal of a closed-form density.
fn closed_form_fraction(density: &Density, axis: usize, lo: f64, hi: f64, c: f64) -> f64 {
    let c = c.clamp(lo, hi);
    match density {
        Density::ExpLinear { alpha } if axis == 0 && *alpha != 0.0 => {
            (alpha * (c - lo)).exp_m1() / (alpha * (hi - lo)).exp_m1()
        }
        _ => (c - lo) / (hi - lo),
    }
}

fn closed_form_quantile(density: &Density, lo: f64, hi: f64, p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let x = match density {
        Density::ExpLinear { alpha } if *alpha != 0.0 => {
            lo + (p * (alpha * (hi - lo)).exp_m1()).ln_1p() / alpha
        }
        _ => lo + p * (hi - lo),
    };
    x.clamp(lo, hi)
}

/// Random-shift Halton cloud over the bounding box for d ≥ 3.
struct QmcCloud {
    d: usize,
    // Per replicate: row-major points inside G and their weights ρ(x).
    points: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl QmcCloud {
    fn build(domain: &Domain, weight: &dyn Fn(&[f64]) -> f64) -> Self {
        let d = domain.dim();
        let (lo, hi) = (domain.lower(), domain.upper());
        let bases = primes(d);
        let root = Rng::new(QMC_SEED);
        let mut points = Vec::with_capacity(QMC_REPLICATES);
        let mut weights = Vec::with_capacity(QMC_REPLICATES);
        let mut totals = Vec::with_capacity(QMC_REPLICATES);
        let mut x = vec![0.0; d];
        for r in 0..QMC_REPLICATES {
            let mut stream = root.split(r as u64);
            let shift: Vec<f64> = (0..d).map(|_| stream.next_f64()).collect();
            let mut pts = Vec::new();
            let mut ws = Vec::new();
            let mut total = 0.0;
            for i in 0..QMC_POINTS {
                for j in 0..d {
                    let u = (radical_inverse(i as u64 + 1, bases[j]) + shift[j]).fract();
                    x[j] = lo[j] + u * (hi[j] - lo[j]);
                }
                if domain.contains(&x) {
                    let w = weight(&x);
                    pts.extend_from_slice(&x);
                    ws.push(w);
                    total += w;
                }
            }
            points.push(pts);
            weights.push(ws);
            totals.push(total);
        }
        Self { d, points, weights, totals }
    }

    /// Ratio ∫_{box∩G} w / ∫_G w with a 3-sigma bound across replicates.
    fn fraction_below(&self, corner: &[f64]) -> Estimate {
        let ratios: Vec<f64> = (0..self.points.len())
            .map(|r| {
                let inside: f64 = self.points[r]
                    .chunks_exact(self.d)
                    .zip(&self.weights[r])
                    .filter(|(x, _)| x.iter().zip(corner).all(|(a, c)| a < c))
                    .map(|(_, w)| w)
                    .sum();
                if self.totals[r] > 0.0 {
                    inside / self.totals[r]
                } else {
                    0.0
                }
            })
            .collect();
        mean_with_three_sigma(&ratios)
    }
}

fn mean_with_three_sigma(samples: &[f64]) -> Estimate {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Estimate { value: mean, error: 3.0 * (var / m).sqrt() }
}

/// Unnormalized ∫_{(-∞,corner)∩G} weight(x) dx in d ∈ {1, 2}.
fn integrate_below_low_dim(domain: &Domain, corner: &[f64], weight: &dyn Fn(&[f64]) -> f64, abs_tol: f64) -> Estimate {
    match (domain, domain.dim()) {
        (_, 1) => {
            let (lo, hi) = (domain.lower()[0], domain.upper()[0]);
            let b = corner[0].min(hi);
            integrate_with_breaks(|x| (weight(&[x]), 0.0), lo, b, &[], abs_tol, TOL_1D, MAX_SEGMENTS)
        }
        (Domain::Ball { .. }, 2) => {
            // x₁ = sin θ removes the square-root behaviour at the rim.
            let theta_max = if corner[0] >= 1.0 { FRAC_PI_2 } else { corner[0].clamp(-1.0, 1.0).asin() };
            let c2 = corner[1];
            let mut breaks = Vec::new();
            if c2.abs() < 1.0 {
                let t = c2.abs().acos();
                breaks.extend([-t, t]);
            }
            let outer = |theta: f64| {
                let (x1, half) = (theta.sin(), theta.cos());
                let top = c2.min(half);
                if top <= -half {
                    return (0.0, 0.0);
                }
                let inner = integrate_with_breaks(
                    |x2| (weight(&[x1, x2]), 0.0),
                    -half,
                    top,
                    &[],
                    abs_tol * 1e-2,
                    TOL_2D_INNER,
                    MAX_SEGMENTS,
                );
                (inner.value * half, inner.error * half)
            };
            integrate_with_breaks(outer, -FRAC_PI_2, theta_max, &breaks, abs_tol, TOL_2D, MAX_SEGMENTS)
        }
        (Domain::Box { lo, hi }, 2) => {
            let (b1, b2) = (corner[0].min(hi[0]), corner[1].min(hi[1]));
            let (lo2, tol_inner) = (lo[1], abs_tol * 1e-2 / (hi[0] - lo[0]));
            let outer = |x1: f64| {
                let inner =
                    integrate_with_breaks(|x2| (weight(&[x1, x2]), 0.0), lo2, b2, &[], tol_inner, TOL_2D_INNER, MAX_SEGMENTS);
                (inner.value, inner.error)
            };
            integrate_with_breaks(outer, lo[0], b1, &[], abs_tol, TOL_2D, MAX_SEGMENTS)
        }
        _ => unreachable!("low-dimensional quadrature called with d = {}", domain.dim()),
    }
}

/// Unnormalized mass below `corner` on the unit disc for a density of x₁
/// alone; the x₂ integral is a chord length.
fn disc_mass_first_coordinate(density: &Density, corner: &[f64], abs_tol: f64) -> Estimate {
    let theta_max = if corner[0] >= 1.0 { FRAC_PI_2 } else { corner[0].clamp(-1.0, 1.0).asin() };
    let c2 = corner[1];
    let mut breaks = Vec::new();
    if c2.abs() < 1.0 {
        let t = c2.abs().acos();
        breaks.extend([-t, t]);
    }
    let f = |theta: f64| {
        let (x1, half) = (theta.sin(), theta.cos());
        let chord = (c2.min(half) + half).max(0.0);
        (density.value(&[x1, 0.0]) * chord * half, 0.0)
    };
    integrate_with_breaks(f, -FRAC_PI_2, theta_max, &breaks, abs_tol, TOL_1D, MAX_SEGMENTS)
}

/// Cumulative table of ∫_{lo}^{node_k} ρ for one-dimensional quadrature-backed CDFs.
struct CdfTable {
    nodes: Vec<f64>,
    cumulative: Vec<Estimate>,
}

struct Inner {
    domain: Domain,
    density: Density,
    normalizer: Estimate,
    cdf_table: OnceLock<CdfTable>,
    cloud: OnceLock<QmcCloud>,
}

/// Target distribution π with density ρ (up to normalization) on a bounded domain.
#[derive(Clone)]
pub struct TargetMeasure {
    inner: Arc<Inner>,
}

impl fmt::Debug for TargetMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetMeasure")
            .field("domain", &self.inner.domain)
            .field("density", &self.inner.density)
            .field("normalizer", &self.inner.normalizer)
            .finish()
    }
}

impl TargetMeasure {
    pub fn new(domain: Domain, density: Density) -> Result<Self> {
        let d = domain.dim();
        if let Density::ExpLinear { alpha } = density {
            if !alpha.is_finite() {
                return Err(Error::invalid("exp-linear slope must be finite"));
            }
        }
        // Spot-check positivity on a Halton probe of the bounding box.
        let (lo, hi) = (domain.lower(), domain.upper());
        let bases = primes(d);
        let mut x = vec![0.0; d];
        for i in 1..=256u64 {
            for j in 0..d {
                x[j] = lo[j] + radical_inverse(i, bases[j]) * (hi[j] - lo[j]);
            }
            if domain.contains(&x) {
                let v = density.log_value(&x);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("density must be positive on the domain; log ρ = {v} at {x:?}")));
                }
            }
        }
        let mut measure = Self {
            inner: Arc::new(Inner {
                domain,
                density,
                normalizer: Estimate { value: 1.0, error: 0.0 },
                cdf_table: OnceLock::new(),
                cloud: OnceLock::new(),
            }),
        };
        let z = measure.compute_normalizer();
        if !(z.value > 0.0) || !z.value.is_finite() {
            return Err(Error::invalid(format!("normalizer {} is not positive and finite", z.value)));
        }
        Arc::get_mut(&mut measure.inner).expect("fresh Arc").normalizer = z;
        Ok(measure)
    }

    pub fn uniform(domain: Domain) -> Result<Self> {
        Self::new(domain, Density::Uniform)
    }

    pub fn domain(&self) -> &Domain {
        &self.inner.domain
    }

    pub fn density(&self) -> &Density {
        &self.inner.density
    }

    pub fn dim(&self) -> usize {
        self.inner.domain.dim()
    }

    /// ∫_G ρ with its quadrature error.
    pub fn normalizer(&self) -> Estimate {
        self.inner.normalizer
    }

    /// True when π is a product of independent closed-form marginals.
    pub fn has_product_form(&self) -> bool {
        self.closed_form()
    }

    fn closed_form(&self) -> bool {
        let d = self.dim();
        self.inner.density.has_closed_form_box() && (matches!(self.inner.domain, Domain::Box { .. }) || d == 1)
    }

    fn compute_normalizer(&self) -> Estimate {
        let domain = &self.inner.domain;
        let density = &self.inner.density;
        if self.closed_form() {
            let (lo, hi) = (domain.lower(), domain.upper());
            let value = match density {
                Density::ExpLinear { alpha } if *alpha != 0.0 => {
                    let rest: f64 = lo.iter().zip(&hi).skip(1).map(|(a, b)| b - a).product();
                    rest * ((alpha * hi[0]).exp() - (alpha * lo[0]).exp()) / alpha
                }
                _ => domain.volume(),
            };
            return Estimate { value, error: 0.0 };
        }
        let weight = |x: &[f64]| density.value(x);
        if domain.dim() == 2 && density.depends_on_first_only() {
            return disc_mass_first_coordinate(density, &[f64::INFINITY; 2], 0.0);
        }
        match domain.dim() {
            1 | 2 => {
                let full = vec![f64::INFINITY; domain.dim()];
                // Absolute tolerance is unknown before Z; lean on the relative one.
                integrate_below_low_dim(domain, &full, &weight, 0.0)
            }
            _ => {
                let cloud = self.cloud();
                let scale = domain.lower().iter().zip(domain.upper()).map(|(a, b)| b - a).product::<f64>()
                    / QMC_POINTS as f64;
                let z: Vec<f64> = cloud.totals.iter().map(|t| t * scale).collect();
                mean_with_three_sigma(&z)
            }
        }
    }

    fn cloud(&self) -> &QmcCloud {
        self.inner.cloud.get_or_init(|| {
            let density = &self.inner.density;
            QmcCloud::build(&self.inner.domain, &|x| density.value(x))
        })
    }

    fn cdf_table(&self) -> &CdfTable {
        self.inner.cdf_table.get_or_init(|| {
            let (lo, hi) = (self.inner.domain.lower()[0], self.inner.domain.upper()[0]);
            let z = self.inner.normalizer.value;
            let nodes: Vec<f64> =
                (0..=CDF_TABLE_SEGMENTS).map(|k| lo + (hi - lo) * k as f64 / CDF_TABLE_SEGMENTS as f64).collect();
            let mut cumulative = vec![Estimate::ZERO];
            let mut acc = Estimate::ZERO;
            for w in nodes.windows(2) {
                let piece = self.integrate_1d(w[0], w[1], z);
                acc = Estimate { value: acc.value + piece.value, error: acc.error + piece.error };
                cumulative.push(acc);
            }
            CdfTable { nodes, cumulative }
        })
    }

    fn integrate_1d(&self, a: f64, b: f64, z: f64) -> Estimate {
        let density = &self.inner.density;
        integrate_with_breaks(|x| (density.value(&[x]), 0.0), a, b, &[], TOL_1D * z * 1e-3, TOL_1D, MAX_SEGMENTS)
    }

    fn normalize(&self, raw: Estimate) -> Estimate {
        let z = self.inner.normalizer;
        let value = raw.value / z.value;
        let error = raw.error / z.value + value.abs() * z.error / z.value;
        Estimate { value, error }
    }

    /// π((-∞, corner) ∩ G) with an error bound.
    pub fn box_mass(&self, b: &AnchoredBox) -> Result<Estimate> {
        self.mass_below(b.corner())
    }

    pub(crate) fn mass_below(&self, corner: &[f64]) -> Result<Estimate> {
        let domain = &self.inner.domain;
        let d = domain.dim();
        if corner.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: corner.len() });
        }
        let (lo, hi) = (domain.lower(), domain.upper());
        if corner.iter().zip(&lo).any(|(c, l)| c <= l) {
            return Ok(Estimate::ZERO);
        }
        if corner.iter().zip(&hi).all(|(c, h)| c >= h) {
            return Ok(Estimate { value: 1.0, error: 0.0 });
        }
        let density = &self.inner.density;
        let est = if self.closed_form() {
            let value = (0..d).map(|j| closed_form_fraction(density, j, lo[j], hi[j], corner[j])).product();
            Estimate { value, error: 0.0 }
        } else if d == 1 {
            let table = self.cdf_table();
            let c = corner[0].min(hi[0]);
            let k = table.nodes.partition_point(|x| *x <= c).saturating_sub(1).min(CDF_TABLE_SEGMENTS - 1);
            let base = table.cumulative[k];
            let tail = self.integrate_1d(table.nodes[k], c, self.inner.normalizer.value);
            self.normalize(Estimate { value: base.value + tail.value, error: base.error + tail.error })
        } else if d == 2 && density.depends_on_first_only() {
            let abs_tol = TOL_2D * self.inner.normalizer.value;
            self.normalize(disc_mass_first_coordinate(density, corner, abs_tol))
        } else if d == 2 {
            let weight = |x: &[f64]| density.value(x);
            let abs_tol = TOL_2D * self.inner.normalizer.value;
            self.normalize(integrate_below_low_dim(domain, corner, &weight, abs_tol))
        } else {
            self.cloud().fraction_below(corner)
        };
        Ok(Estimate { value: est.value.clamp(0.0, 1.0), error: est.error })
    }

    /// π({y : y_axis < t}).
    pub fn marginal_cdf(&self, axis: usize, t: f64) -> Result<Estimate> {
        let d = self.dim();
        if axis >= d {
            return Err(Error::invalid(format!("axis {axis} out of range for d = {d}")));
        }
        let mut corner = vec![f64::INFINITY; d];
        corner[axis] = t;
        self.mass_below(&corner)
    }

    /// Smallest t with marginal CDF ≥ p along `axis`, to within 1e-12 in t.
    pub fn marginal_quantile(&self, axis: usize, p: f64) -> Result<f64> {
        let (lo, hi) = (self.inner.domain.lower()[axis], self.inner.domain.upper()[axis]);
        if self.closed_form() {
            if let Density::ExpLinear { .. } = self.inner.density {
                if axis != 0 {
                    return Ok(closed_form_quantile(&Density::Uniform, lo, hi, p));
                }
            }
            return Ok(closed_form_quantile(&self.inner.density, lo, hi, p));
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > BISECTION_TOL {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.marginal_cdf(axis, mid)?.value < p {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Inverse CDF in d = 1.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(format!("inverse CDF needs d = 1, got d = {}", self.dim())));
        }
        self.marginal_quantile(0, p)
    }

    /// Exact draw from π by rejection from the bounding box; independent of
    /// any generator function.
    pub fn sample_reference(&self, rng: &mut Rng) -> Point {
        let domain = &self.inner.domain;
        let (lo, hi) = (domain.lower(), domain.upper());
        let log_sup = self.inner.density.log_sup(domain);
        let mut x = vec![0.0; lo.len()];
        loop {
            for j in 0..x.len() {
                x[j] = lo[j] + rng.next_f64() * (hi[j] - lo[j]);
            }
            if !domain.contains(&x) {
                continue;
            }
            let accept = (self.inner.density.log_value(&x) - log_sup).exp();
            if rng.next_f64() < accept {
                return Point::from_vec_unchecked(x);
            }
        }
    }

    /// Unnormalized integral of `weight` over (-∞, corner) ∩ G.
    fn integrate_weight(&self, corner: &[f64], weight: &dyn Fn(&[f64]) -> f64, scale: f64) -> Estimate {
        let domain = &self.inner.domain;
        match domain.dim() {
            1 | 2 => integrate_below_low_dim(domain, corner, weight, TOL_2D * scale),
            _ => {
                let cloud = QmcCloud::build(domain, weight);
                let scale = domain.lower().iter().zip(domain.upper()).map(|(a, b)| b - a).product::<f64>()
                    / QMC_POINTS as f64;
                let totals: Vec<f64> = cloud.totals.iter().map(|t| t * scale).collect();
                mean_with_three_sigma(&totals)
            }
        }
    }
}

/// ‖dν/dπ‖₂ for two measures on the same domain, with an error bound.
pub fn density_ratio_l2_norm(nu: &TargetMeasure, pi: &TargetMeasure) -> Result<Estimate> {
    if nu.domain() != pi.domain() {
        return Err(Error::invalid("density ratio needs both measures on the same domain"));
    }
    if matches!((nu.density(), pi.density()), (Density::Uniform, Density::Uniform)) {
        return Ok(Estimate { value: 1.0, error: 0.0 });
    }
    let (zn, zp) = (nu.normalizer(), pi.normalizer());
    // ‖dν/dπ‖₂² = (Z_π / Z_ν²) ∫ ρ_ν² / ρ_π.
    let weight = |x: &[f64]| (2.0 * nu.density().log_value(x) - pi.density().log_value(x)).exp();
    let full = vec![f64::INFINITY; nu.dim()];
    let scale = zn.value * zn.value / zp.value;
    let raw = pi.integrate_weight(&full, &weight, scale);
    let factor = zp.value / (zn.value * zn.value);
    let sq = raw.value * factor;
    let rel = raw.error / raw.value.abs().max(f64::MIN_POSITIVE) + zp.error / zp.value + 2.0 * zn.error / zn.value;
    let value = sq.max(0.0).sqrt();
    Ok(Estimate { value, error: 0.5 * value * rel })
}

/// ‖dν/dπ − 1‖₂ = sqrt(‖dν/dπ‖₂² − 1).
pub fn centered_norm(norm: f64) -> f64 {
    (norm * norm - 1.0).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corner(v: &[f64]) -> AnchoredBox {
        AnchoredBox::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_interval_half_mass_is_exact() {
        let m = TargetMeasure::uniform(Domain::ball(1).unwrap()).unwrap();
        let e = m.box_mass(&corner(&[0.0])).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.error, 0.0);
    }

    #[test]
    fn full_box_has_unit_mass() {
        for d in 1..=4 {
            let m = TargetMeasure::new(Domain::ball(d).unwrap(), Density::ExpLinear { alpha: 1.0 }).unwrap();
            let e = m.box_mass(&AnchoredBox::full(d)).unwrap();
            assert_eq!(e.value, 1.0);
        }
    }

    #[test]
    fn quarter_disc() {
        let m = TargetMeasure::uniform(Domain::ball(2).unwrap()).unwrap();
        let e = m.box_mass(&corner(&[0.0, 0.0])).unwrap();
        assert!((e.value - 0.25).abs() < 1e-10, "{e:?}");
        assert!(e.error <= 1e-8);
    }

    #[test]
    fn custom_density_matches_closed_form_in_1d() {
        let closed = TargetMeasure::new(Domain::ball(1).unwrap(), Density::ExpLinear { alpha: 1.3 }).unwrap();
        let quad =
            TargetMeasure::new(Domain::ball(1).unwrap(), Density::custom("exp", 1.3, |x: &[f64]| 1.3 * x[0])).unwrap();
        for &c in &[-0.99, -0.5, 0.0, 0.123_456, 0.77, 0.999] {
            let a = closed.box_mass(&corner(&[c])).unwrap();
            let b = quad.box_mass(&corner(&[c])).unwrap();
            assert!((a.value - b.value).abs() <= 1e-10, "c={c}: {} vs {}", a.value, b.value);
            assert!((a.value - b.value).abs() <= b.error + 1e-14);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let closed = TargetMeasure::new(Domain::ball(1).unwrap(), Density::ExpLinear { alpha: 2.0 }).unwrap();
        let quad =
            TargetMeasure::new(Domain::ball(1).unwrap(), Density::custom("exp", 2.0, |x: &[f64]| 2.0 * x[0])).unwrap();
        for &p in &[0.01, 0.3, 0.5, 0.9] {
            let x = closed.quantile(p).unwrap();
            assert!((closed.marginal_cdf(0, x).unwrap().value - p).abs() < 1e-13);
            let y = quad.quantile(p).unwrap();
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn qmc_mass_in_3d_is_within_its_bound() {
        // Octant of the uniform ball has mass 1/8.
        let m = TargetMeasure::uniform(Domain::ball(3).unwrap()).unwrap();
        let e = m.box_mass(&corner(&[0.0, 0.0, 0.0])).unwrap();
        assert!((e.value - 0.125).abs() <= e.error.max(1e-3), "{e:?}");
        assert!(e.error < 5e-3);
    }

    #[test]
    fn disc_fast_path_agrees_with_nested_quadrature() {
        let fast = TargetMeasure::new(Domain::ball(2).unwrap(), Density::ExpLinear { alpha: 1.5 }).unwrap();
        let slow = TargetMeasure::new(Domain::ball(2).unwrap(), Density::custom("exp", 1.5, |x: &[f64]| 1.5 * x[0]))
            .unwrap();
        for c in [[0.3, -0.2], [-0.7, 0.9], [0.99, 0.01], [2.0, -0.5]] {
            let a = fast.box_mass(&corner(&c)).unwrap();
            let b = slow.box_mass(&corner(&c)).unwrap();
            assert!((a.value - b.value).abs() < 1e-8, "{c:?}: {} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn uniform_box_product_masses() {
        let m = TargetMeasure::uniform(Domain::rect(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap()).unwrap();
        let e = m.box_mass(&corner(&[0.5, 1.0])).unwrap();
        assert_eq!(e.value, 0.25);
    }

    #[test]
    fn rejects_zero_density() {
        let r = TargetMeasure::new(Domain::ball(1).unwrap(), Density::custom("bad", 0.0, |_| f64::NEG_INFINITY));
        assert!(r.is_err());
    }

    #[test]
    fn l2_norm_of_uniform_against_exp_linear() {
        // ν uniform on [-1,1], π ∝ e^{αx}: ‖dν/dπ‖₂² = sinh(α)² / α² (closed form).
        let alpha: f64 = 1.0;
        let nu = TargetMeasure::uniform(Domain::ball(1).unwrap()).unwrap();
        let pi = TargetMeasure::new(Domain::ball(1).unwrap(), Density::ExpLinear { alpha }).unwrap();
        let n = density_ratio_l2_norm(&nu, &pi).unwrap();
        let exact = alpha.sinh() / alpha;
        assert!((n.value - exact).abs() < 1e-9, "{} vs {}", n.value, exact);
        assert!(n.value <= alpha.exp());
    }

    #[test]
    fn reference_sampler_matches_masses() {
        let m = TargetMeasure::new(Domain::ball(2).unwrap(), Density::ExpLinear { alpha: 1.0 }).unwrap();
        let mut rng = Rng::new(4);
        let n = 20_000;
        let b = corner(&[0.2, -0.1]);
        let hits = (0..n).filter(|_| b.contains(m.sample_reference(&mut rng).coords())).count();
        let p = m.box_mass(&b).unwrap().value;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
    }
}
