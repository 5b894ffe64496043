//! Metropolis algorithm with ball-walk proposals on the Euclidean unit ball.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::bounds::ballwalk_gap_bound;
use crate::chain::{ChainSystem, GeneratorFunction, UpdateFunction};
use crate::error::{Error, Result};
use crate::measure::{Density, Domain, TargetMeasure};
use crate::rng::Rng;
use crate::types::Point;

const BISECTION_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-9;

/// How log-concavity of a density is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcavityWitness {
    Affine,
    VerifiedNumerically,
    Asserted,
}

/// Log-density on B_d with its log-Lipschitz constant.
#[derive(Debug, Clone)]
pub struct LogDensity {
    pub density: Density,
    pub alpha: f64,
    pub witness: ConcavityWitness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditFailure {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub excess: f64,
}

impl LogDensity {
    pub fn log_value(&self, x: &[f64]) -> f64 {
        self.density.log_value(x)
    }

    /// Checks |log ρ(x) − log ρ(y)| ≤ α‖x−y‖ on random pairs in B_d.
    pub fn lipschitz_audit(&self, d: usize, pairs: usize, rng: &mut Rng) -> std::result::Result<(), AuditFailure> {
        for _ in 0..pairs {
            let (x, y) = (uniform_in_ball(d, 1.0, rng), uniform_in_ball(d, 1.0, rng));
            let gap = (self.log_value(&x) - self.log_value(&y)).abs();
            let allowed = self.alpha * distance(&x, &y);
            if gap > allowed * (1.0 + 1e-12) + 1e-12 {
                return Err(AuditFailure { x, y, excess: gap - allowed });
            }
        }
        Ok(())
    }

    /// Checks midpoint log-concavity on random pairs in B_d.
    pub fn concavity_audit(&self, d: usize, pairs: usize, rng: &mut Rng) -> std::result::Result<(), AuditFailure> {
        for _ in 0..pairs {
            let (x, y) = (uniform_in_ball(d, 1.0, rng), uniform_in_ball(d, 1.0, rng));
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let chord = 0.5 * (self.log_value(&x) + self.log_value(&y));
            let excess = chord - self.log_value(&mid);
            if excess > 1e-12 * (1.0 + chord.abs()) {
                return Err(AuditFailure { x, y, excess });
            }
        }
        Ok(())
    }
}

/// Built-in members of the log-concave, log-Lipschitz class.
pub fn density_presets(name: &str, alpha: f64, d: usize) -> Result<LogDensity> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    match name {
        "uniform" => Ok(LogDensity { density: Density::Uniform, alpha: 0.0, witness: ConcavityWitness::Affine }),
        "exp-linear" => {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(Error::invalid(format!("exp-linear needs a finite α ≥ 0, got {alpha}")));
            }
            Ok(LogDensity { density: Density::ExpLinear { alpha }, alpha, witness: ConcavityWitness::Affine })
        }
        other => Err(Error::invalid(format!("unknown density preset {other:?}; expected uniform or exp-linear"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallWalkParams {
    pub gamma: f64,
    pub d: usize,
}

impl BallWalkParams {
    pub fn new(gamma: f64, d: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || d == 0 {
            return Err(Error::invalid(format!("ball walk needs γ > 0 and d ≥ 1, got γ = {gamma}, d = {d}")));
        }
        Ok(Self { gamma, d })
    }
}

/// Uniform generator for S^{d−1} from d − 1 coordinates (d ≥ 2).
pub fn sphere_generator(v: &[f64], d: usize) -> Vec<f64> {
    match d {
        2 => {
            let t = 2.0 * PI * v[0];
            vec![t.cos(), t.sin()]
        }
        3 => {
            let z = 1.0 - 2.0 * v[0];
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = 2.0 * PI * v[1];
            vec![r * t.cos(), r * t.sin(), z]
        }
        _ => hyperspherical(v, d),
    }
}

/// Polar angles θ_k with density ∝ sin^{d−1−k} θ_k, then a uniform azimuth.
fn hyperspherical(v: &[f64], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    let mut scale = 1.0;
    for k in 0..d - 2 {
        let m = (d - 2 - k) as u32;
        let theta = sin_power_quantile(m, v[k]);
        x[k] = scale * theta.cos();
        scale *= theta.sin();
    }
    let phi = 2.0 * PI * v[d - 2];
    x[d - 2] = scale * phi.cos();
    x[d - 1] = scale * phi.sin();
    x
}

/// ∫₀^θ sin^m t dt.
fn sin_power_integral(m: u32, theta: f64) -> f64 {
    match m {
        0 => theta,
        1 => 1.0 - theta.cos(),
        _ => {
            let mf = m as f64;
            -theta.sin().powi(m as i32 - 1) * theta.cos() / mf + (mf - 1.0) / mf * sin_power_integral(m - 2, theta)
        }
    }
}

fn sin_power_quantile(m: u32, p: f64) -> f64 {
    let total = sin_power_integral(m, PI);
    let (mut a, mut b) = (0.0, PI);
    while b - a > BISECTION_TOL {
        let mid = 0.5 * (a + b);
        if sin_power_integral(m, mid) / total < p {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Inverse of [`sphere_generator`] for d ∈ {2, 3}.
pub fn sphere_inverse(w: &[f64]) -> Result<Vec<f64>> {
    let azimuth = |x: f64, y: f64| {
        let t = y.atan2(x) / (2.0 * PI);
        if t < 0.0 {
            t + 1.0
        } else {
            t
        }
    };
    match w.len() {
        2 => Ok(vec![azimuth(w[0], w[1])]),
        3 => Ok(vec![((1.0 - w[2]) / 2.0).clamp(0.0, 1.0), azimuth(w[0], w[1])]),
        d => Err(Error::Unsupported(format!("no closed-form sphere inverse for d = {d}"))),
    }
}

/// ψ_γ: uniform point of the γ-ball from d coordinates, radius coordinate last.
/// For d = 1 the single coordinate carries sign and radius: γ(2v − 1).
pub fn ball_generator(v: &[f64], gamma: f64) -> Vec<f64> {
    let d = v.len();
    if d == 1 {
        return vec![gamma * (2.0 * v[0] - 1.0)];
    }
    let r = gamma * v[d - 1].powf(1.0 / d as f64);
    sphere_generator(&v[..d - 1], d).into_iter().map(|c| r * c).collect()
}

/// Driver coordinates with `ball_generator(v, γ) = z`, for d ≤ 3.
pub fn ball_inverse(z: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let d = z.len();
    let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > gamma * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("‖z‖ = {norm} exceeds γ = {gamma}")));
    }
    if d == 1 {
        return Ok(vec![((z[0] / gamma + 1.0) / 2.0).clamp(0.0, 1.0)]);
    }
    if d > 3 {
        return Err(Error::Unsupported(format!("no closed-form ball inverse for d = {d}")));
    }
    let mut v = if norm == 0.0 {
        vec![0.0; d - 1]
    } else {
        sphere_inverse(&z.iter().map(|c| c / norm).collect::<Vec<_>>())?
    };
    v.push((norm / gamma).min(1.0).powi(d as i32));
    Ok(v)
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum()
}

/// Uniform draw from the γ-ball by rejection from the cube.
fn uniform_in_ball(d: usize, gamma: f64, rng: &mut Rng) -> Vec<f64> {
    let mut w = vec![0.0; d];
    loop {
        for c in w.iter_mut() {
            *c = 2.0 * rng.next_f64() - 1.0;
        }
        if norm_sq(&w) <= 1.0 {
            return w.into_iter().map(|c| gamma * c).collect();
        }
    }
}

/// Metropolis update with ball-walk proposal; driver dimension d + 1.
#[derive(Debug, Clone)]
pub struct MetropolisBallWalk {
    pub params: BallWalkParams,
    pub log_density: LogDensity,
}

impl MetropolisBallWalk {
    pub fn new(params: BallWalkParams, log_density: LogDensity) -> Self {
        Self { params, log_density }
    }

    fn accepts(&self, x: &[f64], y: &[f64], coin: f64) -> bool {
        if norm_sq(y) > 1.0 {
            return false;
        }
        let log_ratio = self.log_density.log_value(y) - self.log_density.log_value(x);
        coin <= log_ratio.min(0.0).exp()
    }
}

impl UpdateFunction for MetropolisBallWalk {
    fn state_dim(&self) -> usize {
        self.params.d
    }

    fn driver_dim(&self) -> usize {
        self.params.d + 1
    }

    fn apply(&self, x: &Point, u: &[f64]) -> Point {
        let d = self.params.d;
        let z = ball_generator(&u[..d], self.params.gamma);
        let y: Vec<f64> = x.coords().iter().zip(&z).map(|(a, b)| a + b).collect();
        if self.accepts(x.coords(), &y, u[d]) {
            Point::from_vec_unchecked(y)
        } else {
            x.clone()
        }
    }

    fn invert(&self, x: &Point, y: &Point) -> Result<Vec<f64>> {
        let (d, gamma) = (self.params.d, self.params.gamma);
        if d > 3 {
            return Err(Error::Unsupported(format!("update inversion implemented for d ≤ 3, got d = {d}")));
        }
        let mut u = if x == y {
            // Propose a point outside the ball so the move is rejected.
            let r = norm_sq(x.coords()).sqrt();
            if r + gamma <= 1.0 {
                return Err(Error::invalid(format!("γ = {gamma} cannot leave the ball from ‖x‖ = {r}")));
            }
            let dir: Vec<f64> = if r > 0.0 {
                x.coords().iter().map(|c| c / r).collect()
            } else {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            };
            let z: Vec<f64> = dir.iter().map(|c| gamma * c).collect();
            ball_inverse(&z, gamma)?
        } else {
            let z: Vec<f64> = y.coords().iter().zip(x.coords()).map(|(b, a)| b - a).collect();
            ball_inverse(&z, gamma)?
        };
        u.push(0.0);
        let back = self.apply(x, &u);
        let dev = back.sup_distance(y);
        if dev > ROUND_TRIP_TOL {
            return Err(Error::invalid(format!("inversion round trip off by {dev}")));
        }
        Ok(u)
    }

    fn sample_kernel(&self, x: &Point, rng: &mut Rng) -> Point {
        let z = uniform_in_ball(self.params.d, self.params.gamma, rng);
        let y: Vec<f64> = x.coords().iter().zip(&z).map(|(a, b)| a + b).collect();
        if self.accepts(x.coords(), &y, rng.next_f64()) {
            Point::from_vec_unchecked(y)
        } else {
            x.clone()
        }
    }

    fn label(&self) -> String {
        format!("metropolis-ballwalk(γ={})", self.params.gamma)
    }
}

/// ψ₁: uniform law on B_d.
#[derive(Debug, Clone, Copy)]
pub struct UniformBallGenerator {
    d: usize,
}

impl UniformBallGenerator {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self { d })
    }
}

impl GeneratorFunction for UniformBallGenerator {
    fn state_dim(&self) -> usize {
        self.d
    }

    fn min_dim(&self) -> usize {
        self.d
    }

    fn apply(&self, u: &[f64]) -> Point {
        Point::from_vec_unchecked(ball_generator(&u[..self.d], 1.0))
    }

    fn invert(&self, x: &Point) -> Result<Vec<f64>> {
        ball_inverse(x.coords(), 1.0)
    }

    fn sample_reference(&self, rng: &mut Rng) -> Point {
        Point::from_vec_unchecked(uniform_in_ball(self.d, 1.0, rng))
    }
}

/// Ball-walk system on B_d started from the uniform law via ψ₁.
///
/// Λ₀ comes from the conductance gap bound when γ is the recommended radius
/// γ*; any other radius carries no certified gap and gets Λ₀ = 1.
pub fn metropolis_system(d: usize, log_density: LogDensity, gamma: f64) -> Result<ChainSystem> {
    let params = BallWalkParams::new(gamma, d)?;
    let target = TargetMeasure::new(Domain::ball(d)?, log_density.density.clone())?;
    let initial = TargetMeasure::uniform(Domain::ball(d)?)?;
    let (gamma_star, gap) = ballwalk_gap_bound(log_density.alpha, d)?;
    let lambda0 = if (gamma - gamma_star).abs() <= 1e-12 * gamma_star { 1.0 - gap } else { 1.0 };
    let generator: Arc<dyn GeneratorFunction> = Arc::new(UniformBallGenerator::new(d)?);
    ChainSystem::new(Arc::new(MetropolisBallWalk::new(params, log_density)), generator, target, initial, lambda0, None)
}
