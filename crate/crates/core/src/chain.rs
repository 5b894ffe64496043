//! Update and generator functions, chain paths driven by a driver sequence,
//! and reference kernels with known spectral data.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::ballwalk::UniformBallGenerator;
use crate::error::{Error, Result};
use crate::measure::{centered_norm, density_ratio_l2_norm, Domain, TargetMeasure};
use crate::quadrature::Estimate;
use crate::rng::Rng;
use crate::sequences::uniform_driver;
use crate::types::{DriverSequence, Point};

/// Map φ: G × [0,1]^s → G whose uniform pushforward at x is K(x, ·).
pub trait UpdateFunction: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Driver coordinates consumed per step.
    fn driver_dim(&self) -> usize;

    fn apply(&self, x: &Point, u: &[f64]) -> Point;

    /// A driver point u with φ(x; u) = y, if the update can produce one.
    fn invert(&self, _x: &Point, _y: &Point) -> Result<Vec<f64>> {
        Err(Error::Unsupported(format!("{} has no inverse", self.label())))
    }

    /// Draw from K(x, ·) without going through `apply`.
    fn sample_kernel(&self, x: &Point, rng: &mut Rng) -> Point;

    fn label(&self) -> String;
}

/// Map ψ: [0,1]^s → G whose uniform pushforward is the initial law ν.
pub trait GeneratorFunction: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Leading driver coordinates read; the rest of u₀ is ignored.
    fn min_dim(&self) -> usize;

    fn apply(&self, u: &[f64]) -> Point;

    /// A driver point mapping to x.
    fn invert(&self, _x: &Point) -> Result<Vec<f64>> {
        Err(Error::Unsupported("generator has no inverse".into()))
    }

    /// Draw from ν without going through `apply`.
    fn sample_reference(&self, rng: &mut Rng) -> Point;
}

/// Generator from per-axis inverse marginal CDFs. Exact for d = 1 and for
/// product-form measures on boxes.
#[derive(Debug, Clone)]
pub struct QuantileGenerator {
    measure: TargetMeasure,
}

impl QuantileGenerator {
    pub fn new(measure: TargetMeasure) -> Result<Self> {
        if measure.dim() != 1 && !measure.has_product_form() {
            return Err(Error::Unsupported(format!(
                "inverse-CDF generator needs d = 1 or a product-form box measure, got {:?}",
                measure
            )));
        }
        Ok(Self { measure })
    }
}

impl GeneratorFunction for QuantileGenerator {
    fn state_dim(&self) -> usize {
        self.measure.dim()
    }

    fn min_dim(&self) -> usize {
        self.measure.dim()
    }

    fn apply(&self, u: &[f64]) -> Point {
        let x = (0..self.measure.dim())
            .map(|j| self.measure.marginal_quantile(j, u[j]).expect("axis within dimension"))
            .collect();
        Point::from_vec_unchecked(x)
    }

    fn invert(&self, x: &Point) -> Result<Vec<f64>> {
        (0..self.measure.dim()).map(|j| Ok(self.measure.marginal_cdf(j, x[j])?.value)).collect()
    }

    fn sample_reference(&self, rng: &mut Rng) -> Point {
        self.measure.sample_reference(rng)
    }
}

/// Generator for `measure`, when one is available.
pub fn measure_generator(measure: &TargetMeasure) -> Result<Arc<dyn GeneratorFunction>> {
    if let (Domain::Ball { d }, crate::measure::Density::Uniform) = (measure.domain(), measure.density()) {
        if *d >= 2 {
            return Ok(Arc::new(UniformBallGenerator::new(*d)?));
        }
    }
    Ok(Arc::new(QuantileGenerator::new(measure.clone())?))
}

/// Closed-form νPⁱ for kernels of the form (1−a)·I + a·π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalOracle {
    None,
    Lazy { a: f64 },
}

/// Update that holds with probability 1−a and otherwise draws afresh from π.
/// With a = 1 this is direct simulation.
pub struct LazyDirectUpdate {
    generator: Arc<dyn GeneratorFunction>,
    target: TargetMeasure,
    a: f64,
}

impl UpdateFunction for LazyDirectUpdate {
    fn state_dim(&self) -> usize {
        self.generator.state_dim()
    }

    fn driver_dim(&self) -> usize {
        if self.a == 1.0 {
            self.generator.min_dim()
        } else {
            self.generator.min_dim() + 1
        }
    }

    fn apply(&self, x: &Point, u: &[f64]) -> Point {
        if self.a == 1.0 || u[self.generator.min_dim()] < self.a {
            self.generator.apply(u)
        } else {
            x.clone()
        }
    }

    fn invert(&self, x: &Point, y: &Point) -> Result<Vec<f64>> {
        let mut u = self.generator.invert(y)?;
        if self.a < 1.0 {
            // Hold when y = x; otherwise take a fresh draw.
            u.push(if x == y { 1.0 } else { 0.0 });
        }
        Ok(u)
    }

    fn sample_kernel(&self, x: &Point, rng: &mut Rng) -> Point {
        if self.a == 1.0 || rng.next_f64() < self.a {
            self.target.sample_reference(rng)
        } else {
            x.clone()
        }
    }

    fn label(&self) -> String {
        if self.a == 1.0 {
            "direct".into()
        } else {
            format!("lazy-direct({})", self.a)
        }
    }
}

/// Update function, generator, target and the known spectral data of the kernel.
#[derive(Clone)]
pub struct ChainSystem {
    update: Arc<dyn UpdateFunction>,
    generator: Arc<dyn GeneratorFunction>,
    target: TargetMeasure,
    initial: TargetMeasure,
    lambda0: f64,
    beta: Option<f64>,
    nu_norm: f64,
    marginals: MarginalOracle,
}

impl fmt::Debug for ChainSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainSystem")
            .field("update", &self.update.label())
            .field("target", &self.target)
            .field("initial", &self.initial)
            .field("lambda0", &self.lambda0)
            .field("beta", &self.beta)
            .field("nu_norm", &self.nu_norm)
            .field("marginals", &self.marginals)
            .finish()
    }
}

impl ChainSystem {
    /// `lambda0` is max{Λ, 0} or a certified upper value for it; pass 1 when
    /// nothing is known.
    pub fn new(
        update: Arc<dyn UpdateFunction>,
        generator: Arc<dyn GeneratorFunction>,
        target: TargetMeasure,
        initial: TargetMeasure,
        lambda0: f64,
        beta: Option<f64>,
    ) -> Result<Self> {
        let d = target.dim();
        if update.state_dim() != d || generator.state_dim() != d || initial.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: update.state_dim().max(generator.state_dim()) });
        }
        if generator.min_dim() > update.driver_dim() {
            return Err(Error::invalid(format!(
                "generator reads {} coordinates but the update consumes only {}",
                generator.min_dim(),
                update.driver_dim()
            )));
        }
        if !(0.0..=1.0).contains(&lambda0) {
            return Err(Error::invalid(format!("lambda0 = {lambda0} outside [0, 1]")));
        }
        if let Some(b) = beta {
            if !(0.0..=1.0).contains(&b) || lambda0 > b {
                return Err(Error::invalid(format!("beta = {b} must lie in [lambda0, 1]")));
            }
        }
        let norm = density_ratio_l2_norm(&initial, &target)?;
        Ok(Self {
            update,
            generator,
            target,
            initial,
            lambda0,
            beta,
            nu_norm: norm.value + norm.error,
            marginals: MarginalOracle::None,
        })
    }

    /// Same kernel started from ν instead of the current initial law.
    pub fn with_initial(mut self, initial: TargetMeasure) -> Result<Self> {
        let generator = measure_generator(&initial)?;
        if generator.min_dim() > self.update.driver_dim() {
            return Err(Error::invalid("initial generator needs more coordinates than the update provides"));
        }
        let norm = density_ratio_l2_norm(&initial, &self.target)?;
        self.generator = generator;
        self.initial = initial;
        self.nu_norm = norm.value + norm.error;
        Ok(self)
    }

    pub fn update(&self) -> &dyn UpdateFunction {
        self.update.as_ref()
    }

    pub fn generator(&self) -> &dyn GeneratorFunction {
        self.generator.as_ref()
    }

    pub fn target(&self) -> &TargetMeasure {
        &self.target
    }

    pub fn initial(&self) -> &TargetMeasure {
        &self.initial
    }

    pub fn driver_dim(&self) -> usize {
        self.update.driver_dim()
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Upper value of ‖dν/dπ‖₂.
    pub fn nu_norm(&self) -> f64 {
        self.nu_norm
    }

    /// Upper value of ‖dν/dπ − 1‖₂.
    pub fn nu_norm_centered(&self) -> f64 {
        centered_norm(self.nu_norm)
    }

    pub fn marginal_oracle(&self) -> MarginalOracle {
        self.marginals
    }

    /// νPⁱ of the box below `corner`, when the kernel has closed-form marginals.
    pub fn marginal_mass(&self, i: usize, corner: &[f64]) -> Option<Result<Estimate>> {
        let MarginalOracle::Lazy { a } = self.marginals else { return None };
        let w = (1.0 - a).powi(i as i32);
        Some(self.mix(w, corner))
    }

    /// (1/n) Σ_{i=n₀}^{n₀+n−1} νPⁱ of the box below `corner`.
    pub fn averaged_marginal(&self, n0: usize, n: usize, corner: &[f64]) -> Option<Result<Estimate>> {
        let MarginalOracle::Lazy { a } = self.marginals else { return None };
        let w = 1.0 - a;
        let sum = if w == 0.0 {
            if n0 == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            w.powi(n0 as i32) * (1.0 - w.powi(n as i32)) / a
        };
        Some(self.mix(sum / n as f64, corner))
    }

    fn mix(&self, w: f64, corner: &[f64]) -> Result<Estimate> {
        let nu = self.initial.mass_below(corner)?;
        let pi = self.target.mass_below(corner)?;
        Ok(Estimate { value: w * nu.value + (1.0 - w) * pi.value, error: w * nu.error + (1.0 - w) * pi.error })
    }
}

/// Direct simulation: φ(x; u) = ψ_π(u), so Λ₀ = β = 0.
pub fn make_direct_kernel(target: TargetMeasure) -> Result<ChainSystem> {
    make_lazy_direct_kernel(target, 1.0)
}

/// K = (1−a)·I + a·π with exact marginals νPⁱ = (1−a)ⁱν + (1−(1−a)ⁱ)π.
/// Starts at ν = π; use [`ChainSystem::with_initial`] for another start.
pub fn make_lazy_direct_kernel(target: TargetMeasure, a: f64) -> Result<ChainSystem> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::invalid(format!("hold-probability complement a = {a} not in (0, 1]")));
    }
    let generator = measure_generator(&target)?;
    let update = Arc::new(LazyDirectUpdate { generator: generator.clone(), target: target.clone(), a });
    let lambda0 = 1.0 - a;
    let mut system = ChainSystem::new(update, generator, target.clone(), target, lambda0, Some(lambda0))?;
    system.marginals = MarginalOracle::Lazy { a };
    Ok(system)
}

/// States x₁, …, x_{n₀+n} of a chain together with its driver.
#[derive(Debug, Clone)]
pub struct ChainPath {
    pub states: Vec<Point>,
    pub burn_in: usize,
    pub driver: DriverSequence,
}

impl ChainPath {
    /// x_{n₀+1}, …, x_{n₀+n}.
    pub fn retained(&self) -> &[Point] {
        &self.states[self.burn_in..]
    }
}

/// x₁ = ψ(u₀), x_{i+1} = φ(x_i; u_i), keeping the last len − n₀ states.
pub fn run_chain(system: &ChainSystem, driver: &DriverSequence, burn_in: usize) -> Result<ChainPath> {
    let s = system.driver_dim();
    if driver.dim() != s {
        return Err(Error::DimensionMismatch { expected: s, found: driver.dim() });
    }
    if driver.len() < burn_in + 1 {
        return Err(Error::invalid(format!("driver of length {} too short for burn-in {burn_in}", driver.len())));
    }
    let domain = system.target.domain();
    let mut states = Vec::with_capacity(driver.len());
    let mut x = system.generator.apply(driver.point(0));
    if !domain.contains(x.coords()) {
        return Err(Error::StateLeftDomain { step: 0 });
    }
    for i in 1..driver.len() {
        let next = system.update.apply(&x, driver.point(i));
        if !domain.contains(next.coords()) {
            return Err(Error::StateLeftDomain { step: i });
        }
        states.push(std::mem::replace(&mut x, next));
    }
    states.push(x);
    Ok(ChainPath { states, burn_in, driver: driver.clone() })
}

/// φ_i(x; u₁, …, u_i): the update applied along a list of driver points.
pub fn iterate_update(update: &dyn UpdateFunction, x: &Point, us: &[&[f64]]) -> Point {
    us.iter().fold(x.clone(), |acc, u| update.apply(&acc, u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationComparison {
    pub via_driver: f64,
    pub via_kernel: f64,
    /// Standard error of the difference of the two estimates.
    pub stderr: f64,
}

/// Estimate E F(X₁, …, X_i) once through (ψ, φ) on uniform drivers and once
/// through the reference samplers of ν and K.
pub fn compare_expectation<F>(
    system: &ChainSystem,
    f: F,
    horizon: usize,
    replications: usize,
    rng: &Rng,
) -> Result<ExpectationComparison>
where
    F: Fn(&[Point]) -> f64 + Sync,
{
    if horizon == 0 || replications < 2 {
        return Err(Error::invalid("need horizon ≥ 1 and at least two replications"));
    }
    let s = system.driver_dim();
    let driver_root = rng.split(0);
    let kernel_root = rng.split(1);
    let pairs: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let driver = uniform_driver(horizon, s, &driver_root.split(r as u64))?;
            let path = run_chain(system, &driver, 0)?;
            let mut stream = kernel_root.split(r as u64);
            let mut states = Vec::with_capacity(horizon);
            states.push(system.generator.sample_reference(&mut stream));
            for i in 1..horizon {
                let next = system.update.sample_kernel(&states[i - 1], &mut stream);
                states.push(next);
            }
            Ok((f(&path.states), f(&states)))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let m = replications as f64;
    Ok(ExpectationComparison { via_driver: ma, via_kernel: mb, stderr: (va / m + vb / m).sqrt() })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Density;
    use crate::types::Provenance;

    fn uniform_interval() -> TargetMeasure {
        TargetMeasure::uniform(Domain::ball(1).unwrap()).unwrap()
    }

    #[test]
    fn single_point_driver_gives_generator_image() {
        let sys = make_direct_kernel(uniform_interval()).unwrap();
        let driver = DriverSequence::new(1, vec![0.75], Provenance::Explicit).unwrap();
        let path = run_chain(&sys, &driver, 0).unwrap();
        assert_eq!(path.states.len(), 1);
        assert_eq!(path.states[0].coords(), &[0.5]);
    }

    #[test]
    fn direct_kernel_ignores_state() {
        let sys = make_direct_kernel(uniform_interval()).unwrap();
        let u = [0.3];
        let a = sys.update().apply(&Point::new(vec![-0.9]).unwrap(), &u);
        let b = sys.update().apply(&Point::new(vec![0.9]).unwrap(), &u);
        assert_eq!(a, b);
        assert_eq!(sys.lambda0(), 0.0);
        assert_eq!(sys.beta(), Some(0.0));
        assert_eq!(sys.nu_norm(), 1.0);
    }

    #[test]
    fn lazy_rejects_bad_a() {
        assert!(make_lazy_direct_kernel(uniform_interval(), 0.0).is_err());
        assert!(make_lazy_direct_kernel(uniform_interval(), 1.5).is_err());
        let s = make_lazy_direct_kernel(uniform_interval(), 0.5).unwrap();
        assert_eq!(s.lambda0(), 0.5);
        assert_eq!(s.driver_dim(), 2);
    }

    #[test]
    fn lazy_marginal_closed_form() {
        let pi = TargetMeasure::new(Domain::ball(1).unwrap(), Density::ExpLinear { alpha: 1.0 }).unwrap();
        let sys = make_lazy_direct_kernel(pi.clone(), 0.5).unwrap().with_initial(uniform_interval()).unwrap();
        let c = [0.2];
        let got = sys.marginal_mass(2, &c).unwrap().unwrap().value;
        let nu = uniform_interval().mass_below(&c).unwrap().value;
        let p = pi.mass_below(&c).unwrap().value;
        assert!((got - (0.25 * nu + 0.75 * p)).abs() < 1e-15);
        // Averaged form equals the mean of the pointwise marginals.
        let avg = sys.averaged_marginal(3, 5, &c).unwrap().unwrap().value;
        let direct: f64 = (3..8).map(|i| sys.marginal_mass(i, &c).unwrap().unwrap().value).sum::<f64>() / 5.0;
        assert!((avg - direct).abs() < 1e-14);
    }

    #[test]
    fn burn_in_keeps_tail() {
        let sys = make_direct_kernel(uniform_interval()).unwrap();
        let driver = uniform_driver(10, 1, &Rng::new(3)).unwrap();
        let path = run_chain(&sys, &driver, 4).unwrap();
        assert_eq!(path.states.len(), 10);
        assert_eq!(path.retained().len(), 6);
        assert_eq!(path.retained()[0], path.states[4]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let sys = make_lazy_direct_kernel(uniform_interval(), 0.5).unwrap();
        let driver = uniform_driver(4, 1, &Rng::new(3)).unwrap();
        assert!(matches!(run_chain(&sys, &driver, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constant_function_expectation_is_exactly_one() {
        let sys = make_lazy_direct_kernel(uniform_interval(), 0.5).unwrap();
        let c = compare_expectation(&sys, |_| 1.0, 3, 50, &Rng::new(1)).unwrap();
        assert_eq!(c.via_driver, 1.0);
        assert_eq!(c.via_kernel, 1.0);
    }

    #[test]
    fn direct_expectation_matches_target_mass() {
        let sys = make_direct_kernel(uniform_interval()).unwrap();
        let c = compare_expectation(&sys, |xs| (xs[1][0] < 0.3) as u8 as f64, 2, 4000, &Rng::new(9)).unwrap();
        let p = 0.65;
        assert!((c.via_driver - p).abs() < 3.0 * c.stderr + 1e-3);
        assert!((c.via_kernel - p).abs() < 3.0 * c.stderr + 1e-3);
    }

    #[test]
    fn lazy_expectation_matches_mixture() {
        let pi = TargetMeasure::new(Domain::ball(1).unwrap(), Density::ExpLinear { alpha: 2.0 }).unwrap();
        let sys = make_lazy_direct_kernel(pi.clone(), 0.5).unwrap().with_initial(uniform_interval()).unwrap();
        let c = compare_expectation(&sys, |xs| (xs[1][0] < 0.0) as u8 as f64, 2, 4000, &Rng::new(11)).unwrap();
        let expected = 0.5 * 0.5 + 0.5 * pi.mass_below(&[0.0]).unwrap().value;
        assert!((c.via_driver - expected).abs() < 4.0 * c.stderr);
        assert!((c.via_kernel - expected).abs() < 4.0 * c.stderr);
    }
}
