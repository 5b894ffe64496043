use super::exact::star_discrepancy_exact;
use crate::error::{Error, Result};
use crate::measure::TargetMeasure;
use crate::quadrature::Estimate;
use crate::types::{AnchoredBox, Point};

/// f(x) = f₀ + Σ_j w_j·1{x ∈ box_j}, with ‖f‖_{H₁} = |f₀| + Σ|w_j|.
#[derive(Debug, Clone, PartialEq)]
pub struct H1Function {
    pub f0: f64,
    pub atoms: Vec<(AnchoredBox, f64)>,
}

impl H1Function {
    pub fn new(f0: f64, atoms: Vec<(AnchoredBox, f64)>) -> Result<Self> {
        if !f0.is_finite() || atoms.iter().any(|(_, w)| !w.is_finite()) {
            return Err(Error::invalid("H₁ coefficients must be finite"));
        }
        if let Some((b, _)) = atoms.first() {
            let d = b.dim();
            if let Some((bad, _)) = atoms.iter().find(|(a, _)| a.dim() != d) {
                return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
            }
        }
        Ok(Self { f0, atoms })
    }

    /// The function with density f̃ against an atomic weight measure.
    pub fn from_weighted(f0: f64, ftilde: &[f64], weight: &WeightMeasure) -> Result<Self> {
        if ftilde.len() != weight.atoms.len() {
            return Err(Error::DimensionMismatch { expected: weight.atoms.len(), found: ftilde.len() });
        }
        let atoms = weight.atoms.iter().zip(ftilde).map(|((b, c), f)| (b.clone(), c * f)).collect();
        Self::new(f0, atoms)
    }

    pub fn norm(&self) -> f64 {
        self.f0.abs() + self.atoms.iter().map(|(_, w)| w.abs()).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.f0 + self.atoms.iter().filter(|(b, _)| b.contains(x)).map(|(_, w)| w).sum::<f64>()
    }

    /// ∫ f dπ = f₀ + Σ_j w_j π(box_j).
    pub fn integral(&self, measure: &TargetMeasure) -> Result<Estimate> {
        let mut acc = Estimate { value: self.f0, error: 0.0 };
        for (b, w) in &self.atoms {
            let m = measure.box_mass(b)?;
            acc.value += w * m.value;
            acc.error += w.abs() * m.error;
        }
        Ok(acc)
    }
}

/// Finite weight measure Σ_j c_j δ_{z_j} on box corners, c_j > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMeasure {
    pub atoms: Vec<(AnchoredBox, f64)>,
}

impl WeightMeasure {
    pub fn new(atoms: Vec<(AnchoredBox, f64)>) -> Result<Self> {
        if atoms.iter().any(|(_, c)| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("weight masses must be positive and finite"));
        }
        Ok(Self { atoms })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhReport {
    /// |∫ f dπ − (1/n) Σ f(x_i)|
    pub exact_error: f64,
    /// ‖f‖_{H₁} · upper star discrepancy
    pub bound: f64,
    /// Quadrature error carried by the exact error.
    pub slack: f64,
}

/// Integration error of an H₁ function against its discrepancy bound.
pub fn kh_error_bound(f: &H1Function, points: &[Point], measure: &TargetMeasure) -> Result<KhReport> {
    let integral = f.integral(measure)?;
    let mean = points.iter().map(|p| f.eval(p.coords())).sum::<f64>() / points.len() as f64;
    let star = star_discrepancy_exact(points, measure)?;
    let report = KhReport { exact_error: (integral.value - mean).abs(), bound: f.norm() * star.upper, slack: integral.error };
    debug_assert!(report.exact_error <= report.bound + report.slack + 1e-12, "{report:?}");
    Ok(report)
}

/// (Σ_j c_j |local discrepancy at z_j|^p)^{1/p}; p = ∞ gives the maximum.
pub fn weighted_star_discrepancy(
    points: &[Point],
    measure: &TargetMeasure,
    weight: &WeightMeasure,
    p: f64,
) -> Result<Estimate> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("p = {p} must be at least 1")));
    }
    if points.is_empty() {
        return Err(Error::invalid("point set is empty"));
    }
    let n = points.len() as f64;
    let mut locals = Vec::with_capacity(weight.atoms.len());
    for (b, c) in &weight.atoms {
        let m = measure.box_mass(b)?;
        let freq = points.iter().filter(|x| b.contains(x.coords())).count() as f64 / n;
        locals.push(((freq - m.value).abs(), m.error, *c));
    }
    let combine = |shift: f64| -> f64 {
        if p.is_infinite() {
            locals.iter().map(|(l, e, _)| (l + shift * e).max(0.0)).fold(0.0, f64::max)
        } else {
            locals.iter().map(|(l, e, c)| c * (l + shift * e).max(0.0).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    };
    let value = combine(0.0);
    Ok(Estimate { value, error: combine(1.0) - value })
}

/// |f₀| + (Σ_j c_j |f̃_j|^q)^{1/q}; q = ∞ gives the maximum of |f̃_j|.
pub fn hq_norm(f0: f64, ftilde: &[f64], weight: &WeightMeasure, q: f64) -> Result<f64> {
    if ftilde.len() != weight.atoms.len() {
        return Err(Error::DimensionMismatch { expected: weight.atoms.len(), found: ftilde.len() });
    }
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("q = {q} must be at least 1")));
    }
    let tail = if q.is_infinite() {
        ftilde.iter().map(|f| f.abs()).fold(0.0, f64::max)
    } else {
        weight.atoms.iter().zip(ftilde).map(|((_, c), f)| c * f.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    };
    Ok(f0.abs() + tail)
}
