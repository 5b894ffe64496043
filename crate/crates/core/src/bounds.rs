//! Closed-form discrepancy, concentration and mixing bounds.
//!
//! Logarithms are natural except in the Beck-type bounds, which use log₂.

use std::f64::consts::{E, LN_2};

use crate::error::{Error, Result};

/// Shared inputs of the bound calculators. Fields a calculator does not read
/// are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: u64,
    pub n0: u64,
    pub d: usize,
    pub s: usize,
    pub lambda0: f64,
    pub beta: f64,
    /// ‖dν/dπ‖₂
    pub nu_norm: f64,
    /// ‖dν/dπ − 1‖₂
    pub nu_norm_centered: f64,
    pub cover_size: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub c: f64,
    pub r: u64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            n: 1,
            n0: 0,
            d: 1,
            s: 1,
            lambda0: 0.0,
            beta: 0.0,
            nu_norm: 1.0,
            nu_norm_centered: 0.0,
            cover_size: 1.0,
            delta: 0.0,
            epsilon: 0.25,
            alpha: 0.0,
            gamma: 1.0,
            c: 0.0,
            r: 1,
        }
    }
}

impl BoundInputs {
    fn check(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("lambda0", self.lambda0)?;
        unit("beta", self.beta)?;
        for (name, v) in [
            ("nu_norm", self.nu_norm),
            ("nu_norm_centered", self.nu_norm_centered),
            ("cover_size", self.cover_size),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("c", self.c),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be nonnegative")));
            }
        }
        if self.d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(())
    }

    fn gap_factor(&self) -> f64 {
        ((1.0 + self.lambda0) / (1.0 - self.lambda0)).sqrt()
    }

    /// (1 − Λ₀ⁿ)/(n(1 − Λ₀)), with its limit 1 at Λ₀ = 1.
    fn geometric_average(&self) -> f64 {
        let n = self.n as f64;
        if self.lambda0 == 1.0 {
            1.0
        } else {
            (1.0 - self.lambda0.powf(n)) / (n * (1.0 - self.lambda0))
        }
    }
}

/// A discrepancy bound above 1 says nothing.
pub fn is_vacuous(bound: f64) -> bool {
    !(bound <= 1.0)
}

/// Probability that the average of n steps deviates from π(A) by more than c.
pub fn hoeffding_tail(i: &BoundInputs) -> Result<f64> {
    i.check()?;
    if !(i.c > 0.0) || i.n == 0 {
        return Err(Error::invalid("Hoeffding tail needs c > 0 and n ≥ 1"));
    }
    if i.lambda0 >= 1.0 {
        return Ok(1.0);
    }
    let rate = (1.0 - i.lambda0) / (1.0 + i.lambda0);
    Ok((2.0 * i.nu_norm * (-rate * i.c * i.c * i.n as f64).exp()).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainBound {
    pub value: f64,
    /// The logarithm under the root was negative; only δ is reported.
    pub degenerate: bool,
}

/// Star-discrepancy bound from a δ-cover, attained by some driver sequence.
pub fn main_discrepancy_bound(i: &BoundInputs) -> Result<MainBound> {
    i.check()?;
    if i.cover_size < 1.0 || i.n == 0 {
        return Err(Error::invalid("main bound needs cover_size ≥ 1 and n ≥ 1"));
    }
    let log_arg = (i.cover_size * i.cover_size * i.nu_norm).ln();
    if log_arg < 0.0 {
        return Ok(MainBound { value: i.delta, degenerate: true });
    }
    let value = i.gap_factor() * (2.0 * log_arg).sqrt() / (i.n as f64).sqrt() + i.delta;
    Ok(MainBound { value, degenerate: false })
}

/// Main bound with the cover-size bound at δ = 8n^{−3/4} plugged in.
pub fn corollary_main_bound(i: &BoundInputs) -> Result<f64> {
    i.check()?;
    if i.n < 16 {
        return Err(Error::invalid(format!("corollary bound needs n ≥ 16, got n = {}", i.n)));
    }
    let (n, d) = (i.n as f64, i.d as f64);
    let inner = i.nu_norm.ln() + d * n.ln() + 3.0 * d * d * (5.0 * d).ln();
    Ok(i.gap_factor() * 2f64.sqrt() * inner.max(0.0).sqrt() / n.sqrt() + 8.0 / n.powf(0.75))
}

/// Total variation distance between the averaged marginals and π.
pub fn tv_average_bound(i: &BoundInputs) -> Result<f64> {
    i.check()?;
    if i.n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    Ok(i.geometric_average() * i.nu_norm_centered)
}

/// ‖νPⁿ − π‖_tv under an absolute spectral gap.
pub fn spectral_tv_bound(i: &BoundInputs) -> Result<f64> {
    i.check()?;
    Ok(i.beta.powf(i.n as f64) * i.nu_norm_centered)
}

/// Pull-back discrepancy bound attained by some driver sequence.
pub fn push_back_bound(i: &BoundInputs) -> Result<f64> {
    let main = main_discrepancy_bound(i)?;
    Ok(main.value + tv_average_bound(i)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurnInBound {
    pub mixed: f64,
    pub simplified: f64,
}

/// Pull-back discrepancy bounds after n₀ burn-in steps, under an absolute
/// spectral gap β < 1.
pub fn burn_in_bound(i: &BoundInputs) -> Result<BurnInBound> {
    i.check()?;
    if i.beta >= 1.0 || i.n == 0 || i.cover_size < 1.0 {
        return Err(Error::invalid("burn-in bound needs β < 1, n ≥ 1 and cover_size ≥ 1"));
    }
    let n = i.n as f64;
    let decay = i.beta.powf(i.n0 as f64) * i.nu_norm_centered;
    let log_term = (i.cover_size * i.cover_size * (1.0 + decay)).ln();
    let mixed = i.gap_factor() * (2.0 * log_term).sqrt() / n.sqrt() + i.geometric_average() * decay + i.delta;
    let simplified = 4.0 * log_term.sqrt() / (n * (1.0 - i.beta)).sqrt() + 2.0 * decay / (n * (1.0 - i.beta)) + i.delta;
    Ok(BurnInBound { mixed, simplified })
}

/// 63√d (2 + log₂ r)^{(3d+1)/2} / r.
pub fn beck_bound(r: u64, d: usize) -> Result<f64> {
    if r == 0 || d == 0 {
        return Err(Error::invalid("Beck bound needs r ≥ 1 and d ≥ 1"));
    }
    let (rf, df) = (r as f64, d as f64);
    Ok(63.0 * df.sqrt() * (2.0 + rf.log2()).powf((3.0 * df + 1.0) / 2.0) / rf)
}

/// Beck bound for an inverted path plus the averaged-marginal TV term.
pub fn higher_order_pullback_bound(i: &BoundInputs) -> Result<f64> {
    Ok(beck_bound(i.n, i.d)? + tv_average_bound(i)?)
}

/// C_{ε,d} = 4^ε ((3d+1)/(2eε ln 2))^{(3d+1)/2}.
pub fn cover_constant(epsilon: f64, d: usize) -> f64 {
    let k = 3.0 * d as f64 + 1.0;
    4f64.powf(epsilon) * (k / (2.0 * E * epsilon * LN_2)).powf(k / 2.0)
}

/// (2 + ⌈(2C_{ε,d}/δ)^{1/(1−ε)}⌉)^d.
pub fn cover_size_bound(delta: f64, d: usize, epsilon: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) || !(epsilon > 0.0 && epsilon < 1.0) || d == 0 {
        return Err(Error::invalid(format!("cover bound needs δ ∈ (0,1], ε ∈ (0,1), d ≥ 1; got δ={delta}, ε={epsilon}")));
    }
    let per_axis = (2.0 * cover_constant(epsilon, d) / delta).powf(1.0 / (1.0 - epsilon)).ceil();
    Ok((2.0 + per_axis).powi(d as i32))
}

/// (γ*, lower bound on the spectral gap 1 − Λ) for the ball walk on the
/// log-concave, α-log-Lipschitz class.
pub fn ballwalk_gap_bound(alpha: f64, d: usize) -> Result<(f64, f64)> {
    if !(alpha >= 0.0) || d == 0 {
        return Err(Error::invalid(format!("gap bound needs α ≥ 0 and d ≥ 1; got α={alpha}, d={d}")));
    }
    let dp = (d + 1) as f64;
    let gamma_star = (1.0 / dp.sqrt()).min(1.0 / alpha);
    let gap = 3.125e-6 / dp * (1.0 / dp).min(1.0 / alpha);
    Ok((gamma_star, gap))
}

/// Error bound of the ball-walk estimator at γ* with a uniform start.
pub fn ballwalk_error_bound(alpha: f64, d: usize, n: u64) -> Result<f64> {
    if n < 16 || d == 0 || !(alpha >= 0.0) {
        return Err(Error::invalid(format!("bound needs n ≥ 16, d ≥ 1, α ≥ 0; got n={n}")));
    }
    let (nf, df) = (n as f64, d as f64);
    let inner = alpha + df * nf.ln() + 3.0 * df * df * (5.0 * df).ln();
    Ok(5000.0 * df.sqrt() * (2.0 * df).sqrt().max(alpha.sqrt()) * inner.sqrt() / nf.sqrt() + 8.0 / nf.powf(0.75))
}
