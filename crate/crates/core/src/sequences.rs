//! Candidate driver sequences: seeded uniforms, Halton, digitally shifted Halton.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{DriverSequence, Provenance};

/// The first `count` primes.
pub fn primes(count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out.iter().take_while(|p| *p * *p <= candidate).all(|p| !candidate.is_multiple_of(*p)) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    out
}

/// Radical inverse after adding `shift[k]` (mod base) to digit k. Digits
/// past the expansion of `index` are zeros and get shifted too, up to
/// double precision.
fn shifted_radical_inverse(mut index: u64, base: u64, shift: &[u64]) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut out = 0.0;
    for &s in shift {
        let digit = (index % base + s) % base;
        out += digit as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    out.min(1.0)
}

fn check_shape(n: usize, s: usize) -> Result<()> {
    if n == 0 || s == 0 {
        return Err(Error::invalid(format!("driver shape n = {n}, s = {s} must be positive")));
    }
    Ok(())
}

/// Point i has coordinate j equal to the radical inverse of i + 1 in the
/// j-th prime base.
pub fn halton_sequence(n: usize, s: usize) -> Result<DriverSequence> {
    check_shape(n, s)?;
    let bases = primes(s);
    let mut data = Vec::with_capacity(n * s);
    for i in 0..n {
        for &b in &bases {
            data.push(radical_inverse(i as u64 + 1, b));
        }
    }
    DriverSequence::new(s, data, Provenance::Halton)
}

/// Halton points with an independent random digital shift per coordinate.
pub fn scrambled_halton(n: usize, s: usize, rng: &Rng) -> Result<DriverSequence> {
    check_shape(n, s)?;
    let bases = primes(s);
    let mut stream = rng.clone();
    let shifts: Vec<Vec<u64>> = bases
        .iter()
        .map(|&b| {
            let digits = (53.0 * std::f64::consts::LN_2 / (b as f64).ln()).ceil() as usize;
            (0..digits).map(|_| stream.below(b)).collect()
        })
        .collect();
    let mut data = Vec::with_capacity(n * s);
    for i in 0..n {
        for (b, shift) in bases.iter().zip(&shifts) {
            data.push(shifted_radical_inverse(i as u64 + 1, *b, shift));
        }
    }
    DriverSequence::new(s, data, Provenance::ScrambledHalton { seed: rng.seed() })
}

/// n·s uniforms drawn row by row from the stream.
pub fn uniform_driver(n: usize, s: usize, rng: &Rng) -> Result<DriverSequence> {
    check_shape(n, s)?;
    let mut stream = rng.clone();
    let mut data = vec![0.0; n * s];
    stream.fill_unit(&mut data);
    DriverSequence::new(s, data, Provenance::UniformRandom { seed: rng.seed() })
}
