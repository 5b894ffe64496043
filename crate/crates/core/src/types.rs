//! Geometric value types shared by every module.

use std::fmt;

use crate::error::{Error, Result};

/// A state in G ⊆ R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {c}")));
        }
        Ok(Self(coords))
    }

    /// Caller guarantees `coords` is non-empty and finite.
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.iter().all(|c| c.is_finite()));
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A single driver point u ∈ [0,1]^s.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitCubePoint(Vec<f64>);

impl UnitCubePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("driver point must have at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::invalid(format!("driver coordinate {c} outside [0,1]")));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Where a driver sequence came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    UniformRandom { seed: u64 },
    Halton,
    ScrambledHalton { seed: u64 },
    Explicit,
    Inverted,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::UniformRandom { seed } => write!(f, "uniform-random({seed})"),
            Provenance::Halton => f.write_str("halton"),
            Provenance::ScrambledHalton { seed } => write!(f, "scrambled-halton({seed})"),
            Provenance::Explicit => f.write_str("explicit"),
            Provenance::Inverted => f.write_str("inverted"),
        }
    }
}

/// n points in [0,1]^s, consumed one per chain step. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSequence {
    s: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

impl DriverSequence {
    pub fn new(s: usize, data: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if s == 0 {
            return Err(Error::invalid("driver dimension s must be positive"));
        }
        if data.is_empty() || !data.len().is_multiple_of(s) {
            return Err(Error::invalid(format!(
                "driver data length {} is not a positive multiple of s = {s}",
                data.len()
            )));
        }
        if let Some(c) = data.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::invalid(format!("driver coordinate {c} outside [0,1]")));
        }
        Ok(Self { s, data, provenance })
    }

    pub fn from_points(points: &[UnitCubePoint], provenance: Provenance) -> Result<Self> {
        let s = points
            .first()
            .ok_or_else(|| Error::invalid("driver sequence needs at least one point"))?
            .dim();
        let mut data = Vec::with_capacity(points.len() * s);
        for p in points {
            if p.dim() != s {
                return Err(Error::DimensionMismatch { expected: s, found: p.dim() });
            }
            data.extend_from_slice(p.coords());
        }
        Self::new(s, data, provenance)
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.s
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.s..(i + 1) * self.s]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.s)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// The first `len` points.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::invalid(format!("prefix length {len} out of range 1..={}", self.len())));
        }
        Self::new(self.s, self.data[..len * self.s].to_vec(), self.provenance.clone())
    }
}

/// Test set (-∞, corner) ∩ G. Corner entries may be +∞; membership is
/// strict in every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredBox {
    corner: Vec<f64>,
}

impl AnchoredBox {
    pub fn new(corner: Vec<f64>) -> Result<Self> {
        if corner.is_empty() {
            return Err(Error::invalid("box corner must have at least one coordinate"));
        }
        if corner.iter().any(|c| c.is_nan()) {
            return Err(Error::invalid("box corner contains NaN"));
        }
        Ok(Self { corner })
    }

    /// The box containing the whole domain.
    pub fn full(d: usize) -> Self {
        Self { corner: vec![f64::INFINITY; d] }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn corner(&self) -> &[f64] {
        &self.corner
    }

    #[inline]
    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().zip(&self.corner).all(|(a, c)| a < c)
    }

    pub fn is_full(&self) -> bool {
        self.corner.iter().all(|c| *c == f64::INFINITY)
    }

    /// Componentwise `self ⊆ other` on the corners.
    pub fn is_subset_of(&self, other: &AnchoredBox) -> bool {
        self.corner.iter().zip(&other.corner).all(|(a, b)| a <= b)
    }
}
