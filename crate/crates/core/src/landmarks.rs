use alloc::vec::Vec;

use crate::{Error, Result};

/// Landmarks in normalized image coordinates (`x / width`, `y / height`),
/// optionally with a per-landmark standard deviation in the same units.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<[f64; 2]>,
    sigmas: Option<Vec<f64>>,
}

impl LandmarkSet {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::build(points, None)
    }

    pub fn with_sigmas(points: Vec<[f64; 2]>, sigmas: Vec<f64>) -> Result<Self> {
        Self::build(points, Some(sigmas))
    }

    /// Validates against an expected convention size as well.
    pub fn with_convention(
        convention_size: usize,
        points: Vec<[f64; 2]>,
        sigmas: Option<Vec<f64>>,
    ) -> Result<Self> {
        Error::check_len("landmark convention", convention_size, points.len())?;
        Self::build(points, sigmas)
    }

    fn build(points: Vec<[f64; 2]>, sigmas: Option<Vec<f64>>) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("landmark coordinate"));
        }
        if let Some(s) = &sigmas {
            Error::check_len("landmark sigmas", points.len(), s.len())?;
            if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("landmark sigma", "must be finite and non-negative"));
            }
        }
        Ok(LandmarkSet { points, sigmas })
    }

    /// Builds from an interleaved `[x0, y0, x1, y1, ...]` slice.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::invalid("flat landmark vector", "odd length"));
        }
        Self::new(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn convention_size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn sigmas(&self) -> Option<&[f64]> {
        self.sigmas.as_deref()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn without_sigmas(&self) -> Self {
        LandmarkSet {
            points: self.points.clone(),
            sigmas: None,
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / n, sy / n]
    }

    /// Mean of the per-landmark sigmas, if present.
    pub fn mean_sigma(&self) -> Option<f64> {
        self.sigmas
            .as_ref()
            .map(|s| s.iter().sum::<f64>() / s.len().max(1) as f64)
    }
}
