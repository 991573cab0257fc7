//! Discrete optimal transport between uniform empirical measures.
//!
//! `exact_w2_squared` solves the balanced assignment problem exactly and is the
//! oracle for the entropic solver in [`sinkhorn`]. Both report the plan so
//! support gradients can be formed with [`grad_source`].

mod assignment;
mod sinkhorn;

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sq_dist;
use crate::{Error, Result};

pub use assignment::{exact_w2_squared, min_cost_assignment, Assignment};
pub use sinkhorn::{sinkhorn, SinkhornConfig, SinkhornResult, StageSummary};

/// `K` points in `R^d`, each carrying mass `1/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds a measure from `K * dim` row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("measure dimension", "must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::Empty("empirical measure"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(
                "measure coordinates",
                alloc::format!("{} values do not split into points of dimension {dim}", coords.len()),
            ));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measure coordinate"));
        }
        Ok(EmpiricalMeasure { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("empirical measure"))?.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            Error::check_len("point dimension", dim, p.len())?;
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Same points shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        Error::check_len("translation", self.dim, offset.len())?;
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        Self::from_flat(self.dim, coords)
    }
}

/// Squared Euclidean cost matrix, `K x L` row-major.
pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    Error::check_len("measure dimension", mu.dim(), nu.dim())?;
    let mut c = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.points() {
        for y in nu.points() {
            c.push(sq_dist(x, y));
        }
    }
    Ok(c)
}

/// A coupling between a `K`-point and an `L`-point uniform measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TransportPlan {
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        Error::check_len("plan entries", rows * cols, entries.len())?;
        if entries.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("plan entry", "must be finite and non-negative"));
        }
        Ok(TransportPlan {
            rows,
            cols,
            entries,
        })
    }

    /// The plan `(1/K) * P` for the permutation `row -> perm[row]`.
    pub fn from_permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut entries = vec![0.0; n * n];
        for (r, &c) in perm.iter().enumerate() {
            entries[r * n + c] = 1.0 / n as f64;
        }
        TransportPlan {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries
            .chunks_exact(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for row in self.entries.chunks_exact(self.cols) {
            for (acc, v) in s.iter_mut().zip(row) {
                *acc += v;
            }
        }
        s
    }

    /// Largest deviation of any row sum from `1/K` or column sum from `1/L`.
    pub fn max_marginal_violation(&self) -> f64 {
        let a = 1.0 / self.rows as f64;
        let b = 1.0 / self.cols as f64;
        let rv = self.row_sums().into_iter().map(|s| (s - a).abs());
        let cv = self.col_sums().into_iter().map(|s| (s - b).abs());
        rv.chain(cv).fold(0.0, f64::max)
    }

    /// `sum_{kl} C_kl pi_kl`
    pub fn transport_cost(&self, cost: &[f64]) -> f64 {
        self.entries.iter().zip(cost).map(|(p, c)| p * c).sum()
    }

    /// `sum_{kl} pi_kl log pi_kl` with `0 log 0 = 0`.
    pub fn neg_entropy(&self) -> f64 {
        self.entries
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * crate::math::ln(p))
            .sum()
    }
}

/// Gradient of `sum_kl ||x_k - y_l||^2 pi_kl` with respect to each source
/// point `x_k`, holding the plan fixed: `2 sum_l (x_k - y_l) pi_kl`.
///
/// At a converged entropic plan this is the gradient of the regularized
/// cost, since the entropy term does not depend on the support.
pub fn grad_source(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    plan: &TransportPlan,
) -> Result<Vec<f64>> {
    Error::check_len("measure dimension", mu.dim(), nu.dim())?;
    Error::check_len("plan rows", mu.len(), plan.rows())?;
    Error::check_len("plan columns", nu.len(), plan.cols())?;
    let d = mu.dim();
    let mut grad = vec![0.0; mu.len() * d];
    for (k, x) in mu.points().enumerate() {
        let g = &mut grad[k * d..(k + 1) * d];
        for (l, y) in nu.points().enumerate() {
            let p = plan.get(k, l);
            if p == 0.0 {
                continue;
            }
            for ((gi, xi), yi) in g.iter_mut().zip(x).zip(y) {
                *gi += 2.0 * (xi - yi) * p;
            }
        }
    }
    Ok(grad)
}
