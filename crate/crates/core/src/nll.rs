//! Heteroscedastic Gaussian negative log-likelihood for landmark regression.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::landmarks::LandmarkSet;
use crate::math::ln;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllConfig {
    /// Variance floor.
    pub epsilon: f64,
}

impl Default for NllConfig {
    fn default() -> Self {
        NllConfig { epsilon: 1e-6 }
    }
}

impl NllConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllResult {
    pub value: f64,
    pub grad_mu: Vec<[f64; 2]>,
    pub grad_sigma2: Vec<f64>,
}

/// `sum_l log(2 pi s_l) + |mu_l - y_l|^2 / (2 s_l)` with `s_l = max(sigma2_l, eps)`.
///
/// The variance gradient is zero wherever the floor is active.
pub fn gaussian_nll(mu: &LandmarkSet, sigma2: &[f64], y: &LandmarkSet, cfg: &NllConfig) -> Result<NllResult> {
    cfg.validate()?;
    Error::check_len("ground-truth landmarks", mu.len(), y.len())?;
    Error::check_len("variances", mu.len(), sigma2.len())?;
    let mut value = 0.0;
    let mut grad_mu = Vec::with_capacity(mu.len());
    let mut grad_sigma2 = Vec::with_capacity(mu.len());
    for ((m, t), &s2) in mu.points().iter().zip(y.points()).zip(sigma2) {
        if !s2.is_finite() {
            return Err(Error::NonFinite("variance"));
        }
        if s2 <= 0.0 {
            return Err(Error::invalid("variance", "must be positive"));
        }
        let s = s2.max(cfg.epsilon);
        let d = [m[0] - t[0], m[1] - t[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        value += ln(2.0 * PI * s) + r2 / (2.0 * s);
        grad_mu.push([d[0] / s, d[1] / s]);
        grad_sigma2.push(if s2 > cfg.epsilon { 1.0 / s - r2 / (2.0 * s * s) } else { 0.0 });
    }
    Ok(NllResult {
        value,
        grad_mu,
        grad_sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn set(points: &[[f64; 2]]) -> LandmarkSet {
        LandmarkSet::new(points.to_vec()).unwrap()
    }

    #[test]
    fn zero_residual_unit_variance() {
        let y = set(&[[0.1, 0.2], [0.5, 0.5], [0.9, 0.3]]);
        let r = gaussian_nll(&y, &[1.0; 3], &y, &NllConfig::default()).unwrap();
        assert!((r.value - 3.0 * ln(2.0 * PI)).abs() < 1e-12);
        assert!(r.grad_mu.iter().all(|g| g == &[0.0, 0.0]));
    }

    #[test]
    fn stationary_variance() {
        let mu = set(&[[0.3, 0.4]]);
        let y = set(&[[0.0, 0.0]]);
        let r2: f64 = 0.25;
        let cfg = NllConfig::default();
        let at = gaussian_nll(&mu, &[r2 / 2.0], &y, &cfg).unwrap();
        assert!(at.grad_sigma2[0].abs() < 1e-12);
        let below = gaussian_nll(&mu, &[r2 / 2.0 * 0.9], &y, &cfg).unwrap();
        let above = gaussian_nll(&mu, &[r2 / 2.0 * 1.1], &y, &cfg).unwrap();
        assert!(below.grad_sigma2[0] < 0.0 && above.grad_sigma2[0] > 0.0);
    }

    #[test]
    fn clipped_variance() {
        let cfg = NllConfig::default();
        let mu = set(&[[0.3, 0.4]]);
        let y = set(&[[0.3, 0.401]]);
        let half = gaussian_nll(&mu, &[cfg.epsilon / 2.0], &y, &cfg).unwrap();
        let at = gaussian_nll(&mu, &[cfg.epsilon], &y, &cfg).unwrap();
        assert_eq!(half.value, at.value);
        assert_eq!(half.grad_sigma2, vec![0.0]);
        assert_eq!(half.grad_mu, at.grad_mu);
    }

    #[test]
    fn rejects_bad_variance() {
        let y = set(&[[0.1, 0.2]]);
        let cfg = NllConfig::default();
        assert!(gaussian_nll(&y, &[0.0], &y, &cfg).is_err());
        assert!(gaussian_nll(&y, &[-1.0], &y, &cfg).is_err());
        assert!(gaussian_nll(&y, &[f64::NAN], &y, &cfg).is_err());
        assert!(gaussian_nll(&y, &[1.0, 1.0], &y, &cfg).is_err());
    }
}
