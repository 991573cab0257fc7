//! Entropy-regularized transport solved with log-domain Sinkhorn iterations.
//!
//! The regularized value is `sum pi C + lambda * sum pi log pi` at the
//! converged plan. Iterates are dual potentials `f`, `g` in cost units, and
//! the plan is `pi_kl = exp((f_k + g_l - C_kl) / lambda)`, so nothing
//! underflows even for `lambda = 1e-6` against O(1) costs. With annealing on,
//! `lambda` starts at `max(C) / 10` and is halved until it reaches the target,
//! warm-starting each stage from the previous potentials.

use alloc::vec;
use alloc::vec::Vec;

use super::{cost_matrix, EmpiricalMeasure, TransportPlan};
use crate::math::{exp, ln, log_sum_exp};
use crate::{Error, Result};

/// Iteration cap for intermediate annealing stages; the final stage gets the
/// remaining budget.
const STAGE_ITER_CAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// Entropic regularization strength.
    pub lambda_e: f64,
    /// Maximum tolerated marginal violation at the final stage.
    pub tolerance: f64,
    /// Total iteration budget across all stages.
    pub max_iters: usize,
    /// Epsilon-scaling on/off.
    pub anneal: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            lambda_e: 1e-6,
            tolerance: 1e-9,
            max_iters: 10_000,
            anneal: true,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_e > 0.0 && self.lambda_e.is_finite()) {
            return Err(Error::invalid("lambda_e", alloc::format!("{}", self.lambda_e)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", alloc::format!("{}", self.tolerance)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        Ok(())
    }

    fn schedule(&self, max_cost: f64) -> Vec<f64> {
        let mut lambdas = Vec::new();
        if self.anneal {
            let mut lam = max_cost / 10.0;
            while lam > self.lambda_e {
                lambdas.push(lam);
                lam *= 0.5;
            }
        }
        lambdas.push(self.lambda_e);
        lambdas
    }
}

/// Summary of one annealing stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSummary {
    pub lambda: f64,
    pub iterations: usize,
    pub max_violation: f64,
    /// Regularized value at this stage's `lambda`.
    pub value: f64,
    /// Unregularized transport part `sum pi C`.
    pub transport_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    /// `transport_cost + lambda_e * neg_entropy`.
    pub cost: f64,
    pub transport_cost: f64,
    /// `sum pi log pi`.
    pub neg_entropy: f64,
    pub plan: TransportPlan,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_violation: f64,
    pub stages: Vec<StageSummary>,
}

impl SinkhornResult {
    /// Turns a non-converged result into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                violation: self.max_violation,
            })
        }
    }
}

struct Solver<'a> {
    k: usize,
    l: usize,
    cost: &'a [f64],
    f: Vec<f64>,
    g: Vec<f64>,
    log_a: f64,
    log_b: f64,
}

impl Solver<'_> {
    fn update_f(&mut self, lam: f64) {
        for k in 0..self.k {
            let row = &self.cost[k * self.l..(k + 1) * self.l];
            let lse = log_sum_exp(self.g.iter().zip(row).map(|(g, c)| (g - c) / lam));
            self.f[k] = lam * self.log_a - lam * lse;
        }
    }

    fn update_g(&mut self, lam: f64) {
        let (k_n, l_n) = (self.k, self.l);
        for l in 0..l_n {
            let col = (0..k_n).map(|k| (self.f[k] - self.cost[k * l_n + l]) / lam);
            self.g[l] = lam * self.log_b - lam * log_sum_exp(col);
        }
    }

    fn log_plan(&self, lam: f64, k: usize, l: usize) -> f64 {
        (self.f[k] + self.g[l] - self.cost[k * self.l + l]) / lam
    }

    fn max_violation(&self, lam: f64) -> f64 {
        let a = 1.0 / self.k as f64;
        let b = 1.0 / self.l as f64;
        let mut cols = vec![0.0; self.l];
        let mut worst = 0.0f64;
        for k in 0..self.k {
            let mut row = 0.0;
            for (l, col) in cols.iter_mut().enumerate() {
                let p = exp(self.log_plan(lam, k, l));
                row += p;
                *col += p;
            }
            worst = worst.max((row - a).abs());
        }
        cols.iter().fold(worst, |w, c| w.max((c - b).abs()))
    }

    /// Plan entries and the two value components at `lam`.
    fn evaluate(&self, lam: f64) -> (Vec<f64>, f64, f64) {
        let mut entries = Vec::with_capacity(self.k * self.l);
        let mut transport = 0.0;
        let mut neg_entropy = 0.0;
        for k in 0..self.k {
            for l in 0..self.l {
                let z = self.log_plan(lam, k, l);
                let p = exp(z);
                entries.push(p);
                if p > 0.0 {
                    transport += p * self.cost[k * self.l + l];
                    neg_entropy += p * z;
                }
            }
        }
        (entries, transport, neg_entropy)
    }
}

/// Entropic squared Wasserstein-2 distance between two uniform measures.
///
/// A result that exhausts `max_iters` is returned with `converged == false`;
/// use [`SinkhornResult::require_converged`] to treat that as an error.
pub fn sinkhorn(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult> {
    cfg.validate()?;
    let cost = cost_matrix(mu, nu)?;
    sinkhorn_with_cost(mu.len(), nu.len(), &cost, cfg)
}

/// Same as [`sinkhorn`] on a precomputed `K x L` cost matrix.
pub(crate) fn sinkhorn_with_cost(
    k: usize,
    l: usize,
    cost: &[f64],
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult> {
    cfg.validate()?;
    Error::check_len("cost matrix", k * l, cost.len())?;
    if k == 0 || l == 0 {
        return Err(Error::Empty("empirical measure"));
    }
    if k == 1 || l == 1 {
        return Ok(single_support(k, l, cost, cfg.lambda_e));
    }
    let max_cost = cost.iter().fold(0.0f64, |m, c| m.max(*c));
    let schedule = cfg.schedule(max_cost);
    let mut s = Solver {
        k,
        l,
        cost,
        f: vec![0.0; k],
        g: vec![0.0; l],
        log_a: -ln(k as f64),
        log_b: -ln(l as f64),
    };

    let mut total = 0usize;
    let mut stages = Vec::with_capacity(schedule.len());
    let mut violation = f64::INFINITY;
    for (si, &lam) in schedule.iter().enumerate() {
        let last = si + 1 == schedule.len();
        let mut iters = 0usize;
        loop {
            if total >= cfg.max_iters || (!last && iters >= STAGE_ITER_CAP) {
                break;
            }
            s.update_f(lam);
            s.update_g(lam);
            iters += 1;
            total += 1;
            violation = s.max_violation(lam);
            if violation <= cfg.tolerance {
                break;
            }
        }
        let (_, transport, neg_entropy) = s.evaluate(lam);
        stages.push(StageSummary {
            lambda: lam,
            iterations: iters,
            max_violation: violation,
            value: transport + lam * neg_entropy,
            transport_cost: transport,
        });
        if total >= cfg.max_iters && !last {
            // Budget exhausted before reaching the target regularization.
            violation = f64::INFINITY;
            break;
        }
    }

    let lam = cfg.lambda_e;
    let reached_target = stages.last().map(|st| st.lambda) == Some(lam);
    let (entries, transport, neg_entropy) = s.evaluate(lam);
    let converged = reached_target && violation <= cfg.tolerance;
    Ok(SinkhornResult {
        cost: transport + lam * neg_entropy,
        transport_cost: transport,
        neg_entropy,
        plan: TransportPlan::from_entries(k, l, entries)?,
        f: s.f,
        g: s.g,
        converged,
        iterations: total,
        max_violation: violation,
        stages,
    })
}

/// With a single atom on either side the only coupling is the product plan.
fn single_support(k: usize, l: usize, cost: &[f64], lam: f64) -> SinkhornResult {
    let p = 1.0 / (k * l) as f64;
    let transport = cost.iter().map(|c| p * c).sum();
    let neg_entropy = if k * l == 1 { 0.0 } else { ln(p) };
    // Potentials consistent with the plan: f from one update against g = 0.
    let mut s = Solver {
        k,
        l,
        cost,
        f: vec![0.0; k],
        g: vec![0.0; l],
        log_a: -ln(k as f64),
        log_b: -ln(l as f64),
    };
    s.update_f(lam);
    s.update_g(lam);
    SinkhornResult {
        cost: transport + lam * neg_entropy,
        transport_cost: transport,
        neg_entropy,
        plan: TransportPlan::from_entries(k, l, vec![p; k * l]).expect("uniform plan"),
        f: s.f,
        g: s.g,
        converged: true,
        iterations: 0,
        max_violation: 0.0,
        stages: Vec::new(),
    }
}
