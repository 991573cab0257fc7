//! The composite thermalization objective (paired MSE, patch transport term
//! and region regularizer) and a direct-parameterization toy optimizer.

use alloc::vec::Vec;

use crate::image::{Grid, SegmentationMask, ThermalImage};
use crate::ot::SinkhornConfig;
use crate::patch::{patch_w_loss, PatchConfig, ScaleReport};
use crate::region::{region_reg_with, ReferenceTemperatureProfile, RegionConfig};
use crate::{Error, Result};

/// `C = 1 / (5 * 8^2)`: one over the number of scales times the patch dimension.
pub const NORMALIZATION_C: f64 = 1.0 / 320.0;

/// Default patch-term weight `0.01 * C`.
pub const DEFAULT_LAMBDA_W: f64 = 0.01 * NORMALIZATION_C;

/// Default MSE normalizer (pixel count of a 256 x 256 frame).
pub const DEFAULT_MSE_DIM_NORM: usize = 256 * 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub lambda_w: f64,
    pub lambda_r: f64,
    pub mse_dim_norm: usize,
    pub profile: ReferenceTemperatureProfile,
    pub region: RegionConfig,
    pub patch: PatchConfig,
    pub sink: SinkhornConfig,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_w: DEFAULT_LAMBDA_W,
            lambda_r: 1.0,
            mse_dim_norm: DEFAULT_MSE_DIM_NORM,
            profile: ReferenceTemperatureProfile::cold(),
            region: RegionConfig::default(),
            patch: PatchConfig::default(),
            sink: SinkhornConfig::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_w >= 0.0 && self.lambda_w.is_finite()) {
            return Err(Error::invalid("lambda_w", "must be finite and non-negative"));
        }
        if !(self.lambda_r >= 0.0 && self.lambda_r.is_finite()) {
            return Err(Error::invalid("lambda_r", "must be finite and non-negative"));
        }
        if self.mse_dim_norm == 0 {
            return Err(Error::invalid("mse_dim_norm", "must be at least 1"));
        }
        Ok(())
    }
}

/// Paired and unpaired training data for the composite loss.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    /// `(generated, target)` pairs.
    pub paired: Vec<(ThermalImage, ThermalImage)>,
    /// Generated images of synthetic faces with their segmentation.
    pub unpaired: Vec<(ThermalImage, SegmentationMask)>,
    /// Real thermal images defining the target patch distribution.
    pub real: Vec<ThermalImage>,
}

/// `|gen - target|^2 / norm` on raw value slices, with its gradient.
pub fn squared_error(gen: &[f64], target: &[f64], norm: usize) -> Result<(f64, Vec<f64>)> {
    Error::check_len("target values", gen.len(), target.len())?;
    if norm == 0 {
        return Err(Error::invalid("mse_dim_norm", "must be at least 1"));
    }
    let n = norm as f64;
    let mut value = 0.0;
    let grad = gen
        .iter()
        .zip(target)
        .map(|(g, t)| {
            let d = g - t;
            value += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((value / n, grad))
}

pub fn paired_mse(gen: &ThermalImage, target: &ThermalImage, cfg: &LossConfig) -> Result<(f64, Grid<f64>)> {
    if gen.dims() != target.dims() {
        return Err(Error::ShapeMismatch {
            what: "paired target",
            expected: gen.values().len(),
            found: target.values().len(),
        });
    }
    let (v, g) = squared_error(gen.values(), target.values(), cfg.mse_dim_norm)?;
    Ok((v, Grid::from_vec(gen.height(), gen.width(), g)?))
}

/// Unweighted term values and their weighted contributions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermBreakdown {
    /// Mean paired MSE.
    pub mse: f64,
    /// Multiscale patch transport value before weighting.
    pub patch: f64,
    /// Mean region regularizer before weighting.
    pub region: f64,
    pub weighted_patch: f64,
    pub weighted_region: f64,
}

impl TermBreakdown {
    pub fn total(&self) -> f64 {
        self.mse + self.weighted_patch + self.weighted_region
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLoss {
    pub value: f64,
    pub terms: TermBreakdown,
    pub paired_grads: Vec<Grid<f64>>,
    pub unpaired_grads: Vec<Grid<f64>>,
    /// Per-scale report of the patch term; empty when the term was skipped.
    pub patch_scales: Vec<ScaleReport>,
}

impl CompositeLoss {
    pub fn converged(&self) -> bool {
        self.patch_scales.iter().all(|s| s.converged)
    }
}

/// Mean paired MSE plus `lambda_w` times the patch term plus `lambda_r` times
/// the mean region term. Terms with a zero weight or no data are not computed.
pub fn rgb2thermal_loss(problem: &Problem, cfg: &LossConfig) -> Result<CompositeLoss> {
    cfg.validate()?;
    if problem.paired.is_empty() && problem.unpaired.is_empty() {
        return Err(Error::Empty("paired and unpaired examples"));
    }
    let mut terms = TermBreakdown::default();

    let mut paired_grads = Vec::with_capacity(problem.paired.len());
    let np = problem.paired.len() as f64;
    for (gen, tgt) in &problem.paired {
        let (v, mut g) = paired_mse(gen, tgt, cfg)?;
        terms.mse += v / np;
        g.scale(1.0 / np);
        paired_grads.push(g);
    }

    let mut unpaired_grads: Vec<Grid<f64>> = problem
        .unpaired
        .iter()
        .map(|(img, _)| Grid::zeros(img.height(), img.width()))
        .collect();
    let mut patch_scales = Vec::new();
    if cfg.lambda_w > 0.0 && !problem.unpaired.is_empty() {
        let pl = patch_w_loss(&problem.unpaired, &problem.real, &cfg.patch, &cfg.sink)?;
        terms.patch = pl.value;
        terms.weighted_patch = cfg.lambda_w * pl.value;
        for (acc, g) in unpaired_grads.iter_mut().zip(&pl.grads) {
            acc.axpy(cfg.lambda_w, g);
        }
        patch_scales = pl.scales;
    }
    if cfg.lambda_r > 0.0 && !problem.unpaired.is_empty() {
        let nu = problem.unpaired.len() as f64;
        for ((img, mask), acc) in problem.unpaired.iter().zip(unpaired_grads.iter_mut()) {
            let r = region_reg_with(img, mask, &cfg.profile, &cfg.region)?;
            terms.region += r.value / nu;
            acc.axpy(cfg.lambda_r / nu, &r.grads);
        }
        terms.weighted_region = cfg.lambda_r * terms.region;
    }

    Ok(CompositeLoss {
        value: terms.total(),
        terms,
        paired_grads,
        unpaired_grads,
        patch_scales,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub steps: usize,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    /// The problem with generated images replaced by the final iterates.
    pub problem: Problem,
    /// Total loss before each step followed by the loss of the final iterate
    /// (`steps + 1` entries).
    pub trace: Vec<f64>,
}

impl ToyResult {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.trace.last().expect("non-empty trace")
    }
}

fn step_images(imgs: &[ThermalImage], grads: &[Grid<f64>], lr: f64) -> Result<Vec<ThermalImage>> {
    imgs.iter()
        .zip(grads)
        .map(|(img, g)| {
            let next: Vec<f64> = img.values().iter().zip(g.as_slice()).map(|(v, d)| v - lr * d).collect();
            img.with_projected_values(&next)
        })
        .collect()
}

/// Projected gradient descent on the pixels of every generated image, with
/// targets, masks and real images held fixed.
pub fn toy_thermalize(init: &Problem, cfg: &LossConfig, toy: &ToyConfig) -> Result<ToyResult> {
    if toy.steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    if !(toy.step_size > 0.0 && toy.step_size.is_finite()) {
        return Err(Error::invalid("step_size", "must be positive and finite"));
    }
    let mut problem = init.clone();
    let mut trace = Vec::with_capacity(toy.steps + 1);
    for step in 0..=toy.steps {
        let loss = rgb2thermal_loss(&problem, cfg)?;
        if !loss.value.is_finite() {
            return Err(Error::Diverged { step, trace });
        }
        trace.push(loss.value);
        if step == toy.steps {
            break;
        }
        let gens: Vec<ThermalImage> = problem.paired.iter().map(|(g, _)| g.clone()).collect();
        for ((pair, _), next) in problem
            .paired
            .iter_mut()
            .zip(&gens)
            .zip(step_images(&gens, &loss.paired_grads, toy.step_size)?)
        {
            pair.0 = next;
        }
        let gens: Vec<ThermalImage> = problem.unpaired.iter().map(|(g, _)| g.clone()).collect();
        for (pair, next) in problem
            .unpaired
            .iter_mut()
            .zip(step_images(&gens, &loss.unpaired_grads, toy.step_size)?)
        {
            pair.0 = next;
        }
    }
    Ok(ToyResult { problem, trace })
}
