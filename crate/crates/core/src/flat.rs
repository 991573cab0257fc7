//! Flat-buffer entry points for foreign callers.
//!
//! Every array is a borrowed row-major `f64` buffer with an explicit shape;
//! results are returned as owned buffers in the same layout. Inputs are never
//! retained or mutated.

use alloc::vec::Vec;

use crate::adapter::AdapterMLP;
use crate::image::{Grid, SegmentationMask, ThermalImage, NUM_CLASSES};
use crate::landmarks::LandmarkSet;
use crate::nll::{gaussian_nll, NllConfig};
use crate::ot::{self, EmpiricalMeasure, SinkhornConfig};
use crate::patch::{patch_w_loss, PatchConfig};
use crate::region::{region_reg_with, ReferenceTemperatureProfile, RegionConfig};
use crate::{Error, Result};

/// A borrowed row-major buffer with its shape.
#[derive(Debug, Clone, Copy)]
pub struct ArrayView<'a> {
    shape: &'a [usize],
    data: &'a [f64],
}

impl<'a> ArrayView<'a> {
    /// `what` names the argument in shape errors.
    pub fn new(what: &'static str, shape: &'a [usize], data: &'a [f64]) -> Result<Self> {
        Error::check_len(what, shape.iter().product(), data.len())?;
        Ok(ArrayView { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        self.data
    }

    fn dims<const N: usize>(&self, what: &'static str) -> Result<[usize; N]> {
        Error::check_len(what, N, self.shape.len())?;
        Ok(core::array::from_fn(|i| self.shape[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatSinkhorn {
    pub cost: f64,
    /// `K x L`.
    pub plan: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Entropic transport between two `K x d` and `L x d` point clouds.
pub fn sinkhorn(mu: ArrayView, nu: ArrayView, cfg: &SinkhornConfig) -> Result<FlatSinkhorn> {
    let [_, d] = mu.dims::<2>("mu rank")?;
    let [_, dn] = nu.dims::<2>("nu rank")?;
    Error::check_len("nu point dimension", d, dn)?;
    let a = EmpiricalMeasure::from_flat(d, mu.data.to_vec())?;
    let b = EmpiricalMeasure::from_flat(d, nu.data.to_vec())?;
    let r = ot::sinkhorn(&a, &b, cfg)?;
    Ok(FlatSinkhorn {
        cost: r.cost,
        plan: r.plan.entries().to_vec(),
        converged: r.converged,
        iterations: r.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatLoss {
    pub value: f64,
    /// Same shape as the differentiated input.
    pub grads: Vec<f64>,
}

fn images(view: ArrayView, what: &'static str) -> Result<Vec<ThermalImage>> {
    let [n, h, w] = view.dims::<3>(what)?;
    (0..n)
        .map(|i| ThermalImage::new(h, w, view.data[i * h * w..(i + 1) * h * w].to_vec()))
        .collect()
}

fn masks(labels: &[u8], n: usize, h: usize, w: usize) -> Result<Vec<SegmentationMask>> {
    Error::check_len("masks", n * h * w, labels.len())?;
    (0..n)
        .map(|i| SegmentationMask::new(h, w, labels[i * h * w..(i + 1) * h * w].to_vec()))
        .collect()
}

/// Patch transport loss for `N x H x W` generated images with `N x H x W`
/// labels against `M x H' x W'` real images.
pub fn patch_loss(
    gen: ArrayView,
    gen_labels: &[u8],
    real: ArrayView,
    cfg: &PatchConfig,
    sink: &SinkhornConfig,
) -> Result<FlatLoss> {
    let [n, h, w] = gen.dims::<3>("gen rank")?;
    let gens = images(gen, "gen rank")?;
    let pairs: Vec<(ThermalImage, SegmentationMask)> = gens.into_iter().zip(masks(gen_labels, n, h, w)?).collect();
    let reals = images(real, "real rank")?;
    let r = patch_w_loss(&pairs, &reals, cfg, sink)?;
    Ok(FlatLoss {
        value: r.value,
        grads: r.grads.into_iter().flat_map(Grid::into_vec).collect(),
    })
}

/// Region regularizer for one `H x W` image against 18 normalized targets.
pub fn region_loss(img: ArrayView, labels: &[u8], targets: &[f64], include_background: bool) -> Result<FlatLoss> {
    let [h, w] = img.dims::<2>("image rank")?;
    Error::check_len("targets", NUM_CLASSES, targets.len())?;
    let image = ThermalImage::new(h, w, img.data.to_vec())?;
    let mask = SegmentationMask::new(h, w, labels.to_vec())?;
    let profile = ReferenceTemperatureProfile::from_targets("custom", core::array::from_fn(|i| targets[i]))?;
    let r = region_reg_with(&image, &mask, &profile, &RegionConfig { include_background })?;
    Ok(FlatLoss {
        value: r.value,
        grads: r.grads.into_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatNll {
    pub value: f64,
    /// `L x 2`.
    pub grad_mu: Vec<f64>,
    pub grad_sigma2: Vec<f64>,
}

/// Gaussian NLL for `L x 2` means, `L` variances and `L x 2` targets.
pub fn nll(mu: ArrayView, sigma2: ArrayView, y: ArrayView, epsilon: f64) -> Result<FlatNll> {
    let [l, two] = mu.dims::<2>("mu rank")?;
    Error::check_len("mu columns", 2, two)?;
    let [ls] = sigma2.dims::<1>("sigma2 rank")?;
    Error::check_len("sigma2 length", l, ls)?;
    let [ly, two_y] = y.dims::<2>("y rank")?;
    Error::check_len("y rows", l, ly)?;
    Error::check_len("y columns", 2, two_y)?;
    let r = gaussian_nll(
        &LandmarkSet::from_flat(mu.data)?,
        sigma2.data,
        &LandmarkSet::from_flat(y.data)?,
        &NllConfig { epsilon },
    )?;
    Ok(FlatNll {
        value: r.value,
        grad_mu: r.grad_mu.into_iter().flatten().collect(),
        grad_sigma2: r.grad_sigma2,
    })
}

/// Adapter forward pass on a `B x input_dim` batch; returns `B x output_dim`.
pub fn adapter_forward(widths: &[usize], params: &[f64], input: ArrayView) -> Result<Vec<f64>> {
    let mlp = AdapterMLP::from_params(widths.to_vec(), params.to_vec())?;
    let [b, d] = input.dims::<2>("input rank")?;
    Error::check_len("input columns", mlp.input_dim(), d)?;
    mlp.forward_batch(input.data, b)
}

/// Adapter applied to one `L x 2` prediction with its resize factor.
pub fn adapter_apply(widths: &[usize], params: &[f64], pred: ArrayView, resize: f64) -> Result<Vec<f64>> {
    let [_, two] = pred.dims::<2>("pred rank")?;
    Error::check_len("pred columns", 2, two)?;
    let mlp = AdapterMLP::from_params(widths.to_vec(), params.to_vec())?;
    let out = crate::adapter::adapter_apply(&mlp, &LandmarkSet::from_flat(pred.data)?, resize)?;
    Ok(out.flat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn shape_errors_name_the_argument() {
        let e = ArrayView::new("mu", &[2, 2], &[0.0; 3]).unwrap_err();
        assert!(matches!(e, Error::ShapeMismatch { what: "mu", .. }));
        let mu = ArrayView::new("mu", &[1, 2], &[0.0, 0.0]).unwrap();
        let nu = ArrayView::new("nu", &[1, 3], &[0.0; 3]).unwrap();
        let e = sinkhorn(mu, nu, &SinkhornConfig::default()).unwrap_err();
        assert!(matches!(e, Error::ShapeMismatch { what: "nu point dimension", .. }));
    }

    #[test]
    fn single_atoms() {
        let mu = ArrayView::new("mu", &[1, 2], &[0.0, 0.0]).unwrap();
        let nu = ArrayView::new("nu", &[1, 2], &[3.0, 4.0]).unwrap();
        let r = sinkhorn(mu, nu, &SinkhornConfig::default()).unwrap();
        assert_eq!(r.cost, 25.0);
        assert_eq!(r.plan, vec![1.0]);
    }

    #[test]
    fn nll_zero_residual() {
        let pts = [0.1, 0.2, 0.3, 0.4];
        let mu = ArrayView::new("mu", &[2, 2], &pts).unwrap();
        let s = ArrayView::new("sigma2", &[2], &[1.0, 1.0]).unwrap();
        let r = nll(mu, s, mu, 1e-6).unwrap();
        assert!((r.value - 2.0 * crate::math::ln(2.0 * core::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(r.grad_mu, vec![0.0; 4]);
    }

    #[test]
    fn region_and_adapter_entry_points() {
        let img = ArrayView::new("img", &[1, 2], &[0.5, 0.5]).unwrap();
        let mut targets = [0.0; NUM_CLASSES];
        targets[1] = 0.5;
        let r = region_loss(img, &[1, 1], &targets, true).unwrap();
        assert_eq!(r.value, 0.0);
        let widths = [3, 2];
        let params = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7, -0.1];
        let pred = ArrayView::new("pred", &[1, 2], &[0.2, 0.3]).unwrap();
        assert_eq!(adapter_apply(&widths, &params, pred, 1.0).unwrap(), vec![0.7, -0.1]);
    }
}
