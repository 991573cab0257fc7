//! Linear-filter preprocessing that makes thermal frames digestible for RGB
//! landmarkers: clamp to 20-45 C, unsharp masking at two scales, each with and
//! without value inversion.

use alloc::vec::Vec;

use crate::image::{Grid, ThermalImage, DEFAULT_FLOOR_C, PREPROCESS_CEIL_C};
use crate::math;
use crate::{Error, Result};

/// Gaussian unsharp-mask parameters: `out = v + amount * (v - blur_radius(v))`.
///
/// `radius` is the Gaussian standard deviation in pixels; the kernel is
/// truncated at `ceil(3 * radius)` taps per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsharpParams {
    pub radius: f64,
    pub amount: f64,
}

impl UnsharpParams {
    pub const A: UnsharpParams = UnsharpParams {
        radius: 2.0,
        amount: 1.0,
    };
    pub const B: UnsharpParams = UnsharpParams {
        radius: 5.0,
        amount: 2.0,
    };
}

/// Which variant of the stack an output image is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub params_index: usize,
    pub inverted: bool,
}

/// Half-sample symmetric index reflection (`... b a | a b c | c b ...`), valid for any offset.
pub(crate) fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = math::ceil(3.0 * sigma).max(0.0) as usize;
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let x = i as f64 - half as f64;
            math::exp(-x * x / (2.0 * sigma * sigma))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Separable Gaussian blur with mirror boundary handling.
pub fn gaussian_blur(src: &Grid<f64>, sigma: f64) -> Result<Grid<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("blur radius", alloc::format!("{sigma}")));
    }
    let kernel = gaussian_kernel(sigma);
    let half = (kernel.len() / 2) as isize;
    let (h, w) = src.dims();
    let mut tmp = Grid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                let cc = mirror_index(c as isize + t as isize - half, w);
                acc += k * src.get(r, cc);
            }
            tmp.set(r, c, acc);
        }
    }
    let mut out = Grid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                let rr = mirror_index(r as isize + t as isize - half, h);
                acc += k * tmp.get(rr, c);
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// Unsharp masking; results are clipped to `[0, 1]`.
pub fn unsharp_mask(img: &ThermalImage, params: UnsharpParams) -> Result<ThermalImage> {
    let blurred = gaussian_blur(img.grid(), params.radius)?;
    let values: Vec<f64> = img
        .values()
        .iter()
        .zip(blurred.as_slice())
        .map(|(v, b)| v + params.amount * (v - b))
        .collect();
    img.with_projected_values(&values)
}

/// Re-expresses an image on the 20-45 C preprocessing range.
pub fn clamp_to_preprocess_range(img: &ThermalImage) -> Result<ThermalImage> {
    let celsius = img.to_celsius();
    ThermalImage::from_celsius(
        img.height(),
        img.width(),
        &celsius,
        DEFAULT_FLOOR_C,
        PREPROCESS_CEIL_C,
    )
}

/// Produces the four stack variants in the order
/// `(A, plain), (A, inverted), (B, plain), (B, inverted)`.
pub fn preprocess_stack(img: &ThermalImage) -> Result<Vec<(Variant, ThermalImage)>> {
    preprocess_stack_with(img, &[UnsharpParams::A, UnsharpParams::B])
}

pub fn preprocess_stack_with(
    img: &ThermalImage,
    params: &[UnsharpParams],
) -> Result<Vec<(Variant, ThermalImage)>> {
    let clamped = clamp_to_preprocess_range(img)?;
    let mut out = Vec::with_capacity(2 * params.len());
    for (i, p) in params.iter().enumerate() {
        let sharp = unsharp_mask(&clamped, *p)?;
        let inv = sharp.inverted();
        out.push((
            Variant {
                params_index: i,
                inverted: false,
            },
            sharp,
        ));
        out.push((
            Variant {
                params_index: i,
                inverted: true,
            },
            inv,
        ));
    }
    Ok(out)
}
