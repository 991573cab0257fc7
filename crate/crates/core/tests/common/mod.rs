#![allow(dead_code)]

use thermoloss_core::ot::EmpiricalMeasure;
use thermoloss_core::rng::Xoshiro256;
use thermoloss_core::{LandmarkSet, SegmentationMask, ThermalImage};

pub fn rng(seed: u64) -> Xoshiro256 {
    Xoshiro256::seed_from_u64(seed)
}

pub fn measure(rng: &mut Xoshiro256, n: usize, d: usize) -> EmpiricalMeasure {
    let coords = (0..n * d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    EmpiricalMeasure::from_flat(d, coords).unwrap()
}

/// Pixels drawn from `[lo, hi]`.
pub fn image(rng: &mut Xoshiro256, h: usize, w: usize, lo: f64, hi: f64) -> ThermalImage {
    ThermalImage::new(h, w, (0..h * w).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

pub fn mask(rng: &mut Xoshiro256, h: usize, w: usize, classes: u8) -> SegmentationMask {
    SegmentationMask::new(h, w, (0..h * w).map(|_| rng.below(classes as u64) as u8).collect()).unwrap()
}

pub fn landmarks(rng: &mut Xoshiro256, n: usize) -> LandmarkSet {
    LandmarkSet::new((0..n).map(|_| [rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)]).collect()).unwrap()
}

pub fn with_pixel(img: &ThermalImage, k: usize, v: f64) -> ThermalImage {
    let mut vals = img.values().to_vec();
    vals[k] = v;
    ThermalImage::new(img.height(), img.width(), vals).unwrap()
}
