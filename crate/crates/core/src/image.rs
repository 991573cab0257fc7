//! Row-major grids, thermal images and segmentation masks.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Default lower clamp temperature in degrees Celsius.
pub const DEFAULT_FLOOR_C: f64 = 20.0;
/// Default upper clamp temperature in degrees Celsius.
pub const DEFAULT_CEIL_C: f64 = 40.0;
/// Upper clamp used by the RGB-landmarker preprocessing stack.
pub const PREPROCESS_CEIL_C: f64 = 45.0;
/// Number of segmentation classes, including background (label 0).
pub const NUM_CLASSES: usize = 18;

/// A dense `height x width` row-major grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Grid {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        Error::check_len("grid data", height * width, data.len())?;
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Grid<f64> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Grid::filled(height, width, 0.0)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Grid<f64>) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }
}

/// Maps a temperature to the unit interval, clamping outside `[floor, ceil]`.
pub fn temp_to_unit(t: f64, floor: f64, ceil: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFinite("temperature"));
    }
    check_range(floor, ceil)?;
    Ok(((t - floor) / (ceil - floor)).clamp(0.0, 1.0))
}

/// Inverse of [`temp_to_unit`] on `[0, 1]`.
pub fn unit_to_temp(v: f64, floor: f64, ceil: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite("unit value"));
    }
    check_range(floor, ceil)?;
    Ok(floor + v.clamp(0.0, 1.0) * (ceil - floor))
}

fn check_range(floor: f64, ceil: f64) -> Result<()> {
    if !(floor.is_finite() && ceil.is_finite() && floor < ceil) {
        return Err(Error::invalid(
            "temperature range",
            alloc::format!("floor {floor} must be below ceil {ceil}"),
        ));
    }
    Ok(())
}

/// A thermal frame whose values are temperatures linearly mapped from
/// `[temp_floor, temp_ceil]` onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalImage {
    pixels: Grid<f64>,
    temp_floor: f64,
    temp_ceil: f64,
}

impl ThermalImage {
    /// Builds an image over the default 20-40 C range.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_range(height, width, values, DEFAULT_FLOOR_C, DEFAULT_CEIL_C)
    }

    pub fn with_range(
        height: usize,
        width: usize,
        values: Vec<f64>,
        temp_floor: f64,
        temp_ceil: f64,
    ) -> Result<Self> {
        Self::from_grid(Grid::from_vec(height, width, values)?, temp_floor, temp_ceil)
    }

    pub fn from_grid(pixels: Grid<f64>, temp_floor: f64, temp_ceil: f64) -> Result<Self> {
        check_range(temp_floor, temp_ceil)?;
        if pixels.is_empty() {
            return Err(Error::Empty("image"));
        }
        if let Some(v) = pixels.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(
                "pixel value",
                alloc::format!("{v} outside [0, 1]"),
            ));
        }
        Ok(ThermalImage {
            pixels,
            temp_floor,
            temp_ceil,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds an image from Celsius readings, clamping to `[floor, ceil]`.
    pub fn from_celsius(
        height: usize,
        width: usize,
        celsius: &[f64],
        floor: f64,
        ceil: f64,
    ) -> Result<Self> {
        let values = celsius
            .iter()
            .map(|&t| temp_to_unit(t, floor, ceil))
            .collect::<Result<Vec<_>>>()?;
        Self::with_range(height, width, values, floor, ceil)
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }

    pub fn temp_floor(&self) -> f64 {
        self.temp_floor
    }

    pub fn temp_ceil(&self) -> f64 {
        self.temp_ceil
    }

    pub fn values(&self) -> &[f64] {
        self.pixels.as_slice()
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels.get(row, col)
    }

    /// Celsius reading of every pixel.
    pub fn to_celsius(&self) -> Vec<f64> {
        let span = self.temp_ceil - self.temp_floor;
        self.values()
            .iter()
            .map(|v| self.temp_floor + v * span)
            .collect()
    }

    /// Replaces the pixel values, projecting each onto `[0, 1]`.
    pub fn with_projected_values(&self, values: &[f64]) -> Result<Self> {
        Error::check_len("image values", self.pixels.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pixel value"));
        }
        let data = values.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(ThermalImage {
            pixels: Grid::from_vec(self.height(), self.width(), data)?,
            temp_floor: self.temp_floor,
            temp_ceil: self.temp_ceil,
        })
    }

    /// `v -> 1 - v` on every pixel.
    pub fn inverted(&self) -> Self {
        ThermalImage {
            pixels: self.pixels.map(|v| 1.0 - v),
            temp_floor: self.temp_floor,
            temp_ceil: self.temp_ceil,
        }
    }
}

/// Per-pixel class labels in `0..18`; label 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    labels: Grid<u8>,
}

impl SegmentationMask {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        let labels = Grid::from_vec(height, width, labels)?;
        if labels.is_empty() {
            return Err(Error::Empty("mask"));
        }
        if let Some(l) = labels.as_slice().iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::invalid(
                "segmentation label",
                alloc::format!("{l} outside 0..{NUM_CLASSES}"),
            ));
        }
        Ok(SegmentationMask { labels })
    }

    pub fn uniform(height: usize, width: usize, label: u8) -> Result<Self> {
        Self::new(height, width, vec![label; height * width])
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn labels(&self) -> &[u8] {
        self.labels.as_slice()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels.get(row, col)
    }

    pub(crate) fn check_matches(&self, img: &ThermalImage) -> Result<()> {
        Error::check_len("mask height", img.height(), self.height())?;
        Error::check_len("mask width", img.width(), self.width())
    }
}
