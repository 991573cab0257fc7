//! Multi-scale sliding-window planning, min-sigma pooling and the mean-sigma
//! confidence filter.

use alloc::vec;
use alloc::vec::Vec;

use crate::landmarks::LandmarkSet;
use crate::math::floor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPlanConfig {
    pub window: usize,
    pub stride: usize,
    pub scale_factor: f64,
    /// Levels whose shorter side falls below this are dropped (level 0 never is).
    pub min_dim_stop: usize,
}

impl Default for WindowPlanConfig {
    fn default() -> Self {
        WindowPlanConfig {
            window: 224,
            stride: 20,
            scale_factor: 0.75,
            min_dim_stop: 224,
        }
    }
}

impl WindowPlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return Err(Error::invalid("scale_factor", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Placement of one window: the pyramid level it lives on and its pixel box
/// in that level's coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGeometry {
    pub level: usize,
    /// Nominal level scale relative to the original image (`factor^level`).
    pub scale: f64,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl WindowGeometry {
    /// The whole image as a single window at scale 1.
    pub fn whole_image(img_h: usize, img_w: usize) -> Self {
        WindowGeometry {
            level: 0,
            scale: 1.0,
            top: 0,
            left: 0,
            height: img_h,
            width: img_w,
        }
    }

    /// Maps a window-local normalized point to original-image normalized
    /// coordinates: `offset + p * extent`, both as fractions of the image.
    pub fn to_image(&self, p: [f64; 2], img_h: usize, img_w: usize) -> [f64; 2] {
        let (ox, ex) = axis_map(self.left, self.width, self.scale, img_w);
        let (oy, ey) = axis_map(self.top, self.height, self.scale, img_h);
        [ox + p[0] * ex, oy + p[1] * ey]
    }

    /// Inverse of [`WindowGeometry::to_image`].
    pub fn to_window(&self, p: [f64; 2], img_h: usize, img_w: usize) -> [f64; 2] {
        let (ox, ex) = axis_map(self.left, self.width, self.scale, img_w);
        let (oy, ey) = axis_map(self.top, self.height, self.scale, img_h);
        [(p[0] - ox) / ex, (p[1] - oy) / ey]
    }
}

fn axis_map(start: usize, len: usize, scale: f64, img_len: usize) -> (f64, f64) {
    let denom = scale * img_len as f64;
    (start as f64 / denom, len as f64 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyramidLevel {
    pub height: usize,
    pub width: usize,
}

/// Level sizes: repeated `floor(dim * factor)` until the shorter side drops
/// below `min_dim_stop`. Level 0 is always present.
pub fn pyramid_levels(img_h: usize, img_w: usize, cfg: &WindowPlanConfig) -> Result<Vec<PyramidLevel>> {
    cfg.validate()?;
    if img_h == 0 || img_w == 0 {
        return Err(Error::Empty("image"));
    }
    let mut levels = vec![PyramidLevel {
        height: img_h,
        width: img_w,
    }];
    let (mut h, mut w) = (img_h, img_w);
    loop {
        h = floor(h as f64 * cfg.scale_factor) as usize;
        w = floor(w as f64 * cfg.scale_factor) as usize;
        if h.min(w) < cfg.min_dim_stop || h == 0 || w == 0 {
            return Ok(levels);
        }
        levels.push(PyramidLevel { height: h, width: w });
    }
}

/// Anchors at multiples of `stride` plus one flush with the far edge.
pub fn axis_anchors(len: usize, window: usize, stride: usize) -> Vec<usize> {
    if len <= window {
        return vec![0];
    }
    let last = len - window;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("non-empty") != last {
        out.push(last);
    }
    out
}

/// All windows in plan order: level-major, then row-major anchors.
///
/// A level smaller than the window along an axis gets a single anchor at 0
/// there; the window then extends past the image (padded region).
pub fn plan_windows(img_h: usize, img_w: usize, cfg: &WindowPlanConfig) -> Result<Vec<WindowGeometry>> {
    let levels = pyramid_levels(img_h, img_w, cfg)?;
    let mut out = Vec::new();
    let mut scale = 1.0;
    for (k, lv) in levels.iter().enumerate() {
        for &top in &axis_anchors(lv.height, cfg.window, cfg.stride) {
            for &left in &axis_anchors(lv.width, cfg.window, cfg.stride) {
                out.push(WindowGeometry {
                    level: k,
                    scale,
                    top,
                    left,
                    height: cfg.window,
                    width: cfg.window,
                });
            }
        }
        scale *= cfg.scale_factor;
    }
    Ok(out)
}

/// Window-local predictions with per-landmark sigmas.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPrediction {
    pub geometry: WindowGeometry,
    pub landmarks: LandmarkSet,
}

/// For every landmark keep the prediction with the smallest sigma across all
/// windows (earliest window wins ties), mapped to original-image coordinates.
pub fn pool_predictions(img_h: usize, img_w: usize, windows: &[WindowPrediction]) -> Result<LandmarkSet> {
    let first = windows.first().ok_or(Error::Empty("window predictions"))?;
    let n = first.landmarks.len();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    for (w, pred) in windows.iter().enumerate() {
        Error::check_len("window landmark count", n, pred.landmarks.len())?;
        let sig = pred
            .landmarks
            .sigmas()
            .ok_or(Error::invalid("window prediction", "sigmas are required"))?;
        for (b, &s) in best.iter_mut().zip(sig) {
            if b.map_or(true, |(_, bs)| s < bs) {
                *b = Some((w, s));
            }
        }
    }
    let mut points = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    for (l, b) in best.iter().enumerate() {
        let (w, s) = b.expect("at least one window");
        let win = &windows[w];
        points.push(win.geometry.to_image(win.landmarks.points()[l], img_h, img_w));
        sigmas.push(s);
    }
    LandmarkSet::with_sigmas(points, sigmas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Accepted,
    Rejected,
}

/// Accepts a prediction iff its mean sigma is strictly below `sigma_bar`.
pub fn confidence_filter(pred: &LandmarkSet, sigma_bar: f64) -> Result<FilterDecision> {
    if sigma_bar.is_nan() {
        return Err(Error::NonFinite("sigma_bar"));
    }
    let mean = pred
        .mean_sigma()
        .ok_or(Error::invalid("prediction", "sigmas are required"))?;
    Ok(if mean < sigma_bar {
        FilterDecision::Accepted
    } else {
        FilterDecision::Rejected
    })
}
