//! Normalized mean error, failure rate and dataset-level evaluation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::landmarks::LandmarkSet;
use crate::math::sqrt;
use crate::window::{confidence_filter, FilterDecision};
use crate::{Error, Result};

/// How the mean landmark error is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalizer {
    /// Mean of width and height of the ground-truth landmark bounding box.
    BoxWidthHeight,
    /// Distance between two ground-truth landmarks (outer eye corners).
    Interocular { left: usize, right: usize },
}

/// Per-landmark distance in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Euclidean,
    /// `|dx| + |dy|`.
    L1,
}

fn to_pixels(p: [f64; 2], img_h: usize, img_w: usize) -> [f64; 2] {
    [p[0] * img_w as f64, p[1] * img_h as f64]
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]))
}

/// Normalizer `d` in pixels for a ground-truth set.
pub fn normalizer_pixels(gt: &LandmarkSet, img_h: usize, img_w: usize, norm: Normalizer) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::Empty("ground-truth landmarks"));
    }
    let px: Vec<[f64; 2]> = gt.points().iter().map(|p| to_pixels(*p, img_h, img_w)).collect();
    let d = match norm {
        Normalizer::BoxWidthHeight => {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in &px {
                x0 = x0.min(p[0]);
                x1 = x1.max(p[0]);
                y0 = y0.min(p[1]);
                y1 = y1.max(p[1]);
            }
            ((x1 - x0) + (y1 - y0)) / 2.0
        }
        Normalizer::Interocular { left, right } => {
            if left >= px.len() || right >= px.len() {
                return Err(Error::invalid("eye indices", "out of range"));
            }
            euclid(px[left], px[right])
        }
    };
    if d <= 0.0 {
        return Err(Error::invalid("normalizer", "degenerate (zero) distance"));
    }
    Ok(d)
}

/// Mean per-landmark pixel error divided by the normalizer.
pub fn nme(
    pred: &LandmarkSet,
    gt: &LandmarkSet,
    img_h: usize,
    img_w: usize,
    norm: Normalizer,
    dist: Distance,
) -> Result<f64> {
    Error::check_len("predicted landmarks", gt.len(), pred.len())?;
    let d = normalizer_pixels(gt, img_h, img_w, norm)?;
    let total: f64 = pred
        .points()
        .iter()
        .zip(gt.points())
        .map(|(p, g)| {
            let (a, b) = (to_pixels(*p, img_h, img_w), to_pixels(*g, img_h, img_w));
            match dist {
                Distance::Euclidean => euclid(a, b),
                Distance::L1 => (a[0] - b[0]).abs() + (a[1] - b[1]).abs(),
            }
        })
        .sum();
    Ok(total / pred.len() as f64 / d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub frame: String,
    /// `None` when the detector found no face.
    pub prediction: Option<LandmarkSet>,
    pub ground_truth: LandmarkSet,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub normalizer: Normalizer,
    pub distance: Distance,
    /// Confidence threshold on the mean predicted sigma; `None` disables the filter.
    pub sigma_bar: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            normalizer: Normalizer::BoxWidthHeight,
            distance: Distance::Euclidean,
            sigma_bar: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Evaluated,
    Missing,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame: String,
    pub status: FrameStatus,
    pub nme: Option<f64>,
    pub mean_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean over evaluated frames; `None` if no frame was evaluated.
    pub nme_mean: Option<f64>,
    pub failure_rate: f64,
    pub n_evaluated: usize,
    pub n_total: usize,
    pub frames: Vec<FrameOutcome>,
}

/// Missing and sigma-rejected frames count as failures and are left out of
/// the mean error.
pub fn evaluate_dataset(records: &[EvalRecord], opts: &EvalOptions) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Empty("evaluation records"));
    }
    let mut frames = Vec::with_capacity(records.len());
    let mut sum = 0.0;
    let mut n_eval = 0;
    for rec in records {
        let Some(pred) = &rec.prediction else {
            frames.push(FrameOutcome {
                frame: rec.frame.clone(),
                status: FrameStatus::Missing,
                nme: None,
                mean_sigma: None,
            });
            continue;
        };
        let mean_sigma = pred.mean_sigma();
        if let Some(bar) = opts.sigma_bar.filter(|b| b.is_finite()) {
            if confidence_filter(pred, bar)? == FilterDecision::Rejected {
                frames.push(FrameOutcome {
                    frame: rec.frame.clone(),
                    status: FrameStatus::Rejected,
                    nme: None,
                    mean_sigma,
                });
                continue;
            }
        }
        let e = nme(pred, &rec.ground_truth, rec.height, rec.width, opts.normalizer, opts.distance)?;
        sum += e;
        n_eval += 1;
        frames.push(FrameOutcome {
            frame: rec.frame.clone(),
            status: FrameStatus::Evaluated,
            nme: Some(e),
            mean_sigma,
        });
    }
    let n_total = records.len();
    Ok(EvalReport {
        nme_mean: (n_eval > 0).then(|| sum / n_eval as f64),
        failure_rate: (n_total - n_eval) as f64 / n_total as f64,
        n_evaluated: n_eval,
        n_total,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn px_set(points: &[[f64; 2]], h: usize, w: usize) -> LandmarkSet {
        LandmarkSet::new(points.iter().map(|p| [p[0] / w as f64, p[1] / h as f64]).collect()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = px_set(&[[10.0, 10.0], [50.0, 80.0]], 100, 100);
        assert_eq!(nme(&gt, &gt, 100, 100, Normalizer::BoxWidthHeight, Distance::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn box_normalizer_offset() {
        let (h, w) = (400, 300);
        let gt_px = [[50.0, 50.0], [150.0, 250.0], [100.0, 120.0]];
        let pred_px: Vec<[f64; 2]> = gt_px.iter().map(|p| [p[0] + 3.0, p[1] + 4.0]).collect();
        let e = nme(&px_set(&pred_px, h, w), &px_set(&gt_px, h, w), h, w, Normalizer::BoxWidthHeight, Distance::Euclidean)
            .unwrap();
        assert!((e - 5.0 / 150.0).abs() < 1e-12);
        let l1 = nme(&px_set(&pred_px, h, w), &px_set(&gt_px, h, w), h, w, Normalizer::BoxWidthHeight, Distance::L1)
            .unwrap();
        assert!((l1 - 7.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn interocular_offset() {
        let gt_px = [[20.0, 50.0], [80.0, 50.0], [50.0, 90.0]];
        let pred_px: Vec<[f64; 2]> = gt_px.iter().map(|p| [p[0], p[1] + 3.0]).collect();
        let norm = Normalizer::Interocular { left: 0, right: 1 };
        let e = nme(&px_set(&pred_px, 128, 128), &px_set(&gt_px, 128, 128), 128, 128, norm, Distance::Euclidean).unwrap();
        assert!((e - 0.05).abs() < 1e-12);
    }

    #[test]
    fn degenerate_normalizer() {
        let gt = px_set(&[[10.0, 10.0], [10.0, 10.0]], 100, 100);
        assert!(nme(&gt, &gt, 100, 100, Normalizer::BoxWidthHeight, Distance::Euclidean).is_err());
        let norm = Normalizer::Interocular { left: 0, right: 5 };
        assert!(nme(&gt, &gt, 100, 100, norm, Distance::Euclidean).is_err());
    }

    fn record(frame: usize, err_px: Option<f64>, sigma: f64) -> EvalRecord {
        // Box is 100 x 100 px so the NME equals err_px / 100.
        let gt_px = [[0.0, 0.0], [100.0, 100.0]];
        EvalRecord {
            frame: frame.to_string(),
            prediction: err_px.map(|e| {
                let pts = gt_px.iter().map(|p| [(p[0] + e) / 200.0, p[1] / 200.0]).collect();
                LandmarkSet::with_sigmas(pts, vec![sigma; 2]).unwrap()
            }),
            ground_truth: px_set(&gt_px, 200, 200),
            height: 200,
            width: 200,
        }
    }

    #[test]
    fn failure_rate_and_mean() {
        let recs = vec![record(0, None, 0.0), record(1, Some(10.0), 1e-4), record(2, Some(20.0), 1e-4), record(3, Some(30.0), 1e-3)];
        let r = evaluate_dataset(&recs, &EvalOptions::default()).unwrap();
        assert_eq!(r.failure_rate, 0.25);
        assert!((r.nme_mean.unwrap() - 0.2).abs() < 1e-12);
        let opts = EvalOptions {
            sigma_bar: Some(6e-4),
            ..EvalOptions::default()
        };
        let r = evaluate_dataset(&recs, &opts).unwrap();
        assert_eq!(r.failure_rate, 0.5);
        assert!((r.nme_mean.unwrap() - 0.15).abs() < 1e-12);
        assert_eq!(r.frames[3].status, FrameStatus::Rejected);
        let inf = EvalOptions {
            sigma_bar: Some(f64::INFINITY),
            ..EvalOptions::default()
        };
        assert_eq!(evaluate_dataset(&recs, &inf).unwrap().n_evaluated, 3);
        assert!(evaluate_dataset(&[], &opts).is_err());
    }
}
