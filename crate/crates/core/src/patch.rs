//! Multiscale patch-distribution transport loss.
//!
//! Generated and real images are cut into overlapping `s x s` patches at every
//! level of an image pyramid. At each level the two patch clouds are
//! subsampled to a common size and compared with the entropic (or exact)
//! squared Wasserstein-2 distance; the per-level values are summed. Pixel
//! gradients for the generated images flow back through patch extraction and
//! the pyramid resampling, both linear, via their exact transposes.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{Grid, SegmentationMask, ThermalImage};
use crate::math::floor;
use crate::ot::{self, EmpiricalMeasure, SinkhornConfig};
use crate::rng::{derive_seed, Xoshiro256};
use crate::{Error, Result};

/// Which transport solver scores each scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatchSolver {
    #[default]
    Sinkhorn,
    /// Exact assignment; intended for small oracle runs.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchConfig {
    pub patch_size: usize,
    pub stride: usize,
    pub scales: usize,
    pub scale_factor: f64,
    /// Cap on the number of patches drawn per side at each scale.
    pub max_patches_per_side: usize,
    pub seed: u64,
    pub solver: PatchSolver,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            patch_size: 8,
            stride: 4,
            scales: 5,
            scale_factor: 0.5,
            max_patches_per_side: 1024,
            seed: 0,
            solver: PatchSolver::Sinkhorn,
        }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::invalid("patch_size", "must be at least 1"));
        }
        if self.stride == 0 || self.stride > self.patch_size {
            return Err(Error::invalid(
                "stride",
                alloc::format!("{} not in 1..={}", self.stride, self.patch_size),
            ));
        }
        if self.scales == 0 {
            return Err(Error::invalid("scales", "must be at least 1"));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return Err(Error::invalid(
                "scale_factor",
                alloc::format!("{} not in (0, 1)", self.scale_factor),
            ));
        }
        if self.max_patches_per_side == 0 {
            return Err(Error::invalid("max_patches_per_side", "must be at least 1"));
        }
        Ok(())
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size
    }
}

/// Two-tap linear interpolation weights along one axis.
#[derive(Debug, Clone)]
struct AxisWeights {
    taps: Vec<[(usize, f64); 2]>,
}

impl AxisWeights {
    /// Half-pixel-centred bilinear sampling: output `i` reads source position
    /// `(i + 0.5) / factor - 0.5`, clamped to the valid range. For factor 0.5
    /// this is exactly a 2-tap box average.
    fn new(src_len: usize, dst_len: usize, factor: f64) -> Self {
        let taps = (0..dst_len)
            .map(|i| {
                let pos = ((i as f64 + 0.5) / factor - 0.5).clamp(0.0, (src_len - 1) as f64);
                let i0 = floor(pos) as usize;
                let i1 = (i0 + 1).min(src_len - 1);
                let t = pos - i0 as f64;
                if i1 == i0 || t == 0.0 {
                    [(i0, 1.0), (i0, 0.0)]
                } else {
                    [(i0, 1.0 - t), (i1, t)]
                }
            })
            .collect();
        AxisWeights { taps }
    }
}

/// Downsampled side length: `floor(len * factor)`, at least 1.
pub fn scaled_len(len: usize, factor: f64) -> usize {
    (floor(len as f64 * factor) as usize).max(1)
}

/// One pyramid step together with its transpose.
#[derive(Debug, Clone)]
pub struct Resampler {
    src: (usize, usize),
    dst: (usize, usize),
    rows: AxisWeights,
    cols: AxisWeights,
}

impl Resampler {
    pub fn new(src: (usize, usize), factor: f64) -> Self {
        let dst = (scaled_len(src.0, factor), scaled_len(src.1, factor));
        Resampler {
            src,
            dst,
            rows: AxisWeights::new(src.0, dst.0, factor),
            cols: AxisWeights::new(src.1, dst.1, factor),
        }
    }

    pub fn dst_dims(&self) -> (usize, usize) {
        self.dst
    }

    pub fn forward(&self, img: &Grid<f64>) -> Grid<f64> {
        debug_assert_eq!(img.dims(), self.src);
        let mut out = Grid::zeros(self.dst.0, self.dst.1);
        for (r, rt) in self.rows.taps.iter().enumerate() {
            for (c, ct) in self.cols.taps.iter().enumerate() {
                let mut acc = 0.0;
                for &(sr, wr) in rt {
                    for &(sc, wc) in ct {
                        acc += wr * wc * img.get(sr, sc);
                    }
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// Transpose of [`Resampler::forward`].
    pub fn adjoint(&self, grad: &Grid<f64>) -> Grid<f64> {
        debug_assert_eq!(grad.dims(), self.dst);
        let mut out = Grid::zeros(self.src.0, self.src.1);
        for (r, rt) in self.rows.taps.iter().enumerate() {
            for (c, ct) in self.cols.taps.iter().enumerate() {
                let g = grad.get(r, c);
                for &(sr, wr) in rt {
                    for &(sc, wc) in ct {
                        let w = wr * wc;
                        if w != 0.0 {
                            let idx = sr * self.src.1 + sc;
                            out.as_mut_slice()[idx] += w * g;
                        }
                    }
                }
            }
        }
        out
    }

    /// A coarse pixel is foreground only if every source pixel it reads is.
    fn forward_mask(&self, fg: &Grid<bool>) -> Grid<bool> {
        let mut out = Grid::filled(self.dst.0, self.dst.1, true);
        for (r, rt) in self.rows.taps.iter().enumerate() {
            for (c, ct) in self.cols.taps.iter().enumerate() {
                let all = rt.iter().all(|&(sr, wr)| {
                    wr == 0.0 || ct.iter().all(|&(sc, wc)| wc == 0.0 || fg.get(sr, sc))
                });
                out.set(r, c, all);
            }
        }
        out
    }
}

/// Number of pyramid levels for a `(h, w)` image: level 0 always, then
/// further levels while both sides stay at least `patch_size`, up to `scales`.
fn level_plan(dims: (usize, usize), cfg: &PatchConfig) -> Vec<Resampler> {
    let mut steps = Vec::new();
    let mut cur = dims;
    while steps.len() + 1 < cfg.scales {
        let r = Resampler::new(cur, cfg.scale_factor);
        let next = r.dst_dims();
        if next.0 < cfg.patch_size || next.1 < cfg.patch_size {
            break;
        }
        steps.push(r);
        cur = next;
    }
    steps
}

/// Image pyramid; level 0 is the input.
pub fn build_pyramid(img: &ThermalImage, cfg: &PatchConfig) -> Result<Vec<ThermalImage>> {
    cfg.validate()?;
    let mut out = vec![img.clone()];
    let mut grid = img.grid().clone();
    for step in level_plan(img.dims(), cfg) {
        grid = step.forward(&grid);
        // Convex combinations of unit-range values; clamp only guards rounding.
        let values: Vec<f64> = grid.as_slice().iter().map(|v| v.clamp(0.0, 1.0)).collect();
        out.push(ThermalImage::with_range(
            grid.height(),
            grid.width(),
            values,
            img.temp_floor(),
            img.temp_ceil(),
        )?);
    }
    Ok(out)
}

/// Origin of one patch vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchIndex {
    pub image: usize,
    pub scale: usize,
    pub top: usize,
    pub left: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractStatus {
    Ok,
    /// The image is smaller than one patch; no patches were produced.
    ImageTooSmall,
}

/// A cloud of flattened `s x s` patches with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMeasure {
    dim: usize,
    coords: Vec<f64>,
    index: Vec<PatchIndex>,
    pub status: ExtractStatus,
}

impl PatchMeasure {
    fn empty(dim: usize) -> Self {
        PatchMeasure {
            dim,
            coords: Vec::new(),
            index: Vec::new(),
            status: ExtractStatus::Ok,
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self) -> &[PatchIndex] {
        &self.index
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// The patches as a uniform empirical measure; `None` when empty.
    pub fn to_measure(&self) -> Option<EmpiricalMeasure> {
        if self.is_empty() {
            None
        } else {
            EmpiricalMeasure::from_flat(self.dim, self.coords.clone()).ok()
        }
    }

    fn extend(&mut self, other: PatchMeasure) {
        self.coords.extend(other.coords);
        self.index.extend(other.index);
    }

    fn subsample(&self, picks: &[usize]) -> (EmpiricalMeasure, Vec<PatchIndex>) {
        let mut coords = Vec::with_capacity(picks.len() * self.dim);
        for &i in picks {
            coords.extend_from_slice(self.patch(i));
        }
        let idx = picks.iter().map(|&i| self.index[i]).collect();
        (
            EmpiricalMeasure::from_flat(self.dim, coords).expect("non-empty finite patches"),
            idx,
        )
    }
}

fn extract_grid(
    grid: &Grid<f64>,
    foreground: Option<&Grid<bool>>,
    s: usize,
    stride: usize,
    image: usize,
    scale: usize,
) -> PatchMeasure {
    let mut m = PatchMeasure::empty(s * s);
    let (h, w) = grid.dims();
    if h < s || w < s {
        m.status = ExtractStatus::ImageTooSmall;
        return m;
    }
    let mut buf = Vec::with_capacity(s * s);
    for top in (0..=h - s).step_by(stride) {
        for left in (0..=w - s).step_by(stride) {
            buf.clear();
            let mut keep = true;
            let mut all_black = true;
            for r in top..top + s {
                for c in left..left + s {
                    let v = grid.get(r, c);
                    all_black &= v == 0.0;
                    if let Some(fg) = foreground {
                        keep &= fg.get(r, c);
                    }
                    buf.push(v);
                }
            }
            if foreground.is_none() && all_black {
                keep = false;
            }
            if keep {
                m.coords.extend_from_slice(&buf);
                m.index.push(PatchIndex {
                    image,
                    scale,
                    top,
                    left,
                });
            }
        }
    }
    m
}

fn foreground_of(mask: &SegmentationMask) -> Grid<bool> {
    Grid::from_vec(
        mask.height(),
        mask.width(),
        mask.labels().iter().map(|&l| l != 0).collect(),
    )
    .expect("mask dims")
}

/// Patches at stride-aligned positions fully inside the image.
///
/// With a mask, patches touching any background pixel are dropped; without
/// one, patches whose pixels are all exactly zero are dropped.
pub fn extract_patches(
    img: &ThermalImage,
    mask: Option<&SegmentationMask>,
    cfg: &PatchConfig,
) -> Result<PatchMeasure> {
    cfg.validate()?;
    let fg = match mask {
        Some(m) => {
            m.check_matches(img)?;
            Some(foreground_of(m))
        }
        None => None,
    };
    Ok(extract_grid(
        img.grid(),
        fg.as_ref(),
        cfg.patch_size,
        cfg.stride,
        0,
        0,
    ))
}

/// Per-scale diagnostics of [`patch_w_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReport {
    pub scale: usize,
    pub gen_patches: usize,
    pub real_patches: usize,
    /// Common subsample size; 0 when the scale was skipped.
    pub used: usize,
    pub value: f64,
    pub converged: bool,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchLoss {
    pub value: f64,
    /// d value / d pixel for each generated image.
    pub grads: Vec<Grid<f64>>,
    pub scales: Vec<ScaleReport>,
}

impl PatchLoss {
    pub fn converged(&self) -> bool {
        self.scales.iter().all(|s| s.skipped || s.converged)
    }
}

struct GenPyramid {
    steps: Vec<Resampler>,
    levels: Vec<Grid<f64>>,
    masks: Vec<Grid<bool>>,
}

/// Subsample indices for one side at one scale; each side draws from a fresh
/// generator seeded by `(seed, scale)`, so equal-size sides get equal picks.
fn subsample_picks(seed: u64, scale: usize, len: usize, n: usize) -> Vec<usize> {
    let mut rng = Xoshiro256::seed_from_u64(derive_seed(seed, scale as u64));
    rng.sample_indices(len, n)
}

/// Multiscale patch transport between generated images (with masks) and real
/// thermal images, with gradients for the generated pixels.
pub fn patch_w_loss(
    gen: &[(ThermalImage, SegmentationMask)],
    real: &[ThermalImage],
    cfg: &PatchConfig,
    sink: &SinkhornConfig,
) -> Result<PatchLoss> {
    cfg.validate()?;
    sink.validate()?;
    if gen.is_empty() {
        return Err(Error::Empty("generated images"));
    }
    if real.is_empty() {
        return Err(Error::Empty("real images"));
    }
    let s = cfg.patch_size;

    let mut gen_pyr = Vec::with_capacity(gen.len());
    for (img, mask) in gen {
        mask.check_matches(img)?;
        let steps = level_plan(img.dims(), cfg);
        let mut levels = vec![img.grid().clone()];
        let mut masks = vec![foreground_of(mask)];
        for st in &steps {
            let next = st.forward(levels.last().expect("level 0"));
            let next_mask = st.forward_mask(masks.last().expect("level 0"));
            levels.push(next);
            masks.push(next_mask);
        }
        gen_pyr.push(GenPyramid {
            steps,
            levels,
            masks,
        });
    }
    let real_pyr: Vec<Vec<Grid<f64>>> = real
        .iter()
        .map(|img| {
            let mut levels = vec![img.grid().clone()];
            for st in level_plan(img.dims(), cfg) {
                let next = st.forward(levels.last().expect("level 0"));
                levels.push(next);
            }
            levels
        })
        .collect();

    let mut level_grads: Vec<Vec<Grid<f64>>> = gen_pyr
        .iter()
        .map(|p| p.levels.iter().map(|l| Grid::zeros(l.height(), l.width())).collect())
        .collect();

    let mut value = 0.0;
    let mut reports = Vec::with_capacity(cfg.scales);
    for scale in 0..cfg.scales {
        let mut gp = PatchMeasure::empty(s * s);
        for (i, p) in gen_pyr.iter().enumerate() {
            if let (Some(l), Some(m)) = (p.levels.get(scale), p.masks.get(scale)) {
                gp.extend(extract_grid(l, Some(m), s, cfg.stride, i, scale));
            }
        }
        let mut rp = PatchMeasure::empty(s * s);
        for (i, levels) in real_pyr.iter().enumerate() {
            if let Some(l) = levels.get(scale) {
                rp.extend(extract_grid(l, None, s, cfg.stride, i, scale));
            }
        }
        if gp.is_empty() || rp.is_empty() {
            if scale == 0 {
                return Err(Error::Empty("patches at the finest scale"));
            }
            reports.push(ScaleReport {
                scale,
                gen_patches: gp.len(),
                real_patches: rp.len(),
                used: 0,
                value: 0.0,
                converged: true,
                skipped: true,
            });
            continue;
        }

        let n = gp.len().min(rp.len()).min(cfg.max_patches_per_side);
        let (mu, mu_idx) = gp.subsample(&subsample_picks(cfg.seed, scale, gp.len(), n));
        let (nu, _) = rp.subsample(&subsample_picks(cfg.seed, scale, rp.len(), n));

        let (cost, plan, converged) = match cfg.solver {
            PatchSolver::Sinkhorn => {
                let r = ot::sinkhorn(&mu, &nu, sink)?;
                (r.cost, r.plan, r.converged)
            }
            PatchSolver::Exact => {
                let (c, p) = ot::exact_w2_squared(&mu, &nu)?;
                (c, p, true)
            }
        };
        value += cost;
        let grad = ot::grad_source(&mu, &nu, &plan)?;
        for (k, pi) in mu_idx.iter().enumerate() {
            let g = &mut level_grads[pi.image][scale];
            let gk = &grad[k * s * s..(k + 1) * s * s];
            let w = g.width();
            for dr in 0..s {
                for dc in 0..s {
                    let idx = (pi.top + dr) * w + pi.left + dc;
                    g.as_mut_slice()[idx] += gk[dr * s + dc];
                }
            }
        }
        reports.push(ScaleReport {
            scale,
            gen_patches: gp.len(),
            real_patches: rp.len(),
            used: n,
            value: cost,
            converged,
            skipped: false,
        });
    }

    let grads = gen_pyr
        .iter()
        .zip(level_grads)
        .map(|(p, mut lg)| {
            for k in (1..lg.len()).rev() {
                let back = p.steps[k - 1].adjoint(&lg[k]);
                lg[k - 1].axpy(1.0, &back);
            }
            lg.swap_remove(0)
        })
        .collect();

    Ok(PatchLoss {
        value,
        grads,
        scales: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;

    fn random_image(rng: &mut Xoshiro256, h: usize, w: usize, lo: f64, hi: f64) -> ThermalImage {
        ThermalImage::new(h, w, (0..h * w).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
    }

    #[test]
    fn single_placement_is_the_flattened_image() {
        let mut rng = Xoshiro256::seed_from_u64(1);
        let img = random_image(&mut rng, 8, 8, 0.0, 1.0);
        let m = extract_patches(&img, None, &PatchConfig::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.patch(0), img.values());
    }

    #[test]
    fn black_patches_are_excluded_without_mask() {
        let img = ThermalImage::constant(8, 8, 0.0).unwrap();
        let m = extract_patches(&img, None, &PatchConfig::default()).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.status, ExtractStatus::Ok);
    }

    #[test]
    fn placement_count_follows_stride_formula() {
        let img = ThermalImage::constant(16, 16, 0.5).unwrap();
        let m = extract_patches(&img, None, &PatchConfig::default()).unwrap();
        assert_eq!(m.len(), 9);
        let offsets: Vec<(usize, usize)> = m.index().iter().map(|p| (p.top, p.left)).collect();
        let mut expect = Vec::new();
        for r in [0, 4, 8] {
            for c in [0, 4, 8] {
                expect.push((r, c));
            }
        }
        assert_eq!(offsets, expect);
    }

    #[test]
    fn background_pixels_disqualify_patches() {
        let img = ThermalImage::constant(16, 16, 0.5).unwrap();
        let mut labels = vec![1u8; 256];
        labels[0] = 0; // only the patch at (0, 0) covers pixel (0, 0)
        let mask = SegmentationMask::new(16, 16, labels).unwrap();
        let m = extract_patches(&img, Some(&mask), &PatchConfig::default()).unwrap();
        assert_eq!(m.len(), 8);
        assert!(m.index().iter().all(|p| (p.top, p.left) != (0, 0)));
    }

    #[test]
    fn small_image_reports_status() {
        let img = ThermalImage::constant(4, 9, 0.5).unwrap();
        let m = extract_patches(&img, None, &PatchConfig::default()).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.status, ExtractStatus::ImageTooSmall);
    }

    #[test]
    fn pyramid_sizes_and_constants() {
        let img = ThermalImage::constant(256, 256, 0.3).unwrap();
        let pyr = build_pyramid(&img, &PatchConfig::default()).unwrap();
        let sizes: Vec<usize> = pyr.iter().map(|p| p.height()).collect();
        assert_eq!(sizes, [256, 128, 64, 32, 16]);
        for level in &pyr {
            assert!(level.values().iter().all(|v| (v - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn pyramid_stops_below_patch_size() {
        let img = ThermalImage::constant(40, 20, 0.3).unwrap();
        let pyr = build_pyramid(&img, &PatchConfig::default()).unwrap();
        // 40x20 -> 20x10 -> 10x5 stops (5 < 8).
        assert_eq!(pyr.len(), 2);
    }

    #[test]
    fn checkerboard_averages_to_half() {
        let img = ThermalImage::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = Resampler::new((2, 2), 0.5);
        let out = r.forward(img.grid());
        assert_eq!(out.dims(), (1, 1));
        assert_eq!(out.get(0, 0), 0.5);
    }

    #[test]
    fn resampler_adjoint_is_transpose() {
        let mut rng = Xoshiro256::seed_from_u64(9);
        for (dims, f) in [((16, 12), 0.5), ((17, 13), 0.5), ((20, 11), 0.75), ((9, 30), 0.3)] {
            let r = Resampler::new(dims, f);
            let x = Grid::from_vec(dims.0, dims.1, (0..dims.0 * dims.1).map(|_| rng.next_f64()).collect()).unwrap();
            let (dh, dw) = r.dst_dims();
            let y = Grid::from_vec(dh, dw, (0..dh * dw).map(|_| rng.next_f64()).collect()).unwrap();
            let lhs: f64 = r.forward(&x).as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.as_slice().iter().zip(r.adjoint(&y).as_slice()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12, "{dims:?} {f}");
        }
    }

    #[test]
    fn single_patch_images_reduce_to_squared_distance() {
        let mut rng = Xoshiro256::seed_from_u64(2);
        let g = random_image(&mut rng, 8, 8, 0.1, 0.9);
        let r = random_image(&mut rng, 8, 8, 0.1, 0.9);
        let cfg = PatchConfig {
            scales: 1,
            ..PatchConfig::default()
        };
        let mask = SegmentationMask::uniform(8, 8, 1).unwrap();
        let loss = patch_w_loss(&[(g.clone(), mask)], &[r.clone()], &cfg, &SinkhornConfig::default()).unwrap();
        let expect = crate::math::sq_dist(g.values(), r.values());
        assert_eq!(loss.value, expect);
        for ((gr, a), b) in loss.grads[0].as_slice().iter().zip(g.values()).zip(r.values()) {
            assert!((gr - 2.0 * (a - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn matched_sides_are_near_zero() {
        let mut rng = Xoshiro256::seed_from_u64(3);
        let img = random_image(&mut rng, 32, 32, 0.05, 0.95);
        let mask = SegmentationMask::uniform(32, 32, 2).unwrap();
        let cfg = PatchConfig {
            scales: 3,
            max_patches_per_side: 16,
            ..PatchConfig::default()
        };
        let sink = SinkhornConfig::default();
        let loss = patch_w_loss(&[(img.clone(), mask)], &[img], &cfg, &sink).unwrap();
        let used: Vec<usize> = loss.scales.iter().map(|s| s.used).collect();
        assert_eq!(used, [16, 9, 1]);
        let bound: f64 = loss
            .scales
            .iter()
            .map(|s| sink.lambda_e * crate::math::ln(s.used as f64) + sink.tolerance)
            .sum();
        assert!(loss.value.abs() <= bound, "{} > {bound}", loss.value);
    }

    #[test]
    fn uncovered_pixels_get_zero_gradient() {
        let mut rng = Xoshiro256::seed_from_u64(4);
        // Width 19 with stride 4 and s = 8: columns 16..19 are never covered.
        let g = random_image(&mut rng, 8, 19, 0.1, 0.9);
        let r = random_image(&mut rng, 8, 19, 0.1, 0.9);
        let cfg = PatchConfig {
            scales: 1,
            ..PatchConfig::default()
        };
        let mask = SegmentationMask::uniform(8, 19, 1).unwrap();
        let loss = patch_w_loss(&[(g, mask)], &[r], &cfg, &SinkhornConfig::default()).unwrap();
        for row in 0..8 {
            for col in 16..19 {
                assert_eq!(loss.grads[0].get(row, col), 0.0);
            }
        }
    }

    #[test]
    fn empty_finest_scale_is_an_error() {
        let g = ThermalImage::constant(8, 8, 0.5).unwrap();
        let r = ThermalImage::constant(8, 8, 0.0).unwrap();
        let mask = SegmentationMask::uniform(8, 8, 1).unwrap();
        let cfg = PatchConfig {
            scales: 1,
            ..PatchConfig::default()
        };
        assert!(patch_w_loss(&[(g, mask)], &[r], &cfg, &SinkhornConfig::default()).is_err());
    }

    #[test]
    fn subsample_is_deterministic() {
        let a = subsample_picks(42, 1, 100, 10);
        let b = subsample_picks(42, 1, 100, 10);
        assert_eq!(a, b);
        assert_ne!(a, subsample_picks(42, 2, 100, 10));
    }
}
