//! Landmark convention adapter: a fully connected network mapping one
//! convention's predicted landmarks (plus the resize factor) to another
//! convention, trained with an L1 objective, Adam and a one-cycle schedule.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::landmarks::LandmarkSet;
use crate::math::{cos, pow, sin, sqrt};
use crate::rng::{derive_seed, Xoshiro256};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN_WIDTH: usize = 256;
pub const DEFAULT_HIDDEN_LAYERS: usize = 4;

const STREAM_INIT: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_AUG: u64 = 3;

/// `c = a * b + beta * c` for row/column-strided operands.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * a_strides.0 + (k - 1) * a_strides.1);
    assert!(k == 0 || b.len() > (k - 1) * b_strides.0 + (n - 1) * b_strides.1);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches; `c`
    // does not alias `a` or `b` because it is a unique borrow.
    unsafe {
        gemm::gemm(
            m,
            n,
            k,
            c.as_mut_ptr(),
            1,
            n as isize,
            beta != 0.0,
            a.as_ptr(),
            a_strides.1 as isize,
            a_strides.0 as isize,
            b.as_ptr(),
            b_strides.1 as isize,
            b_strides.0 as isize,
            beta,
            1.0,
            false,
            false,
            false,
            gemm::Parallelism::None,
        );
    }
}

/// Fully connected network with rectified hidden layers and a linear output.
///
/// Parameters are stored layer by layer as the row-major weight matrix
/// (`out x in`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterMLP {
    widths: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl AdapterMLP {
    /// All-zero parameters.
    pub fn zeros(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid("layer widths", "need at least two non-zero widths"));
        }
        let n = param_count(&widths);
        Ok(AdapterMLP {
            widths,
            params: vec![0.0; n],
        })
    }

    /// Widths for mapping `in_landmarks` points (plus resize factor) to `out_landmarks` points.
    pub fn widths_for(in_landmarks: usize, out_landmarks: usize, hidden_width: usize, hidden_layers: usize) -> Vec<usize> {
        let mut w = vec![2 * in_landmarks + 1];
        w.extend(core::iter::repeat(hidden_width).take(hidden_layers));
        w.push(2 * out_landmarks);
        w
    }

    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(widths: Vec<usize>, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(widths)?;
        let mut rng = Xoshiro256::seed_from_u64(derive_seed(seed, STREAM_INIT));
        let mut off = 0;
        for l in 0..mlp.layers() {
            let (fan_in, fan_out) = (mlp.widths[l], mlp.widths[l + 1]);
            let bound = 1.0 / sqrt(fan_in as f64);
            for p in &mut mlp.params[off..off + fan_out * fan_in + fan_out] {
                *p = rng.uniform(-bound, bound);
            }
            off += fan_out * fan_in + fan_out;
        }
        Ok(mlp)
    }

    pub fn from_params(widths: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(widths)?;
        Error::check_len("adapter parameters", mlp.params.len(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("adapter parameter"));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self, layer: usize) -> (usize, usize) {
        let start: usize = self.widths[..=layer].windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        (start, start + self.widths[layer + 1] * self.widths[layer])
    }

    /// `(weights, bias)` of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.offsets(layer);
        let out = self.widths[layer + 1];
        (&self.params[w..b], &self.params[b..b + out])
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (w, b) = self.offsets(layer);
        let out = self.widths[layer + 1];
        let (head, tail) = self.params[w..b + out].split_at_mut(b - w);
        (head, tail)
    }

    /// Little-endian 64-bit float blob of all parameters.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.params.iter().flat_map(|p| p.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(widths: Vec<usize>, bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 8 != 0 {
            return Err(Error::invalid("parameter blob", "length is not a multiple of 8"));
        }
        let params = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_params(widths, params)
    }

    /// Forward pass for a row-major `batch x input_dim` matrix, keeping every
    /// layer's activations (input first, output last).
    fn forward_trace(&self, input: &[f64], batch: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(input.to_vec());
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (w, b) = self.layer(l);
            let mut z = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                z.extend_from_slice(b);
            }
            gemm(batch, fan_in, fan_out, &acts[l], (fan_in, 1), w, (1, fan_in), 1.0, &mut z);
            if l + 1 < self.layers() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Forward pass on a batch of inputs.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        Error::check_len("adapter input", batch * self.input_dim(), input.len())?;
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adapter input"));
        }
        Ok(self.forward_trace(input, batch).pop().expect("output layer"))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Mean per-coordinate L1 loss of a batch and its parameter gradient
    /// (subgradient with `sign(0) = 0`).
    pub fn l1_loss_grad(&self, input: &[f64], target: &[f64], batch: usize) -> Result<(f64, Vec<f64>)> {
        Error::check_len("adapter input", batch * self.input_dim(), input.len())?;
        Error::check_len("adapter target", batch * self.output_dim(), target.len())?;
        if batch == 0 {
            return Err(Error::Empty("batch"));
        }
        let acts = self.forward_trace(input, batch);
        let out = acts.last().expect("output layer");
        let scale = 1.0 / (batch * self.output_dim()) as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(o, t)| {
                let d = o - t;
                loss += d.abs();
                if d > 0.0 {
                    scale
                } else if d < 0.0 {
                    -scale
                } else {
                    0.0
                }
            })
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..self.layers()).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (wo, bo) = self.offsets(l);
            let (gw, gb) = grad[wo..bo + fan_out].split_at_mut(bo - wo);
            gemm(fan_out, batch, fan_in, &delta, (1, fan_out), &acts[l], (fan_in, 1), 0.0, gw);
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut prev = vec![0.0; batch * fan_in];
                gemm(batch, fan_out, fan_in, &delta, (fan_out, 1), w, (fan_in, 1), 0.0, &mut prev);
                for (p, a) in prev.iter_mut().zip(&acts[l]) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss * scale, grad))
    }
}

/// One training or evaluation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptSample {
    pub pred: LandmarkSet,
    /// Original image width divided by the processed (network input) width.
    pub resize: f64,
    pub gt: LandmarkSet,
}

impl AdaptSample {
    fn write_input(&self, out: &mut Vec<f64>) {
        for p in self.pred.points() {
            out.extend_from_slice(p);
        }
        out.push(self.resize);
    }

    fn write_target(&self, out: &mut Vec<f64>) {
        for p in self.gt.points() {
            out.extend_from_slice(p);
        }
    }
}

/// Stacks samples into row-major input and target matrices.
pub fn stack_samples(samples: &[AdaptSample]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in samples {
        s.write_input(&mut x);
        s.write_target(&mut y);
    }
    (x, y)
}

/// Rotation by `theta` radians composed with a horizontal shear.
pub fn augmentation_matrix(theta: f64, shear: f64) -> [[f64; 2]; 2] {
    let (s, c) = (sin(theta), cos(theta));
    [[c, c * shear - s], [s, s * shear + c]]
}

fn transform_about(points: &[[f64; 2]], center: [f64; 2], m: &[[f64; 2]; 2]) -> Vec<[f64; 2]> {
    points
        .iter()
        .map(|p| {
            let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
            [
                center[0] + m[0][0] * dx + m[0][1] * dy,
                center[1] + m[1][0] * dx + m[1][1] * dy,
            ]
        })
        .collect()
}

/// Applies the same rotation/shear about the prediction centroid to both
/// landmark sets of a sample.
pub fn augment(sample: &AdaptSample, theta: f64, shear: f64) -> Result<AdaptSample> {
    if theta == 0.0 && shear == 0.0 {
        return Ok(sample.clone());
    }
    let m = augmentation_matrix(theta, shear);
    let c = sample.pred.centroid();
    Ok(AdaptSample {
        pred: LandmarkSet::new(transform_about(sample.pred.points(), c, &m))?,
        resize: sample.resize,
        gt: LandmarkSet::new(transform_about(sample.gt.points(), c, &m))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptTrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    /// Fraction of steps spent in linear warmup.
    pub warmup_frac: f64,
    /// Warmup starts at and cosine decay ends at `base_lr / lr_div`.
    pub lr_div: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: usize,
    pub aug_rotation_max_deg: f64,
    pub aug_shear_max: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub seed: u64,
}

impl Default for AdaptTrainConfig {
    fn default() -> Self {
        AdaptTrainConfig {
            epochs: 2000,
            base_lr: 0.002,
            warmup_frac: 0.1,
            lr_div: 100.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: 64,
            aug_rotation_max_deg: 45.0,
            aug_shear_max: 0.2,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            hidden_layers: DEFAULT_HIDDEN_LAYERS,
            seed: 0,
        }
    }
}

impl AdaptTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::invalid("batch", "must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid("base_lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup_frac) {
            return Err(Error::invalid("warmup_frac", "must lie in [0, 1)"));
        }
        if !(self.lr_div >= 1.0) {
            return Err(Error::invalid("lr_div", "must be at least 1"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::invalid("adam betas", "must lie in [0, 1)"));
        }
        if !(self.aug_rotation_max_deg >= 0.0 && self.aug_shear_max >= 0.0) {
            return Err(Error::invalid("augmentation range", "must be non-negative"));
        }
        if self.hidden_width == 0 {
            return Err(Error::invalid("hidden_width", "must be at least 1"));
        }
        Ok(())
    }
}

/// Learning rate at `step` of `total`: linear warmup from `base/div` to
/// `base`, then cosine decay to `base/div`.
pub fn one_cycle_lr(step: usize, total: usize, cfg: &AdaptTrainConfig) -> f64 {
    let lo = cfg.base_lr / cfg.lr_div;
    let warm = ((cfg.warmup_frac * total as f64) as usize).max(1);
    if step < warm {
        return lo + (cfg.base_lr - lo) * step as f64 / warm as f64;
    }
    let span = (total - warm).max(1) as f64;
    let p = ((step - warm) as f64 / span).min(1.0);
    lo + (cfg.base_lr - lo) * 0.5 * (1.0 + cos(PI * p))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &AdaptTrainConfig) {
        self.t += 1;
        let c1 = 1.0 - pow(cfg.beta1, self.t as f64);
        let c2 = 1.0 - pow(cfg.beta2, self.t as f64);
        let (step, inv_root_c2) = (lr / c1, 1.0 / sqrt(c2));
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            // moments of inactive units decay geometrically; keep them out of the subnormal range
            let mt = b1 * *m + (1.0 - b1) * g;
            let vt = b2 * *v + (1.0 - b2) * g * g;
            *m = if mt.abs() < f64::MIN_POSITIVE { 0.0 } else { mt };
            *v = if vt < f64::MIN_POSITIVE { 0.0 } else { vt };
            *p -= step * *m / (sqrt(*v) * inv_root_c2 + cfg.adam_eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: AdapterMLP,
    /// Mean training loss of each epoch (on augmented batches).
    pub trace: Vec<f64>,
}

fn check_conventions(samples: &[AdaptSample]) -> Result<(usize, usize)> {
    let first = samples.first().ok_or(Error::Empty("training samples"))?;
    let (li, lo) = (first.pred.len(), first.gt.len());
    for s in samples {
        Error::check_len("predicted convention", li, s.pred.len())?;
        Error::check_len("target convention", lo, s.gt.len())?;
        if !s.resize.is_finite() {
            return Err(Error::NonFinite("resize factor"));
        }
    }
    Ok((li, lo))
}

/// Initializes a network from `cfg.seed` and trains it.
pub fn adapter_train(samples: &[AdaptSample], cfg: &AdaptTrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (li, lo) = check_conventions(samples)?;
    let widths = AdapterMLP::widths_for(li, lo, cfg.hidden_width, cfg.hidden_layers);
    train_from(AdapterMLP::init(widths, cfg.seed)?, samples, cfg)
}

/// Trains an existing network. Single-threaded and bitwise reproducible for a
/// fixed seed: the epoch order and augmentation draws come from separate
/// streams derived from `cfg.seed`.
pub fn train_from(mut model: AdapterMLP, samples: &[AdaptSample], cfg: &AdaptTrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (li, lo) = check_conventions(samples)?;
    Error::check_len("adapter input width", model.input_dim(), 2 * li + 1)?;
    Error::check_len("adapter output width", model.output_dim(), 2 * lo)?;
    let mut order_rng = Xoshiro256::seed_from_u64(derive_seed(cfg.seed, STREAM_ORDER));
    let mut aug_rng = Xoshiro256::seed_from_u64(derive_seed(cfg.seed, STREAM_AUG));
    let batches_per_epoch = samples.len().div_ceil(cfg.batch);
    let total = cfg.epochs * batches_per_epoch;
    let rot = cfg.aug_rotation_max_deg * PI / 180.0;
    let mut adam = Adam::new(model.params.len());
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let mut x = Vec::with_capacity(chunk.len() * model.input_dim());
            let mut y = Vec::with_capacity(chunk.len() * model.output_dim());
            for &i in chunk {
                let theta = if rot > 0.0 { aug_rng.uniform(-rot, rot) } else { 0.0 };
                let shear = if cfg.aug_shear_max > 0.0 {
                    aug_rng.uniform(-cfg.aug_shear_max, cfg.aug_shear_max)
                } else {
                    0.0
                };
                let s = augment(&samples[i], theta, shear)?;
                s.write_input(&mut x);
                s.write_target(&mut y);
            }
            let (loss, grad) = model.l1_loss_grad(&x, &y, chunk.len())?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                trace.push(f64::NAN);
                return Err(Error::Diverged { step: epoch, trace });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut model.params, &grad, one_cycle_lr(step, total, cfg), cfg);
            step += 1;
        }
        trace.push(epoch_loss / samples.len() as f64);
    }
    Ok(TrainOutcome { model, trace })
}

/// Maps a prediction to the target convention; outputs are not clipped.
pub fn adapter_apply(model: &AdapterMLP, pred: &LandmarkSet, resize: f64) -> Result<LandmarkSet> {
    let mut x = pred.flat();
    x.push(resize);
    LandmarkSet::from_flat(&model.forward(&x)?)
}

/// Mean per-coordinate L1 error of the model on untransformed samples.
pub fn evaluate_l1(model: &AdapterMLP, samples: &[AdaptSample]) -> Result<f64> {
    check_conventions(samples)?;
    let (x, y) = stack_samples(samples);
    let out = model.forward_batch(&x, samples.len())?;
    Error::check_len("adapter output", y.len(), out.len())?;
    Ok(out.iter().zip(&y).map(|(o, t)| (o - t).abs()).sum::<f64>() / y.len() as f64)
}

/// A random row-stochastic mixing matrix (`out x in`) where each output point
/// blends two neighbouring input points. Being affine-combination based, it
/// commutes with any affine transform applied to both conventions.
pub fn random_mixing_map(in_landmarks: usize, out_landmarks: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let mut m = vec![0.0; out_landmarks * in_landmarks];
    for j in 0..out_landmarks {
        let a = rng.below(in_landmarks as u64) as usize;
        let b = (a + 1) % in_landmarks;
        let t = rng.uniform(0.2, 0.8);
        m[j * in_landmarks + a] += t;
        m[j * in_landmarks + b] += 1.0 - t;
    }
    m
}

/// Synthetic pairs: a jittered face-like template under random similarity
/// transforms as the prediction, and its image under `map` as the target.
pub fn synthetic_pairs(in_landmarks: usize, map: &[f64], n: usize, seed: u64) -> Result<Vec<AdaptSample>> {
    if in_landmarks == 0 || map.len() % in_landmarks != 0 {
        return Err(Error::invalid("mixing map", "width does not match the input convention"));
    }
    let out_landmarks = map.len() / in_landmarks;
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let template: Vec<[f64; 2]> = (0..in_landmarks)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / in_landmarks as f64;
            let r = 0.25 + 0.1 * sin(3.0 * a);
            [0.5 + r * cos(a), 0.5 + 1.2 * r * sin(a)]
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let scale = rng.uniform(0.7, 1.1);
        let theta = rng.uniform(-0.3, 0.3);
        let shift = [rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08)];
        let (s, c) = (sin(theta), cos(theta));
        let pred: Vec<[f64; 2]> = template
            .iter()
            .map(|p| {
                let (dx, dy) = (p[0] - 0.5 + rng.uniform(-0.02, 0.02), p[1] - 0.5 + rng.uniform(-0.02, 0.02));
                [
                    0.5 + shift[0] + scale * (c * dx - s * dy),
                    0.5 + shift[1] + scale * (s * dx + c * dy),
                ]
            })
            .collect();
        let gt: Vec<[f64; 2]> = (0..out_landmarks)
            .map(|j| {
                let row = &map[j * in_landmarks..(j + 1) * in_landmarks];
                row.iter().zip(&pred).fold([0.0, 0.0], |acc, (w, p)| [acc[0] + w * p[0], acc[1] + w * p[1]])
            })
            .collect();
        out.push(AdaptSample {
            pred: LandmarkSet::new(pred)?,
            resize: rng.uniform(1.0, 4.0),
            gt: LandmarkSet::new(gt)?,
        });
    }
    Ok(out)
}
