//! On-disk problem bundles.
//!
//! ```text
//! bundle/
//!   config.json            loss settings
//!   paired/NAME_gen.pgm    generated image paired with
//!   paired/NAME_tgt.pgm    its thermal target
//!   unpaired/NAME.pgm      generated image from an unpaired input
//!   unpaired/NAME_mask.pgm its segmentation mask
//!   real/NAME.pgm          real thermal image
//! ```
//!
//! Entries are ordered by name.

use std::fs;
use std::path::Path;

use thermoloss_core::composite::Problem;
use thermoloss_core::rng::Xoshiro256;
use thermoloss_core::{SegmentationMask, ThermalImage};

use crate::error::CliError;
use crate::formats::{read_json, to_json_string, LossSettings};
use crate::pgm::{load_image, load_mask, save_image, save_mask, Format, THERMAL_MAXVAL};

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub settings: LossSettings,
    pub paired_names: Vec<String>,
    pub unpaired_names: Vec<String>,
    pub real_names: Vec<String>,
    pub problem: Problem,
}

fn pgm_stems(dir: &Path, suffix: &str, skip_suffix: Option<&str>) -> Result<Vec<String>, CliError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let file = entry.file_name().to_string_lossy().into_owned();
        let Some(stem) = file.strip_suffix(".pgm") else { continue };
        if skip_suffix.is_some_and(|s| stem.ends_with(s)) {
            continue;
        }
        if let Some(name) = stem.strip_suffix(suffix) {
            names.push(name.to_string());
        }
    }
    names.sort();
    Ok(names)
}

impl Bundle {
    pub fn load(root: &Path) -> Result<Self, CliError> {
        let config = root.join("config.json");
        let settings: LossSettings = if config.exists() {
            read_json(&config)?
        } else {
            LossSettings::default()
        };
        let paired_dir = root.join("paired");
        let unpaired_dir = root.join("unpaired");
        let real_dir = root.join("real");
        let paired_names = pgm_stems(&paired_dir, "_gen", None)?;
        let unpaired_names = pgm_stems(&unpaired_dir, "", Some("_mask"))?;
        let real_names = pgm_stems(&real_dir, "", None)?;

        let mut problem = Problem::default();
        for n in &paired_names {
            let gen = load_image(&paired_dir.join(format!("{n}_gen.pgm")))?;
            let tgt = load_image(&paired_dir.join(format!("{n}_tgt.pgm")))?;
            problem.paired.push((gen, tgt));
        }
        for n in &unpaired_names {
            let gen = load_image(&unpaired_dir.join(format!("{n}.pgm")))?;
            let mask = load_mask(&unpaired_dir.join(format!("{n}_mask.pgm")))?;
            if gen.dims() != mask.dims() {
                return Err(CliError::Input(format!(
                    "unpaired/{n}: image is {:?} but mask is {:?}",
                    gen.dims(),
                    mask.dims()
                )));
            }
            problem.unpaired.push((gen, mask));
        }
        for n in &real_names {
            problem.real.push(load_image(&real_dir.join(format!("{n}.pgm")))?);
        }
        if problem.paired.is_empty() && problem.unpaired.is_empty() {
            return Err(CliError::Input(format!("{}: bundle has no paired or unpaired images", root.display())));
        }
        Ok(Bundle {
            settings,
            paired_names,
            unpaired_names,
            real_names,
            problem,
        })
    }

    pub fn save(&self, root: &Path, format: Format) -> Result<(), CliError> {
        let dirs = ["paired", "unpaired", "real"].map(|d| root.join(d));
        for d in &dirs {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
        }
        let config = root.join("config.json");
        fs::write(&config, to_json_string(&self.settings)).map_err(|e| CliError::io(&config, e))?;
        for (n, (gen, tgt)) in self.paired_names.iter().zip(&self.problem.paired) {
            save_image(gen, &dirs[0].join(format!("{n}_gen.pgm")), format)?;
            save_image(tgt, &dirs[0].join(format!("{n}_tgt.pgm")), format)?;
        }
        for (n, (gen, mask)) in self.unpaired_names.iter().zip(&self.problem.unpaired) {
            save_image(gen, &dirs[1].join(format!("{n}.pgm")), format)?;
            save_mask(mask, &dirs[1].join(format!("{n}_mask.pgm")))?;
        }
        for (n, img) in self.real_names.iter().zip(&self.problem.real) {
            save_image(img, &dirs[2].join(format!("{n}.pgm")), format)?;
        }
        Ok(())
    }

    /// Problem with generated images replaced, keeping names and settings.
    pub fn with_problem(&self, problem: Problem) -> Self {
        Bundle {
            problem,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub paired: usize,
    pub unpaired: usize,
    pub real: usize,
    pub seed: u64,
}

fn quantized(rng: &mut Xoshiro256, lo: f64, hi: f64) -> f64 {
    let q = THERMAL_MAXVAL as f64;
    (rng.uniform(lo, hi).clamp(0.0, 1.0) * q).round() / q
}

/// Smooth face-like image: warm ellipse on a cool background plus noise.
fn synth_image(rng: &mut Xoshiro256, h: usize, w: usize) -> ThermalImage {
    let cy = rng.uniform(0.4, 0.6) * h as f64;
    let cx = rng.uniform(0.4, 0.6) * w as f64;
    let ry = rng.uniform(0.25, 0.4) * h as f64;
    let rx = rng.uniform(0.2, 0.35) * w as f64;
    let warm = rng.uniform(0.55, 0.8);
    let cool = rng.uniform(0.05, 0.25);
    let mut v = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let d = ((r as f64 + 0.5 - cy) / ry).powi(2) + ((c as f64 + 0.5 - cx) / rx).powi(2);
            let base = cool + (warm - cool) * (-d).exp();
            v.push(quantized(rng, base - 0.03, base + 0.03));
        }
    }
    ThermalImage::new(h, w, v).expect("values in [0, 1]")
}

/// Concentric regions: background, skin, then a few inner features.
fn synth_mask(rng: &mut Xoshiro256, h: usize, w: usize) -> SegmentationMask {
    let cy = rng.uniform(0.4, 0.6) * h as f64;
    let cx = rng.uniform(0.4, 0.6) * w as f64;
    let inner = [2u8, 9, 13, 12];
    let pick = inner[rng.below(inner.len() as u64) as usize];
    let mut labels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let dy = (r as f64 + 0.5 - cy) / h as f64;
            let dx = (c as f64 + 0.5 - cx) / w as f64;
            let d = (dy * dy + dx * dx).sqrt();
            labels.push(if d < 0.15 {
                pick
            } else if d < 0.55 {
                1
            } else {
                0
            });
        }
    }
    SegmentationMask::new(h, w, labels).expect("labels below 18")
}

/// Deterministic random bundle whose pixel values survive a 16-bit PGM round trip.
pub fn synth(spec: &SynthSpec, settings: LossSettings) -> Result<Bundle, CliError> {
    if spec.height == 0 || spec.width == 0 {
        return Err(CliError::Input("synthetic images need positive height and width".into()));
    }
    if spec.paired + spec.unpaired == 0 {
        return Err(CliError::Input("synthetic bundle needs at least one paired or unpaired image".into()));
    }
    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let (h, w) = (spec.height, spec.width);
    let mut problem = Problem::default();
    for _ in 0..spec.paired {
        let gen = synth_image(&mut rng, h, w);
        let tgt = synth_image(&mut rng, h, w);
        problem.paired.push((gen, tgt));
    }
    for _ in 0..spec.unpaired {
        let gen = synth_image(&mut rng, h, w);
        let mask = synth_mask(&mut rng, h, w);
        problem.unpaired.push((gen, mask));
    }
    for _ in 0..spec.real {
        problem.real.push(synth_image(&mut rng, h, w));
    }
    let names = |prefix: &str, n: usize| -> Vec<String> { (0..n).map(|i| format!("{prefix}{i:03}")).collect() };
    Ok(Bundle {
        settings,
        paired_names: names("p", spec.paired),
        unpaired_names: names("u", spec.unpaired),
        real_names: names("r", spec.real),
        problem,
    })
}
