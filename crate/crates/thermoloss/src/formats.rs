//! JSON file formats and their conversions to core types.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thermoloss_core::adapter::{AdaptSample, AdaptTrainConfig, AdapterMLP};
use thermoloss_core::composite::{LossConfig, DEFAULT_LAMBDA_W, DEFAULT_MSE_DIM_NORM};
use thermoloss_core::image::{DEFAULT_CEIL_C, DEFAULT_FLOOR_C, NUM_CLASSES};
use thermoloss_core::metrics::EvalRecord;
use thermoloss_core::ot::{EmpiricalMeasure, SinkhornConfig};
use thermoloss_core::patch::{PatchConfig, PatchSolver};
use thermoloss_core::region::{ReferenceTemperatureProfile, RegionConfig};
use thermoloss_core::window::{WindowGeometry, WindowPrediction};
use thermoloss_core::LandmarkSet;

use crate::error::CliError;

pub const COLD_PROFILE_JSON: &str = include_str!("../data/cold.json");
pub const WARM_PROFILE_JSON: &str = include_str!("../data/warm.json");

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

/// One JSON value per non-empty line.
pub fn read_json_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// A point cloud, either bare (`[[x, y], ...]`) or as `{"points": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MeasureFile {
    Bare(Vec<Vec<f64>>),
    Wrapped { points: Vec<Vec<f64>> },
}

impl MeasureFile {
    pub fn to_measure(&self) -> Result<EmpiricalMeasure, CliError> {
        let pts = match self {
            MeasureFile::Bare(p) | MeasureFile::Wrapped { points: p } => p,
        };
        Ok(EmpiricalMeasure::from_points(pts)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LandmarkFile {
    pub convention_size: usize,
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
}

impl LandmarkFile {
    pub fn to_landmarks(&self) -> Result<LandmarkSet, CliError> {
        Ok(LandmarkSet::with_convention(
            self.convention_size,
            self.points.clone(),
            self.sigmas.clone(),
        )?)
    }

    pub fn from_landmarks(set: &LandmarkSet) -> Self {
        LandmarkFile {
            convention_size: set.len(),
            points: set.points().to_vec(),
            sigmas: set.sigmas().map(<[f64]>::to_vec),
        }
    }
}

/// Variances as a bare array or `{"sigma2": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum VarianceFile {
    Bare(Vec<f64>),
    Wrapped { sigma2: Vec<f64> },
}

impl VarianceFile {
    pub fn values(&self) -> &[f64] {
        match self {
            VarianceFile::Bare(v) | VarianceFile::Wrapped { sigma2: v } => v,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryJson {
    pub level: usize,
    pub scale: f64,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl From<WindowGeometry> for GeometryJson {
    fn from(g: WindowGeometry) -> Self {
        GeometryJson {
            level: g.level,
            scale: g.scale,
            top: g.top,
            left: g.left,
            height: g.height,
            width: g.width,
        }
    }
}

impl From<GeometryJson> for WindowGeometry {
    fn from(g: GeometryJson) -> Self {
        WindowGeometry {
            level: g.level,
            scale: g.scale,
            top: g.top,
            left: g.left,
            height: g.height,
            width: g.width,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WindowPredictionJson {
    #[serde(flatten)]
    pub geometry: GeometryJson,
    pub landmarks: LandmarkFile,
}

/// Window-local predictions over one original image.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WindowsFile {
    pub image_height: usize,
    pub image_width: usize,
    pub windows: Vec<WindowPredictionJson>,
}

impl WindowsFile {
    pub fn predictions(&self) -> Result<Vec<WindowPrediction>, CliError> {
        self.windows
            .iter()
            .map(|w| {
                Ok(WindowPrediction {
                    geometry: w.geometry.into(),
                    landmarks: w.landmarks.to_landmarks()?,
                })
            })
            .collect()
    }
}

/// Reference temperatures keyed by class id (`null` = below the floor).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub name: String,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_ceil")]
    pub ceil: f64,
    pub celsius: BTreeMap<String, Option<f64>>,
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR_C
}

fn default_ceil() -> f64 {
    DEFAULT_CEIL_C
}

impl ProfileFile {
    pub fn to_profile(&self) -> Result<ReferenceTemperatureProfile, CliError> {
        let mut table = [None; NUM_CLASSES];
        for (key, value) in &self.celsius {
            let id: usize = key
                .parse()
                .ok()
                .filter(|&i| i < NUM_CLASSES)
                .ok_or_else(|| CliError::Input(format!("profile class id {key:?} is not in 0..18")))?;
            table[id] = *value;
        }
        if self.celsius.len() != NUM_CLASSES {
            return Err(CliError::Input(format!(
                "profile {:?} lists {} classes, expected {NUM_CLASSES}",
                self.name,
                self.celsius.len()
            )));
        }
        Ok(ReferenceTemperatureProfile::from_celsius(&self.name, table, self.floor, self.ceil)?)
    }

    pub fn from_table(name: &str, table: &[Option<f64>; NUM_CLASSES]) -> Self {
        ProfileFile {
            name: name.to_string(),
            floor: DEFAULT_FLOOR_C,
            ceil: DEFAULT_CEIL_C,
            celsius: table.iter().enumerate().map(|(i, c)| (i.to_string(), *c)).collect(),
        }
    }
}

/// `cold`, `warm`, or a path to a profile file.
pub fn resolve_profile(spec: &str, base: Option<&Path>) -> Result<ReferenceTemperatureProfile, CliError> {
    let text = match spec {
        "cold" => COLD_PROFILE_JSON.to_string(),
        "warm" => WARM_PROFILE_JSON.to_string(),
        path => {
            let p = base.map_or_else(|| Path::new(path).to_path_buf(), |b| b.join(path));
            fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?
        }
    };
    let file: ProfileFile =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("profile {spec}: {e}")))?;
    file.to_profile()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SinkhornSettings {
    pub lambda_e: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub anneal: bool,
}

impl Default for SinkhornSettings {
    fn default() -> Self {
        let c = SinkhornConfig::default();
        SinkhornSettings {
            lambda_e: c.lambda_e,
            tolerance: c.tolerance,
            max_iters: c.max_iters,
            anneal: c.anneal,
        }
    }
}

impl SinkhornSettings {
    pub fn to_config(&self) -> SinkhornConfig {
        SinkhornConfig {
            lambda_e: self.lambda_e,
            tolerance: self.tolerance,
            max_iters: self.max_iters,
            anneal: self.anneal,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    #[default]
    Sinkhorn,
    Exact,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PatchSettings {
    pub patch_size: usize,
    pub stride: usize,
    pub scales: usize,
    pub scale_factor: f64,
    pub max_patches_per_side: usize,
    pub solver: SolverName,
}

impl Default for PatchSettings {
    fn default() -> Self {
        let c = PatchConfig::default();
        PatchSettings {
            patch_size: c.patch_size,
            stride: c.stride,
            scales: c.scales,
            scale_factor: c.scale_factor,
            max_patches_per_side: c.max_patches_per_side,
            solver: SolverName::Sinkhorn,
        }
    }
}

impl PatchSettings {
    pub fn to_config(&self, seed: u64) -> PatchConfig {
        PatchConfig {
            patch_size: self.patch_size,
            stride: self.stride,
            scales: self.scales,
            scale_factor: self.scale_factor,
            max_patches_per_side: self.max_patches_per_side,
            seed,
            solver: match self.solver {
                SolverName::Sinkhorn => PatchSolver::Sinkhorn,
                SolverName::Exact => PatchSolver::Exact,
            },
        }
    }
}

/// Loss settings as stored in a problem bundle's `config.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LossSettings {
    pub profile: String,
    pub lambda_w: f64,
    pub lambda_r: f64,
    pub mse_dim_norm: usize,
    pub include_background: bool,
    pub seed: u64,
    pub patch: PatchSettings,
    pub sinkhorn: SinkhornSettings,
}

impl Default for LossSettings {
    fn default() -> Self {
        LossSettings {
            profile: "cold".into(),
            lambda_w: DEFAULT_LAMBDA_W,
            lambda_r: 1.0,
            mse_dim_norm: DEFAULT_MSE_DIM_NORM,
            include_background: true,
            seed: 0,
            patch: PatchSettings::default(),
            sinkhorn: SinkhornSettings::default(),
        }
    }
}

impl LossSettings {
    pub fn to_config(&self, base: Option<&Path>) -> Result<LossConfig, CliError> {
        let cfg = LossConfig {
            lambda_w: self.lambda_w,
            lambda_r: self.lambda_r,
            mse_dim_norm: self.mse_dim_norm,
            profile: resolve_profile(&self.profile, base)?,
            region: RegionConfig {
                include_background: self.include_background,
            },
            patch: self.patch.to_config(self.seed),
            sink: self.sinkhorn.to_config(),
        };
        cfg.validate()?;
        cfg.patch.validate()?;
        cfg.sink.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSettings {
    pub epochs: usize,
    pub base_lr: f64,
    pub warmup_frac: f64,
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

impl Default for AdaptSettings {
    fn default() -> Self {
        Self::from_config(&AdaptTrainConfig::default())
    }
}

impl AdaptSettings {
    pub fn from_config(c: &AdaptTrainConfig) -> Self {
        AdaptSettings {
            epochs: c.epochs,
            base_lr: c.base_lr,
            warmup_frac: c.warmup_frac,
            lr_div: c.lr_div,
            beta1: c.beta1,
            beta2: c.beta2,
            adam_eps: c.adam_eps,
            batch: c.batch,
            aug_rotation_max_deg: c.aug_rotation_max_deg,
            aug_shear_max: c.aug_shear_max,
            hidden_width: c.hidden_width,
            hidden_layers: c.hidden_layers,
            seed: c.seed,
        }
    }

    pub fn to_config(&self) -> AdaptTrainConfig {
        AdaptTrainConfig {
            epochs: self.epochs,
            base_lr: self.base_lr,
            warmup_frac: self.warmup_frac,
            lr_div: self.lr_div,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            batch: self.batch,
            aug_rotation_max_deg: self.aug_rotation_max_deg,
            aug_shear_max: self.aug_shear_max,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            seed: self.seed,
        }
    }
}

/// One adapter training pair per line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SampleLine {
    pub pred: LandmarkFile,
    pub resize: f64,
    pub gt: LandmarkFile,
}

impl SampleLine {
    pub fn to_sample(&self) -> Result<AdaptSample, CliError> {
        Ok(AdaptSample {
            pred: self.pred.to_landmarks()?,
            resize: self.resize,
            gt: self.gt.to_landmarks()?,
        })
    }

    pub fn from_sample(s: &AdaptSample) -> Self {
        SampleLine {
            pred: LandmarkFile::from_landmarks(&s.pred),
            resize: s.resize,
            gt: LandmarkFile::from_landmarks(&s.gt),
        }
    }
}

/// One evaluation record per manifest line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub frame: String,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub prediction: Option<LandmarkFile>,
    pub ground_truth: LandmarkFile,
}

impl RecordLine {
    pub fn to_record(&self) -> Result<EvalRecord, CliError> {
        Ok(EvalRecord {
            frame: self.frame.clone(),
            prediction: self.prediction.as_ref().map(LandmarkFile::to_landmarks).transpose()?,
            ground_truth: self.ground_truth.to_landmarks()?,
            height: self.height,
            width: self.width,
        })
    }
}

pub const MODEL_FORMAT: &str = "thermoloss-adapter";
pub const MODEL_VERSION: u32 = 1;

/// First line of a model file; the little-endian parameter blob follows the newline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub widths: Vec<usize>,
    pub param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<AdaptSettings>,
}

pub fn encode_model(model: &AdapterMLP, train: Option<&AdaptSettings>) -> Vec<u8> {
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        widths: model.widths().to_vec(),
        param_count: model.params().len(),
        train: train.cloned(),
    };
    let mut out = serde_json::to_vec(&header).expect("serializable header");
    out.push(b'\n');
    out.extend_from_slice(&model.to_le_bytes());
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelHeader, AdapterMLP), CliError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::Input("model file has no header line".into()))?;
    let header: ModelHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| CliError::Input(format!("model header: {e}")))?;
    if header.format != MODEL_FORMAT {
        return Err(CliError::Input(format!("model format {:?} is not {MODEL_FORMAT:?}", header.format)));
    }
    if header.version != MODEL_VERSION {
        return Err(CliError::Input(format!("unsupported model version {}", header.version)));
    }
    let blob = &bytes[nl + 1..];
    if blob.len() != header.param_count * 8 {
        return Err(CliError::Input(format!(
            "model blob holds {} bytes, header declares {} parameters",
            blob.len(),
            header.param_count
        )));
    }
    let model = AdapterMLP::from_le_bytes(header.widths.clone(), blob)?;
    Ok((header, model))
}
