//! Segmentation-based temperature regularizer.
//!
//! Penalizes the squared deviation of each region's mean normalized
//! temperature from a reference value, weighted by the region's share of the
//! counted pixels: `sum_i w_i (mean_i - T_i)^2` with `w_i = |S_i| / sum_j |S_j|`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::image::{temp_to_unit, Grid, SegmentationMask, ThermalImage, DEFAULT_CEIL_C, DEFAULT_FLOOR_C, NUM_CLASSES};
use crate::{Error, Result};

/// Class id assignment assumed for the 18-region masks.
///
/// The reference table lists left/right parts and lips jointly; here both
/// sides share a row's temperature, and headwear and facewear share id 17.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "background",
    "skin",
    "nose",
    "right_eye",
    "left_eye",
    "right_brow",
    "left_brow",
    "right_ear",
    "left_ear",
    "mouth_interior",
    "top_lip",
    "bottom_lip",
    "neck",
    "hair",
    "beard",
    "clothing",
    "glasses",
    "headwear_facewear",
];

/// Reference readings in Celsius per class; `None` means "below the clamp
/// floor" and maps to normalized 0.
pub type CelsiusTable = [Option<f64>; NUM_CLASSES];

pub const COLD_CELSIUS: CelsiusTable = [
    None,
    Some(33.0),
    Some(31.5),
    Some(34.0),
    Some(34.0),
    Some(31.0),
    Some(31.0),
    Some(32.0),
    Some(32.0),
    Some(35.0),
    Some(32.5),
    Some(32.5),
    Some(34.0),
    Some(30.0),
    Some(31.0),
    Some(30.0),
    None,
    Some(28.0),
];

pub const WARM_CELSIUS: CelsiusTable = [
    None,
    Some(35.0),
    Some(35.0),
    Some(35.0),
    Some(35.0),
    Some(34.0),
    Some(34.0),
    Some(35.0),
    Some(35.0),
    Some(35.0),
    Some(35.0),
    Some(35.0),
    Some(35.0),
    Some(30.0),
    Some(32.0),
    Some(32.0),
    None,
    Some(28.0),
];

/// Per-class normalized target temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTemperatureProfile {
    pub name: String,
    targets: [f64; NUM_CLASSES],
    celsius: CelsiusTable,
}

impl ReferenceTemperatureProfile {
    pub fn from_celsius(name: &str, celsius: CelsiusTable, floor: f64, ceil: f64) -> Result<Self> {
        let mut targets = [0.0; NUM_CLASSES];
        for (t, c) in targets.iter_mut().zip(&celsius) {
            if let Some(c) = c {
                *t = temp_to_unit(*c, floor, ceil)?;
            }
        }
        Ok(ReferenceTemperatureProfile {
            name: String::from(name),
            targets,
            celsius,
        })
    }

    /// Builds a profile directly from normalized targets.
    pub fn from_targets(name: &str, targets: [f64; NUM_CLASSES]) -> Result<Self> {
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("profile target", "outside [0, 1]"));
        }
        Ok(ReferenceTemperatureProfile {
            name: String::from(name),
            targets,
            celsius: [None; NUM_CLASSES],
        })
    }

    pub fn cold() -> Self {
        Self::from_celsius("cold", COLD_CELSIUS, DEFAULT_FLOOR_C, DEFAULT_CEIL_C).expect("static table")
    }

    pub fn warm() -> Self {
        Self::from_celsius("warm", WARM_CELSIUS, DEFAULT_FLOOR_C, DEFAULT_CEIL_C).expect("static table")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "cold" => Some(Self::cold()),
            "warm" => Some(Self::warm()),
            _ => None,
        }
    }

    pub fn targets(&self) -> &[f64; NUM_CLASSES] {
        &self.targets
    }

    pub fn target(&self, class: usize) -> f64 {
        self.targets[class]
    }

    pub fn celsius(&self) -> &CelsiusTable {
        &self.celsius
    }

    /// Labels whose target sits at the clamp floor.
    pub fn floor_classes(&self) -> Vec<usize> {
        (0..NUM_CLASSES).filter(|&i| self.targets[i] == 0.0).collect()
    }

    /// A synthetic image with every pixel at its class target.
    pub fn render(&self, mask: &SegmentationMask) -> ThermalImage {
        let values = mask.labels().iter().map(|&l| self.targets[l as usize]).collect();
        ThermalImage::new(mask.height(), mask.width(), values).expect("targets in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassStat {
    /// `None` when the class has no pixels.
    pub mean: Option<f64>,
    pub count: usize,
}

/// Mean value and pixel count for each of the 18 classes.
pub fn region_means(img: &ThermalImage, mask: &SegmentationMask) -> Result<[ClassStat; NUM_CLASSES]> {
    mask.check_matches(img)?;
    let mut sums = [0.0; NUM_CLASSES];
    let mut counts = [0usize; NUM_CLASSES];
    for (&v, &l) in img.values().iter().zip(mask.labels()) {
        sums[l as usize] += v;
        counts[l as usize] += 1;
    }
    let mut out = [ClassStat::default(); NUM_CLASSES];
    for i in 0..NUM_CLASSES {
        out[i] = ClassStat {
            mean: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
            count: counts[i],
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionConfig {
    /// Count background (label 0) as a region with the floor as target.
    pub include_background: bool,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            include_background: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionLoss {
    pub value: f64,
    pub grads: Grid<f64>,
    /// Weight `w_i` per class (0 for absent or excluded classes).
    pub weights: [f64; NUM_CLASSES],
}

/// Region temperature regularizer with default options.
pub fn region_reg(
    img: &ThermalImage,
    mask: &SegmentationMask,
    profile: &ReferenceTemperatureProfile,
) -> Result<RegionLoss> {
    region_reg_with(img, mask, profile, &RegionConfig::default())
}

pub fn region_reg_with(
    img: &ThermalImage,
    mask: &SegmentationMask,
    profile: &ReferenceTemperatureProfile,
    cfg: &RegionConfig,
) -> Result<RegionLoss> {
    let stats = region_means(img, mask)?;
    let counted = |i: usize| (i != 0 || cfg.include_background) && stats[i].count > 0;
    let total: usize = (0..NUM_CLASSES).filter(|&i| counted(i)).map(|i| stats[i].count).sum();
    if total == 0 {
        return Err(Error::Empty("regions present in the mask"));
    }
    let mut weights = [0.0; NUM_CLASSES];
    let mut pixel_grad = [0.0; NUM_CLASSES];
    let mut value = 0.0;
    for i in (0..NUM_CLASSES).filter(|&i| counted(i)) {
        let st = stats[i];
        let w = st.count as f64 / total as f64;
        let resid = st.mean.expect("present class") - profile.target(i);
        weights[i] = w;
        value += w * resid * resid;
        pixel_grad[i] = 2.0 * w * resid / st.count as f64;
    }
    let grads = Grid::from_vec(
        img.height(),
        img.width(),
        mask.labels().iter().map(|&l| pixel_grad[l as usize]).collect(),
    )?;
    Ok(RegionLoss {
        value,
        grads,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;
    use alloc::vec;

    #[test]
    fn bundled_profiles_match_table() {
        let cold = ReferenceTemperatureProfile::cold();
        let warm = ReferenceTemperatureProfile::warm();
        assert_eq!(cold.target(1), 0.65); // skin 33 C
        assert_eq!(warm.target(1), 0.75); // skin 35 C
        assert_eq!(cold.target(2), 0.575); // nose 31.5 C
        assert_eq!(warm.target(2), 0.75);
        assert_eq!(cold.target(13), 0.5); // hair 30 C
        assert_eq!(warm.target(13), 0.5);
        assert_eq!(cold.floor_classes(), vec![0, 16]);
        assert_eq!(warm.floor_classes(), vec![0, 16]);
    }

    #[test]
    fn constant_image_single_class_mean() {
        let img = ThermalImage::constant(4, 4, 0.6).unwrap();
        let mask = SegmentationMask::uniform(4, 4, 3).unwrap();
        let st = region_means(&img, &mask).unwrap();
        assert!((st[3].mean.unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(st[3].count, 16);
        assert!(st.iter().enumerate().all(|(i, s)| i == 3 || s.mean.is_none()));
    }

    #[test]
    fn half_and_half_partition() {
        let img = ThermalImage::new(2, 2, vec![0.2, 0.2, 0.8, 0.8]).unwrap();
        let mask = SegmentationMask::new(2, 2, vec![1, 1, 2, 2]).unwrap();
        let st = region_means(&img, &mask).unwrap();
        assert_eq!(st[1].mean, Some(0.2));
        assert_eq!(st[2].mean, Some(0.8));
        assert_eq!(st[1].count, st[2].count);
    }

    #[test]
    fn means_match_direct_accumulation() {
        let mut rng = Xoshiro256::seed_from_u64(8);
        let vals: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let labels: Vec<u8> = (0..64).map(|_| rng.below(18) as u8).collect();
        let img = ThermalImage::new(8, 8, vals.clone()).unwrap();
        let mask = SegmentationMask::new(8, 8, labels.clone()).unwrap();
        let st = region_means(&img, &mask).unwrap();
        for c in 0..NUM_CLASSES {
            let members: Vec<f64> = (0..64).filter(|&p| labels[p] as usize == c).map(|p| vals[p]).collect();
            if members.is_empty() {
                assert!(st[c].mean.is_none());
            } else {
                let m = members.iter().sum::<f64>() / members.len() as f64;
                assert!((st[c].mean.unwrap() - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_at_targets() {
        let mask = SegmentationMask::new(2, 3, vec![0, 1, 2, 13, 15, 17]).unwrap();
        let profile = ReferenceTemperatureProfile::cold();
        let img = profile.render(&mask);
        let r = region_reg(&img, &mask, &profile).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grads.as_slice().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_region_offset() {
        let profile = ReferenceTemperatureProfile::cold();
        let d = 0.1;
        let img = ThermalImage::constant(3, 4, profile.target(1) + d).unwrap();
        let mask = SegmentationMask::uniform(3, 4, 1).unwrap();
        let r = region_reg(&img, &mask, &profile).unwrap();
        assert!((r.value - d * d).abs() < 1e-15);
        for g in r.grads.as_slice() {
            assert!((g - 2.0 * d / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_regions_hand_evaluation() {
        let mut targets = [0.0; NUM_CLASSES];
        targets[1] = 0.5;
        targets[2] = 0.5;
        let profile = ReferenceTemperatureProfile::from_targets("t", targets).unwrap();
        let img = ThermalImage::new(1, 4, vec![0.6, 0.6, 0.6, 0.3]).unwrap();
        let mask = SegmentationMask::new(1, 4, vec![1, 1, 1, 2]).unwrap();
        let r = region_reg(&img, &mask, &profile).unwrap();
        assert!((r.value - 0.0175).abs() < 1e-15);
    }

    #[test]
    fn background_can_be_excluded() {
        let profile = ReferenceTemperatureProfile::cold();
        let img = ThermalImage::constant(1, 2, 0.5).unwrap();
        let mask = SegmentationMask::new(1, 2, vec![0, 1]).unwrap();
        let with_bg = region_reg(&img, &mask, &profile).unwrap();
        let cfg = RegionConfig {
            include_background: false,
        };
        let without = region_reg_with(&img, &mask, &profile, &cfg).unwrap();
        assert!((with_bg.value - (0.5 * 0.25 + 0.5 * 0.0225)).abs() < 1e-15);
        assert!((without.value - 0.0225).abs() < 1e-15);
        assert_eq!(without.grads.get(0, 0), 0.0);
        let bg_only = SegmentationMask::uniform(1, 2, 0).unwrap();
        assert!(region_reg_with(&img, &bg_only, &profile, &cfg).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let img = ThermalImage::constant(2, 2, 0.5).unwrap();
        let mask = SegmentationMask::uniform(2, 3, 1).unwrap();
        assert!(region_reg(&img, &mask, &ReferenceTemperatureProfile::cold()).is_err());
    }
}
