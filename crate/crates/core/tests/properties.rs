mod common;

use proptest::prelude::*;
use thermoloss_core::composite::{squared_error, DEFAULT_MSE_DIM_NORM};
use thermoloss_core::image::NUM_CLASSES;
use thermoloss_core::metrics::{nme, Distance, Normalizer};
use thermoloss_core::nll::{gaussian_nll, NllConfig};
use thermoloss_core::ot::{exact_w2_squared, sinkhorn, EmpiricalMeasure, SinkhornConfig};
use thermoloss_core::patch::{extract_patches, PatchConfig};
use thermoloss_core::region::{region_means, region_reg, region_reg_with, ReferenceTemperatureProfile, RegionConfig};
use thermoloss_core::window::{
    plan_windows, pool_predictions, pyramid_levels, WindowGeometry, WindowPlanConfig, WindowPrediction,
};
use thermoloss_core::{LandmarkSet, SegmentationMask, ThermalImage};

use common::*;

fn cloud(n: usize, d: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    prop::collection::vec(-2.0f64..2.0, n * d).prop_map(move |c| EmpiricalMeasure::from_flat(d, c).unwrap())
}

fn same_size_pair() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..6, 1usize..4).prop_flat_map(|(n, d)| (cloud(n, d), cloud(n, d)))
}

fn same_size_triple() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..6, 1usize..4).prop_flat_map(|(n, d)| (cloud(n, d), cloud(n, d), cloud(n, d)))
}

fn unit_image(h: usize, w: usize) -> impl Strategy<Value = ThermalImage> {
    prop::collection::vec(0.0f64..=1.0, h * w).prop_map(move |v| ThermalImage::new(h, w, v).unwrap())
}

fn image_and_mask() -> impl Strategy<Value = (ThermalImage, SegmentationMask)> {
    (1usize..8, 1usize..8).prop_flat_map(|(h, w)| {
        (
            unit_image(h, w),
            prop::collection::vec(0u8..NUM_CLASSES as u8, h * w)
                .prop_map(move |l| SegmentationMask::new(h, w, l).unwrap()),
        )
    })
}

fn points(n: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.05f64..0.95, 0.05f64..0.95).prop_map(|(x, y)| [x, y]), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_w2_is_symmetric((a, b) in same_size_pair()) {
        let (ab, _) = exact_w2_squared(&a, &b).unwrap();
        let (ba, _) = exact_w2_squared(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(exact_w2_squared(&a, &a).unwrap().0, 0.0);
    }

    #[test]
    fn exact_w2_triangle_inequality((a, b, c) in same_size_triple()) {
        let d = |x: &EmpiricalMeasure, y: &EmpiricalMeasure| exact_w2_squared(x, y).unwrap().0.sqrt();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn transport_is_translation_covariant((a, b) in same_size_pair(), t in -3.0f64..3.0) {
        let shift = vec![t; a.dim()];
        let (base, _) = exact_w2_squared(&a, &b).unwrap();
        let (joint, _) = exact_w2_squared(&a.translated(&shift).unwrap(), &b.translated(&shift).unwrap()).unwrap();
        prop_assert!((joint - base).abs() <= 1e-9 * base.max(1.0));
        // Shifting one side adds |t|^2 plus the cross term with the mean difference.
        let mean = |m: &EmpiricalMeasure| -> Vec<f64> {
            let mut s = vec![0.0; m.dim()];
            for p in m.points() {
                s.iter_mut().zip(p).for_each(|(acc, v)| *acc += v / m.len() as f64);
            }
            s
        };
        let (ma, mb) = (mean(&a), mean(&b));
        let cross: f64 = ma.iter().zip(&mb).map(|(x, y)| 2.0 * t * (x - y)).sum();
        let (one, _) = exact_w2_squared(&a.translated(&shift).unwrap(), &b).unwrap();
        let expect = base + t * t * a.dim() as f64 + cross;
        prop_assert!((one - expect).abs() <= 1e-9 * expect.abs().max(1.0));

        let cfg = SinkhornConfig { lambda_e: 0.1, ..SinkhornConfig::default() };
        let s0 = sinkhorn(&a, &b, &cfg).unwrap();
        let s1 = sinkhorn(&a.translated(&shift).unwrap(), &b.translated(&shift).unwrap(), &cfg).unwrap();
        prop_assert!((s0.cost - s1.cost).abs() <= 1e-8 * s0.cost.abs().max(1.0));
    }

    #[test]
    fn sinkhorn_stages_are_monotone(
        (a, b) in (1usize..6, 1usize..6, 1usize..4).prop_flat_map(|(k, l, d)| (cloud(k, d), cloud(l, d)))
    ) {
        let cfg = SinkhornConfig { lambda_e: 1e-3, ..SinkhornConfig::default() };
        let r = sinkhorn(&a, &b, &cfg).unwrap();
        prop_assert!(r.converged);
        let scale = r.stages.iter().map(|s| s.transport_cost.abs()).fold(1.0, f64::max);
        for w in r.stages.windows(2) {
            prop_assert!(w[1].lambda < w[0].lambda);
        }
        // Warm-start stages may stop at their iteration cap; compare solved ones.
        let solved: Vec<_> = r.stages.iter().filter(|s| s.max_violation <= 1e-8).collect();
        for w in solved.windows(2) {
            prop_assert!(w[1].transport_cost <= w[0].transport_cost + 1e-6 * scale);
            prop_assert!(w[1].value >= w[0].value - 1e-6 * scale);
        }
        for s in r.plan.row_sums() {
            prop_assert!((s - 1.0 / a.len() as f64).abs() <= 1e-8);
        }
        for s in r.plan.col_sums() {
            prop_assert!((s - 1.0 / b.len() as f64).abs() <= 1e-8);
        }
    }

    #[test]
    fn patch_extraction_is_linear(
        (x, y) in (8usize..14, 8usize..14).prop_flat_map(|(h, w)| (unit_image(h, w), unit_image(h, w))),
        t in 0.0f64..=1.0,
    ) {
        let (h, w) = x.dims();
        let mask = SegmentationMask::uniform(h, w, 1).unwrap();
        let cfg = PatchConfig { patch_size: 4, stride: 3, ..PatchConfig::default() };
        let mix: Vec<f64> = x.values().iter().zip(y.values()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let z = ThermalImage::new(h, w, mix).unwrap();
        let (px, py, pz) = (
            extract_patches(&x, Some(&mask), &cfg).unwrap(),
            extract_patches(&y, Some(&mask), &cfg).unwrap(),
            extract_patches(&z, Some(&mask), &cfg).unwrap(),
        );
        prop_assert_eq!(px.index(), pz.index());
        for i in 0..pz.len() {
            for ((a, b), c) in px.patch(i).iter().zip(py.patch(i)).zip(pz.patch(i)) {
                prop_assert!((t * a + (1.0 - t) * b - c).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn region_term_range_and_weights((img, mask) in image_and_mask(), cold in any::<bool>(), bg in any::<bool>()) {
        let profile = if cold { ReferenceTemperatureProfile::cold() } else { ReferenceTemperatureProfile::warm() };
        let cfg = RegionConfig { include_background: bg };
        let Ok(r) = region_reg_with(&img, &mask, &profile, &cfg) else {
            prop_assert!(!bg && mask.labels().iter().all(|&l| l == 0));
            return Ok(());
        };
        prop_assert!((0.0..=1.0).contains(&r.value));
        let total: f64 = r.weights.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        // Per region the gradient sums to 2 w_i (mean_i - T_i).
        let stats = region_means(&img, &mask).unwrap();
        for (i, st) in stats.iter().enumerate() {
            let g: f64 = r.grads.as_slice().iter().zip(mask.labels()).filter(|(_, &l)| l as usize == i).map(|(g, _)| g).sum();
            let expect = st.mean.map_or(0.0, |m| 2.0 * r.weights[i] * (m - profile.target(i)));
            prop_assert!((g - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn region_term_ignores_pixel_order((img, mask) in image_and_mask(), seed in any::<u64>()) {
        let n = img.values().len();
        let mut perm: Vec<usize> = (0..n).collect();
        rng(seed).shuffle(&mut perm);
        let (h, w) = img.dims();
        let img2 = ThermalImage::new(h, w, perm.iter().map(|&i| img.values()[i]).collect()).unwrap();
        let mask2 = SegmentationMask::new(h, w, perm.iter().map(|&i| mask.labels()[i]).collect()).unwrap();
        let profile = ReferenceTemperatureProfile::cold();
        let a = region_reg(&img, &mask, &profile).unwrap();
        let b = region_reg(&img2, &mask2, &profile).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-12);
        prop_assert_eq!(a.weights, b.weights);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.grads.as_slice()[k] - a.grads.as_slice()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_mse_in_unit_range(
        (a, b) in (1usize..20, 1usize..20).prop_flat_map(|(h, w)| (unit_image(h, w), unit_image(h, w)))
    ) {
        let norm = a.values().len().max(1);
        let (v, _) = squared_error(a.values(), b.values(), norm).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        let (v, _) = squared_error(a.values(), b.values(), DEFAULT_MSE_DIM_NORM).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn nll_translation_invariant(
        (mu, y) in (1usize..8).prop_flat_map(|n| (points(n), points(n))),
        s in 0.001f64..3.0,
        t in (-5.0f64..5.0, -5.0f64..5.0),
    ) {
        let sig = vec![s; mu.len()];
        let cfg = NllConfig::default();
        let shift = |p: &[[f64; 2]]| LandmarkSet::new(p.iter().map(|q| [q[0] + t.0, q[1] + t.1]).collect()).unwrap();
        let a = gaussian_nll(&LandmarkSet::new(mu.clone()).unwrap(), &sig, &LandmarkSet::new(y.clone()).unwrap(), &cfg).unwrap();
        let b = gaussian_nll(&shift(&mu), &sig, &shift(&y), &cfg).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1.0));
        // Swapping prediction and target flips the mean gradient only.
        let c = gaussian_nll(&LandmarkSet::new(y).unwrap(), &sig, &LandmarkSet::new(mu).unwrap(), &cfg).unwrap();
        prop_assert_eq!(a.value, c.value);
        for (g1, g2) in a.grad_mu.iter().zip(&c.grad_mu) {
            prop_assert_eq!(g1[0], -g2[0]);
            prop_assert_eq!(g1[1], -g2[1]);
        }
    }

    #[test]
    fn pooling_is_idempotent(
        (pts, sig) in (1usize..8).prop_flat_map(|n| (points(n), prop::collection::vec(0.0f64..2.0, n))),
        h in 50usize..400,
        w in 50usize..400,
        copies in 1usize..4,
    ) {
        let lm = LandmarkSet::with_sigmas(pts, sig).unwrap();
        let whole = WindowPrediction { geometry: WindowGeometry::whole_image(h, w), landmarks: lm.clone() };
        let once = pool_predictions(h, w, std::slice::from_ref(&whole)).unwrap();
        prop_assert_eq!(&once, &lm);
        let again = pool_predictions(h, w, &vec![whole; copies]).unwrap();
        prop_assert_eq!(&again, &once);
        let repooled = pool_predictions(
            h,
            w,
            &[WindowPrediction { geometry: WindowGeometry::whole_image(h, w), landmarks: once.clone() }],
        )
        .unwrap();
        prop_assert_eq!(repooled, once);
    }

    #[test]
    fn windows_cover_every_level(h in 1usize..700, w in 1usize..700) {
        let cfg = WindowPlanConfig::default();
        let levels = pyramid_levels(h, w, &cfg).unwrap();
        let plan = plan_windows(h, w, &cfg).unwrap();
        for (k, lv) in levels.iter().enumerate() {
            let wins: Vec<_> = plan.iter().filter(|g| g.level == k).collect();
            prop_assert!(!wins.is_empty());
            let mut rows = vec![false; lv.height];
            let mut cols = vec![false; lv.width];
            for g in &wins {
                rows.iter_mut().skip(g.top).take(g.height).for_each(|c| *c = true);
                cols.iter_mut().skip(g.left).take(g.width).for_each(|c| *c = true);
                prop_assert!(lv.height <= cfg.window || g.top + g.height <= lv.height);
                prop_assert!(lv.width <= cfg.window || g.left + g.width <= lv.width);
            }
            // Anchors form a product grid, so axis coverage implies pixel coverage.
            prop_assert!(rows.iter().all(|&c| c) && cols.iter().all(|&c| c));
        }
    }

    #[test]
    fn window_transform_round_trip(h in 100usize..600, w in 100usize..600, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        for g in plan_windows(h, w, &WindowPlanConfig::default()).unwrap() {
            let img = g.to_image([x, y], h, w);
            let back = g.to_window(img, h, w);
            prop_assert!((back[0] - x).abs() <= 1e-9 && (back[1] - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn nme_invariant_to_joint_similarity(
        (p, g) in (2usize..10).prop_flat_map(|n| (points(n), points(n))),
        k in 0.2f64..1.0,
        t in (-0.05f64..0.05, -0.05f64..0.05),
        dims in (50usize..500, 50usize..500),
        scale in 1usize..4,
    ) {
        let (h, w) = dims;
        let pred = LandmarkSet::new(p.clone()).unwrap();
        let gt = LandmarkSet::new(g.clone()).unwrap();
        let moved = |s: &[[f64; 2]]| {
            LandmarkSet::new(s.iter().map(|q| [0.5 + k * (q[0] - 0.5) + t.0, 0.5 + k * (q[1] - 0.5) + t.1]).collect()).unwrap()
        };
        for norm in [Normalizer::BoxWidthHeight, Normalizer::Interocular { left: 0, right: 1 }] {
            for dist in [Distance::Euclidean, Distance::L1] {
                let Ok(base) = nme(&pred, &gt, h, w, norm, dist) else { continue };
                let resized = nme(&pred, &gt, h * scale, w * scale, norm, dist).unwrap();
                prop_assert!((resized - base).abs() <= 1e-9 * base.max(1.0));
                let similar = nme(&moved(&p), &moved(&g), h, w, norm, dist).unwrap();
                prop_assert!((similar - base).abs() <= 1e-9 * base.max(1.0));
            }
        }
    }
}
