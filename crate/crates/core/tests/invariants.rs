//! Property tests for the invariants of the domain types and operations.

use iccd_calib::calib::{g2_map, klyshko_qe, ClickTrace, CoincidenceStats};
use iccd_calib::sim::sample_pair_events;
use iccd_calib::threshold::{accumulate_counts, binarize, BaselineMap};
use iccd_calib::{
    bin_pixels, conjugate_region, conjugate_wavelength, BinaryFrame, CameraGeometry, OpticalChannel, RawFrame, Region,
    SimConfig, WavelengthBand,
};
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = CameraGeometry> {
    (4usize..40, 4usize..40, 0.1f64..0.9, 0.1f64..0.9)
        .prop_map(|(w, h, fx, fy)| CameraGeometry::new(w, h, 1, (w as f64 * fx, h as f64 * fy)).unwrap())
}

fn binary_frames(g: &CameraGeometry, bits: &[Vec<bool>]) -> Vec<BinaryFrame> {
    bits.iter()
        .enumerate()
        .map(|(i, c)| BinaryFrame::new(g.clone(), c.clone(), i as u64, 50).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn conjugate_wavelength_is_an_involution(lp in 300.0f64..600.0, f in 1.05f64..3.0) {
        let l = lp * f;
        let back = conjugate_wavelength(conjugate_wavelength(l, lp).unwrap(), lp).unwrap();
        prop_assert!((back - l).abs() <= 1e-9 * l);
    }

    #[test]
    fn double_conjugate_region_contains_original(
        (g, x0, y0, w, h) in geometry().prop_flat_map(|g| {
            let (gw, gh) = (g.width(), g.height());
            (Just(g), 0..gw, 0..gh, 1..=gw, 1..=gh)
        })
    ) {
        let w = w.min(g.width() - x0);
        let h = h.min(g.height() - y0);
        let r = Region::new(x0, y0, w, h, "r").unwrap();
        // Clipping may lose the region entirely; containment is checked when it does not.
        if let Ok(once) = conjugate_region(&r, &g, 0) {
            if let Ok(twice) = conjugate_region(&once, &g, 0) {
                let unclipped = once.pixel_count() == r.pixel_count();
                if unclipped {
                    prop_assert!(twice.contains_region(&r), "{r} -> {once} -> {twice}");
                }
            }
        }
    }

    #[test]
    fn binning_conserves_unsaturated_counts(values in proptest::collection::vec(0u16..1000, 64), factor in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let g = CameraGeometry::new(8, 8, 1, (4.0, 4.0)).unwrap();
        let f = RawFrame::new(g, values, 0).unwrap();
        prop_assert_eq!(bin_pixels(&f, factor).unwrap().total(), f.total());
    }

    #[test]
    fn channel_total_is_the_product(ts in proptest::collection::vec(0.01f64..=1.0, 1..8)) {
        let ch = OpticalChannel::new(ts.iter().enumerate().map(|(i, &t)| (format!("e{i}"), t)).collect()).unwrap();
        let product: f64 = ts.iter().product();
        prop_assert!((ch.total_transmission() - product).abs() <= 1e-12 * product);
    }

    #[test]
    fn band_and_channel_reject_invalid_values(c in -10.0f64..10.0, t in prop::sample::select(vec![0.0, -0.1, 1.01, f64::NAN])) {
        prop_assert!(WavelengthBand::new(800.0, 10.0, t).is_err());
        prop_assert!(OpticalChannel::single("x", t).is_err());
        if c <= 0.0 {
            prop_assert!(WavelengthBand::new(c, 10.0, 0.5).is_err());
            prop_assert!(WavelengthBand::new(800.0, c, 0.5).is_err());
        }
    }

    #[test]
    fn regions_must_be_non_empty_and_inside(g in geometry(), x0 in 0usize..50, y0 in 0usize..50, w in 0usize..50, h in 0usize..50) {
        match Region::new(x0, y0, w, h, "r") {
            Err(_) => prop_assert!(w == 0 || h == 0),
            Ok(r) => prop_assert_eq!(r.is_inside(&g), x0 + w <= g.width() && y0 + h <= g.height()),
        }
    }

    #[test]
    fn every_pair_conserves_energy(seed in any::<u64>(), frame in any::<u64>()) {
        let c = SimConfig::desk_scale(seed);
        for ev in sample_pair_events(&c, frame).unwrap() {
            let lhs = 1.0 / ev.signal_lambda + 1.0 / ev.idler_lambda;
            let rhs = 1.0 / c.lambda_pump;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
        }
    }

    #[test]
    fn count_stats_are_consistent(bits in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 36), 1..30)) {
        let g = CameraGeometry::centered(6).unwrap();
        let region = Region::new(1, 1, 4, 3, "r").unwrap();
        let s = accumulate_counts(binary_frames(&g, &bits), &region).unwrap();
        let n = bits.len() as u64;
        let px = region.pixel_count() as u64;
        prop_assert!(s.clicks_total <= n * px);
        prop_assert_eq!(s.mean_clicks_per_frame, s.clicks_total as f64 / n as f64);
        prop_assert_eq!(s.mean_clicks_per_pixel_per_frame, s.clicks_total as f64 / (n * px) as f64);
        prop_assert!(s.mean_clicks_per_pixel_per_frame <= 1.0);
    }

    #[test]
    fn higher_thresholds_click_on_subsets(values in proptest::collection::vec(590u16..700, 25), base in 590.0f64..620.0, s1 in -5i32..60, ds in 1i32..40) {
        let g = CameraGeometry::centered(5).unwrap();
        let f = RawFrame::new(g.clone(), values, 0).unwrap();
        let b = BaselineMap::new(g, vec![base; 25], 1).unwrap();
        let lo = binarize(&f, &b, s1).unwrap();
        let hi = binarize(&f, &b, s1 + ds).unwrap();
        prop_assert!(hi.clicks.iter().zip(&lo.clicks).all(|(&h, &l)| !h || l));
    }

    #[test]
    fn coincidence_means_are_bounded(r in proptest::collection::vec(any::<bool>(), 3..200), seed in any::<u64>()) {
        let d: Vec<bool> = r.iter().enumerate().map(|(i, &x)| x ^ ((seed >> (i % 64)) & 1 == 1)).collect();
        let signal = ClickTrace::new(r.clone(), d.clone()).unwrap();
        let noise = ClickTrace::new(d, r).unwrap();
        let s = CoincidenceStats::from_traces(&signal, &noise, 1).unwrap();
        for v in [s.n_cc, s.n_acc, s.n_ref, s.dn_noise, s.n_dut] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(s.n_cc <= s.n_ref);
    }

    #[test]
    fn corrected_eta_divides_by_the_channel(cc in 0.0f64..0.01, acc in 0.0f64..0.01, nref in 0.02f64..0.2, t in 0.05f64..=1.0) {
        let stats = CoincidenceStats {
            n_frames: 10_000,
            n_noise_frames: 10_000,
            n_cc: cc,
            n_acc: acc,
            n_ref: nref,
            dn_noise: 0.01,
            n_dut: 0.05,
            n_acc_product: nref * 0.05,
        };
        let ch = OpticalChannel::single("channel", t).unwrap();
        let r = klyshko_qe(&stats, &ch, 80, None).unwrap();
        prop_assert_eq!(r.eta_corrected, r.eta_raw / t);
        prop_assert!(r.sigma_eta >= 0.0 && r.eta_corrected.is_finite());
        prop_assert_eq!(r.low_signal, r.eta_raw < 0.0);
    }

    #[test]
    fn g2_is_non_negative_and_undefined_without_clicks(bits in proptest::collection::vec(proptest::collection::vec(prop::bool::weighted(0.3), 36), 2..40)) {
        let g = CameraGeometry::centered(6).unwrap();
        let reference = Region::new(0, 0, 2, 2, "reference").unwrap();
        let any_ref = bits.iter().any(|c| c[0] || c[1] || c[6] || c[7]);
        let m = g2_map(binary_frames(&g, &bits), &reference).unwrap();
        for i in 0..36 {
            let clicked = any_ref && bits.iter().any(|c| c[i]);
            prop_assert_eq!(m.is_defined(i), clicked);
            if clicked {
                prop_assert!(m.g2[i] >= 0.0);
            }
        }
    }
}
