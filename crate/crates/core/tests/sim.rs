//! Simulator behaviour against analytic expectations and determinism guarantees.

use iccd_calib::sim::{sample_pair_events, Filter};
use iccd_calib::threshold::{accumulate_counts, binarize, BaselineMap};
use iccd_calib::{simulate_run, with_workers, RawFrame, SimConfig, Simulator, WavelengthBand};

fn frames(config: &SimConfig, n: u64) -> Vec<RawFrame> {
    simulate_run(config, n).unwrap().collect()
}

fn true_baseline(sim: &Simulator) -> BaselineMap {
    BaselineMap::new(
        sim.config().geometry.clone(),
        sim.baseline().iter().map(|&b| b as f64).collect(),
        1,
    )
    .unwrap()
}

#[test]
fn pump_off_frames_do_not_depend_on_pair_rate() {
    let mut low = SimConfig::closed_loop(11).with_pump(false);
    low.pair_rate = 0.5;
    let mut high = low.clone();
    high.pair_rate = 50.0;
    assert_eq!(frames(&low, 40), frames(&high, 40));
}

#[test]
fn pump_off_runs_emit_no_pairs() {
    let c = SimConfig::closed_loop(12).with_pump(false);
    assert!((0..100).all(|i| sample_pair_events(&c, i).unwrap().is_empty()));
    let on = SimConfig::closed_loop(12);
    assert!((0..100).any(|i| !sample_pair_events(&on, i).unwrap().is_empty()));
}

#[test]
fn frames_are_identical_for_any_worker_count() {
    let c = SimConfig::desk_scale(13);
    let one = with_workers(Some(1), || frames(&c, 150)).unwrap();
    let four = with_workers(Some(4), || frames(&c, 150)).unwrap();
    assert_eq!(one, four);
}

#[test]
fn frames_can_be_regenerated_out_of_order() {
    let c = SimConfig::closed_loop(14);
    let sim = Simulator::new(c.clone()).unwrap();
    let run = frames(&c, 30);
    for i in [29u64, 3, 17, 0] {
        assert_eq!(sim.frame(i), run[i as usize]);
    }
}

#[test]
fn different_seeds_give_different_frames() {
    assert_ne!(frames(&SimConfig::closed_loop(15), 5), frames(&SimConfig::closed_loop(16), 5));
}

#[test]
fn zero_threshold_dark_click_rate_matches_expectation() {
    let mut c = SimConfig::closed_loop(17).with_pump(false);
    c.readout_noise_sigma = 0.0;
    c.splat_sigma = 0.0;
    c.stray_light_rate = 0.0;
    c.dark_event_rate = 0.01;
    let sim = Simulator::new(c.clone()).unwrap();
    let baseline = true_baseline(&sim);
    let n = 5_000u64;
    let full = c.geometry.full_region("frame");
    let binary = sim.par_map(0, n, |f| binarize(&f, &baseline, 0).unwrap());
    let stats = accumulate_counts(&binary, &full).unwrap();

    // A pixel clicks at threshold 0 when its summed charge rounds above half an ADU.
    let p = 1.0 - (-c.dark_event_rate * (-0.5 / c.noise_amp_mean).exp()).exp();
    let trials = (n as usize * full.pixel_count()) as f64;
    let sigma = (p * (1.0 - p) / trials).sqrt();
    let z = (stats.mean_clicks_per_pixel_per_frame - p) / sigma;
    assert!(z.abs() < 4.0, "rate {} vs {p} ({z:.2} sigma)", stats.mean_clicks_per_pixel_per_frame);
}

#[test]
fn zero_threshold_photon_rate_matches_expectation() {
    let mut c = SimConfig::closed_loop(18);
    c.readout_noise_sigma = 0.0;
    c.splat_sigma = 0.0;
    c.stray_light_rate = 0.0;
    c.dark_event_rate = 0.0;
    c.beam_profile_sigma = 6.0;
    c.pair_rate = 0.5;
    c.filters = vec![Filter {
        region: c.geometry.full_region("open"),
        band: WavelengthBand::from_edges(700.0, 900.0).unwrap(),
    }];
    let sim = Simulator::new(c.clone()).unwrap();
    let baseline = true_baseline(&sim);
    let n = 20_000u64;
    let full = c.geometry.full_region("frame");
    let binary = sim.par_map(0, n, |f| binarize(&f, &baseline, 0).unwrap());
    let clicks = accumulate_counts(&binary, &full).unwrap().clicks_total as f64;

    let per_frame = 2.0 * c.pair_rate * 0.20 * c.channel.total_transmission() * (-0.5 / c.signal_amp_mean).exp();
    let expected = n as f64 * per_frame;
    let z = (clicks - expected) / expected.sqrt();
    assert!(z.abs() < 4.0, "{clicks} clicks vs {expected:.0} expected ({z:.2} sigma)");
}

#[test]
fn pixel_values_never_fall_below_baseline_without_readout_noise() {
    let mut c = SimConfig::desk_scale(19);
    c.readout_noise_sigma = 0.0;
    let sim = Simulator::new(c).unwrap();
    for i in 0..50 {
        let f = sim.frame(i);
        assert!(f.values.iter().zip(sim.baseline()).all(|(v, b)| v >= b));
    }
}
