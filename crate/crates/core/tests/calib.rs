//! Statistical behaviour of the Klyshko calibration on simulated and synthetic traces.

use iccd_calib::calib::{Acquisition, Calibrator, ClickTrace, CoincidenceStats};
use iccd_calib::{conjugate_region, OpticalChannel, Region, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> Region {
    Region::new(10, 29, 6, 6, "reference").unwrap()
}

fn closed_loop_eta(config: &SimConfig, n_frames: u64) -> (f64, f64) {
    let dut = conjugate_region(&reference(), &config.geometry, 2).unwrap();
    let acq = Acquisition::new(config, n_frames, 1_000).unwrap();
    let cal = Calibrator::new(config.dut_channel(&dut).unwrap());
    let r = acq.calibrate_at(&reference(), &dut, 5, &cal).unwrap();
    (r.eta_corrected, r.sigma_eta)
}

#[test]
fn uncertainty_halves_when_frames_quadruple() {
    let c = SimConfig::closed_loop(31);
    let (_, short) = closed_loop_eta(&c, 25_000);
    let (_, long) = closed_loop_eta(&c, 100_000);
    let ratio = short / long;
    assert!((1.6..=2.5).contains(&ratio), "sigma {short:.4} -> {long:.4}, ratio {ratio:.2}");
}

#[test]
fn estimate_does_not_depend_on_pair_rate() {
    let mut low = SimConfig::closed_loop(32);
    low.pair_rate = 2.0;
    let mut high = low.clone();
    high.pair_rate = 8.0;
    let (a, sa) = closed_loop_eta(&low, 60_000);
    let (b, sb) = closed_loop_eta(&high, 60_000);
    assert!((a - b).abs() <= 3.0 * sa.hypot(sb), "{a:.4} +/- {sa:.4} vs {b:.4} +/- {sb:.4}");
    for (eta, s) in [(a, sa), (b, sb)] {
        assert!((eta - 0.20).abs() <= 3.5 * s, "{eta:.4} +/- {s:.4}");
    }
}

/// Heralds with probability `p_ref`; a herald puts a photon on the DUT with
/// probability `eta`; the DUT also fires on its own with probability `q`.
fn synthetic(n: usize, p_ref: f64, eta: f64, q: f64, seed: u64) -> (ClickTrace, ClickTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reference = Vec::with_capacity(n);
    let mut dut = Vec::with_capacity(n);
    for _ in 0..n {
        let herald = rng.random::<f64>() < p_ref;
        let photon = herald && rng.random::<f64>() < eta;
        reference.push(herald);
        dut.push(photon || rng.random::<f64>() < q);
    }
    let noise_dut = (0..n).map(|_| rng.random::<f64>() < q).collect();
    (
        ClickTrace::new(reference, dut).unwrap(),
        ClickTrace::new(vec![false; n], noise_dut).unwrap(),
    )
}

#[test]
fn busy_dut_biases_the_estimate_low() {
    let cal = Calibrator::new(OpticalChannel::ideal());
    let (s, n) = synthetic(200_000, 0.05, 0.5, 0.0, 1);
    let clean = cal.calibrate(&s, &n, 0, None).unwrap();
    assert!((clean.eta_corrected - 0.5).abs() <= 4.0 * clean.sigma_eta);

    // A DUT that is already on hides the heralded photon: eta (1 - q).
    let (s, n) = synthetic(200_000, 0.05, 0.5, 0.6, 2);
    let busy = cal.calibrate(&s, &n, 0, None).unwrap();
    assert!((busy.eta_corrected - 0.2).abs() <= 4.0 * busy.sigma_eta, "{busy:?}");
    assert!(busy.eta_corrected < 0.5 - 10.0 * busy.sigma_eta);
}

#[test]
fn channel_correction_scales_the_synthetic_estimate() {
    let (s, n) = synthetic(50_000, 0.05, 0.4, 0.05, 3);
    let ideal = Calibrator::new(OpticalChannel::ideal()).calibrate(&s, &n, 0, None).unwrap();
    let lossy = Calibrator::new(OpticalChannel::single("window", 0.8).unwrap())
        .calibrate(&s, &n, 0, None)
        .unwrap();
    assert_eq!(lossy.eta_raw, ideal.eta_raw);
    assert_eq!(lossy.eta_corrected, ideal.eta_raw / 0.8);
    assert!((lossy.sigma_eta - ideal.sigma_eta / 0.8).abs() <= 1e-12);
}

#[test]
fn shuffling_the_dut_removes_the_correlation() {
    let c = SimConfig::closed_loop(34);
    let dut = conjugate_region(&reference(), &c.geometry, 2).unwrap();
    let acq = Acquisition::new(&c, 50_000, 1_000).unwrap();
    let (signal, noise) = acq.peaks(&[reference(), dut]).unwrap();
    let trace = signal.trace(0, 1, 5).unwrap();
    let off = noise.trace(0, 1, 5).unwrap();

    let real = CoincidenceStats::from_traces(&trace, &off, 1).unwrap();
    assert!(real.cc_to_acc() > 3.0, "{real:?}");
    let z_acc = (real.n_acc - real.n_acc_product) / (real.n_acc_product / real.n_frames as f64).sqrt();
    assert!(z_acc.abs() < 4.0, "shifted-frame accidentals {z_acc:.2} sigma from the singles product");

    let n = trace.len();
    let shuffled_dut = (0..n).map(|i| trace.dut[(i * 7919 + 4242) % n]).collect();
    let shuffled = ClickTrace::new(trace.reference.clone(), shuffled_dut).unwrap();
    let expected = trace.ref_count() as f64 * trace.dut_count() as f64 / n as f64;
    let observed = shuffled.coincidence_count() as f64;
    assert!((observed - expected).abs() <= 4.0 * expected.sqrt(), "{observed} vs {expected:.1}");
}

#[test]
fn bootstrap_is_reproducible_and_seed_dependent() {
    let (s, n) = synthetic(20_000, 0.05, 0.4, 0.05, 4);
    let cal = Calibrator::new(OpticalChannel::ideal());
    let a = cal.bootstrap_sigma(&s, &n).unwrap();
    assert_eq!(a, cal.bootstrap_sigma(&s, &n).unwrap());
    let b = cal.clone().with_seed(9).bootstrap_sigma(&s, &n).unwrap();
    assert_ne!(a, b);
    assert!((a / b - 1.0).abs() < 0.3);
}
