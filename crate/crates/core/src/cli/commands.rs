//! Subcommand implementations. Each returns the text printed on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{parse_threshold_range, parse_thresholds, RunConfig};
use super::csv::{fmt_g, Table};
use super::framefile::{with_frames, FrameWriter};
use super::{report, CalibrateArgs, Command, G2mapArgs, Pump, ScanArgs, SimulateArgs, SweepArgs};
use crate::calib::experiment::{calibrate_traces, Acquisition};
use crate::calib::{
    find_conjugate_region, rescale_relative, wavelength_scan, CalibrationResult, Calibrator, ConjugateSearch,
    CorrelationMap, G2Accumulator, PeakTrace, ScanSetup, UniformityReference, UniformityScan,
};
use crate::error::{Error, Result};
use crate::geometry::{conjugate_region, CameraGeometry, Region};
use crate::optics::OpticalChannel;
use crate::sim::simulate_run;
use crate::threshold::{estimate_baseline, BaselineMap, SnrSweep, SweepAccumulator};

pub const SWEEP_HEADER: [&str; 5] = ["threshold", "signal_rate", "noise_rate", "snr", "qe_relative_unnormalized"];
pub const CALIBRATION_HEADER: [&str; 14] = [
    "threshold",
    "n_frames",
    "n_ref",
    "dn_noise",
    "n_cc",
    "n_acc",
    "n_acc_product",
    "eta_raw",
    "eta_corrected",
    "sigma_eta",
    "sigma_eta_analytic",
    "qe_relative",
    "channel_transmission",
    "low_signal",
];
pub const WAVELENGTH_HEADER: [&str; 9] = [
    "reference_nm",
    "lambda_dut_nm",
    "lambda_dut_lower_nm",
    "lambda_dut_upper_nm",
    "threshold",
    "eta_raw",
    "eta_corrected",
    "sigma_eta",
    "true_qe",
];
pub const UNIFORMITY_HEADER: [&str; 13] = [
    "x",
    "y",
    "ref_x0",
    "ref_y0",
    "ref_w",
    "ref_h",
    "threshold",
    "eta_raw",
    "eta_corrected",
    "sigma_eta",
    "relative",
    "z_score",
    "outlier",
];

pub const QE_VS_THRESHOLD: &str = "qe_vs_threshold.csv";
pub const QE_VS_WAVELENGTH: &str = "qe_vs_wavelength.csv";
pub const UNIFORMITY: &str = "uniformity.csv";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

pub fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::G2map(a) => g2map(a),
        Command::Calibrate(a) => calibrate(a),
        Command::ScanWavelength(a) => scan_wavelength(a),
        Command::ScanUniformity(a) => scan_uniformity(a),
        Command::Report(a) => report::report(&a.dir),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write frames `0..frames` of the configured run.
pub fn simulate(a: &SimulateArgs) -> Result<String> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(n) = a.frames {
        cfg.analysis.frames = n;
    }
    if let Some(p) = a.pump {
        cfg.source.pump_on = p == Pump::On;
    }
    let sim = cfg.sim_config()?;
    let mut w = FrameWriter::create(&a.out, &sim.geometry, sim.seed)?;
    for f in simulate_run(&sim, cfg.analysis.frames)? {
        w.write(&f)?;
    }
    let header = w.finish()?;
    let echo = echo_path(&a.out);
    cfg.echo(&echo)?;
    Ok(format!(
        "wrote {} frames of {}x{} to {} (pump {}), config echoed to {}\n",
        header.frame_count,
        header.width,
        header.height,
        a.out.display(),
        if sim.pump_on { "on" } else { "off" },
        echo.display()
    ))
}

/// `<out>.config.toml` beside a frame file.
pub fn echo_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.toml");
    out.with_file_name(name)
}

fn baseline_from(path: &Path) -> Result<BaselineMap> {
    with_frames(path, |_, frames| estimate_baseline(frames))
}

fn check_geometry(baseline: &BaselineMap, g: &CameraGeometry, path: &Path) -> Result<()> {
    if &baseline.geometry == g {
        Ok(())
    } else {
        Err(Error::Geometry(format!(
            "{} is {}x{} but the baseline is {}x{}",
            path.display(),
            g.width(),
            g.height(),
            baseline.geometry.width(),
            baseline.geometry.height()
        )))
    }
}

fn sweep_file(path: &Path, baseline: &BaselineMap, region: &Region, thresholds: &[i32]) -> Result<SweepAccumulator> {
    with_frames(path, |g, frames| {
        check_geometry(baseline, g, path)?;
        region.check_inside(g)?;
        let mut acc = SweepAccumulator::new(thresholds)?;
        for f in frames {
            acc.push(&f, baseline, region)?;
        }
        Ok(acc)
    })
}

pub fn sweep_table(s: &SnrSweep) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    let rel = s.relative_qe();
    for (k, th) in s.signal.thresholds.iter().enumerate() {
        t.push(vec![
            th.to_string(),
            fmt_g(s.signal.values[k]),
            fmt_g(s.noise.values[k]),
            fmt_g(s.snr.values[k]),
            fmt_g(rel.values[k]),
        ]);
    }
    t
}

pub fn sweep(a: &SweepArgs) -> Result<String> {
    let thresholds = parse_threshold_range(&a.thresholds)?;
    let baseline = baseline_from(a.baseline.as_deref().unwrap_or(&a.noise))?;
    let signal = sweep_file(&a.signal, &baseline, &a.region, &thresholds)?;
    let noise = sweep_file(&a.noise, &baseline, &a.region, &thresholds)?;
    let s = SnrSweep::from_rates(&thresholds, signal.rates()?, noise.rates()?)?;
    sweep_table(&s).write(&a.out)?;
    Ok(format!("{} thresholds written to {}\n", thresholds.len(), a.out.display()))
}

fn g2_from_file(path: &Path, baseline: &BaselineMap, reference: &Region, threshold: i32) -> Result<CorrelationMap> {
    with_frames(path, |g, frames| {
        check_geometry(baseline, g, path)?;
        let mut acc = G2Accumulator::new(g, reference, threshold)?;
        for f in frames {
            acc.push_raw(&f, baseline)?;
        }
        acc.finish()
    })
}

/// `height` rows of `width` comma-separated g2 values.
pub fn g2_grid(map: &CorrelationMap) -> String {
    let g = &map.geometry;
    let mut s = String::new();
    for y in 0..g.height() {
        let row: Vec<String> = (0..g.width()).map(|x| fmt_g(map.g2[g.index(x, y)])).collect();
        writeln!(s, "{}", row.join(",")).expect("string write");
    }
    s
}

pub fn g2map(a: &G2mapArgs) -> Result<String> {
    let baseline = baseline_from(a.baseline.as_deref().unwrap_or(&a.input))?;
    let map = g2_from_file(&a.input, &baseline, &a.reference, a.threshold)?;
    std::fs::write(&a.out, g2_grid(&map)).map_err(|e| Error::io(&a.out, e))?;
    let mut out = format!(
        "g2 map of {} frames against {} at threshold {} written to {}\n",
        map.n_frames,
        a.reference,
        a.threshold,
        a.out.display()
    );
    match find_conjugate_region(&map, &ConjugateSearch::default()) {
        Ok(r) => writeln!(out, "significant correlation region: {r}"),
        Err(e) => writeln!(out, "no significant correlation region: {e}"),
    }
    .expect("string write");
    Ok(out)
}

pub fn calibration_table(results: &[CalibrationResult], relative: Option<&[f64]>) -> Table {
    let mut t = Table::new(&CALIBRATION_HEADER);
    for (k, r) in results.iter().enumerate() {
        let s = &r.inputs;
        t.push(vec![
            r.threshold.to_string(),
            s.n_frames.to_string(),
            fmt_g(s.n_ref),
            fmt_g(s.dn_noise),
            fmt_g(s.n_cc),
            fmt_g(s.n_acc),
            fmt_g(s.n_acc_product),
            fmt_g(r.eta_raw),
            fmt_g(r.eta_corrected),
            fmt_g(r.sigma_eta),
            fmt_g(r.sigma_eta_analytic),
            fmt_g(relative.map_or(f64::NAN, |v| v[k])),
            fmt_g(r.channel_transmission),
            (r.low_signal as u8).to_string(),
        ]);
    }
    t
}

/// Relative curve of the DUT rescaled to the absolute result at `anchor`; NaN
/// where the rescaling is impossible.
fn rescaled_relative(sweep: &SnrSweep, results: &[CalibrationResult], anchor: i32) -> Vec<f64> {
    let nan = vec![f64::NAN; results.len()];
    let Some(at) = results.iter().find(|r| r.threshold == anchor) else {
        return nan;
    };
    match rescale_relative(&sweep.relative_qe(), anchor, at.eta_corrected) {
        Ok(c) => c.values,
        Err(_) => nan,
    }
}

pub fn calibrate(a: &CalibrateArgs) -> Result<String> {
    let thresholds = parse_thresholds(&a.threshold)?;
    let mut sorted = thresholds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != thresholds.len() {
        return Err(Error::Parse("thresholds must be distinct".into()));
    }
    let channel = OpticalChannel::single("optical channel", a.channel)?;
    let anchor = a.anchor.unwrap_or(*sorted.last().expect("non-empty thresholds"));
    if !sorted.contains(&anchor) {
        return Err(Error::Parse(format!("anchor threshold {anchor} is not among the thresholds")));
    }
    create_dir(&a.out)?;
    let baseline = baseline_from(a.baseline.as_deref().unwrap_or(&a.noise))?;
    let reference = a.reference.clone().with_label("reference");
    let mut notes = String::new();
    let dut = if a.dut.trim() == "auto" {
        let map = g2_from_file(&a.signal, &baseline, &reference, anchor)?;
        std::fs::write(a.out.join("g2_map.csv"), g2_grid(&map)).map_err(|e| Error::io(a.out.join("g2_map.csv"), e))?;
        let search = ConjugateSearch {
            g2_min: a.g2_min,
            margin: a.margin,
            halo: a.halo,
            ..ConjugateSearch::default()
        };
        let dut = find_conjugate_region(&map, &search)?;
        writeln!(notes, "DUT region located on the g2 map at threshold {anchor}: {dut}").expect("string write");
        dut
    } else {
        a.dut.parse::<Region>()?.with_label("dut")
    };
    let regions = [reference.clone(), dut.clone()];
    let collect = |path: &Path| -> Result<(PeakTrace, SweepAccumulator)> {
        with_frames(path, |g, frames| {
            check_geometry(&baseline, g, path)?;
            let mut acc = SweepAccumulator::new(&sorted)?;
            let mut err = None;
            let trace = PeakTrace::collect(
                frames.inspect(|f| {
                    if let Err(e) = acc.push(f, &baseline, &dut) {
                        err.get_or_insert(e);
                    }
                }),
                &baseline,
                &regions,
            )?;
            match err {
                Some(e) => Err(e),
                None => Ok((trace, acc)),
            }
        })
    };
    let (signal, signal_rates) = collect(&a.signal)?;
    let (noise, noise_rates) = collect(&a.noise)?;
    let calibrator = Calibrator::new(channel).with_seed(a.seed);
    let results = calibrate_traces(&signal, &noise, &sorted, &calibrator, None)?;
    let sweep = SnrSweep::from_rates(&sorted, signal_rates.rates()?, noise_rates.rates()?)?;
    let relative = rescaled_relative(&sweep, &results, anchor);
    calibration_table(&results, Some(&relative)).write(&a.out.join(QE_VS_THRESHOLD))?;

    let mut text = format!(
        "absolute calibration\nsignal file: {}\nnoise file: {}\nreference: {reference}\ndut: {dut}\nchannel transmission: {}\n{notes}\n",
        a.signal.display(),
        a.noise.display(),
        fmt_g(a.channel)
    );
    writeln!(
        text,
        "{:>9} {:>11} {:>11} {:>11} {:>11} {:>10} {:>13} {:>10}",
        "threshold", "N_Ref", "dN_n", "N_cc", "N_acc", "eta_raw", "eta_corrected", "sigma_eta"
    )
    .expect("string write");
    for r in &results {
        let s = &r.inputs;
        writeln!(
            text,
            "{:>9} {:>11} {:>11} {:>11} {:>11} {:>10} {:>13} {:>10}{}",
            r.threshold,
            fmt_g(s.n_ref),
            fmt_g(s.dn_noise),
            fmt_g(s.n_cc),
            fmt_g(s.n_acc),
            fmt_g(r.eta_raw),
            fmt_g(r.eta_corrected),
            fmt_g(r.sigma_eta),
            if r.low_signal { "  (low signal)" } else { "" }
        )
        .expect("string write");
    }
    let path = a.out.join("calibration.txt");
    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    let echo = echo_path(&a.signal);
    if echo.is_file() {
        RunConfig::load(&echo)?.echo(&a.out.join(RESOLVED_CONFIG))?;
    }
    Ok(text)
}

fn scan_out(a: &ScanArgs, cfg: &RunConfig) -> PathBuf {
    a.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.analysis.output_dir))
}

fn calibrator(cfg: &RunConfig, channel: OpticalChannel) -> Calibrator {
    Calibrator {
        blocks: cfg.analysis.bootstrap_blocks,
        resamples: cfg.analysis.bootstrap_resamples,
        ..Calibrator::new(channel).with_seed(cfg.analysis.seed)
    }
}

pub fn wavelength_table(results: &[CalibrationResult], plan_refs: &[f64], cfg: &RunConfig) -> Result<Table> {
    let sim = cfg.sim_config()?;
    let mut t = Table::new(&WAVELENGTH_HEADER);
    for (r, &ref_nm) in results.iter().zip(plan_refs) {
        let band = r.lambda_dut.expect("wavelength scan tags every result");
        let steps = 200;
        let truth = (0..=steps)
            .map(|k| sim.true_qe.at(band.lower() + (band.upper() - band.lower()) * k as f64 / steps as f64))
            .sum::<f64>()
            / (steps + 1) as f64;
        t.push(vec![
            fmt_g(ref_nm),
            fmt_g(band.center()),
            fmt_g(band.lower()),
            fmt_g(band.upper()),
            r.threshold.to_string(),
            fmt_g(r.eta_raw),
            fmt_g(r.eta_corrected),
            fmt_g(r.sigma_eta),
            fmt_g(truth),
        ]);
    }
    Ok(t)
}

pub fn scan_wavelength(a: &ScanArgs) -> Result<String> {
    let cfg = RunConfig::load(&a.config)?;
    let out = scan_out(a, &cfg);
    let sim = cfg.sim_config()?;
    let plan = cfg.wavelength_plan()?;
    let setup = ScanSetup {
        reference: cfg.reference()?,
        dut_margin: cfg.analysis.dut_margin,
        n_frames: cfg.analysis.frames,
        baseline_frames: cfg.analysis.baseline_frames,
        calibrator: calibrator(&cfg, OpticalChannel::ideal()),
    };
    let results = wavelength_scan(&plan, &sim, cfg.analysis.threshold, &setup)?;
    create_dir(&out)?;
    let refs: Vec<f64> = plan.iter().map(|(r, _)| r.center()).collect();
    let table = wavelength_table(&results, &refs, &cfg)?;
    table.write(&out.join(QE_VS_WAVELENGTH))?;
    cfg.echo(&out.join(RESOLVED_CONFIG))?;
    Ok(format!("{}\n", report::wavelength_summary(&table)?))
}

/// The `count` pixels nearest the center of the reference's conjugate area,
/// ordered by distance, excluding the reference itself.
pub fn default_uniformity_pixels(reference: &Region, g: &CameraGeometry, count: usize) -> Result<Vec<(usize, usize)>> {
    let c = conjugate_region(reference, g, 0)?.center();
    let mut px: Vec<(usize, usize)> = (0..g.height())
        .flat_map(|y| (0..g.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| !reference.contains(x, y))
        .collect();
    let d2 = |&(x, y): &(usize, usize)| {
        let (dx, dy) = (x as f64 + 0.5 - c.0, y as f64 + 0.5 - c.1);
        dx * dx + dy * dy
    };
    px.sort_by(|a, b| d2(a).total_cmp(&d2(b)).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    px.truncate(count);
    Ok(px)
}

pub fn uniformity_table(scan: &UniformityScan) -> Table {
    let mut t = Table::new(&UNIFORMITY_HEADER);
    for e in &scan.entries {
        t.push(vec![
            e.pixel.0.to_string(),
            e.pixel.1.to_string(),
            e.reference.x0().to_string(),
            e.reference.y0().to_string(),
            e.reference.width().to_string(),
            e.reference.height().to_string(),
            scan.threshold.to_string(),
            fmt_g(e.result.eta_raw),
            fmt_g(e.result.eta_corrected),
            fmt_g(e.result.sigma_eta),
            fmt_g(e.relative),
            fmt_g(e.z_score),
            (e.outlier as u8).to_string(),
        ]);
    }
    t
}

pub fn scan_uniformity(a: &ScanArgs) -> Result<String> {
    let cfg = RunConfig::load(&a.config)?;
    let out = scan_out(a, &cfg);
    let sim = cfg.sim_config()?;
    let reference = cfg.reference()?;
    let mode = match cfg.analysis.uniformity_mode.as_str() {
        "relative" => UniformityReference::Shared(reference.clone()),
        "absolute" => UniformityReference::PerPixelConjugate { margin: 0 },
        other => {
            return Err(Error::Config(format!(
                "uniformity_mode must be \"relative\" or \"absolute\", got {other:?}"
            )))
        }
    };
    let pixels: Vec<(usize, usize)> = if cfg.analysis.uniformity_pixels.is_empty() {
        default_uniformity_pixels(&reference, &sim.geometry, cfg.analysis.uniformity_count)?
    } else {
        cfg.analysis.uniformity_pixels.iter().map(|p| (p[0], p[1])).collect()
    };
    let mut channel = None;
    for &(x, y) in &pixels {
        let c = sim.dut_channel(&Region::new(x, y, 1, 1, "dut")?)?;
        if channel.as_ref().is_some_and(|k: &OpticalChannel| k.total_transmission() != c.total_transmission()) {
            return Err(Error::Config("uniformity pixels lie under filters of different transmission".into()));
        }
        channel = Some(c);
    }
    let channel = channel.unwrap_or_else(|| sim.channel.clone());
    let acq = Acquisition::new(&sim, cfg.analysis.frames, cfg.analysis.baseline_frames)?;
    let scan = acq.uniformity(cfg.analysis.threshold, &mode, &pixels, &calibrator(&cfg, channel))?;
    create_dir(&out)?;
    let table = uniformity_table(&scan);
    table.write(&out.join(UNIFORMITY))?;
    cfg.echo(&out.join(RESOLVED_CONFIG))?;
    Ok(format!("{}\n", report::uniformity_summary(&table)?))
}
