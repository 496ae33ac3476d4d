use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;

use super::rng::{CounterRng, Purpose};
use super::{PairEvent, SimConfig};
use crate::error::Result;
use crate::frame::{RawFrame, ADU_MAX};

const NO_FILTER: u8 = u8::MAX;
const CHUNK: u64 = 64;

/// Origin of a charge deposit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepositKind {
    Photon,
    Stray,
    Dark,
}

/// One amplitude draw deposited on the chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deposit {
    pub pos: (f64, f64),
    pub amplitude: f64,
    pub kind: DepositKind,
}

/// Every amplitude drawn while rendering a frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderTrace {
    pub deposits: Vec<Deposit>,
}

impl RenderTrace {
    pub fn total_amplitude(&self) -> f64 {
        self.deposits.iter().map(|d| d.amplitude).sum()
    }

    pub fn count(&self, kind: DepositKind) -> usize {
        self.deposits.iter().filter(|d| d.kind == kind).count()
    }
}

#[derive(Debug, Clone)]
struct Streams {
    pairs: CounterRng,
    transport: CounterRng,
    stray: CounterRng,
    dark: CounterRng,
    readout: CounterRng,
}

/// Validated configuration plus precomputed per-pixel lookups.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    baseline: Vec<u16>,
    filter_of: Vec<u8>,
    qe_scale: Option<Vec<f64>>,
    streams: Streams,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.geometry;
        let n = g.pixel_count();

        let (lo, hi) = config.baseline_range;
        let mut rng = CounterRng::new(config.seed, Purpose::Baseline, 0).at(0);
        let baseline = (0..n).map(|_| rng.random_range(lo..=hi)).collect();

        let mut filter_of = vec![NO_FILTER; n];
        for (k, f) in config.filters.iter().enumerate().take(NO_FILTER as usize).rev() {
            for i in f.region.indices(g) {
                filter_of[i] = k as u8;
            }
        }

        let qe_scale = (!config.qe_defects.is_empty()).then(|| {
            let mut s = vec![1.0; n];
            for d in &config.qe_defects {
                s[g.index(d.x, d.y)] *= d.factor;
            }
            s
        });

        let run = config.pump_on as u64;
        let seed = config.seed;
        let streams = Streams {
            pairs: CounterRng::new(seed, Purpose::Pairs, 0),
            transport: CounterRng::new(seed, Purpose::Transport, run),
            stray: CounterRng::new(seed, Purpose::Stray, run),
            dark: CounterRng::new(seed, Purpose::Dark, run),
            readout: CounterRng::new(seed, Purpose::Readout, run),
        };
        Ok(Simulator {
            config,
            baseline,
            filter_of,
            qe_scale,
            streams,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Static per-pixel baseline (ADU), row-major.
    pub fn baseline(&self) -> &[u16] {
        &self.baseline
    }

    pub fn sample_pair_events(&self, frame_index: u64) -> Vec<PairEvent> {
        let c = &self.config;
        if !c.pump_on || c.pair_rate <= 0.0 {
            return Vec::new();
        }
        let mut rng = self.streams.pairs.at(frame_index);
        let n = poisson(&mut rng, c.pair_rate);
        let (bx, by) = c.geometry.beam_center();
        let (lo, hi) = (c.spdc_band.lower(), c.spdc_band.upper());
        let mut events = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let signal_lambda = lo + (hi - lo) * rng.random::<f64>();
            let sx = bx + c.beam_profile_sigma * normal(&mut rng);
            let sy = by + c.beam_profile_sigma * normal(&mut rng);
            let jx = c.corr_jitter_sigma * normal(&mut rng);
            let jy = c.corr_jitter_sigma * normal(&mut rng);
            let ev = PairEvent::from_signal(&c.geometry, c.lambda_pump, (sx, sy), signal_lambda, (jx, jy))
                .expect("validated band lies above the pump");
            events.push(ev);
        }
        events
    }

    pub fn render_frame(&self, events: &[PairEvent], frame_index: u64) -> RawFrame {
        self.render(events, frame_index, None)
    }

    /// Render and also return every amplitude draw.
    pub fn render_with_trace(&self, events: &[PairEvent], frame_index: u64) -> (RawFrame, RenderTrace) {
        let mut trace = RenderTrace::default();
        let frame = self.render(events, frame_index, Some(&mut trace.deposits));
        (frame, trace)
    }

    /// Full gate: pairs sampled and rendered.
    pub fn frame(&self, frame_index: u64) -> RawFrame {
        let events = self.sample_pair_events(frame_index);
        self.render_frame(&events, frame_index)
    }

    /// Apply `f` to frames `start..start + n` in parallel, preserving order.
    pub fn par_map<T, F>(&self, start: u64, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(RawFrame) -> T + Sync + Send,
    {
        (start..start + n).into_par_iter().map(|i| f(self.frame(i))).collect()
    }

    fn render(&self, events: &[PairEvent], frame_index: u64, mut trace: Option<&mut Vec<Deposit>>) -> RawFrame {
        let c = &self.config;
        let g = &c.geometry;
        let n = g.pixel_count();
        let mut charge = vec![0.0f64; n];
        let (w, h) = (g.width() as f64, g.height() as f64);

        if !events.is_empty() {
            let mut rng = self.streams.transport.at(frame_index);
            let t_channel = c.channel.total_transmission();
            for ev in events {
                for (pos, lambda) in [(ev.signal_pos, ev.signal_lambda), (ev.idler_pos, ev.idler_lambda)] {
                    let Some((px, py)) = g.pixel_at(pos) else { continue };
                    let idx = g.index(px, py);
                    let fi = self.filter_of[idx];
                    if fi == NO_FILTER {
                        continue;
                    }
                    let band = &c.filters[fi as usize].band;
                    if !band.contains(lambda) {
                        continue;
                    }
                    let scale = self.qe_scale.as_ref().map_or(1.0, |s| s[idx]);
                    let p_detect = band.transmission() * t_channel * c.true_qe.at(lambda) * scale;
                    if rng.random::<f64>() >= p_detect {
                        continue;
                    }
                    let amplitude = c.signal_amp_mean * exp1(&mut rng);
                    self.deposit(&mut charge, pos, amplitude);
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(Deposit {
                            pos,
                            amplitude,
                            kind: DepositKind::Photon,
                        });
                    }
                }
            }
        }

        let background = [
            (&self.streams.stray, c.stray_light_rate, c.signal_amp_mean, DepositKind::Stray),
            (&self.streams.dark, c.dark_event_rate, c.noise_amp_mean, DepositKind::Dark),
        ];
        for (stream, rate, mean, kind) in background {
            if rate <= 0.0 {
                continue;
            }
            let mut rng = stream.at(frame_index);
            let count = poisson(&mut rng, rate * n as f64);
            for _ in 0..count {
                let pos = (w * rng.random::<f64>(), h * rng.random::<f64>());
                let amplitude = mean * exp1(&mut rng);
                self.deposit(&mut charge, pos, amplitude);
                if let Some(t) = trace.as_deref_mut() {
                    t.push(Deposit { pos, amplitude, kind });
                }
            }
        }

        let sigma = c.readout_noise_sigma;
        let values = if sigma > 0.0 {
            let mut rng = self.streams.readout.at(frame_index);
            self.baseline
                .iter()
                .zip(&charge)
                .map(|(&b, &q)| to_adu(b as f64 + q + sigma * normal(&mut rng)))
                .collect()
        } else {
            self.baseline
                .iter()
                .zip(&charge)
                .map(|(&b, &q)| if q == 0.0 { b } else { to_adu(b as f64 + q) })
                .collect()
        };
        RawFrame {
            geometry: g.clone(),
            values,
            frame_index,
        }
    }

    /// Spread `amplitude` over neighbouring pixels as a pixel-integrated Gaussian.
    /// The kernel is normalized over its truncation window; charge falling off the
    /// chip is lost.
    fn deposit(&self, charge: &mut [f64], pos: (f64, f64), amplitude: f64) {
        let g = &self.config.geometry;
        let sigma = self.config.splat_sigma;
        if sigma < 1e-6 {
            if let Some((x, y)) = g.pixel_at(pos) {
                charge[g.index(x, y)] += amplitude;
            }
            return;
        }
        let radius = (4.0 * sigma).ceil() as i64;
        let cx = pos.0.floor() as i64;
        let cy = pos.1.floor() as i64;
        let span = (2 * radius + 1) as usize;
        let mut fx = [0.0f64; 64];
        let mut fy = [0.0f64; 64];
        let span = span.min(fx.len());
        let cell = |center: i64, p: f64, k: usize| {
            let a = (center - radius + k as i64) as f64;
            phi((a + 1.0 - p) / sigma) - phi((a - p) / sigma)
        };
        let mut sx = 0.0;
        let mut sy = 0.0;
        for k in 0..span {
            fx[k] = cell(cx, pos.0, k);
            fy[k] = cell(cy, pos.1, k);
            sx += fx[k];
            sy += fy[k];
        }
        let norm = amplitude / (sx * sy);
        let (w, h) = (g.width() as i64, g.height() as i64);
        for (ky, &wy) in fy[..span].iter().enumerate() {
            let y = cy - radius + ky as i64;
            if y < 0 || y >= h || wy == 0.0 {
                continue;
            }
            let row = y as usize * g.width();
            for (kx, &wx) in fx[..span].iter().enumerate() {
                let x = cx - radius + kx as i64;
                if x < 0 || x >= w {
                    continue;
                }
                charge[row + x as usize] += norm * wx * wy;
            }
        }
    }
}

#[inline]
fn to_adu(v: f64) -> u16 {
    v.round().clamp(0.0, ADU_MAX as f64) as u16
}

#[inline]
fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    Exp1.sample(rng)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    let k: f64 = d.sample(rng);
    k as u64
}

/// Ordered stream of simulated frames `0..n`, generated in parallel chunks.
pub struct FrameStream {
    sim: Arc<Simulator>,
    next: u64,
    end: u64,
    buffer: VecDeque<RawFrame>,
}

impl FrameStream {
    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }
}

impl Iterator for FrameStream {
    type Item = RawFrame;

    fn next(&mut self) -> Option<RawFrame> {
        if self.buffer.is_empty() && self.next < self.end {
            let stop = (self.next + CHUNK).min(self.end);
            let sim = &self.sim;
            let chunk: Vec<RawFrame> = (self.next..stop).into_par_iter().map(|i| sim.frame(i)).collect();
            self.buffer.extend(chunk);
            self.next = stop;
        }
        self.buffer.pop_front()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.buffer.len() + (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for FrameStream {}

/// Frames `0..n_frames` of an acquisition.
pub fn simulate_run(config: &SimConfig, n_frames: u64) -> Result<FrameStream> {
    if n_frames == 0 {
        return Err(crate::error::Error::Config("n_frames must be >= 1".into()));
    }
    Ok(FrameStream {
        sim: Arc::new(Simulator::new(config.clone())?),
        next: 0,
        end: n_frames,
        buffer: VecDeque::new(),
    })
}
