//! Block-bootstrap uncertainty of the full estimator.

use rand::Rng;

use super::{klyshko_qe, CalibrationResult, ClickTrace, CoincidenceStats};
use crate::error::{Error, Result};
use crate::optics::{OpticalChannel, WavelengthBand};
use crate::sim::rng::{CounterRng, Purpose};

/// Integer sufficient statistics of one contiguous block of frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockStats {
    pub frames: u64,
    pub refs: u64,
    pub coincidences: u64,
    pub shifted_hits: u64,
    pub shifted_pairs: u64,
}

impl BlockStats {
    fn add(&mut self, o: &BlockStats) {
        self.frames += o.frames;
        self.refs += o.refs;
        self.coincidences += o.coincidences;
        self.shifted_hits += o.shifted_hits;
        self.shifted_pairs += o.shifted_pairs;
    }
}

fn blocks(trace: &ClickTrace, n_blocks: usize, lag: usize) -> Vec<BlockStats> {
    let n = trace.len();
    let b = n_blocks.clamp(1, n.max(1));
    (0..b)
        .map(|k| {
            let (lo, hi) = (k * n / b, (k + 1) * n / b);
            let mut s = BlockStats {
                frames: (hi - lo) as u64,
                ..Default::default()
            };
            for i in lo..hi {
                let r = trace.reference[i];
                s.refs += r as u64;
                s.coincidences += (r && trace.dut[i]) as u64;
                if i + lag < n {
                    s.shifted_pairs += 1;
                    s.shifted_hits += (r && trace.dut[i + lag]) as u64;
                }
            }
            s
        })
        .collect()
}

/// Estimator configuration: optical channel, accidental lag and bootstrap layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrator {
    pub channel: OpticalChannel,
    pub lag: usize,
    pub blocks: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Calibrator {
    pub fn new(channel: OpticalChannel) -> Self {
        Calibrator {
            channel,
            lag: 1,
            blocks: 100,
            resamples: 400,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_channel(&self, channel: OpticalChannel) -> Self {
        Calibrator {
            channel,
            ..self.clone()
        }
    }

    /// Point estimate from the traces and a block-bootstrap `sigma_eta`.
    pub fn calibrate(
        &self,
        signal: &ClickTrace,
        noise: &ClickTrace,
        threshold: i32,
        lambda_dut: Option<WavelengthBand>,
    ) -> Result<CalibrationResult> {
        let stats = CoincidenceStats::from_traces(signal, noise, self.lag)?;
        let mut result = klyshko_qe(&stats, &self.channel, threshold, lambda_dut)?;
        result.sigma_eta = self.bootstrap_sigma(signal, noise)?;
        Ok(result)
    }

    /// Standard deviation of the channel-corrected estimate over resamples of
    /// contiguous frame blocks, drawn independently from both runs.
    pub fn bootstrap_sigma(&self, signal: &ClickTrace, noise: &ClickTrace) -> Result<f64> {
        let sb = blocks(signal, self.blocks, self.lag);
        let nb = blocks(noise, self.blocks, 0);
        let t = self.channel.total_transmission();
        let mut rng = CounterRng::new(self.seed, Purpose::Bootstrap, 0).at(0);
        let mut etas = Vec::with_capacity(self.resamples);
        for _ in 0..self.resamples {
            let mut s = BlockStats::default();
            for _ in 0..sb.len() {
                s.add(&sb[rng.random_range(0..sb.len())]);
            }
            let mut z = BlockStats::default();
            for _ in 0..nb.len() {
                z.add(&nb[rng.random_range(0..nb.len())]);
            }
            if s.frames == 0 || z.frames == 0 || s.shifted_pairs == 0 {
                continue;
            }
            let denom = s.refs as f64 / s.frames as f64 - z.refs as f64 / z.frames as f64;
            if denom <= 0.0 {
                continue;
            }
            let num = s.coincidences as f64 / s.frames as f64 - s.shifted_hits as f64 / s.shifted_pairs as f64;
            etas.push(num / denom / t);
        }
        if etas.len() < 2 || etas.len() * 2 < self.resamples {
            return Err(Error::Statistics(format!(
                "only {} of {} bootstrap resamples had net reference signal",
                etas.len(),
                self.resamples
            )));
        }
        let m = etas.iter().sum::<f64>() / etas.len() as f64;
        let var = etas.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (etas.len() - 1) as f64;
        Ok(var.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn heralded(n: usize, p_ref: f64, eta: f64, p_bg: f64, seed: u64) -> ClickTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = ClickTrace::default();
        for _ in 0..n {
            let pair = rng.random::<f64>() < p_ref;
            t.reference.push(pair);
            t.dut.push((pair && rng.random::<f64>() < eta) || rng.random::<f64>() < p_bg);
        }
        t
    }

    #[test]
    fn block_totals_match_trace() {
        let t = heralded(1013, 0.2, 0.5, 0.1, 1);
        let b = blocks(&t, 100, 1);
        let mut tot = BlockStats::default();
        b.iter().for_each(|s| tot.add(s));
        assert_eq!(tot.frames, 1013);
        assert_eq!(tot.refs, t.ref_count());
        assert_eq!(tot.coincidences, t.coincidence_count());
        assert_eq!((tot.shifted_hits, tot.shifted_pairs), t.shifted_count(1));
    }

    #[test]
    fn bootstrap_agrees_with_binomial_scale() {
        let n = 50_000;
        let signal = heralded(n, 0.05, 0.3, 0.01, 2);
        let noise = ClickTrace::new(vec![false; n], vec![false; n]).unwrap();
        let cal = Calibrator::new(OpticalChannel::ideal());
        let r = cal.calibrate(&signal, &noise, 0, None).unwrap();
        // Binomial heralding error: sqrt(eta (1 - eta) / (N p_ref)).
        let expect = (0.3 * 0.7 / (n as f64 * 0.05)).sqrt();
        assert!(r.sigma_eta > 0.7 * expect && r.sigma_eta < 1.3 * expect, "{} vs {expect}", r.sigma_eta);
        assert!(r.sigma_eta_analytic > 0.7 * expect && r.sigma_eta_analytic < 1.3 * expect);
        // At most one pair per frame: the shifted-frame floor also removes the
        // heralded fraction p_ref of DUT singles, and background masks (1 - p_bg).
        assert!((r.eta_corrected - 0.3 * 0.95 * 0.99).abs() < 3.0 * r.sigma_eta);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let s = heralded(5_000, 0.1, 0.4, 0.02, 3);
        let z = heralded(5_000, 0.01, 0.0, 0.0, 4);
        let cal = Calibrator::new(OpticalChannel::ideal()).with_seed(9);
        assert_eq!(cal.bootstrap_sigma(&s, &z).unwrap(), cal.bootstrap_sigma(&s, &z).unwrap());
    }
}
