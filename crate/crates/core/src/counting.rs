//! Photodetection of weak coherent pulses and time-binned event histograms.
//!
//! Coherent light gives Poissonian counts, so a trial is fully described by
//! the per-bin mean counts. Sampling draws the total number of clicks in a
//! channel from a Poisson law and assigns each click to a bin with
//! probability proportional to the bin mean, which has the same joint law
//! as independent Poisson draws per bin but costs one draw per trial at the
//! sub-photon means of interest.
//!
//! Every `(trial, channel)` pair owns its own ChaCha stream derived from the
//! master seed, and trials are reduced by integer addition in fixed chunks,
//! so histograms do not depend on scheduling or worker count.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Detector and timing parameters shared by both channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub quantum_efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Histogram bin width in s.
    pub bin_width: f64,
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(Error::InvalidArgument("quantum efficiency must lie in [0, 1]".into()));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::InvalidArgument("dark rate must be non-negative".into()));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::InvalidArgument("bin width must be positive".into()));
        }
        Ok(())
    }
}

/// Photon flux `μ(t)` in photons/s sampled at `t0 + n·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrace {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl IntensityTrace {
    pub fn photons(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt
    }
}

/// Mean counts per bin: `QE·∫_bin μ dt + dark·bin_width`. Bins start at
/// `trace.t0`; the bin width must be a whole number of trace steps.
pub fn expected_counts(trace: &IntensityTrace, det: &DetectorParams) -> Result<Vec<f64>> {
    det.validate()?;
    if let Some(v) = trace.values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "intensity must be finite and non-negative, got {v}"
        )));
    }
    let per_bin = det.bin_width / trace.dt;
    let k = per_bin.round();
    if k < 1.0 || (per_bin - k).abs() > 1e-6 * k {
        return Err(Error::InvalidArgument(format!(
            "bin width {} s is not a multiple of the trace step {} s",
            det.bin_width, trace.dt
        )));
    }
    let k = k as usize;
    Ok(trace
        .values
        .chunks(k)
        .map(|c| det.quantum_efficiency * c.iter().sum::<f64>() * trace.dt + det.dark_rate * det.bin_width)
        .collect())
}

/// Pre-built sampler for one channel's per-trial counts.
#[derive(Debug, Clone)]
pub struct TrialSampler {
    n_bins: usize,
    total: Option<Poisson<f64>>,
    index: Option<WeightedIndex<f64>>,
}

impl TrialSampler {
    pub fn new(means: &[f64]) -> Result<Self> {
        if means.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(
                "bin means must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = means.iter().sum();
        if sum == 0.0 {
            return Ok(Self {
                n_bins: means.len(),
                total: None,
                index: None,
            });
        }
        let total = Poisson::new(sum).map_err(|e| Error::Numerical(format!("Poisson mean {sum}: {e}")))?;
        let index = WeightedIndex::new(means).map_err(|e| Error::Numerical(format!("bin weights: {e}")))?;
        Ok(Self {
            n_bins: means.len(),
            total: Some(total),
            index: Some(index),
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Adds one trial's counts into `bins`.
    pub fn sample_into(&self, rng: &mut ChaCha8Rng, bins: &mut [u64]) {
        let (Some(total), Some(index)) = (&self.total, &self.index) else {
            return;
        };
        let n = total.sample(rng) as u64;
        for _ in 0..n {
            bins[index.sample(rng)] += 1;
        }
    }
}

/// Counts of one trial drawn from `means` with the given stream.
pub fn sample_trial(means: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    let s = TrialSampler::new(means)?;
    let mut bins = vec![0; means.len()];
    s.sample_into(rng, &mut bins);
    Ok(bins)
}

/// The random stream owned by `(trial, channel)`.
pub fn trial_stream(master_seed: u64, trial: u64, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial * 2 + channel as u64);
    rng
}

/// Channel index 0 is the path matched to `l = +1`, index 1 to `l = −1`.
pub const CHANNEL_LABELS: [i32; 2] = [1, -1];

/// Two-channel event histogram accumulated over `trials` repetitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountHistogram {
    /// Start time of bin 0 in ns.
    pub t0_ns: i64,
    pub bin_width_ns: u64,
    pub trials: u64,
    pub counts: [Vec<u64>; 2],
}

impl CountHistogram {
    pub fn empty(t0: f64, bin_width: f64, n_bins: usize) -> Self {
        Self {
            t0_ns: (t0 * 1e9).round() as i64,
            bin_width_ns: (bin_width * 1e9).round() as u64,
            trials: 0,
            counts: [vec![0; n_bins], vec![0; n_bins]],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts[0].len()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width_ns as f64 * 1e-9
    }

    /// Start of bin `k` in s.
    pub fn bin_start(&self, k: usize) -> f64 {
        (self.t0_ns + (k as u64 * self.bin_width_ns) as i64) as f64 * 1e-9
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) + 0.5 * self.bin_width()
    }

    pub fn total(&self, channel: usize) -> u64 {
        self.counts[channel].iter().sum()
    }

    /// Counts in bins whose centre lies in `[start, end]`.
    pub fn window_sum(&self, channel: usize, window: (f64, f64)) -> u64 {
        self.counts[channel]
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let c = self.bin_center(*k);
                c >= window.0 && c <= window.1
            })
            .map(|(_, n)| n)
            .sum()
    }

    fn check_layout(&self, other: &Self) -> Result<()> {
        if self.bin_width_ns != other.bin_width_ns || self.t0_ns != other.t0_ns || self.n_bins() != other.n_bins() {
            return Err(Error::LayoutMismatch(format!(
                "({} ns, {} ns, {} bins) vs ({} ns, {} ns, {} bins)",
                self.t0_ns,
                self.bin_width_ns,
                self.n_bins(),
                other.t0_ns,
                other.bin_width_ns,
                other.n_bins()
            )));
        }
        Ok(())
    }

    /// Merges coarser bins by summing groups of `factor`; a trailing partial
    /// group becomes a full-width bin.
    pub fn rebin(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("rebin factor must be positive".into()));
        }
        let merge = |v: &Vec<u64>| v.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(Self {
            t0_ns: self.t0_ns,
            bin_width_ns: self.bin_width_ns * factor as u64,
            trials: self.trials,
            counts: [merge(&self.counts[0]), merge(&self.counts[1])],
        })
    }
}

/// Elementwise sum of histograms with identical layout; trials add.
pub fn accumulate(first: &CountHistogram, rest: &[&CountHistogram]) -> Result<CountHistogram> {
    let mut out = first.clone();
    for h in rest {
        out.check_layout(h)?;
        out.trials += h.trials;
        for ch in 0..2 {
            for (a, b) in out.counts[ch].iter_mut().zip(&h.counts[ch]) {
                *a += *b;
            }
        }
    }
    Ok(out)
}

const CHUNK: u64 = 4096;

/// Runs `trials` independent trials of both channels in parallel on the
/// current rayon pool. The result is a pure function of the inputs.
pub fn simulate(means: [&[f64]; 2], t0: f64, bin_width: f64, trials: u64, master_seed: u64) -> Result<CountHistogram> {
    if means[0].len() != means[1].len() {
        return Err(Error::LayoutMismatch("channels have different bin counts".into()));
    }
    let samplers = [TrialSampler::new(means[0])?, TrialSampler::new(means[1])?];
    let n_bins = means[0].len();
    let base = ChaCha8Rng::seed_from_u64(master_seed);
    let chunks = trials.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut bins = [vec![0u64; n_bins], vec![0u64; n_bins]];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                for (ch, s) in samplers.iter().enumerate() {
                    let mut rng = base.clone();
                    rng.set_stream(trial * 2 + ch as u64);
                    rng.set_word_pos(0);
                    s.sample_into(&mut rng, &mut bins[ch]);
                }
            }
            bins
        })
        .reduce(
            || [vec![0u64; n_bins], vec![0u64; n_bins]],
            |mut a, b| {
                for ch in 0..2 {
                    for (x, y) in a[ch].iter_mut().zip(&b[ch]) {
                        *x += *y;
                    }
                }
                a
            },
        );
    let mut h = CountHistogram::empty(t0, bin_width, n_bins);
    h.trials = trials;
    h.counts = counts;
    Ok(h)
}
