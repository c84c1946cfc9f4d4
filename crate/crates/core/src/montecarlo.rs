//! Seeded simulation of the three-stage chain through ideal test channels.
//!
//! Randomness is counter based: each normal variate is addressed by
//! `(seed, channel, sample_index)` through a ChaCha8 keystream, so any split
//! of the sample range into chunks reproduces the same draws. Per-chunk sums
//! are merged in chunk order, which keeps results bit-identical no matter
//! how chunks are scheduled.

use alloc::vec::Vec;
use core::ops::Range;

use libm::{cos, log, sin, sqrt};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::rd::{plan_schedule, DistortionSchedule, SchedulePlan, SourceModel};

/// Samples per independently seekable chunk.
pub const CHUNK_SIZE: u64 = 1 << 14;

/// 32-bit keystream words consumed per sample per channel (two `u64`).
const WORDS_PER_SAMPLE: u128 = 4;

/// Keystream identifiers. The source pair uses both Box-Muller outputs;
/// each test channel uses the first.
pub mod channel {
    pub const SOURCE: u64 = 0;
    pub const STAGE1: u64 = 1;
    pub const STAGE2: u64 = 2;
    pub const STAGE3: u64 = 3;
}

/// Standard normal pairs keyed by `(seed, channel, index)`.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, channel: u64, start_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(channel);
        rng.set_word_pos(start_index as u128 * WORDS_PER_SAMPLE);
        NormalStream { rng }
    }

    /// Box-Muller pair for the next index.
    #[inline]
    pub fn next_pair(&mut self) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let r = sqrt(-2.0 * log(u1));
        let theta = core::f64::consts::TAU * u2;
        (r * cos(theta), r * sin(theta))
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.next_pair().0
    }
}

/// Iterator over `(x, y)` draws from the source for a range of sample
/// indices: `x = g1`, `y = rho g1 + sqrt(1 - rho^2) g2`.
#[derive(Debug, Clone)]
pub struct SourceSamples {
    stream: NormalStream,
    rho: f64,
    tail: f64,
    remaining: u64,
}

impl SourceSamples {
    pub fn range(model: &SourceModel, seed: u64, indices: Range<u64>) -> Self {
        let rho = model.rho();
        SourceSamples {
            stream: NormalStream::new(seed, channel::SOURCE, indices.start),
            rho,
            tail: sqrt(1.0 - rho * rho),
            remaining: indices.end.saturating_sub(indices.start),
        }
    }
}

impl Iterator for SourceSamples {
    type Item = (f64, f64);

    #[inline]
    fn next(&mut self) -> Option<(f64, f64)> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let (g1, g2) = self.stream.next_pair();
        Some((g1, self.rho * g1 + self.tail * g2))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, Some(n))
    }
}

impl ExactSizeIterator for SourceSamples {}

/// The first `n` source draws for `seed`.
pub fn sample_sources(model: &SourceModel, n: u64, seed: u64) -> SourceSamples {
    SourceSamples::range(model, seed, 0..n)
}

/// Forward MMSE test channel `out = (1 - D/s) in + W`,
/// `W ~ N(0, D (1 - D/s))`, for an input of variance `s`. Jointly with a
/// Gaussian input its backward law is `in | out ~ N(out, D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestChannel {
    scale: f64,
    noise_std: f64,
}

impl TestChannel {
    pub fn new(input_variance: f64, target_distortion: f64) -> Result<Self> {
        if !(input_variance.is_finite() && input_variance > 0.0) {
            return Err(Error::domain(
                "input_variance",
                input_variance,
                "finite and > 0",
            ));
        }
        if !(target_distortion.is_finite() && target_distortion > 0.0) {
            return Err(Error::domain(
                "target_distortion",
                target_distortion,
                "finite and > 0",
            ));
        }
        if target_distortion > input_variance * (1.0 + crate::rd::BOUNDARY_SLACK) {
            return Err(Error::domain(
                "target_distortion",
                target_distortion,
                "<= input variance",
            ));
        }
        let scale = (1.0 - target_distortion / input_variance).max(0.0);
        Ok(TestChannel {
            scale,
            noise_std: sqrt(target_distortion * scale),
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_std * self.noise_std
    }

    /// `noise` is a standard normal draw.
    #[inline]
    pub fn transmit(&self, input: f64, noise: f64) -> f64 {
        self.scale * input + self.noise_std * noise
    }
}

/// Passes `values` through a test channel, drawing the noise for element
/// `k` from `(seed, channel, k)`.
pub fn apply_test_channel(
    values: &[f64],
    input_variance: f64,
    target_distortion: f64,
    seed: u64,
    channel: u64,
) -> Result<Vec<f64>> {
    let ch = TestChannel::new(input_variance, target_distortion)?;
    let mut noise = NormalStream::new(seed, channel, 0);
    Ok(values
        .iter()
        .map(|&v| ch.transmit(v, noise.next_normal()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub model: SourceModel,
    pub schedule: DistortionSchedule,
    pub n_samples: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        model: SourceModel,
        schedule: DistortionSchedule,
        n_samples: u64,
        seed: u64,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::domain("n_samples", 0.0, ">= 1"));
        }
        plan_schedule(&model, &schedule)?;
        Ok(SimConfig {
            model,
            schedule,
            n_samples,
            seed,
        })
    }

    /// Chunk index ranges covering `0..n_samples`.
    pub fn chunks(&self) -> impl Iterator<Item = Range<u64>> {
        let n = self.n_samples;
        (0..n.div_ceil(CHUNK_SIZE)).map(move |c| c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(n))
    }
}

/// Order of the six distortions in [`SimResult`].
pub const DISTORTION_LABELS: [&str; 6] = ["d_x1", "d_y1", "d_x2", "d_y2", "d_x3", "d_y3"];

/// Running sums over a block of samples, for each of the six
/// (error, reconstruction) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimAccumulator {
    n: u64,
    sq: [f64; 6],
    sq_sq: [f64; 6],
    cross: [f64; 6],
    cross_sq: [f64; 6],
}

impl SimAccumulator {
    #[inline]
    fn push(&mut self, pairs: [(f64, f64); 6]) {
        self.n += 1;
        for (k, (err, rec)) in pairs.into_iter().enumerate() {
            let e2 = err * err;
            let c = err * rec;
            self.sq[k] += e2;
            self.sq_sq[k] += e2 * e2;
            self.cross[k] += c;
            self.cross_sq[k] += c * c;
        }
    }

    pub fn merge(&mut self, other: &SimAccumulator) {
        self.n += other.n;
        for k in 0..6 {
            self.sq[k] += other.sq[k];
            self.sq_sq[k] += other.sq_sq[k];
            self.cross[k] += other.cross[k];
            self.cross_sq[k] += other.cross_sq[k];
        }
    }

    pub fn samples(&self) -> u64 {
        self.n
    }
}

fn mean_and_std_err(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - sum * mean) / (nf - 1.0)).max(0.0);
    (mean, sqrt(var / nf))
}

/// Runs samples `indices` of the chain described by `plan`.
pub fn simulate_chunk(
    config: &SimConfig,
    plan: &SchedulePlan,
    indices: Range<u64>,
) -> Result<SimAccumulator> {
    let s = &config.schedule;
    let ch1 = TestChannel::new(1.0, s.d_x1)?;
    let ch2 = TestChannel::new(plan.sigma1_sq(), s.d_y2)?;
    let ch3 = TestChannel::new(plan.sigma2_sq(), s.d_x3)?;
    let [p1, p2, p3] = [
        plan.stages[0].posterior,
        plan.stages[1].posterior,
        plan.stages[2].posterior,
    ];

    let mut w1 = NormalStream::new(config.seed, channel::STAGE1, indices.start);
    let mut w2 = NormalStream::new(config.seed, channel::STAGE2, indices.start);
    let mut w3 = NormalStream::new(config.seed, channel::STAGE3, indices.start);

    let mut acc = SimAccumulator::default();
    for (x, y) in SourceSamples::range(&config.model, config.seed, indices) {
        let x1 = ch1.transmit(x, w1.next_normal());
        let y1 = p1.mean(x1, 0.0, 0.0);
        let y2 = y1 + ch2.transmit(y - y1, w2.next_normal());
        let x2 = p2.mean(x1, y2, 0.0);
        let x3 = x2 + ch3.transmit(x - x2, w3.next_normal());
        let y3 = p3.mean(x1, y2, x3);
        acc.push([
            (x - x1, x1),
            (y - y1, y1),
            (x - x2, x2),
            (y - y2, y2),
            (x - x3, x3),
            (y - y3, y3),
        ]);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Empirical mean squared errors, ordered as [`DISTORTION_LABELS`].
    pub empirical: [f64; 6],
    pub std_err: [f64; 6],
    pub analytic: [f64; 6],
    /// Empirical `E[(source - reconstruction) * reconstruction]`.
    pub orthogonality: [f64; 6],
    pub orthogonality_std_err: [f64; 6],
    pub n_samples: u64,
    pub seed: u64,
}

impl SimResult {
    pub fn from_accumulator(config: &SimConfig, plan: &SchedulePlan, acc: &SimAccumulator) -> Self {
        let mut r = SimResult {
            empirical: [0.0; 6],
            std_err: [0.0; 6],
            analytic: [0.0; 6],
            orthogonality: [0.0; 6],
            orthogonality_std_err: [0.0; 6],
            n_samples: acc.n,
            seed: config.seed,
        };
        for (k, (dx, dy)) in plan.distortion_pairs().into_iter().enumerate() {
            r.analytic[2 * k] = dx;
            r.analytic[2 * k + 1] = dy;
        }
        for k in 0..6 {
            (r.empirical[k], r.std_err[k]) = mean_and_std_err(acc.sq[k], acc.sq_sq[k], acc.n);
            (r.orthogonality[k], r.orthogonality_std_err[k]) =
                mean_and_std_err(acc.cross[k], acc.cross_sq[k], acc.n);
        }
        r
    }

    /// `(empirical - analytic) / std_err`.
    pub fn z_scores(&self) -> [f64; 6] {
        core::array::from_fn(|k| (self.empirical[k] - self.analytic[k]) / self.std_err[k])
    }

    /// Whether each empirical distortion is within `k` standard errors of its
    /// analytic value. A zero standard error demands exact agreement up to
    /// rounding.
    pub fn within(&self, k: f64) -> [bool; 6] {
        core::array::from_fn(|i| {
            let gap = (self.empirical[i] - self.analytic[i]).abs();
            gap <= k * self.std_err[i] || gap <= 1e-12
        })
    }

    pub fn all_within(&self, k: f64) -> bool {
        self.within(k).iter().all(|b| *b)
    }

    pub fn orthogonality_within(&self, k: f64) -> [bool; 6] {
        core::array::from_fn(|i| {
            self.orthogonality[i].abs() <= k * self.orthogonality_std_err[i]
                || self.orthogonality[i].abs() <= 1e-12
        })
    }
}

/// Single-threaded simulation, merging chunks in order.
pub fn simulate_schedule(config: &SimConfig) -> Result<SimResult> {
    let plan = plan_schedule(&config.model, &config.schedule)?;
    let mut acc = SimAccumulator::default();
    for range in config.chunks() {
        acc.merge(&simulate_chunk(config, &plan, range)?);
    }
    Ok(SimResult::from_accumulator(config, &plan, &acc))
}
