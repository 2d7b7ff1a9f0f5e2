//! Deterministic synthetic multichannel scenes and the SNR/SDR metric suite.
//!
//! A scene is built from three exactly additive stems: a moving target
//! spatialized over a circular array with far-field fractional delays, a set
//! of directional "motor state" noises with per-state spectral shaping,
//! amplitude modulation and smooth state switching, and a small independent
//! per-channel noise floor. The noise stem is normalized to unit RMS on
//! channel 0 and the target is scaled to hit the requested input SNR there,
//! so calibration and test realizations of the same states share one
//! absolute scale.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::MultichannelAudio;
use crate::dictionary::NoiseDictionary;
use crate::enhancer::{apply_weights_stream, enhance_stream_detailed, EnhancerConfig, SegmentReport};
use crate::error::{Error, Result};
use crate::scalar::{fromf, Scalar};

const SPEED_OF_SOUND: f64 = 343.0;
/// Base delay (samples) that keeps fractional-delay reads causal.
const BASE_DELAY: f64 = 32.0;
const KERNEL_HALF: isize = 16;
const RING: usize = 64;
/// Raised-cosine state crossfade length in seconds.
const CROSSFADE_S: f64 = 0.05;
/// Metric sentinel cap in dB.
pub const DB_CAP: f64 = 120.0;

/// Target source material; components of a scene's target are summed with
/// equal RMS.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSource {
    /// Silent target (noise-only scene, e.g. for calibration recordings).
    None,
    /// Linear sweep from `f0` to `f1` Hz over the scene duration.
    Chirp { f0: f64, f1: f64 },
    Multitone { freqs: Vec<f64> },
    /// Placeholder parsed from a spec file; must be resolved to `Samples`
    /// before synthesis (file I/O lives in the CLI).
    Wav { path: String },
    Samples { samples: Vec<f64> },
}

/// Full description of a synthetic scene; fixed seed means bit-identical
/// stems.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub channel_count: usize,
    pub sample_rate: u32,
    pub duration: f64,
    /// Circular array radius in meters.
    pub radius: f64,
    /// Height offset of every odd microphone (two-ring layout), meters.
    pub ring_offset: f64,
    pub noise_states: usize,
    pub state_min_s: f64,
    pub state_max_s: f64,
    /// Independent per-channel floor relative to the directional noise, dB.
    pub noise_floor_db: f64,
    /// Amplitude-modulation depth of each noise state, 0..1.
    pub mod_depth: f64,
    pub target: Vec<TargetSource>,
    pub target_azimuth_deg: f64,
    pub target_speed_deg_s: f64,
    pub target_distance_m: f64,
    pub input_snr_db: f64,
    /// Realization seed: schedule, noise sample streams, floor.
    pub seed: u64,
    /// Noise-state character seed: directions, filters, modulation, gains.
    /// Scenes sharing `state_seed` share noise states across realizations.
    pub state_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            channel_count: 8,
            sample_rate: 32_000,
            duration: 20.0,
            radius: 0.15,
            ring_offset: 0.03,
            noise_states: 4,
            state_min_s: 0.7,
            state_max_s: 2.0,
            noise_floor_db: -25.0,
            mod_depth: 0.3,
            target: vec![
                TargetSource::Chirp { f0: 300.0, f1: 3500.0 },
                TargetSource::Multitone { freqs: vec![440.0, 1320.0, 2750.0] },
            ],
            target_azimuth_deg: 40.0,
            target_speed_deg_s: 10.0,
            target_distance_m: 1.5,
            input_snr_db: 0.0,
            seed: 42,
            state_seed: 7077,
        }
    }
}

impl SceneSpec {
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_count < 2 {
            return Err(Error::InvalidParameter("scene needs at least 2 channels".into()));
        }
        if self.sample_rate == 0 || !(self.duration > 0.0) {
            return Err(Error::InvalidParameter("scene needs a positive rate and duration".into()));
        }
        if !(self.radius > 0.0) || self.ring_offset < 0.0 {
            return Err(Error::InvalidParameter("invalid array geometry".into()));
        }
        if self.noise_states == 0 || self.noise_states > 64 {
            return Err(Error::InvalidParameter("noise_states must be in 1..=64".into()));
        }
        if !(self.state_min_s > 0.0) || self.state_max_s < self.state_min_s {
            return Err(Error::InvalidParameter("invalid state duration range".into()));
        }
        if !(0.0..1.0).contains(&self.mod_depth) {
            return Err(Error::InvalidParameter("mod_depth must be in [0, 1)".into()));
        }
        if !(self.target_distance_m > 0.0) {
            return Err(Error::InvalidParameter("target distance must be positive".into()));
        }
        Ok(())
    }
}

/// Exactly additive stem triple: `mixture = clean + noise` sample-wise.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub mixture: MultichannelAudio<T>,
    pub clean: MultichannelAudio<T>,
    pub noise: MultichannelAudio<T>,
}

fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Microphone positions: uniform circle of `radius`, odd indices lifted by
/// `ring_offset`.
fn mic_positions(spec: &SceneSpec) -> Vec<[f64; 3]> {
    (0..spec.channel_count)
        .map(|m| {
            let angle = 2.0 * PI * m as f64 / spec.channel_count as f64;
            let z = if m % 2 == 1 { spec.ring_offset } else { 0.0 };
            [spec.radius * angle.cos(), spec.radius * angle.sin(), z]
        })
        .collect()
}

/// Far-field delay in samples of microphone `pos` for a plane wave from
/// azimuth/elevation (radians), relative to the array center.
fn farfield_delay(pos: &[f64; 3], azimuth: f64, elevation: f64, sample_rate: f64) -> f64 {
    let u = [elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin()];
    -(pos[0] * u[0] + pos[1] * u[1] + pos[2] * u[2]) / SPEED_OF_SOUND * sample_rate
}

/// 33-tap Hann-windowed sinc kernel for a fractional delay `frac` in [0, 1).
fn fractional_kernel(frac: f64) -> [f64; 33] {
    let mut taps = [0.0; 33];
    for (idx, tap) in taps.iter_mut().enumerate() {
        let j = idx as isize - KERNEL_HALF;
        let x = j as f64 - frac;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let win = 0.5 * (1.0 + (PI * x / (KERNEL_HALF as f64 + 1.0)).cos());
        *tap = sinc * win;
    }
    taps
}

/// Delay-line read of `delay` samples behind write position `t`.
#[inline]
fn ring_read(ring: &[f64; RING], t: usize, delay_int: usize, kernel: &[f64; 33]) -> f64 {
    let mut acc = 0.0;
    // Sample index i0 - j for j in -16..=16, with i0 = t - delay_int.
    let base = t.wrapping_sub(delay_int).wrapping_add(KERNEL_HALF as usize);
    for (idx, &h) in kernel.iter().enumerate() {
        acc += h * ring[(base.wrapping_sub(idx)) & (RING - 1)];
    }
    acc
}

/// RBJ-style band-pass biquad (transposed direct form II).
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn bandpass(freq: f64, q: f64, sample_rate: f64) -> Self {
        let w = 2.0 * PI * freq / sample_rate;
        let alpha = w.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: alpha / a0,
            b1: 0.0,
            b2: -alpha / a0,
            a1: -2.0 * w.cos() / a0,
            a2: (1.0 - alpha) / a0,
            z1: 0.0,
            z2: 0.0,
        }
    }

    #[inline]
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }
}

/// Character of one noise state, drawn from `state_seed` only.
struct NoiseState {
    azimuth: f64,
    elevation: f64,
    freq_low: f64,
    q_low: f64,
    freq_high: f64,
    q_high: f64,
    mod_rate: f64,
    mod_phase: f64,
    channel_gains: Vec<f64>,
}

impl NoiseState {
    fn draw(spec: &SceneSpec, state: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.state_seed, 1000 + state as u64));
        let fs = spec.sample_rate as f64;
        let lo_hi = (1800.0f64).min(0.2 * fs);
        let hi_hi = (7000.0f64).min(0.42 * fs);
        let u1: f64 = rng.random_range(0.0..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        Self {
            azimuth: rng.random_range(0.0..2.0 * PI),
            elevation: rng.random_range(-0.7..0.7),
            freq_low: 150.0 * (lo_hi / 150.0).powf(u1),
            q_low: rng.random_range(2.0..8.0),
            freq_high: lo_hi * (hi_hi / lo_hi).powf(u2),
            q_high: rng.random_range(2.0..8.0),
            mod_rate: rng.random_range(2.0..8.0),
            mod_phase: rng.random_range(0.0..2.0 * PI),
            channel_gains: (0..spec.channel_count)
                .map(|_| 10f64.powf(rng.random_range(-2.0..2.0) / 20.0))
                .collect(),
        }
    }
}

/// Contiguous state schedule with raised-cosine crossfades; weights of the
/// active states sum to one at every sample.
fn state_weights(spec: &SceneSpec, n: usize) -> Vec<Vec<(usize, usize, bool)>> {
    // Per state: list of (start, end, ramp_in) full-weight segments; the
    // crossfade handling happens in `weight_buffer`.
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 1));
    let fs = spec.sample_rate as f64;
    let mut boundaries = vec![0usize];
    let mut states = Vec::new();
    let mut pos = 0usize;
    let mut prev = usize::MAX;
    while pos < n {
        let dur = (rng.random_range(spec.state_min_s..=spec.state_max_s) * fs).round() as usize;
        let mut state = rng.random_range(0..spec.noise_states);
        if spec.noise_states > 1 && state == prev {
            state = (state + 1) % spec.noise_states;
        }
        prev = state;
        states.push(state);
        pos += dur.max(1);
        boundaries.push(pos.min(n));
    }
    let mut per_state = vec![Vec::new(); spec.noise_states];
    for (i, &s) in states.iter().enumerate() {
        per_state[s].push((boundaries[i], boundaries[i + 1], i > 0));
    }
    per_state
}

/// Fills `w` with the state's weight at every sample: raised-cosine ramp in
/// over the crossfade (unless it is the first segment), full weight inside,
/// and the complementary ramp out while the next segment fades in.
fn weight_buffer(
    segments: &[(usize, usize, bool)],
    crossfade: usize,
    n: usize,
    w: &mut [f64],
) {
    w[..n].fill(0.0);
    for &(start, end, ramp_in) in segments {
        let fade_end = (end + crossfade).min(n);
        for t in start..fade_end {
            let mut weight = 1.0;
            if ramp_in && t < start + crossfade {
                let u = (t - start) as f64 / crossfade as f64;
                weight = 0.5 * (1.0 - (PI * u).cos());
            }
            if t >= end {
                let u = (t - end) as f64 / crossfade as f64;
                weight = weight.min(0.5 * (1.0 + (PI * u).cos()));
            }
            w[t] = w[t].max(weight);
        }
    }
}

fn resolve_target_component(src: &TargetSource, n: usize, fs: f64, duration: f64) -> Result<Option<Vec<f64>>> {
    let samples = match src {
        TargetSource::None => return Ok(None),
        TargetSource::Chirp { f0, f1 } => (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * duration))).sin()
            })
            .collect(),
        TargetSource::Multitone { freqs } => {
            if freqs.is_empty() {
                return Ok(None);
            }
            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    freqs.iter().map(|f| (2.0 * PI * f * t).sin()).sum::<f64>()
                })
                .collect()
        }
        TargetSource::Wav { path } => {
            return Err(Error::InvalidParameter(format!(
                "wav target '{path}' must be resolved to samples before synthesis"
            )))
        }
        TargetSource::Samples { samples } => {
            let mut s = samples.clone();
            s.resize(n, 0.0);
            s
        }
    };
    // Equal-RMS weighting of components.
    let rms = (samples.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        Ok(Some(samples.into_iter().map(|x| x / rms).collect()))
    } else {
        Ok(None)
    }
}

/// Synthesizes the exactly additive stem triple described by `spec`.
pub fn synthesize_scene<T: Scalar>(spec: &SceneSpec) -> Result<Scene<T>> {
    spec.validate()?;
    let n = spec.sample_count();
    let fs = spec.sample_rate as f64;
    let m = spec.channel_count;
    let positions = mic_positions(spec);
    let crossfade = ((CROSSFADE_S * fs).round() as usize).max(1);

    // --- Directional noise states -----------------------------------------
    let mut noise = vec![vec![0.0f64; n]; m];
    let schedule = state_weights(spec, n);
    let mut weights = vec![0.0f64; n];
    for s in 0..spec.noise_states {
        let state = NoiseState::draw(spec, s);
        weight_buffer(&schedule[s], crossfade, n, &mut weights);
        let kernels: Vec<(usize, [f64; 33])> = positions
            .iter()
            .map(|pos| {
                let d = BASE_DELAY + farfield_delay(pos, state.azimuth, state.elevation, fs);
                let di = d.floor();
                (di as usize, fractional_kernel(d - di))
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 2000 + s as u64));
        let mut low = Biquad::bandpass(state.freq_low, state.q_low, fs);
        let mut high = Biquad::bandpass(state.freq_high, state.q_high, fs);
        let mut ring = [0.0f64; RING];
        for t in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let y = 0.6 * low.process(x) + 0.6 * high.process(x) + 0.15 * x;
            ring[t & (RING - 1)] = y;
            let w = weights[t];
            if w > 0.0 {
                let env = 1.0 + spec.mod_depth * (2.0 * PI * state.mod_rate * t as f64 / fs + state.mod_phase).sin();
                let a = w * env;
                for ch in 0..m {
                    let (di, kernel) = &kernels[ch];
                    noise[ch][t] += a * state.channel_gains[ch] * ring_read(&ring, t, *di, kernel);
                }
            }
        }
    }

    // Independent per-channel floor, scaled against the directional power.
    let dir_power = noise
        .iter()
        .map(|ch| ch.iter().map(|x| x * x).sum::<f64>() / n as f64)
        .sum::<f64>()
        / m as f64;
    if dir_power > 0.0 {
        let floor_amp = dir_power.sqrt() * 10f64.powf(spec.noise_floor_db / 20.0);
        for (ch, row) in noise.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 3000 + ch as u64));
            for x in row.iter_mut() {
                let f: f64 = rng.sample(StandardNormal);
                *x += floor_amp * f;
            }
        }
    }

    // Unit RMS on channel 0 keeps realizations of the same states on one
    // absolute scale.
    let noise_rms = (noise[0].iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if noise_rms > 0.0 {
        for row in noise.iter_mut() {
            for x in row.iter_mut() {
                *x /= noise_rms;
            }
        }
    }

    // --- Moving target ------------------------------------------------------
    let mut source = vec![0.0f64; n];
    let mut have_target = false;
    for component in &spec.target {
        if let Some(comp) = resolve_target_component(component, n, fs, spec.duration)? {
            for (acc, x) in source.iter_mut().zip(comp) {
                *acc += x;
            }
            have_target = true;
        }
    }

    let mut clean = vec![vec![0.0f64; n]; m];
    if have_target {
        let gain = 1.0 / spec.target_distance_m;
        let mut ring = [0.0f64; RING];
        let mut kernels: Vec<(usize, [f64; 33])> = vec![(0, [0.0; 33]); m];
        const BLOCK: usize = 64;
        for t in 0..n {
            if t % BLOCK == 0 {
                // The azimuth path is quantized to 64-sample blocks.
                let azimuth = (spec.target_azimuth_deg + spec.target_speed_deg_s * t as f64 / fs)
                    .to_radians();
                for (ch, pos) in positions.iter().enumerate() {
                    let d = BASE_DELAY + farfield_delay(pos, azimuth, 0.0, fs);
                    let di = d.floor();
                    kernels[ch] = (di as usize, fractional_kernel(d - di));
                }
            }
            ring[t & (RING - 1)] = source[t];
            for ch in 0..m {
                let (di, kernel) = &kernels[ch];
                clean[ch][t] = gain * ring_read(&ring, t, *di, kernel);
            }
        }
        // Scale the target to hit the requested input SNR on channel 0.
        let clean_rms = (clean[0].iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        if clean_rms > 0.0 && noise_rms > 0.0 {
            let target_rms = 10f64.powf(spec.input_snr_db / 20.0);
            let scale = target_rms / clean_rms;
            for row in clean.iter_mut() {
                for x in row.iter_mut() {
                    *x *= scale;
                }
            }
        }
    }

    // Cast stems, form the mixture, then redefine the noise stem as
    // mixture - clean (a sub-ulp adjustment): the identity
    // (mixture - clean) - noise == 0 then holds exactly in the output type.
    let cast = |rows: &Vec<Vec<f64>>| -> Vec<Vec<T>> {
        rows.iter().map(|row| row.iter().map(|&x| fromf(x)).collect()).collect()
    };
    let clean_t = cast(&clean);
    let raw_noise_t = cast(&noise);
    let mixture_t: Vec<Vec<T>> = clean_t
        .iter()
        .zip(&raw_noise_t)
        .map(|(c, b)| c.iter().zip(b).map(|(&x, &y)| x + y).collect())
        .collect();
    let noise_t: Vec<Vec<T>> = mixture_t
        .iter()
        .zip(&clean_t)
        .map(|(mrow, crow)| mrow.iter().zip(crow).map(|(&x, &c)| x - c).collect())
        .collect();

    Ok(Scene {
        mixture: MultichannelAudio::new(mixture_t, spec.sample_rate)?,
        clean: MultichannelAudio::new(clean_t, spec.sample_rate)?,
        noise: MultichannelAudio::new(noise_t, spec.sample_rate)?,
    })
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

fn cap_db(x: f64) -> f64 {
    x.clamp(-DB_CAP, DB_CAP)
}

fn energy<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|&v| v * v).sum::<T>().to_f64().unwrap_or(f64::NAN)
}

/// `10 log10(sum ref^2 / sum interference^2)`, capped to +-120 dB.
pub fn snr<T: Scalar>(reference: &[T], interference: &[T]) -> Result<f64> {
    if reference.len() != interference.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), got: interference.len() });
    }
    let es = energy(reference);
    if es == 0.0 {
        return Err(Error::ZeroReference);
    }
    let ee = energy(interference);
    if ee == 0.0 {
        return Ok(DB_CAP);
    }
    Ok(cap_db(10.0 * (es / ee).log10()))
}

/// Scale-invariant SDR: project `estimate` onto `reference` and compare the
/// projection against the residual, capped to +-120 dB.
pub fn sdr<T: Scalar>(estimate: &[T], reference: &[T]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), got: estimate.len() });
    }
    let es = energy(reference);
    if es == 0.0 {
        return Err(Error::ZeroReference);
    }
    let dot = estimate
        .iter()
        .zip(reference)
        .map(|(&e, &s)| e * s)
        .sum::<T>()
        .to_f64()
        .unwrap_or(f64::NAN);
    let alpha = dot / es;
    let projected = alpha * alpha * es;
    if projected == 0.0 {
        return Ok(-DB_CAP);
    }
    let residual = estimate
        .iter()
        .zip(reference)
        .map(|(&e, &s)| {
            let d = e.to_f64().unwrap_or(f64::NAN) - alpha * s.to_f64().unwrap_or(f64::NAN);
            d * d
        })
        .sum::<f64>();
    if residual == 0.0 {
        return Ok(DB_CAP);
    }
    Ok(cap_db(10.0 * (projected / residual).log10()))
}

// ---------------------------------------------------------------------------
// Evaluation run
// ---------------------------------------------------------------------------

/// Which input channel the "before" metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonChannel {
    /// The channel with the best whole-signal clean/noise energy ratio.
    BestAverageSnr,
    Fixed(usize),
    /// The per-segment MVDR reference channel.
    MvdrReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMetrics {
    pub segment_index: usize,
    pub comparison_channel: usize,
    pub input_snr_db: f64,
    pub output_snr_db: f64,
    pub input_sdr_db: f64,
    pub output_sdr_db: f64,
    pub silent: bool,
    pub wall_ms: f64,
}

/// Per-segment metrics plus aggregates over the non-silent segments.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub segments: Vec<SegmentMetrics>,
    pub active_segments: usize,
    pub mean_input_snr_db: Option<f64>,
    pub mean_output_snr_db: Option<f64>,
    pub mean_input_sdr_db: Option<f64>,
    pub mean_output_sdr_db: Option<f64>,
    pub mean_snr_improvement_db: Option<f64>,
    pub mean_sdr_improvement_db: Option<f64>,
    pub mean_wall_ms: f64,
}

fn frame_count_for(n: usize, frame: usize, hop: usize) -> usize {
    if n < frame {
        0
    } else {
        (n - frame) / hop + 1
    }
}

fn guarded_snr<T: Scalar>(reference: &[T], interference: &[T]) -> f64 {
    match snr(reference, interference) {
        Ok(v) => v,
        Err(_) => -DB_CAP,
    }
}

fn guarded_sdr<T: Scalar>(estimate: &[T], reference: &[T]) -> f64 {
    match sdr(estimate, reference) {
        Ok(v) => v,
        Err(_) => -DB_CAP,
    }
}

/// Enhances `mixture` while capturing per-segment weights, re-applies them to
/// the clean and noise stems (exact because the filter is linear), and scores
/// every segment. Segments whose clean power sits more than 40 dB below the
/// loudest segment are marked silent and excluded from aggregates.
pub fn evaluate_run<T: Scalar>(
    mixture: &MultichannelAudio<T>,
    clean: &MultichannelAudio<T>,
    noise: &MultichannelAudio<T>,
    dict: &NoiseDictionary<T>,
    cfg: &EnhancerConfig,
    comparison: ComparisonChannel,
) -> Result<MetricReport> {
    let n = mixture.len();
    for stem in [clean, noise] {
        if stem.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: stem.len() });
        }
        if stem.channel_count() != mixture.channel_count() {
            return Err(Error::ChannelMismatch {
                expected: mixture.channel_count(),
                got: stem.channel_count(),
            });
        }
    }
    let (enhanced, reports, weights) = enhance_stream_detailed(mixture, dict, cfg)?;
    let clean_out = apply_weights_stream(clean, &weights, cfg)?;
    let noise_out = apply_weights_stream(noise, &weights, cfg)?;

    let base_channel = match comparison {
        ComparisonChannel::Fixed(c) => {
            if c >= mixture.channel_count() {
                return Err(Error::InvalidParameter(format!(
                    "comparison channel {c} out of range for {} channels",
                    mixture.channel_count()
                )));
            }
            Some(c)
        }
        ComparisonChannel::BestAverageSnr => {
            let mut best = 0usize;
            let mut best_ratio = f64::NEG_INFINITY;
            for ch in 0..mixture.channel_count() {
                let es = energy(clean.channel(ch));
                let en = energy(noise.channel(ch));
                let ratio = if en == 0.0 { f64::INFINITY } else { es / en };
                if ratio > best_ratio {
                    best_ratio = ratio;
                    best = ch;
                }
            }
            Some(best)
        }
        ComparisonChannel::MvdrReference => None,
    };

    // Output span of segment s: samples finalized while it was processed.
    let seg = cfg.segment_samples();
    let target = enhanced.len();
    let spans: Vec<(usize, usize)> = (0..reports.len())
        .map(|s| {
            let a = (frame_count_for(s * seg, cfg.frame_size, cfg.hop) * cfg.hop).min(target);
            let b = if s + 1 == reports.len() {
                target
            } else {
                (frame_count_for((s + 1) * seg, cfg.frame_size, cfg.hop) * cfg.hop).min(target)
            };
            (a, b.max(a))
        })
        .collect();

    let channel_of = |report: &SegmentReport| -> usize {
        base_channel.unwrap_or(report.reference_channel)
    };

    // Silence mask from clean power per span, relative to the loudest.
    let powers: Vec<f64> = reports
        .iter()
        .zip(&spans)
        .map(|(r, &(a, b))| {
            if b == a {
                0.0
            } else {
                energy(&clean.channel(channel_of(r))[a..b]) / (b - a) as f64
            }
        })
        .collect();
    let max_power = powers.iter().cloned().fold(0.0, f64::max);
    let threshold = max_power * 1e-4; // -40 dB

    let mut segments = Vec::with_capacity(reports.len());
    for (s, report) in reports.iter().enumerate() {
        let (a, b) = spans[s];
        let ch = channel_of(report);
        let silent = b == a || max_power == 0.0 || powers[s] < threshold;
        let (input_snr_db, output_snr_db, input_sdr_db, output_sdr_db) = if b == a {
            (-DB_CAP, -DB_CAP, -DB_CAP, -DB_CAP)
        } else {
            (
                guarded_snr(&clean.channel(ch)[a..b], &noise.channel(ch)[a..b]),
                guarded_snr(&clean_out.channel(0)[a..b], &noise_out.channel(0)[a..b]),
                guarded_sdr(&mixture.channel(ch)[a..b], &clean.channel(ch)[a..b]),
                guarded_sdr(&enhanced.channel(0)[a..b], &clean.channel(ch)[a..b]),
            )
        };
        segments.push(SegmentMetrics {
            segment_index: s,
            comparison_channel: ch,
            input_snr_db,
            output_snr_db,
            input_sdr_db,
            output_sdr_db,
            silent,
            wall_ms: report.wall_ms,
        });
    }

    let active: Vec<&SegmentMetrics> = segments.iter().filter(|s| !s.silent).collect();
    let mean = |get: &dyn Fn(&SegmentMetrics) -> f64| -> Option<f64> {
        if active.is_empty() {
            None
        } else {
            Some(active.iter().map(|s| get(s)).sum::<f64>() / active.len() as f64)
        }
    };
    let report = MetricReport {
        active_segments: active.len(),
        mean_input_snr_db: mean(&|s| s.input_snr_db),
        mean_output_snr_db: mean(&|s| s.output_snr_db),
        mean_input_sdr_db: mean(&|s| s.input_sdr_db),
        mean_output_sdr_db: mean(&|s| s.output_sdr_db),
        mean_snr_improvement_db: mean(&|s| s.output_snr_db - s.input_snr_db),
        mean_sdr_improvement_db: mean(&|s| s.output_sdr_db - s.input_sdr_db),
        mean_wall_ms: if segments.is_empty() {
            0.0
        } else {
            segments.iter().map(|s| s.wall_ms).sum::<f64>() / segments.len() as f64
        },
        segments,
    };
    Ok(report)
}

// ---------------------------------------------------------------------------
// Scene spec text format
// ---------------------------------------------------------------------------

/// Header line every scene spec file must start with.
pub const SCENE_SPEC_HEADER: &str = "egonoise-scene v1";

fn parse_value<V: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<V> {
    value.trim().parse().map_err(|_| Error::SceneSpecParse {
        line,
        message: format!("cannot parse value '{}' for key '{key}'", value.trim()),
    })
}

/// Parses the plain-text key-value scene format: a `egonoise-scene v1`
/// header, then `key = value` lines; `#` starts a comment. Unknown keys are
/// rejected with their line number.
pub fn parse_scene_spec(text: &str) -> Result<SceneSpec> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, line)) => {
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                break (i + 1, t);
            }
            None => {
                return Err(Error::SceneSpecParse { line: 1, message: "empty spec file".into() })
            }
        }
    };
    if header.1 != SCENE_SPEC_HEADER {
        return Err(Error::SceneSpecParse {
            line: header.0,
            message: format!("expected header '{SCENE_SPEC_HEADER}', found '{}'", header.1),
        });
    }

    let mut spec = SceneSpec::default();
    let mut target_kind: Option<String> = None;
    let mut chirp = (300.0f64, 3500.0f64);
    let mut freqs = vec![440.0f64, 1320.0, 2750.0];

    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::SceneSpecParse {
                line: line_no,
                message: format!("expected 'key = value', found '{line}'"),
            });
        };
        let key = key.trim();
        match key {
            "channels" => spec.channel_count = parse_value(value, line_no, key)?,
            "sample_rate" => spec.sample_rate = parse_value(value, line_no, key)?,
            "duration" => spec.duration = parse_value(value, line_no, key)?,
            "radius" => spec.radius = parse_value(value, line_no, key)?,
            "ring_offset" => spec.ring_offset = parse_value(value, line_no, key)?,
            "noise_states" => spec.noise_states = parse_value(value, line_no, key)?,
            "state_min_s" => spec.state_min_s = parse_value(value, line_no, key)?,
            "state_max_s" => spec.state_max_s = parse_value(value, line_no, key)?,
            "noise_floor_db" => spec.noise_floor_db = parse_value(value, line_no, key)?,
            "mod_depth" => spec.mod_depth = parse_value(value, line_no, key)?,
            "target_azimuth_deg" => spec.target_azimuth_deg = parse_value(value, line_no, key)?,
            "target_speed_deg_s" => spec.target_speed_deg_s = parse_value(value, line_no, key)?,
            "target_distance_m" => spec.target_distance_m = parse_value(value, line_no, key)?,
            "input_snr_db" => spec.input_snr_db = parse_value(value, line_no, key)?,
            "seed" => spec.seed = parse_value(value, line_no, key)?,
            "state_seed" => spec.state_seed = parse_value(value, line_no, key)?,
            "chirp_f0" => chirp.0 = parse_value(value, line_no, key)?,
            "chirp_f1" => chirp.1 = parse_value(value, line_no, key)?,
            "multitone_freqs" => {
                freqs = value
                    .split(',')
                    .map(|f| parse_value(f, line_no, key))
                    .collect::<Result<Vec<f64>>>()?;
            }
            "target" => target_kind = Some(value.trim().to_string()),
            _ => {
                return Err(Error::SceneSpecParse {
                    line: line_no,
                    message: format!("unknown key '{key}'"),
                })
            }
        }
    }

    if let Some(kind) = target_kind {
        spec.target = match kind.as_str() {
            "none" => vec![TargetSource::None],
            "chirp" => vec![TargetSource::Chirp { f0: chirp.0, f1: chirp.1 }],
            "multitone" => vec![TargetSource::Multitone { freqs: freqs.clone() }],
            "chirp+multitone" => vec![
                TargetSource::Chirp { f0: chirp.0, f1: chirp.1 },
                TargetSource::Multitone { freqs: freqs.clone() },
            ],
            other => {
                if let Some(path) = other.strip_prefix("wav:") {
                    vec![TargetSource::Wav { path: path.trim().to_string() }]
                } else {
                    return Err(Error::SceneSpecParse {
                        line: 0,
                        message: format!(
                            "unknown target '{other}' (expected none, chirp, multitone, chirp+multitone, or wav:<path>)"
                        ),
                    });
                }
            }
        };
    } else {
        spec.target = vec![
            TargetSource::Chirp { f0: chirp.0, f1: chirp.1 },
            TargetSource::Multitone { freqs },
        ];
    }
    Ok(spec)
}
