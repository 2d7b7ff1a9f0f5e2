//! Windowed analysis/synthesis transform with perfect-reconstruction
//! overlap-add and streaming state.
//!
//! Analysis multiplies each frame by a periodic Hann window before a
//! one-sided FFT. Synthesis applies the matching Hann weighting to each
//! inverse-transformed frame, overlap-adds, and divides by the accumulated
//! window energy, so `analyze` → `synthesize` reproduces the interior of the
//! input exactly (edges excluded). Frame `l` covers samples
//! `[l*hop, l*hop + frame_size)`; streaming keeps that grid continuous
//! across chunk boundaries.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::audio::MultichannelAudio;
use crate::error::{Error, Result};
use crate::scalar::{fromf, Scalar};

/// Analysis window identifier. Only Hann is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
}

/// Periodic Hann window of length `n`.
pub fn hann_window<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| fromf(0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())))
        .collect()
}

fn validate_params(frame_size: usize, hop: usize) -> Result<()> {
    if frame_size < 2 || !frame_size.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "frame size must be a power of two >= 2, got {frame_size}"
        )));
    }
    if hop == 0 || hop > frame_size {
        return Err(Error::InvalidParameter(format!(
            "hop must be in 1..={frame_size}, got {hop}"
        )));
    }
    if frame_size % hop != 0 {
        return Err(Error::InvalidParameter(format!(
            "hop {hop} must divide frame size {frame_size}"
        )));
    }
    Ok(())
}

/// Complex STFT frames indexed `[channel][frame][bin]`, one-sided
/// (`bin_count = frame_size/2 + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    data: Vec<Complex<T>>,
    channels: usize,
    frames: usize,
    bins: usize,
    frame_size: usize,
    hop: usize,
    sample_rate: u32,
    window: Window,
}

impl<T: Scalar> Spectrogram<T> {
    /// Builds a spectrogram from raw frame data laid out `[channel][frame][bin]`.
    pub fn from_parts(
        data: Vec<Complex<T>>,
        channels: usize,
        frames: usize,
        frame_size: usize,
        hop: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        validate_params(frame_size, hop)?;
        let bins = frame_size / 2 + 1;
        if channels == 0 {
            return Err(Error::ShapeMismatch("spectrogram needs at least one channel".into()));
        }
        if data.len() != channels * frames * bins {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {channels} channels x {frames} frames x {bins} bins",
                data.len()
            )));
        }
        Ok(Self { data, channels, frames, bins, frame_size, hop, sample_rate, window: Window::Hann })
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn frame_count(&self) -> usize {
        self.frames
    }

    pub fn bin_count(&self) -> usize {
        self.bins
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Bins of frame `l` in channel `m`.
    pub fn frame(&self, m: usize, l: usize) -> &[Complex<T>] {
        let base = (m * self.frames + l) * self.bins;
        &self.data[base..base + self.bins]
    }

    pub fn frame_mut(&mut self, m: usize, l: usize) -> &mut [Complex<T>] {
        let base = (m * self.frames + l) * self.bins;
        &mut self.data[base..base + self.bins]
    }
}

/// Number of full frames available in `n` samples.
fn frame_count_for(n: usize, frame_size: usize, hop: usize) -> usize {
    if n < frame_size {
        0
    } else {
        (n - frame_size) / hop + 1
    }
}

/// Short-time Fourier transform of a multichannel signal.
///
/// Frame `l` covers samples `[l*hop, l*hop + frame_size)`; the frame count is
/// `floor((n - frame_size)/hop) + 1`. Inputs shorter than one frame are
/// rejected.
pub fn analyze<T: Scalar>(
    audio: &MultichannelAudio<T>,
    frame_size: usize,
    hop: usize,
) -> Result<Spectrogram<T>> {
    validate_params(frame_size, hop)?;
    let n = audio.len();
    if n < frame_size {
        return Err(Error::TooShort { got: n, need: frame_size });
    }
    let frames = frame_count_for(n, frame_size, hop);
    let fft = FftPlanner::<T>::new().plan_fft_forward(frame_size);
    let window = hann_window::<T>(frame_size);
    let bins = frame_size / 2 + 1;
    let channels = audio.channel_count();

    let mut data = vec![Complex::new(T::zero(), T::zero()); channels * frames * bins];
    data.par_chunks_mut(frames * bins).enumerate().for_each(|(m, out)| {
        let samples = audio.channel(m);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); frame_size];
        for l in 0..frames {
            let start = l * hop;
            for i in 0..frame_size {
                buf[i] = Complex::new(window[i] * samples[start + i], T::zero());
            }
            fft.process(&mut buf);
            out[l * bins..(l + 1) * bins].copy_from_slice(&buf[..bins]);
        }
    });

    Spectrogram::from_parts(data, channels, frames, frame_size, hop, audio.sample_rate())
}

/// Expands one-sided bins to a full conjugate-symmetric spectrum, inverse
/// transforms, and returns the frame scaled by `1/frame_size`.
fn inverse_frame<T: Scalar>(
    bins: &[Complex<T>],
    frame_size: usize,
    ifft: &Arc<dyn Fft<T>>,
    buf: &mut [Complex<T>],
) {
    let k = bins.len();
    buf[..k].copy_from_slice(bins);
    for i in k..frame_size {
        buf[i] = bins[frame_size - i].conj();
    }
    ifft.process(buf);
    let scale = T::one() / fromf::<T>(frame_size as f64);
    for v in buf.iter_mut() {
        *v = *v * scale;
    }
}

/// Steady-state overlapped window-energy sum `sum_n w[n]^2 / hop` (constant
/// across interior samples for a periodic Hann with `hop | frame_size`).
fn steady_norm<T: Scalar>(window: &[T], hop: usize) -> T {
    let total: T = window.iter().map(|&w| w * w).sum();
    total / fromf(hop as f64)
}

/// Weighted overlap-add resynthesis.
///
/// Output covers the full support of the frames,
/// `(frame_count-1)*hop + frame_size` samples. The window-energy divisor is
/// floored at its steady-state value, so edge samples with partial overlap
/// fade in/out instead of amplifyingered single-frame content (per-bin
/// modifications leak circular-convolution tails there that only cancel
/// under full overlap). Imaginary residue from per-bin modification is
/// dropped.
pub fn synthesize<T: Scalar>(spec: &Spectrogram<T>) -> Result<MultichannelAudio<T>> {
    let frame_size = spec.frame_size();
    let hop = spec.hop();
    let frames = spec.frame_count();
    if frames == 0 {
        return Ok(MultichannelAudio::zeros(spec.channel_count(), 0, spec.sample_rate()));
    }
    let out_len = (frames - 1) * hop + frame_size;
    let window = hann_window::<T>(frame_size);
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(frame_size);
    let floor = steady_norm(&window, hop);

    // Accumulated synthesis-window energy; shared across channels.
    let mut norm = vec![T::zero(); out_len];
    for l in 0..frames {
        for i in 0..frame_size {
            norm[l * hop + i] += window[i] * window[i];
        }
    }

    let mut channels = Vec::with_capacity(spec.channel_count());
    for m in 0..spec.channel_count() {
        let mut acc = vec![T::zero(); out_len];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); frame_size];
        for l in 0..frames {
            inverse_frame(spec.frame(m, l), frame_size, &ifft, &mut buf);
            let base = l * hop;
            for i in 0..frame_size {
                acc[base + i] += window[i] * buf[i].re;
            }
        }
        for (a, &w) in acc.iter_mut().zip(norm.iter()) {
            *a = *a / w.max(floor);
        }
        channels.push(acc);
    }
    MultichannelAudio::new(channels, spec.sample_rate())
}

/// Streaming STFT state: an analysis half that frames arbitrary chunk sizes
/// on a continuous grid, and a synthesis half that overlap-adds filtered
/// frames and releases samples once no later frame can touch them.
///
/// The synthesis tail (`frame_size - hop` samples) stays buffered; that is
/// the documented edge latency of a streaming round trip.
pub struct StreamState<T: Scalar> {
    frame_size: usize,
    hop: usize,
    sample_rate: u32,
    channels: usize,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    backlog: Vec<Vec<T>>,
    consumed: usize,
    // Synthesis half: `acc`/`norm` are indexed relative to `drained`.
    synth_channels: Option<usize>,
    acc: Vec<Vec<T>>,
    norm: Vec<T>,
    synth_frames: usize,
    drained: usize,
}

impl<T: Scalar> StreamState<T> {
    pub fn new(channels: usize, frame_size: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        validate_params(frame_size, hop)?;
        if channels == 0 {
            return Err(Error::InvalidParameter("need at least one channel".into()));
        }
        let mut planner = FftPlanner::<T>::new();
        Ok(Self {
            frame_size,
            hop,
            sample_rate,
            channels,
            window: hann_window(frame_size),
            fft: planner.plan_fft_forward(frame_size),
            ifft: planner.plan_fft_inverse(frame_size),
            backlog: vec![Vec::new(); channels],
            consumed: 0,
            synth_channels: None,
            acc: Vec::new(),
            norm: Vec::new(),
            synth_frames: 0,
            drained: 0,
        })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Samples held back on the analysis side (always `< frame_size` after a push).
    pub fn backlog_len(&self) -> usize {
        self.backlog[0].len()
    }

    /// Total input samples accepted so far.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Total output samples released so far.
    pub fn drained(&self) -> usize {
        self.drained
    }

    /// Edge latency of a full streaming round trip, in samples.
    pub fn latency(&self) -> usize {
        self.frame_size - self.hop
    }

    /// Accepts a chunk and emits exactly the frames whose full support is
    /// available. Frame indices in the returned spectrogram are local to this
    /// push; the sample grid is continuous across pushes.
    pub fn push(&mut self, chunk: &MultichannelAudio<T>) -> Result<Spectrogram<T>> {
        if chunk.channel_count() != self.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                got: chunk.channel_count(),
            });
        }
        if chunk.sample_rate() != self.sample_rate {
            return Err(Error::InvalidParameter(format!(
                "sample rate mismatch: stream {} Hz, chunk {} Hz",
                self.sample_rate,
                chunk.sample_rate()
            )));
        }
        for (m, backlog) in self.backlog.iter_mut().enumerate() {
            backlog.extend_from_slice(chunk.channel(m));
        }
        self.consumed += chunk.len();

        let avail = self.backlog[0].len();
        let frames = frame_count_for(avail, self.frame_size, self.hop);
        let bins = self.frame_size / 2 + 1;
        let mut data = vec![Complex::new(T::zero(), T::zero()); self.channels * frames * bins];
        if frames > 0 {
            let mut buf = vec![Complex::new(T::zero(), T::zero()); self.frame_size];
            for m in 0..self.channels {
                let samples = &self.backlog[m];
                for l in 0..frames {
                    let start = l * self.hop;
                    for i in 0..self.frame_size {
                        buf[i] = Complex::new(self.window[i] * samples[start + i], T::zero());
                    }
                    self.fft.process(&mut buf);
                    let base = (m * frames + l) * bins;
                    data[base..base + bins].copy_from_slice(&buf[..bins]);
                }
            }
            for backlog in self.backlog.iter_mut() {
                backlog.drain(..frames * self.hop);
            }
        }
        Spectrogram::from_parts(data, self.channels, frames, self.frame_size, self.hop, self.sample_rate)
    }

    /// Overlap-adds every frame of `spec` onto the output stream. The channel
    /// count of the synthesis side is fixed by the first call.
    pub fn push_synthesis(&mut self, spec: &Spectrogram<T>) -> Result<()> {
        if spec.frame_size() != self.frame_size || spec.hop() != self.hop {
            return Err(Error::ShapeMismatch(format!(
                "frame geometry mismatch: stream {}x{}, spectrogram {}x{}",
                self.frame_size,
                self.hop,
                spec.frame_size(),
                spec.hop()
            )));
        }
        let ch = *self.synth_channels.get_or_insert(spec.channel_count());
        if spec.channel_count() != ch {
            return Err(Error::ChannelMismatch { expected: ch, got: spec.channel_count() });
        }
        if self.acc.len() != ch {
            self.acc = vec![Vec::new(); ch];
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.frame_size];
        for l in 0..spec.frame_count() {
            let rel = self.synth_frames * self.hop - self.drained;
            let need = rel + self.frame_size;
            if self.norm.len() < need {
                self.norm.resize(need, T::zero());
            }
            for i in 0..self.frame_size {
                self.norm[rel + i] += self.window[i] * self.window[i];
            }
            for m in 0..ch {
                if self.acc[m].len() < need {
                    self.acc[m].resize(need, T::zero());
                }
                inverse_frame(spec.frame(m, l), self.frame_size, &self.ifft, &mut buf);
                for i in 0..self.frame_size {
                    self.acc[m][rel + i] += self.window[i] * buf[i].re;
                }
            }
            self.synth_frames += 1;
        }
        Ok(())
    }

    /// Releases every sample that no future frame can contribute to:
    /// everything before `synth_frames * hop`.
    pub fn drain_output(&mut self) -> MultichannelAudio<T> {
        let upto = self.synth_frames * self.hop;
        let count = upto.saturating_sub(self.drained);
        self.take_output(count)
    }

    /// Releases enough tail samples (normalized by whatever window energy has
    /// accumulated) to make the total output length equal
    /// `consumed - latency`, the documented edge-latency contract.
    pub fn flush(&mut self) -> MultichannelAudio<T> {
        let target = self.consumed.saturating_sub(self.latency());
        self.flush_to(target)
    }

    /// Releases tail samples until `total` output samples have been produced
    /// overall (no-op when that many were already drained).
    pub fn flush_to(&mut self, total: usize) -> MultichannelAudio<T> {
        let count = total.saturating_sub(self.drained);
        self.take_output(count)
    }

    fn take_output(&mut self, count: usize) -> MultichannelAudio<T> {
        let ch = self.synth_channels.unwrap_or(1);
        if self.acc.len() != ch {
            self.acc = vec![Vec::new(); ch];
        }
        if self.norm.len() < count {
            self.norm.resize(count, T::zero());
        }
        for acc in self.acc.iter_mut() {
            if acc.len() < count {
                acc.resize(count, T::zero());
            }
        }
        let mut channels = Vec::with_capacity(ch);
        for acc in self.acc.iter_mut() {
            let mut out = Vec::with_capacity(count);
            for i in 0..count {
                let w = self.norm[i];
                out.push(if w > T::zero() { acc[i] / w } else { T::zero() });
            }
            acc.drain(..count);
            channels.push(out);
        }
        self.norm.drain(..count);
        self.drained += count;
        MultichannelAudio::new(channels, self.sample_rate)
            .unwrap_or_else(|_| MultichannelAudio::zeros(ch, 0, self.sample_rate))
    }
}
