//! Time-domain multichannel sample buffers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Channel-major buffer of real amplitudes; all channels share one length
/// and one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelAudio<T> {
    channels: Vec<Vec<T>>,
    sample_rate: u32,
}

impl<T: Scalar> MultichannelAudio<T> {
    pub fn new(channels: Vec<Vec<T>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidParameter("need at least one channel".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("channels differ in length".into()));
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn zeros(channel_count: usize, len: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![T::zero(); len]; channel_count.max(1)],
            sample_rate: sample_rate.max(1),
        }
    }

    pub fn from_mono(samples: Vec<T>, sample_rate: u32) -> Self {
        Self { channels: vec![samples], sample_rate: sample_rate.max(1) }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, m: usize) -> &[T] {
        &self.channels[m]
    }

    pub fn channel_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.channels[m]
    }

    /// Copy of the sample range `start..end` from every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::InvalidParameter(format!(
                "slice {start}..{end} out of range 0..{}",
                self.len()
            )));
        }
        Ok(Self {
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
            sample_rate: self.sample_rate,
        })
    }

    /// Appends `other` sample-wise; channel counts and rates must match.
    pub fn extend(&mut self, other: &Self) -> Result<()> {
        if other.channel_count() != self.channel_count() {
            return Err(Error::ChannelMismatch {
                expected: self.channel_count(),
                got: other.channel_count(),
            });
        }
        for (dst, src) in self.channels.iter_mut().zip(&other.channels) {
            dst.extend_from_slice(src);
        }
        Ok(())
    }
}
