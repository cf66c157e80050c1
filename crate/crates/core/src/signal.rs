//! Multichannel time-domain signals.

use crate::error::{Error, Result};

/// A multichannel audio signal: equal-length channels of f64 samples plus a
/// sample rate. Immutable by convention once constructed; every transform in
/// this crate returns a new signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultichannelSignal {
    /// Builds a signal from per-channel sample vectors.
    ///
    /// Fails if there are no channels, the channel lengths differ, or the
    /// sample rate is zero.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::dimension("signal must have at least one channel"));
        }
        if sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        let len = channels[0].len();
        if let Some((i, ch)) = channels.iter().enumerate().find(|(_, c)| c.len() != len) {
            return Err(Error::dimension(format!(
                "channel {} has {} samples, expected {}",
                i,
                ch.len(),
                len
            )));
        }
        Ok(Self { channels, sample_rate })
    }

    /// All-zero signal with the given shape.
    pub fn zeros(channel_count: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; channel_count], sample_rate)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// True if any sample in any channel is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        self.channels
            .iter()
            .any(|c| c.iter().any(|s| !s.is_finite()))
    }

    /// Root-mean-square over all channels and samples.
    pub fn rms(&self) -> f64 {
        let n: usize = self.channels.iter().map(|c| c.len()).sum();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .channels
            .iter()
            .flat_map(|c| c.iter())
            .map(|s| s * s)
            .sum();
        (sum / n as f64).sqrt()
    }

    /// Total energy (sum of squared samples over all channels).
    pub fn energy(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .map(|s| s * s)
            .sum()
    }
}
