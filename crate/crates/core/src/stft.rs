//! Sine-windowed complex STFT framing for the two-wave baseline analysis.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

/// Complex spectra of one channel: `frames` rows of `bins` = N/2 + 1
/// values (DC through Nyquist).
#[derive(Debug, Clone)]
pub struct ComplexSpectra {
    pub frames: usize,
    pub bins: usize,
    pub values: Vec<Complex64>,
}

impl ComplexSpectra {
    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.values[frame * self.bins + bin]
    }
}

/// 50%-overlap sine-window STFT of every channel. The signal is zero
/// padded by half a frame on each side, mirroring the MDCT framing, so
/// frame counts line up between the two analyses.
pub fn stft_analyze(
    signal: &MultichannelSignal,
    frame_length: usize,
) -> Result<Vec<ComplexSpectra>> {
    if frame_length < 8 || !frame_length.is_power_of_two() {
        return Err(Error::validation(format!(
            "STFT frame length must be a power of two >= 8, got {frame_length}"
        )));
    }
    let hop = frame_length / 2;
    if signal.len() % hop != 0 {
        return Err(Error::dimension(format!(
            "signal length {} is not a multiple of hop {hop}",
            signal.len()
        )));
    }
    let frames = signal.len() / hop + 1;
    let bins = frame_length / 2 + 1;
    let window: Vec<f64> = (0..frame_length)
        .map(|i| (PI * (i as f64 + 0.5) / frame_length as f64).sin())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(frame_length);

    let mut out = Vec::with_capacity(signal.channel_count());
    for ch in 0..signal.channel_count() {
        let samples = signal.channel(ch);
        let mut values = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); frame_length];
        for f in 0..frames {
            let start = f as isize * hop as isize - hop as isize;
            for (i, w) in window.iter().enumerate() {
                let idx = start + i as isize;
                let s = if idx >= 0 && (idx as usize) < samples.len() {
                    samples[idx as usize]
                } else {
                    0.0
                };
                buf[i] = Complex64::new(s * w, 0.0);
            }
            fft.process(&mut buf);
            values.extend_from_slice(&buf[..bins]);
        }
        out.push(ComplexSpectra { frames, bins, values });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_tone_peaks_in_its_bin() {
        let n = 256;
        let len = 4 * n;
        let bin = 16; // cycles per frame
        let s: Vec<f64> = (0..len)
            .map(|t| (2.0 * PI * bin as f64 * t as f64 / n as f64).cos())
            .collect();
        let sig = MultichannelSignal::new(vec![s], 48_000).unwrap();
        let spectra = stft_analyze(&sig, n).unwrap();
        let sp = &spectra[0];
        // Interior frame: the strongest bin is the tone's.
        let f = sp.frames / 2;
        let (mut best, mut best_mag) = (0, 0.0);
        for b in 0..sp.bins {
            let m = sp.get(f, b).norm();
            if m > best_mag {
                best_mag = m;
                best = b;
            }
        }
        assert_eq!(best, bin);
    }

    #[test]
    fn shape_checks() {
        let sig = MultichannelSignal::zeros(2, 1024, 48_000).unwrap();
        let spectra = stft_analyze(&sig, 256).unwrap();
        assert_eq!(spectra.len(), 2);
        assert_eq!(spectra[0].frames, 1024 / 128 + 1);
        assert_eq!(spectra[0].bins, 129);
        assert!(stft_analyze(&sig, 100).is_err());
        let odd = MultichannelSignal::zeros(1, 1000, 48_000).unwrap();
        assert!(stft_analyze(&odd, 256).is_err());
    }
}
