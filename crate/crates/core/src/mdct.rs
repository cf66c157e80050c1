//! Critically sampled MDCT analysis/synthesis for one frame length.
//!
//! One layer = one frame length N with a sine window and hop N/2. Atoms are
//! scaled by sqrt(4/N) so every windowed atom has unit norm; with the sine
//! window the frame set is Parseval (coefficient energy equals signal
//! energy) and overlap-add synthesis reconstructs the input exactly.
//!
//! Framing pads N/2 zeros at both ends so every sample is covered by two
//! frames; synthesis trims the pads. A signal of length L (multiple of N/2)
//! therefore maps to L/(N/2) + 1 frames of N/2 bins each.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// One MDCT basis of the multi-resolution union: frame length plus the
/// implied sine window and hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    frame_length: usize,
}

impl LayerSpec {
    /// Frame length must be a power of two and at least 8.
    pub fn new(frame_length: usize) -> Result<Self> {
        if frame_length < 8 || !frame_length.is_power_of_two() {
            return Err(Error::validation(format!(
                "MDCT frame length must be a power of two >= 8, got {frame_length}"
            )));
        }
        Ok(Self { frame_length })
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    /// Hop between frames, N/2.
    pub fn hop(&self) -> usize {
        self.frame_length / 2
    }

    pub fn bins_per_frame(&self) -> usize {
        self.frame_length / 2
    }

    /// Sine window w[n] = sin(pi (n + 0.5) / N). Satisfies the
    /// Princen-Bradley condition w[n]^2 + w[n + N/2]^2 = 1.
    pub fn window(&self) -> Vec<f64> {
        let n = self.frame_length;
        (0..n)
            .map(|i| (PI * (i as f64 + 0.5) / n as f64).sin())
            .collect()
    }

    /// Frame count for a signal of `len` samples under the padding rule.
    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len % self.hop() != 0 {
            return Err(Error::dimension(format!(
                "signal length {} is not a multiple of hop {}",
                len,
                self.hop()
            )));
        }
        Ok(len / self.hop() + 1)
    }
}

/// The coefficient grid of one layer for one channel: `frames` rows of
/// `bins` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCoefficients {
    frames: usize,
    bins: usize,
    values: Vec<f64>,
}

impl LayerCoefficients {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self { frames, bins, values: vec![0.0; frames * bins] }
    }

    pub fn from_values(frames: usize, bins: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != frames * bins {
            return Err(Error::dimension(format!(
                "coefficient grid expects {}x{}={} values, got {}",
                frames,
                bins,
                frames * bins,
                values.len()
            )));
        }
        Ok(Self { frames, bins, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.values[frame * self.bins + bin]
    }

    pub fn set(&mut self, frame: usize, bin: usize, value: f64) {
        self.values[frame * self.bins + bin] = value;
    }

    pub fn frame_row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// MDCT analysis of one channel. The signal length must be a multiple of
/// the hop N/2; the caller pads. Coefficient (f, k) is the inner product of
/// the zero-extended signal with the unit-norm windowed atom (f, k).
pub fn mdct_analyze(signal: &[f64], spec: &LayerSpec) -> Result<LayerCoefficients> {
    let hop = spec.hop();
    let frames = spec.frame_count(signal.len())?;
    let bins = spec.bins_per_frame();
    let window = spec.window();
    let scale = (2.0 / bins as f64).sqrt();
    let plan = dct4_plan(bins);

    let mut out = LayerCoefficients::zeros(frames, bins);
    let mut windowed = vec![0.0; spec.frame_length];
    let mut folded = vec![0.0; bins];
    for f in 0..frames {
        // Frame f covers padded samples [f*hop, f*hop + N); the pad is hop
        // zeros on each side, so signal index = padded index - hop.
        let start = f as isize * hop as isize - hop as isize;
        for (i, w) in window.iter().enumerate() {
            let idx = start + i as isize;
            let s = if idx >= 0 && (idx as usize) < signal.len() {
                signal[idx as usize]
            } else {
                0.0
            };
            windowed[i] = s * w;
        }
        fold_frame(&windowed, &mut folded);
        let row = &mut out.values[f * bins..(f + 1) * bins];
        plan.forward(&folded, row);
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

/// Inverse of [`mdct_analyze`]: windowed overlap-add of per-frame inverse
/// DCT-IV expansions, with the N/2-sample pads trimmed. Perfect
/// reconstruction: `mdct_synthesize(mdct_analyze(x)) == x` up to rounding.
pub fn mdct_synthesize(coeffs: &LayerCoefficients, spec: &LayerSpec) -> Result<Vec<f64>> {
    let hop = spec.hop();
    let bins = spec.bins_per_frame();
    if coeffs.bins != bins {
        return Err(Error::dimension(format!(
            "coefficient grid has {} bins, layer expects {}",
            coeffs.bins, bins
        )));
    }
    if coeffs.frames == 0 {
        return Err(Error::dimension("coefficient grid has no frames"));
    }
    let len = (coeffs.frames - 1) * hop;
    let window = spec.window();
    let scale = (2.0 / bins as f64).sqrt();
    let plan = dct4_plan(bins);

    let mut padded = vec![0.0; len + 2 * hop];
    let mut spectrum = vec![0.0; bins];
    let mut frame = vec![0.0; spec.frame_length];
    for f in 0..coeffs.frames {
        plan.forward(coeffs.frame_row(f), &mut spectrum);
        unfold_frame(&spectrum, &mut frame);
        let base = f * hop;
        for (i, w) in window.iter().enumerate() {
            padded[base + i] += frame[i] * w * scale;
        }
    }
    padded.drain(..hop);
    padded.truncate(len);
    Ok(padded)
}

/// Fold a windowed frame of length N into the length-N/2 DCT-IV input.
/// With quarters a,b,c,d of the frame: u = [-rev(c) - d, a - rev(b)].
fn fold_frame(frame: &[f64], out: &mut [f64]) {
    let m = out.len();
    let h = m / 2;
    debug_assert_eq!(frame.len(), 2 * m);
    for i in 0..h {
        out[i] = -frame[3 * h - 1 - i] - frame[3 * h + i];
    }
    for i in h..m {
        out[i] = frame[i - h] - frame[3 * h - 1 - i];
    }
}

/// Transpose of [`fold_frame`]: expand a length-N/2 DCT-IV output into the
/// length-N frame contribution.
fn unfold_frame(spectrum: &[f64], out: &mut [f64]) {
    let m = spectrum.len();
    let h = m / 2;
    debug_assert_eq!(out.len(), 2 * m);
    for n in 0..h {
        out[n] = spectrum[n + h];
    }
    for n in h..3 * h {
        out[n] = -spectrum[3 * h - 1 - n];
    }
    for n in 3 * h..4 * h {
        out[n] = -spectrum[n - 3 * h];
    }
}

/// Orthogonal-kernel DCT-IV of length M computed with a complex FFT of
/// length M/2: X_k = sum_m u_m cos(pi/M (m+1/2)(k+1/2)). Involutory up to
/// the factor M/2, which the MDCT scaling absorbs.
struct Dct4Plan {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    twiddle: Vec<Complex64>,
}

impl Dct4Plan {
    fn new(len: usize) -> Self {
        assert!(len >= 2 && len % 2 == 0, "DCT-IV length must be even");
        let half = len / 2;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(half);
        let twiddle = (0..half)
            .map(|t| {
                let phase = -PI * (8 * t + 1) as f64 / (8 * len) as f64;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect();
        Self { len, fft, twiddle }
    }

    fn forward(&self, input: &[f64], output: &mut [f64]) {
        let m = self.len;
        let h = m / 2;
        debug_assert_eq!(input.len(), m);
        debug_assert_eq!(output.len(), m);
        let mut buf: Vec<Complex64> = (0..h)
            .map(|t| Complex64::new(input[2 * t], input[m - 1 - 2 * t]) * self.twiddle[t])
            .collect();
        self.fft.process(&mut buf);
        for (s, v) in buf.iter().enumerate() {
            let y = v * self.twiddle[s];
            output[2 * s] = y.re;
            output[m - 1 - 2 * s] = -y.im;
        }
    }
}

fn dct4_plan(len: usize) -> Arc<Dct4Plan> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Dct4Plan>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("DCT-IV plan cache poisoned");
    guard
        .entry(len)
        .or_insert_with(|| Arc::new(Dct4Plan::new(len)))
        .clone()
}

/// Builds the unit-norm synthesis atom (frame, bin) of a layer as a time
/// signal of length `len`. Used by tests and diagnostics; the transform
/// itself never materializes atoms.
pub fn atom(spec: &LayerSpec, len: usize, frame: usize, bin: usize) -> Result<Vec<f64>> {
    let frames = spec.frame_count(len)?;
    if frame >= frames || bin >= spec.bins_per_frame() {
        return Err(Error::dimension(format!(
            "atom ({frame},{bin}) outside {}x{} grid",
            frames,
            spec.bins_per_frame()
        )));
    }
    let mut coeffs = LayerCoefficients::zeros(frames, spec.bins_per_frame());
    coeffs.set(frame, bin, 1.0);
    mdct_synthesize(&coeffs, spec)
}
