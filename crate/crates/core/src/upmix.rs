//! End-to-end upmixing: B-format input, MDCT-domain decomposition
//! (single-layer linear or sparse multi-layer), per-coefficient plane-wave
//! extraction, spherical-harmonic re-encoding, and per-channel resynthesis
//! into an AmbiX higher-order signal.
//!
//! Long inputs are processed in fixed-size blocks whose resyntheses are
//! joined with a raised-cosine crossfade.

use crate::dictionary::{analyze_adjoint, run_per_channel, Dictionary, SparseRepresentation, DEFAULT_LAYER_LENGTHS};
use crate::error::{Error, Result};
use crate::mdct::mdct_synthesize;
use crate::planewave::{extract_mdct, FoaRealBin};
use crate::signal::MultichannelSignal;
use crate::solver::{solve, SolverConfig, SolverTrace};
use crate::spherical::{channel_count, sh_encode};

/// Decomposition mode of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpmixMode {
    /// Plain analysis in the largest configured layer only.
    Linear,
    /// Sparse multi-layer decomposition with the aliasing penalty.
    Sparse,
    /// Sparse decomposition without the aliasing penalty.
    SparseNoAlias,
}

/// Pipeline settings.
#[derive(Debug, Clone)]
pub struct UpmixConfig {
    /// Output ambisonic order, 1..=7.
    pub order: usize,
    pub mode: UpmixMode,
    /// MDCT layer lengths, ascending.
    pub layer_lengths: Vec<usize>,
    pub solver: SolverConfig,
    /// Block length for long inputs; rounded up to a multiple of the
    /// largest hop.
    pub block_len: usize,
    /// Crossfade between adjacent blocks, in samples.
    pub crossfade_len: usize,
}

impl Default for UpmixConfig {
    fn default() -> Self {
        Self {
            order: 7,
            mode: UpmixMode::Sparse,
            layer_lengths: DEFAULT_LAYER_LENGTHS.to_vec(),
            solver: SolverConfig::default(),
            block_len: 32_768,
            crossfade_len: 1024,
        }
    }
}

/// Upmixes a 4-channel B-format signal (paper convention: W carries the
/// 1/sqrt(2) pressure scaling) to an AmbiX signal of `config.order`.
pub fn upmix(foa: &MultichannelSignal, config: &UpmixConfig) -> Result<MultichannelSignal> {
    upmix_with_traces(foa, config).map(|(signal, _)| signal)
}

/// [`upmix`] that also returns the solver trace of every processed block
/// (empty in linear mode).
pub fn upmix_with_traces(
    foa: &MultichannelSignal,
    config: &UpmixConfig,
) -> Result<(MultichannelSignal, Vec<SolverTrace>)> {
    if foa.channel_count() != 4 {
        return Err(Error::dimension(format!(
            "upmix input must have 4 channels, got {}",
            foa.channel_count()
        )));
    }
    if config.order < 1 || config.order > crate::spherical::MAX_ORDER {
        return Err(Error::validation(format!(
            "order must be 1..=7, got {}",
            config.order
        )));
    }
    let out_channels = channel_count(config.order);
    let len = foa.len();
    if len == 0 {
        return Ok((
            MultichannelSignal::zeros(out_channels, 0, foa.sample_rate())?,
            Vec::new(),
        ));
    }
    let layer_lengths = effective_layers(config);
    let max_hop = layer_lengths.iter().max().unwrap() / 2;
    let block = config.block_len.max(1).div_ceil(max_hop) * max_hop;
    let fade = config.crossfade_len.min(block / 2);

    let mut out = vec![vec![0.0f64; len]; out_channels];
    let mut traces = Vec::new();
    let hop = if len > block { block - fade } else { block };
    let mut start = 0;
    loop {
        let end = (start + block).min(len);
        let is_first = start == 0;
        let is_last = end == len;
        let padded = (end - start).div_ceil(max_hop) * max_hop;

        let mut channels = Vec::with_capacity(4);
        for ch in 0..4 {
            let mut buf = vec![0.0f64; padded];
            buf[..end - start].copy_from_slice(&foa.channel(ch)[start..end]);
            channels.push(buf);
        }
        let block_in = MultichannelSignal::new(channels, foa.sample_rate())?;
        let (hoa, trace) = upmix_block(&block_in, &layer_lengths, config)?;
        if let Some(t) = trace {
            traces.push(t);
        }

        for (c, out_ch) in out.iter_mut().enumerate() {
            let src = hoa.channel(c);
            let span = end - start;
            for (t, out_sample) in out_ch[start..end].iter_mut().enumerate() {
                let mut w = 1.0;
                if !is_first && t < fade {
                    w *= fade_in(t, fade);
                }
                if !is_last && span - t <= fade {
                    w *= 1.0 - fade_in(t - (span - fade), fade);
                }
                *out_sample += w * src[t];
            }
        }

        if is_last {
            break;
        }
        start += hop;
    }
    Ok((MultichannelSignal::new(out, foa.sample_rate())?, traces))
}

/// Raised-cosine fade-in weight for sample t of a fade of length `fade`;
/// the complementary fade-out at the same offset sums to exactly 1.
fn fade_in(t: usize, fade: usize) -> f64 {
    let x = (t as f64 + 0.5) / fade as f64;
    0.5 * (1.0 - (std::f64::consts::PI * x).cos())
}

fn effective_layers(config: &UpmixConfig) -> Vec<usize> {
    match config.mode {
        // Table-style linear baseline: analysis in the largest layer only.
        UpmixMode::Linear => vec![*config.layer_lengths.iter().max().unwrap_or(&2048)],
        _ => config.layer_lengths.clone(),
    }
}

/// Processes one block: decompose, extract one plane wave per coefficient
/// address, re-encode at the output order, resynthesize all channels.
fn upmix_block(
    foa: &MultichannelSignal,
    layer_lengths: &[usize],
    config: &UpmixConfig,
) -> Result<(MultichannelSignal, Option<SolverTrace>)> {
    let dict = Dictionary::new(layer_lengths, foa.len())?;
    let out_channels = channel_count(config.order);

    let (rep, trace) = match config.mode {
        UpmixMode::Linear => (analyze_adjoint(foa, &dict)?, None),
        UpmixMode::Sparse | UpmixMode::SparseNoAlias => {
            let mut solver = config.solver.clone();
            if config.mode == UpmixMode::SparseNoAlias {
                solver.alias_weight = 0.0;
            }
            let (rep, trace) = solve(foa, &dict, &solver)?;
            (rep, Some(trace))
        }
    };

    // One HOA coefficient grid per output channel, filled address by
    // address: amp_directional * Y(direction) on every channel plus the
    // omni residual on ACN 0.
    let mut hoa = SparseRepresentation::zeros(&dict, out_channels);
    for l in 0..dict.layer_count() {
        let per = rep.grid(l, 0).values().len();
        for i in 0..per {
            let bin = FoaRealBin::new(
                rep.grid(l, 0).values()[i],
                rep.grid(l, 1).values()[i],
                rep.grid(l, 2).values()[i],
                rep.grid(l, 3).values()[i],
            );
            if bin.w == 0.0 && bin.x == 0.0 && bin.y == 0.0 && bin.z == 0.0 {
                continue;
            }
            let est = extract_mdct(&bin)?;
            match est.direction {
                Some(d) => {
                    let sh = sh_encode(d, config.order)?;
                    for (c, g) in sh.values().iter().enumerate() {
                        let mut v = est.amp_directional * g;
                        if c == 0 {
                            v += est.amp_omni;
                        }
                        hoa.grid_mut(l, c).values_mut()[i] = v;
                    }
                }
                None => {
                    hoa.grid_mut(l, 0).values_mut()[i] = est.amp_omni;
                }
            }
        }
    }
    let channels = run_per_channel(out_channels, |c| {
        let mut acc = vec![0.0f64; dict.signal_length()];
        for (l, spec) in dict.layers().iter().enumerate() {
            let sig = mdct_synthesize(hoa.grid(l, c), spec)?;
            for (a, s) in acc.iter_mut().zip(&sig) {
                *a += s;
            }
        }
        Ok(acc)
    })?;
    Ok((
        MultichannelSignal::new(channels, foa.sample_rate())?,
        trace,
    ))
}

/// Keeps the first (order+1)^2 channels of a higher-order signal.
pub fn truncate_order(hoa: &MultichannelSignal, order: usize) -> Result<MultichannelSignal> {
    let n = hoa.channel_count();
    let side = (n as f64).sqrt().round() as usize;
    if side < 2 || side * side != n {
        return Err(Error::dimension(format!(
            "channel count {n} is not (L+1)^2 for an ambisonic order L >= 1"
        )));
    }
    let have_order = side - 1;
    if order > have_order {
        return Err(Error::dimension(format!(
            "cannot truncate {have_order}th-order signal to order {order}"
        )));
    }
    let keep = channel_count(order);
    MultichannelSignal::new(
        hoa.channels()[..keep].to_vec(),
        hoa.sample_rate(),
    )
}
