//! The overcomplete union of MDCT layers: joint synthesis, joint analysis
//! (the adjoint of synthesis), and coefficient addressing.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdct::{mdct_analyze, mdct_synthesize, LayerCoefficients, LayerSpec};
use crate::signal::MultichannelSignal;

/// Ordered union of MDCT layers over a fixed signal length. Layer frame
/// lengths are strictly increasing powers of two and the signal length is a
/// multiple of every hop.
#[derive(Debug, Clone)]
pub struct Dictionary {
    layers: Vec<LayerSpec>,
    signal_length: usize,
}

/// The sizes used throughout the experiments in this crate.
pub const DEFAULT_LAYER_LENGTHS: [usize; 5] = [32, 128, 256, 1024, 2048];

impl Dictionary {
    pub fn new(layer_lengths: &[usize], signal_length: usize) -> Result<Self> {
        if layer_lengths.is_empty() {
            return Err(Error::validation("dictionary needs at least one layer"));
        }
        let mut layers = Vec::with_capacity(layer_lengths.len());
        for (i, &n) in layer_lengths.iter().enumerate() {
            if i > 0 && n <= layer_lengths[i - 1] {
                return Err(Error::validation(
                    "layer frame lengths must be strictly increasing",
                ));
            }
            layers.push(LayerSpec::new(n)?);
        }
        for layer in &layers {
            if signal_length == 0 || signal_length % layer.hop() != 0 {
                return Err(Error::dimension(format!(
                    "signal length {} is not a multiple of hop {} (layer {})",
                    signal_length,
                    layer.hop(),
                    layer.frame_length()
                )));
            }
        }
        Ok(Self { layers, signal_length })
    }

    /// Default five-layer dictionary {32, 128, 256, 1024, 2048}.
    pub fn default_layers(signal_length: usize) -> Result<Self> {
        Self::new(&DEFAULT_LAYER_LENGTHS, signal_length)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    /// Largest hop of any layer; signal lengths are padded to multiples of
    /// this so that every layer's framing fits.
    pub fn max_hop(&self) -> usize {
        self.layers.last().map(|l| l.hop()).unwrap_or(1)
    }

    /// Coefficient grid shape (frames, bins) of one layer at this length.
    pub fn grid_shape(&self, layer: usize) -> (usize, usize) {
        let spec = &self.layers[layer];
        (
            self.signal_length / spec.hop() + 1,
            spec.bins_per_frame(),
        )
    }

    /// Total coefficient count per channel, summed over layers.
    pub fn coefficients_per_channel(&self) -> usize {
        (0..self.layer_count())
            .map(|l| {
                let (frames, bins) = self.grid_shape(l);
                frames * bins
            })
            .sum()
    }
}

/// A coefficient address inside a [`SparseRepresentation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffAddress {
    pub layer: usize,
    pub channel: usize,
    pub frame: usize,
    pub bin: usize,
}

/// Per-layer, per-channel real coefficient grids for one dictionary.
/// `grids[layer][channel]` is that layer's frames-by-bins matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRepresentation {
    grids: Vec<Vec<LayerCoefficients>>,
    channel_count: usize,
}

impl SparseRepresentation {
    /// All-zero representation shaped for `dict` and `channel_count`.
    pub fn zeros(dict: &Dictionary, channel_count: usize) -> Self {
        let grids = (0..dict.layer_count())
            .map(|l| {
                let (frames, bins) = dict.grid_shape(l);
                (0..channel_count)
                    .map(|_| LayerCoefficients::zeros(frames, bins))
                    .collect()
            })
            .collect();
        Self { grids, channel_count }
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn layer_count(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, layer: usize, channel: usize) -> &LayerCoefficients {
        &self.grids[layer][channel]
    }

    pub fn grid_mut(&mut self, layer: usize, channel: usize) -> &mut LayerCoefficients {
        &mut self.grids[layer][channel]
    }

    /// Checks that the shapes agree with `dict` and the channel count.
    pub fn check_shape(&self, dict: &Dictionary) -> Result<()> {
        if self.grids.len() != dict.layer_count() {
            return Err(Error::dimension(format!(
                "representation has {} layers, dictionary {}",
                self.grids.len(),
                dict.layer_count()
            )));
        }
        for (l, per_channel) in self.grids.iter().enumerate() {
            let (frames, bins) = dict.grid_shape(l);
            if per_channel.len() != self.channel_count {
                return Err(Error::dimension("inconsistent channel count".to_string()));
            }
            for grid in per_channel {
                if grid.frames() != frames || grid.bins() != bins {
                    return Err(Error::dimension(format!(
                        "layer {} grid is {}x{}, expected {}x{}",
                        l,
                        grid.frames(),
                        grid.bins(),
                        frames,
                        bins
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flattens an address into a single index; inverse of
    /// [`Self::unflatten_address`]. Order: layer, channel, frame, bin.
    pub fn flatten_address(&self, addr: CoeffAddress) -> usize {
        let mut offset = 0;
        for l in 0..addr.layer {
            offset += self.grids[l].len() * self.grids[l][0].frames() * self.grids[l][0].bins();
        }
        let grid = &self.grids[addr.layer][0];
        let per_channel = grid.frames() * grid.bins();
        offset
            + addr.channel * per_channel
            + addr.frame * grid.bins()
            + addr.bin
    }

    pub fn unflatten_address(&self, mut index: usize) -> CoeffAddress {
        for (layer, per_channel) in self.grids.iter().enumerate() {
            let grid = &per_channel[0];
            let size = per_channel.len() * grid.frames() * grid.bins();
            if index < size {
                let per = grid.frames() * grid.bins();
                let channel = index / per;
                index %= per;
                return CoeffAddress {
                    layer,
                    channel,
                    frame: index / grid.bins(),
                    bin: index % grid.bins(),
                };
            }
            index -= size;
        }
        panic!("flat index out of range");
    }

    /// Total number of addressable coefficients, all channels included.
    pub fn total_len(&self) -> usize {
        self.grids
            .iter()
            .map(|per| per.len() * per[0].frames() * per[0].bins())
            .sum()
    }

    /// Count of coefficients with magnitude strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.grids
            .iter()
            .flatten()
            .map(|g| g.values().iter().filter(|v| v.abs() > threshold).count())
            .sum()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.grids
            .iter()
            .flatten()
            .flat_map(|g| g.values().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sums the per-layer MDCT syntheses of every channel: the signal `XB`
/// represented by the coefficients.
pub fn synthesize(rep: &SparseRepresentation, dict: &Dictionary) -> Result<MultichannelSignal> {
    synthesize_with_rate(rep, dict, 48_000)
}

/// [`synthesize`] with an explicit output sample rate.
pub fn synthesize_with_rate(
    rep: &SparseRepresentation,
    dict: &Dictionary,
    sample_rate: u32,
) -> Result<MultichannelSignal> {
    rep.check_shape(dict)?;
    let channels = run_per_channel(rep.channel_count(), |ch| {
        let mut acc = vec![0.0f64; dict.signal_length()];
        for (l, spec) in dict.layers().iter().enumerate() {
            let layer_sig = mdct_synthesize(rep.grid(l, ch), spec)?;
            for (a, s) in acc.iter_mut().zip(&layer_sig) {
                *a += s;
            }
        }
        Ok(acc)
    })?;
    MultichannelSignal::new(channels, sample_rate)
}

/// Adjoint of [`synthesize`]: per-layer MDCT analysis of every channel.
/// Satisfies `<analyze_adjoint(s), R> == <s, synthesize(R)>`.
pub fn analyze_adjoint(
    signal: &MultichannelSignal,
    dict: &Dictionary,
) -> Result<SparseRepresentation> {
    if signal.len() != dict.signal_length() {
        return Err(Error::dimension(format!(
            "signal length {} does not match dictionary length {}",
            signal.len(),
            dict.signal_length()
        )));
    }
    let channel_count = signal.channel_count();
    let per_channel = run_per_channel(channel_count, |ch| {
        dict.layers()
            .iter()
            .map(|spec| mdct_analyze(signal.channel(ch), spec))
            .collect::<Result<Vec<_>>>()
    })?;
    // Transpose channel-major results into layer-major grids.
    let mut grids: Vec<Vec<LayerCoefficients>> = (0..dict.layer_count()).map(|_| Vec::new()).collect();
    for channel_grids in per_channel {
        for (l, grid) in channel_grids.into_iter().enumerate() {
            grids[l].push(grid);
        }
    }
    Ok(SparseRepresentation { grids, channel_count })
}

/// Sum of absolute coefficient values over all addresses and channels.
pub fn l1_norm(rep: &SparseRepresentation) -> Result<f64> {
    let mut total = 0.0;
    for per_channel in &rep.grids {
        for grid in per_channel {
            for v in grid.values() {
                if v.is_nan() {
                    return Err(Error::validation("NaN coefficient in representation"));
                }
                total += v.abs();
            }
        }
    }
    Ok(total)
}

/// Writes one CSV per layer with the per-address coefficient magnitude
/// (Euclidean norm over channels): rows are frames, columns are bins.
/// Returns the written paths.
pub fn write_layer_csvs(
    rep: &SparseRepresentation,
    dict: &Dictionary,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    rep.check_shape(dict)?;
    let mut paths = Vec::new();
    for (l, spec) in dict.layers().iter().enumerate() {
        let path = dir.join(format!("{prefix}_layer{:04}.csv", spec.frame_length()));
        let (frames, bins) = dict.grid_shape(l);
        let mut out = String::new();
        for f in 0..frames {
            let mut row = Vec::with_capacity(bins);
            for b in 0..bins {
                let mag: f64 = (0..rep.channel_count())
                    .map(|ch| {
                        let v = rep.grid(l, ch).get(f, b);
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                row.push(format!("{mag}"));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut file = std::fs::File::create(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        file.write_all(out.as_bytes()).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

/// Maps `f` over channel indices, in parallel when a multi-threaded rayon
/// pool is active. Results keep channel order, so the output is identical
/// to the sequential path.
pub(crate) fn run_per_channel<T: Send>(
    channel_count: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if rayon::current_num_threads() > 1 && channel_count > 1 {
        (0..channel_count).into_par_iter().map(f).collect()
    } else {
        (0..channel_count).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdct::atom;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut impl Rng, channels: usize, len: usize) -> MultichannelSignal {
        MultichannelSignal::new(
            (0..channels)
                .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            48_000,
        )
        .unwrap()
    }

    fn random_rep(rng: &mut impl Rng, dict: &Dictionary, channels: usize) -> SparseRepresentation {
        let mut rep = SparseRepresentation::zeros(dict, channels);
        for l in 0..dict.layer_count() {
            for ch in 0..channels {
                for v in rep.grid_mut(l, ch).values_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
        }
        rep
    }

    fn inner(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn validates_layer_ordering_and_length() {
        assert!(Dictionary::new(&[32, 32], 1024).is_err());
        assert!(Dictionary::new(&[128, 32], 1024).is_err());
        assert!(Dictionary::new(&[], 1024).is_err());
        assert!(Dictionary::new(&[32, 128], 100).is_err());
        assert!(Dictionary::new(&[32, 128], 1024).is_ok());
        assert!(Dictionary::default_layers(16384).is_ok());
    }

    #[test]
    fn zero_round_trips() {
        let dict = Dictionary::new(&[32, 128], 1024).unwrap();
        let rep = SparseRepresentation::zeros(&dict, 2);
        let sig = synthesize(&rep, &dict).unwrap();
        assert!(sig.channels().iter().all(|c| c.iter().all(|&s| s == 0.0)));
        let back = analyze_adjoint(&sig, &dict).unwrap();
        assert_eq!(l1_norm(&back).unwrap(), 0.0);
    }

    #[test]
    fn single_layer_content_reduces_to_that_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dict = Dictionary::default_layers(4096).unwrap();
        let mut rep = SparseRepresentation::zeros(&dict, 1);
        let last = dict.layer_count() - 1;
        for v in rep.grid_mut(last, 0).values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let joint = synthesize(&rep, &dict).unwrap();
        let lone = mdct_synthesize(rep.grid(last, 0), &dict.layers()[last]).unwrap();
        for (a, b) in joint.channel(0).iter().zip(&lone) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_unit_coefficient_per_layer_matches_atom_sum() {
        let dict = Dictionary::new(&[32, 128, 256], 1024).unwrap();
        let mut rep = SparseRepresentation::zeros(&dict, 1);
        let picks = [(0usize, 3usize, 7usize), (1, 2, 30), (2, 1, 100)];
        for &(l, f, b) in &picks {
            rep.grid_mut(l, 0).set(f, b, 1.0);
        }
        let joint = synthesize(&rep, &dict).unwrap();
        let mut expect = vec![0.0; 1024];
        for &(l, f, b) in &picks {
            let a = atom(&dict.layers()[l], 1024, f, b).unwrap();
            for (e, s) in expect.iter_mut().zip(&a) {
                *e += s;
            }
        }
        for (a, b) in joint.channel(0).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
        // Atoms from different layers are not orthogonal in general, so the
        // energy is close to, but not exactly, the atom count.
        let energy = joint.energy();
        assert!((energy - 3.0).abs() < 1.0, "energy {energy}");
    }

    #[test]
    fn adjoint_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dict = Dictionary::default_layers(2048).unwrap();
        let s = random_signal(&mut rng, 2, 2048);
        let r = random_rep(&mut rng, &dict, 2);
        let a_s = analyze_adjoint(&s, &dict).unwrap();
        let synth_r = synthesize(&r, &dict).unwrap();
        let mut lhs = 0.0;
        for l in 0..dict.layer_count() {
            for ch in 0..2 {
                lhs += inner(a_s.grid(l, ch).values(), r.grid(l, ch).values());
            }
        }
        let mut rhs = 0.0;
        for ch in 0..2 {
            rhs += inner(s.channel(ch), synth_r.channel(ch));
        }
        assert!(
            (lhs - rhs).abs() / rhs.abs().max(1.0) < 1e-9,
            "adjoint identity violated: {lhs} vs {rhs}"
        );
    }

    #[test]
    fn single_layer_dictionary_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dict = Dictionary::new(&[256], 2048).unwrap();
        let s = random_signal(&mut rng, 1, 2048);
        let rep = analyze_adjoint(&s, &dict).unwrap();
        let back = synthesize(&rep, &dict).unwrap();
        let err: f64 = back
            .channel(0)
            .iter()
            .zip(s.channel(0))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err / s.energy().sqrt() < 1e-9);
    }

    #[test]
    fn l1_norm_arithmetic_and_homogeneity() {
        let dict = Dictionary::new(&[32], 64).unwrap();
        let mut rep = SparseRepresentation::zeros(&dict, 1);
        rep.grid_mut(0, 0).set(0, 0, 1.0);
        rep.grid_mut(0, 0).set(1, 3, -2.0);
        rep.grid_mut(0, 0).set(2, 5, 0.5);
        assert_eq!(l1_norm(&rep).unwrap(), 3.5);
        for v in rep.grid_mut(0, 0).values_mut() {
            *v *= 3.0;
        }
        assert_eq!(l1_norm(&rep).unwrap(), 10.5);
        rep.grid_mut(0, 0).set(0, 1, f64::NAN);
        assert!(l1_norm(&rep).is_err());
    }

    #[test]
    fn frame_operator_norm_is_layer_count() {
        // Power iteration on synthesize(analyze_adjoint(.)); for a union of
        // Parseval layers this operator is exactly layer_count * identity.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dict = Dictionary::default_layers(2048).unwrap();
        let mut v: Vec<f64> = (0..2048).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut norm_est = 0.0;
        for _ in 0..8 {
            let s = MultichannelSignal::new(vec![v.clone()], 48_000).unwrap();
            let w = synthesize(&analyze_adjoint(&s, &dict).unwrap(), &dict).unwrap();
            let w = w.channel(0);
            norm_est = inner(w, w).sqrt() / inner(&v, &v).sqrt();
            let scale = 1.0 / inner(w, w).sqrt();
            v = w.iter().map(|x| x * scale).collect();
        }
        assert!(norm_est <= 5.0 + 1e-6, "operator norm {norm_est}");
        assert!(norm_est >= 5.0 - 1e-6, "operator norm {norm_est}");
    }

    #[test]
    fn addressing_round_trips() {
        let dict = Dictionary::new(&[32, 128], 512).unwrap();
        let rep = SparseRepresentation::zeros(&dict, 3);
        let total = rep.total_len();
        assert_eq!(total, 3 * dict.coefficients_per_channel());
        for index in 0..total {
            let addr = rep.unflatten_address(index);
            assert_eq!(rep.flatten_address(addr), index);
        }
    }
}
