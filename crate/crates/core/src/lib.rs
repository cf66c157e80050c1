//! Upmixing of first-order ambisonics (B-format) to higher-order ambisonics.
//!
//! The pipeline decomposes the four input channels over a union of MDCT
//! bases of different frame lengths with an L1-minimizing iterative solver,
//! extracts a plane-wave direction plus an omnidirectional residual from
//! every surviving real coefficient, re-encodes each plane wave with real
//! spherical harmonics up to order 7, and resynthesizes the higher-order
//! channels through the same transform layers. A complex-spectrum two-wave
//! estimator is included as the classical baseline for direction analysis.

pub mod convention;
pub mod dictionary;
pub mod error;
pub mod fieldmap;
pub mod mdct;
pub mod planewave;
pub mod signal;
pub mod solver;
pub mod spherical;
pub mod stft;
pub mod upmix;
pub mod wav;

pub use convention::{convert_convention, AmbisonicConvention};
pub use dictionary::{
    analyze_adjoint, l1_norm, synthesize, CoeffAddress, Dictionary, SparseRepresentation,
    DEFAULT_LAYER_LENGTHS,
};
pub use error::{Error, Result};
pub use fieldmap::{energy_map, write_map, EnergyMap, MapFormat};
pub use mdct::{mdct_analyze, mdct_synthesize, LayerCoefficients, LayerSpec};
pub use planewave::{
    encode_estimate_foa, extract_harpex, extract_mdct, FoaComplexBin, FoaRealBin, HarpexEstimate,
    HarpexFailure, PlaneWaveEstimate,
};
pub use signal::MultichannelSignal;
pub use solver::{alpha_at, aliasing_loss, solve, SolverConfig, SolverTrace, TraceRecord};
pub use spherical::{acn_index, channel_count, n3d_scale, sh_encode, sh_omni, ShVector};
pub use stft::{stft_analyze, ComplexSpectra};
pub use upmix::{truncate_order, upmix, upmix_with_traces, UpmixConfig, UpmixMode};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav};
