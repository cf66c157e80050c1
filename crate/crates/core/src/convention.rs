//! First-order ambisonic channel conventions and conversion between them.

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// How the four first-order channels are ordered and scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbisonicConvention {
    /// W, X, Y, Z with W carrying the pressure scaled by 1/sqrt(2) (the
    /// internal convention of the plane-wave model; first-order FuMa uses
    /// the same scaling and order).
    PaperBFormat,
    /// ACN channel order (W, Y, Z, X) with SN3D normalization; channel 0
    /// is unscaled pressure. The AmbiX standard.
    AmbixSn3d,
}

/// Converts a 4-channel first-order signal between conventions.
///
/// PaperBFormat -> AmbixSn3d multiplies W by sqrt(2) and reorders
/// (W, X, Y, Z) to (W, Y, Z, X); the round trip is the identity.
pub fn convert_convention(
    signal: &MultichannelSignal,
    from: AmbisonicConvention,
    to: AmbisonicConvention,
) -> Result<MultichannelSignal> {
    if signal.channel_count() != 4 {
        return Err(Error::dimension(format!(
            "first-order conversion expects 4 channels, got {}",
            signal.channel_count()
        )));
    }
    if from == to {
        return Ok(signal.clone());
    }
    let ch = signal.channels();
    let channels = match (from, to) {
        (AmbisonicConvention::PaperBFormat, AmbisonicConvention::AmbixSn3d) => vec![
            ch[0].iter().map(|v| v * SQRT2).collect(),
            ch[2].clone(), // Y
            ch[3].clone(), // Z
            ch[1].clone(), // X
        ],
        (AmbisonicConvention::AmbixSn3d, AmbisonicConvention::PaperBFormat) => vec![
            ch[0].iter().map(|v| v / SQRT2).collect(),
            ch[3].clone(), // X
            ch[1].clone(), // Y
            ch[2].clone(), // Z
        ],
        _ => unreachable!("identical conventions handled above"),
    };
    MultichannelSignal::new(channels, signal.sample_rate())
}
