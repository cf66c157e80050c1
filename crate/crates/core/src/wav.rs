//! RIFF/WAVE reading and writing.
//!
//! Reads IEEE float32 (format code 3) and 16/24-bit PCM (format code 1),
//! deinterleaving into a [`MultichannelSignal`]. Writes float32 only, so a
//! write/read round trip of float32 data is bit-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Reads a WAV file into deinterleaved f64 channels. Integer PCM samples
/// are normalized by 2^(bits-1).
pub fn read_wav(path: &Path) -> Result<MultichannelSignal> {
    let data = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_wav(&data)
}

/// Parses WAV bytes; see [`read_wav`].
pub fn parse_wav(data: &[u8]) -> Result<MultichannelSignal> {
    if data.len() < 12 {
        return Err(Error::WavParse {
            chunk: "RIFF",
            detail: format!("file too small ({} bytes)", data.len()),
        });
    }
    if &data[0..4] != b"RIFF" {
        return Err(Error::WavParse {
            chunk: "RIFF",
            detail: "missing RIFF magic".to_string(),
        });
    }
    if &data[8..12] != b"WAVE" {
        return Err(Error::WavParse {
            chunk: "RIFF",
            detail: "missing WAVE form type".to_string(),
        });
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // code, channels, rate, bits
    let mut audio: Option<&[u8]> = None;
    while pos + 8 <= data.len() {
        let id: [u8; 4] = data[pos..pos + 4].try_into().unwrap();
        let size = u32::from_le_bytes(data[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if &id == b"fmt " {
            if size < 16 || body_start + size > data.len() {
                return Err(Error::WavParse {
                    chunk: "fmt ",
                    detail: format!("chunk truncated (declared {size} bytes)"),
                });
            }
            let b = &data[body_start..];
            fmt = Some((
                u16::from_le_bytes([b[0], b[1]]),
                u16::from_le_bytes([b[2], b[3]]),
                u32::from_le_bytes([b[4], b[5], b[6], b[7]]),
                u16::from_le_bytes([b[14], b[15]]),
            ));
        } else if &id == b"data" {
            if body_start + size > data.len() {
                return Err(Error::WavParse {
                    chunk: "data",
                    detail: format!(
                        "chunk truncated: declared {size} bytes, {} available",
                        data.len() - body_start
                    ),
                });
            }
            audio = Some(&data[body_start..body_start + size]);
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        pos = body_start + size + (size & 1);
    }

    let (code, channel_count, sample_rate, bits) = fmt.ok_or(Error::WavParse {
        chunk: "fmt ",
        detail: "chunk missing".to_string(),
    })?;
    let audio = audio.ok_or(Error::WavParse {
        chunk: "data",
        detail: "chunk missing".to_string(),
    })?;
    if channel_count == 0 {
        return Err(Error::WavParse {
            chunk: "fmt ",
            detail: "zero channels".to_string(),
        });
    }
    if sample_rate == 0 {
        return Err(Error::WavParse {
            chunk: "fmt ",
            detail: "zero sample rate".to_string(),
        });
    }

    let bytes_per_sample = match (code, bits) {
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        _ => {
            return Err(Error::UnsupportedFormat {
                format_code: code,
                bits,
            })
        }
    };
    let frame_bytes = bytes_per_sample * channel_count as usize;
    if audio.len() % frame_bytes != 0 {
        return Err(Error::WavParse {
            chunk: "data",
            detail: format!(
                "size {} is not a whole number of {frame_bytes}-byte frames",
                audio.len()
            ),
        });
    }
    let frames = audio.len() / frame_bytes;
    let mut channels = vec![Vec::with_capacity(frames); channel_count as usize];
    let mut cursor = 0usize;
    for _ in 0..frames {
        for channel in channels.iter_mut() {
            let s = match (code, bits) {
                (FORMAT_IEEE_FLOAT, 32) => f32::from_le_bytes(
                    audio[cursor..cursor + 4].try_into().unwrap(),
                ) as f64,
                (FORMAT_PCM, 16) => {
                    let v = i16::from_le_bytes(audio[cursor..cursor + 2].try_into().unwrap());
                    v as f64 / 32768.0
                }
                (FORMAT_PCM, 24) => {
                    let v = i32::from_le_bytes([
                        0,
                        audio[cursor],
                        audio[cursor + 1],
                        audio[cursor + 2],
                    ]) >> 8;
                    v as f64 / 8_388_608.0
                }
                _ => unreachable!(),
            };
            channel.push(s);
            cursor += bytes_per_sample;
        }
    }
    MultichannelSignal::new(channels, sample_rate)
}

/// Writes a signal as an interleaved float32 WAV (format code 3).
/// Refuses signals containing NaN or infinite samples.
pub fn write_wav(signal: &MultichannelSignal, path: &Path) -> Result<()> {
    let bytes = encode_wav(signal)?;
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Encodes a signal as float32 WAV bytes; see [`write_wav`].
pub fn encode_wav(signal: &MultichannelSignal) -> Result<Vec<u8>> {
    if signal.channel_count() > usize::from(u16::MAX) {
        return Err(Error::validation(format!(
            "too many channels for WAV: {}",
            signal.channel_count()
        )));
    }
    if signal.has_non_finite() {
        return Err(Error::validation(
            "signal contains NaN or infinite samples",
        ));
    }
    let channels = signal.channel_count() as u32;
    let frames = signal.len() as u32;
    let block_align = channels * 4;
    let data_size = frames * block_align;
    let riff_size = 4 + (8 + 16) + (8 + data_size);

    let mut out = Vec::with_capacity(riff_size as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_size.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&signal.sample_rate().to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate() * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for t in 0..signal.len() {
        for ch in signal.channels() {
            out.extend_from_slice(&(ch[t] as f32).to_le_bytes());
        }
    }
    Ok(out)
}
