//! 16-bit PCM mono WAV encoding and decoding.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sonify::AudioBuffer;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("unsupported wav format: {0}")]
    Unsupported(String),
    #[error("truncated wav: {0}")]
    Truncated(&'static str),
    #[error("audio too long for a RIFF container ({0} samples)")]
    TooLong(usize),
}

/// Float sample to PCM16: clamp to `[-1, 1]`, scale by 32768 below zero and
/// 32767 above, round to nearest.
pub fn quantize(x: f64) -> i16 {
    let x = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    let scaled = if x < 0.0 { x * 32768.0 } else { x * 32767.0 };
    scaled.round() as i16
}

/// Inverse of [`quantize`] on its image.
pub fn dequantize(s: i16) -> f64 {
    if s < 0 {
        s as f64 / 32768.0
    } else {
        s as f64 / 32767.0
    }
}

/// Complete file image: RIFF header, 16-byte `fmt ` chunk, `data` chunk.
pub fn encode_wav(buffer: &AudioBuffer) -> Result<Vec<u8>, WavError> {
    let data_len = buffer
        .samples
        .len()
        .checked_mul(2)
        .filter(|n| *n <= (u32::MAX - 36) as usize)
        .ok_or(WavError::TooLong(buffer.samples.len()))? as u32;
    let channels: u16 = 1;
    let bits: u16 = 16;
    let block_align = channels * bits / 8;
    let byte_rate = buffer.sample_rate_hz * block_align as u32;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &x in &buffer.samples {
        out.extend_from_slice(&quantize(x).to_le_bytes());
    }
    Ok(out)
}

pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), WavError> {
    let path = path.as_ref();
    let bytes = encode_wav(buffer)?;
    fs::write(path, bytes).map_err(|source| WavError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Decoded PCM16 mono file.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcm16 {
    pub sample_rate_hz: u32,
    pub samples: Vec<i16>,
}

impl Pcm16 {
    pub fn to_audio(&self) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples.iter().map(|&s| dequantize(s)).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decode a mono 16-bit PCM WAV image. Unknown chunks are skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<Pcm16, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWave);
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(len)
            .ok_or(WavError::Truncated("chunk length"))?;
        if end > bytes.len() {
            return Err(WavError::Truncated("chunk body"));
        }
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(WavError::Truncated("fmt chunk"));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or(WavError::Truncated("data before fmt"))?;
                if tag != 1 || channels != 1 || bits != 16 {
                    return Err(WavError::Unsupported(format!(
                        "format tag {tag}, {channels} channels, {bits} bits (need PCM mono 16-bit)"
                    )));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect();
                return Ok(Pcm16 {
                    sample_rate_hz: rate,
                    samples,
                });
            }
            _ => {}
        }
        // chunks are padded to even length
        pos = end + (len & 1);
    }
    Err(WavError::Truncated("no data chunk"))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Pcm16, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(&bytes)
}
