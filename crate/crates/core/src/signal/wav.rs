use std::fs;
use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
}

/// Reads a 16-bit PCM RIFF/WAVE file and downmixes it to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let bytes = fs::read(path)?;
    parse_wav(&bytes)
}

/// Parses an in-memory RIFF/WAVE image. Channels are averaged and samples scaled by 1/32768.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE signature".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        // Writers sometimes leave a streaming placeholder size on the data chunk.
        let body_end = body_start.saturating_add(size).min(bytes.len());
        if id != b"data" && body_start + size > bytes.len() {
            return Err(Error::Format(format!(
                "chunk {:?} overruns file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        pos = body_start + size + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::Format("no fmt chunk before data".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;
    if fmt.channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }
    let channels = fmt.channels as usize;
    let frame_bytes = 2 * channels;
    if fmt.block_align as usize != frame_bytes {
        return Err(Error::Format(format!(
            "block align {} does not match {} channels of 16-bit samples",
            fmt.block_align, channels
        )));
    }
    let n_frames = data.len() / frame_bytes;
    if n_frames == 0 {
        return Err(Error::EmptyInput("data chunk holds no sample frames".into()));
    }

    let scale = 1.0 / 32768.0;
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64)
                .sum();
            sum / channels as f64 * scale
        })
        .collect();
    AudioBuffer::new(samples, fmt.sample_rate)
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::Format("fmt chunk shorter than 16 bytes".into()));
    }
    let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
    let mut format = u16_at(0);
    if format == FORMAT_EXTENSIBLE {
        // Sub-format GUID starts at offset 24; its first two bytes carry the format tag.
        if body.len() < 40 {
            return Err(Error::Format("truncated WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        format = u16_at(24);
    }
    let bits_per_sample = u16_at(14);
    if format != FORMAT_PCM {
        return Err(Error::UnsupportedFormat(format!(
            "format tag {format:#06x} is not integer PCM"
        )));
    }
    if bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{bits_per_sample}-bit PCM; only 16-bit is accepted"
        )));
    }
    Ok(FmtChunk {
        channels: u16_at(2),
        sample_rate: u32::from_le_bytes(body[4..8].try_into().unwrap()),
        block_align: u16_at(12),
    })
}
