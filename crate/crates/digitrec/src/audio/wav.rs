//! RIFF/WAVE reader and writer for uncompressed integer PCM.
//!
//! Reading accepts 8-bit unsigned, 16/24/32-bit signed little-endian payloads
//! and downmixes multi-channel audio to mono by averaging. Writing emits
//! mono files at 8, 16 or 24 bits.

use super::{AudioBuffer, AudioError, Result};
use std::fs;
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = fs::read(path)?;
    read_wav_bytes(&bytes)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer> {
    let corrupt = |msg: &str| AudioError::CorruptHeader(msg.to_string());
    if bytes.len() < 12 {
        return Err(corrupt("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(corrupt("missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(corrupt("missing WAVE marker"));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(corrupt("chunk extends past end of file"));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt("fmt chunk truncated"));
                }
                let mut format = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
                let bits = u16::from_le_bytes([body[14], body[15]]);
                if format == FORMAT_EXTENSIBLE {
                    // SubFormat GUID starts at offset 24 of the extension;
                    // its first two bytes carry the real format code.
                    if size >= 40 {
                        format = u16::from_le_bytes([body[24], body[25]]);
                    }
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_start + size + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| corrupt("no fmt chunk"))?;
    if format != FORMAT_PCM {
        return Err(AudioError::NotPcm(format));
    }
    if channels == 0 {
        return Err(corrupt("zero channels"));
    }
    if rate == 0 {
        return Err(AudioError::InvalidRate);
    }
    let data = data.ok_or_else(|| corrupt("no data chunk"))?;

    let bytes_per_sample = match bits {
        8 => 1,
        16 => 2,
        24 => 3,
        32 => 4,
        other => return Err(AudioError::UnsupportedDepth(other)),
    };
    let frame_size = bytes_per_sample * channels as usize;
    let n_frames = data.len() / frame_size;

    let mut samples = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let mut acc = 0.0f64;
        for ch in 0..channels as usize {
            let off = frame * frame_size + ch * bytes_per_sample;
            acc += decode_sample(&data[off..off + bytes_per_sample], bits);
        }
        samples.push(acc / channels as f64);
    }

    // 32-bit payloads are ingested but the buffer records the nearest
    // supported working depth.
    let depth = if bits == 32 { 24 } else { bits };
    Ok(AudioBuffer::new(samples, rate, depth))
}

fn decode_sample(raw: &[u8], bits: u16) -> f64 {
    match bits {
        8 => (raw[0] as f64 - 128.0) / 128.0,
        16 => i16::from_le_bytes([raw[0], raw[1]]) as f64 / 32768.0,
        24 => {
            let v = ((raw[2] as i32) << 16) | ((raw[1] as i32) << 8) | raw[0] as i32;
            let v = (v << 8) >> 8; // sign extend
            v as f64 / 8_388_608.0
        }
        32 => {
            i32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64 / 2_147_483_648.0
        }
        _ => unreachable!(),
    }
}

pub fn write_wav(buffer: &AudioBuffer, bit_depth: u16, path: &Path) -> Result<()> {
    let bytes = write_wav_bytes(buffer, bit_depth)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn write_wav_bytes(buffer: &AudioBuffer, bit_depth: u16) -> Result<Vec<u8>> {
    let bytes_per_sample: usize = match bit_depth {
        8 => 1,
        16 => 2,
        24 => 3,
        other => return Err(AudioError::UnsupportedDepth(other)),
    };
    let data_len = buffer.samples.len() * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len);

    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buffer.sample_rate.to_le_bytes());
    let byte_rate = buffer.sample_rate * bytes_per_sample as u32;
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes()); // block align
    out.extend_from_slice(&bit_depth.to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buffer.samples {
        encode_sample(s, bit_depth, &mut out);
    }
    Ok(out)
}

fn encode_sample(x: f64, bits: u16, out: &mut Vec<u8>) {
    match bits {
        8 => {
            let v = ((x * 128.0).round() + 128.0).clamp(0.0, 255.0) as u8;
            out.push(v);
        }
        16 => {
            let v = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            out.extend_from_slice(&v.to_le_bytes());
        }
        24 => {
            let v = (x * 8_388_608.0)
                .round()
                .clamp(-8_388_608.0, 8_388_607.0) as i32;
            let b = v.to_le_bytes();
            out.extend_from_slice(&b[0..3]);
        }
        _ => unreachable!(),
    }
}
