//! Mono PCM audio: buffers, encoding profiles, quantization, resampling,
//! and SNR-controlled noise mixing.

mod resample;
mod wav;

pub use resample::resample;
pub use wav::{read_wav, read_wav_bytes, write_wav, write_wav_bytes};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not integer PCM (format code {0})")]
    NotPcm(u16),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported bit depth {0}")]
    UnsupportedDepth(u16),
    #[error("invalid sample rate (must be positive)")]
    InvalidRate,
    #[error("noise signal is silent (zero RMS)")]
    SilentNoise,
    #[error("sample rate mismatch: signal {signal} Hz vs noise {noise} Hz")]
    RateMismatch { signal: u32, noise: u32 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// A normalized mono sample sequence. Every sample lies in [-1, +1] and the
/// buffer is immutable in spirit: operations return new buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Bit depth the samples were last quantized at (8, 16 or 24).
    pub source_bit_depth: u16,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_bit_depth: u16) -> Self {
        debug_assert!(sample_rate > 0);
        debug_assert!(samples.iter().all(|s| (-1.0..=1.0).contains(s)));
        AudioBuffer {
            samples,
            sample_rate,
            source_bit_depth,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// A (bit depth, sampling rate) pair with a display name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingProfile {
    pub label: String,
    pub bit_depth: u16,
    pub sample_rate: u32,
}

impl EncodingProfile {
    pub fn new(label: impl Into<String>, bit_depth: u16, sample_rate: u32) -> Self {
        EncodingProfile {
            label: label.into(),
            bit_depth,
            sample_rate,
        }
    }

    /// Bits per second for one mono channel.
    pub fn bit_rate(&self) -> u64 {
        self.bit_depth as u64 * self.sample_rate as u64
    }

    /// Human display of the bit rate. Values are truncated toward zero the
    /// way audio format tables conventionally print them: 705600 -> "705 kbps",
    /// 1152000 -> "1.1 Mbps", and rates under 100 kbps keep the raw figure.
    pub fn bit_rate_display(&self) -> String {
        let bps = self.bit_rate();
        if bps >= 1_000_000 {
            let tenths = bps / 100_000; // truncate to one decimal
            format!("{}.{} Mbps", tenths / 10, tenths % 10)
        } else if bps >= 100_000 {
            format!("{} kbps", bps / 1000)
        } else {
            format!("{bps} bps")
        }
    }

    /// Filesystem-safe identifier, e.g. "24bit-48000hz".
    pub fn slug(&self) -> String {
        format!("{}bit-{}hz", self.bit_depth, self.sample_rate)
    }
}

/// The standard-format catalog: telephone through DVD audio.
pub fn catalog() -> Vec<EncodingProfile> {
    vec![
        EncodingProfile::new("Telephone (Landline)", 8, 8000),
        EncodingProfile::new("VoIP and Improved Telephony", 8, 16000),
        EncodingProfile::new("Broadcast Rate (Better than FM Radio)", 16, 32000),
        EncodingProfile::new("Compact Disc", 16, 44100),
        EncodingProfile::new("High Resolution Audio (DVD)", 24, 48000),
    ]
}

/// The five mono PCM profiles the benchmark grid sweeps by default.
pub fn grid_profiles() -> Vec<EncodingProfile> {
    vec![
        EncodingProfile::new("8 bit 8000 Hz Mono PCM", 8, 8000),
        EncodingProfile::new("8 bit 16000 Hz Mono PCM", 8, 16000),
        EncodingProfile::new("16 bit 16000 Hz Mono PCM", 16, 16000),
        EncodingProfile::new("16 bit 44100 Hz Mono PCM", 16, 44100),
        EncodingProfile::new("24 bit 48000 Hz Mono PCM", 24, 48000),
    ]
}

/// Parse a profile catalog file: one `label, depth, rate` per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_catalog(text: &str) -> Result<Vec<EncodingProfile>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.rsplitn(3, ',').map(str::trim);
        let err = |msg: &str| {
            AudioError::CorruptHeader(format!("catalog line {}: {}", lineno + 1, msg))
        };
        let rate = parts.next().ok_or_else(|| err("missing sample rate"))?;
        let depth = parts.next().ok_or_else(|| err("missing bit depth"))?;
        let label = parts.next().ok_or_else(|| err("missing label"))?;
        let bit_depth: u16 = depth.parse().map_err(|_| err("bad bit depth"))?;
        let sample_rate: u32 = rate.parse().map_err(|_| err("bad sample rate"))?;
        if sample_rate == 0 {
            return Err(AudioError::InvalidRate);
        }
        out.push(EncodingProfile::new(label, bit_depth, sample_rate));
    }
    Ok(out)
}

/// What kind of noise a grid condition applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Clean,
    Fan,
    Random,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Clean => "clean",
            NoiseKind::Fan => "fan",
            NoiseKind::Random => "random",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "clean" => Ok(NoiseKind::Clean),
            "fan" => Ok(NoiseKind::Fan),
            "random" => Ok(NoiseKind::Random),
            other => Err(format!("unknown noise condition '{other}'")),
        }
    }
}

/// A noise condition: kind + SNR + where the noise comes from.
/// `snr_db` is ignored for `Clean`. When `noise_wav` is unset, Fan/Random use
/// the builtin seeded generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCondition {
    pub kind: NoiseKind,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_wav: Option<PathBuf>,
}

fn default_snr() -> f64 {
    20.0
}

impl NoiseCondition {
    pub fn clean() -> Self {
        NoiseCondition {
            kind: NoiseKind::Clean,
            snr_db: f64::INFINITY,
            noise_wav: None,
        }
    }

    pub fn fan(snr_db: f64) -> Self {
        NoiseCondition {
            kind: NoiseKind::Fan,
            snr_db,
            noise_wav: None,
        }
    }

    pub fn random(snr_db: f64) -> Self {
        NoiseCondition {
            kind: NoiseKind::Random,
            snr_db,
            noise_wav: None,
        }
    }

    pub fn slug(&self) -> String {
        self.kind.as_str().to_string()
    }
}

/// Snap every sample to the nearest level of a uniform mid-tread quantizer
/// with step `2 / 2^depth` over [-1, +1]. Levels are clamped symmetrically so
/// the per-sample error never exceeds half a step anywhere in the range,
/// including at full scale.
pub fn requantize(buffer: &AudioBuffer, target_depth: u16) -> Result<AudioBuffer> {
    if !matches!(target_depth, 8 | 16 | 24) {
        return Err(AudioError::UnsupportedDepth(target_depth));
    }
    let half_levels = (1u32 << (target_depth - 1)) as f64; // 2^(depth-1)
    let samples = buffer
        .samples
        .iter()
        .map(|&x| {
            let q = (x * half_levels).round().clamp(-half_levels, half_levels);
            q / half_levels
        })
        .collect();
    Ok(AudioBuffer::new(
        samples,
        buffer.sample_rate,
        target_depth,
    ))
}

/// Result of mixing noise into a signal: the mixed buffer plus how many
/// samples had to be hard-clipped back into [-1, +1].
#[derive(Debug, Clone)]
pub struct MixOutput {
    pub buffer: AudioBuffer,
    pub clipped: usize,
}

/// Mix `noise` into `signal` at the requested SNR. The noise is tiled when
/// shorter than the signal and scaled by
/// `g = (rms_signal / rms_noise) * 10^(-snr_db / 20)`.
/// An infinite `snr_db` returns the signal untouched. The sum saturates at
/// [-1, +1]; the number of clipped samples is reported, not treated as an
/// error.
pub fn mix_noise(signal: &AudioBuffer, noise: &AudioBuffer, snr_db: f64) -> Result<MixOutput> {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(MixOutput {
            buffer: signal.clone(),
            clipped: 0,
        });
    }
    if signal.sample_rate != noise.sample_rate {
        return Err(AudioError::RateMismatch {
            signal: signal.sample_rate,
            noise: noise.sample_rate,
        });
    }
    let noise_rms = noise.rms();
    if noise_rms <= 0.0 {
        return Err(AudioError::SilentNoise);
    }
    let gain = signal.rms() / noise_rms * 10f64.powf(-snr_db / 20.0);
    let mut clipped = 0usize;
    let samples: Vec<f64> = signal
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mixed = s + gain * noise.samples[i % noise.samples.len()];
            if (-1.0..=1.0).contains(&mixed) {
                mixed
            } else {
                clipped += 1;
                mixed.clamp(-1.0, 1.0)
            }
        })
        .collect();
    Ok(MixOutput {
        buffer: AudioBuffer::new(samples, signal.sample_rate, signal.source_bit_depth),
        clipped,
    })
}
