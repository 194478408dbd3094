//! The five feature-extraction families - MFCC, LPC, PLP, FBANK, MELSPEC -
//! plus temporal-derivative augmentation and a binary feature-file format.
//!
//! All five share the same short-time frontend ([`crate::dsp`]); they differ
//! only in what they compute per frame:
//!
//! * MELSPEC - linear mel-filterbank energies
//! * FBANK   - log mel-filterbank energies (floored)
//! * MFCC    - orthonormal DCT-II of the FBANK row, coefficient 0 replaced
//!   by the log frame energy unless `use_raw_c0` is set
//! * LPC     - linear-prediction coefficients via Levinson-Durbin
//! * PLP     - bark-band integration, equal-loudness weighting, cube-root
//!   compression, then LP analysis and the cepstral recursion

mod io;
mod lpc;
mod mel;
mod plp;

pub use io::{read_features, write_features};
pub use lpc::{levinson_durbin, LevinsonResult};
pub use mel::{dct_ii_orthonormal, mel_filterbank, mel_filterbank_matrix, mel_scale, mel_to_hz};
pub use plp::{bark_scale, equal_loudness};

use crate::audio::AudioBuffer;
use crate::dsp::{self, DspError, FrameConfig, FrameMatrix};
use crate::rng::fnv1a;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),
    #[error("fft resolution too coarse to separate {num_filters} filters ({fft_size}-point fft)")]
    TooFewBins { num_filters: usize, fft_size: usize },
    #[error("corrupt feature file: {0}")]
    CorruptFeatureFile(String),
    #[error("feature kind mismatch: expected {expected:?}, found {found:?}")]
    KindMismatch {
        expected: FeatureKind,
        found: FeatureKind,
    },
    #[error("bad feature config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// Which of the five techniques a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mfcc,
    Lpc,
    Plp,
    Fbank,
    Melspec,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Mfcc,
        FeatureKind::Lpc,
        FeatureKind::Plp,
        FeatureKind::Fbank,
        FeatureKind::Melspec,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Lpc => "lpc",
            FeatureKind::Plp => "plp",
            FeatureKind::Fbank => "fbank",
            FeatureKind::Melspec => "melspec",
        }
    }

    pub fn display(&self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "MFCC",
            FeatureKind::Lpc => "LPC",
            FeatureKind::Plp => "PLP",
            FeatureKind::Fbank => "FBANK",
            FeatureKind::Melspec => "MELSPEC",
        }
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            FeatureKind::Mfcc => 0,
            FeatureKind::Lpc => 1,
            FeatureKind::Plp => 2,
            FeatureKind::Fbank => 3,
            FeatureKind::Melspec => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<FeatureKind> {
        match tag {
            0 => Some(FeatureKind::Mfcc),
            1 => Some(FeatureKind::Lpc),
            2 => Some(FeatureKind::Plp),
            3 => Some(FeatureKind::Fbank),
            4 => Some(FeatureKind::Melspec),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(FeatureKind::Mfcc),
            "lpc" => Ok(FeatureKind::Lpc),
            "plp" => Ok(FeatureKind::Plp),
            "fbank" => Ok(FeatureKind::Fbank),
            "melspec" => Ok(FeatureKind::Melspec),
            other => Err(format!("unknown feature kind '{other}'")),
        }
    }
}

/// Everything that shapes an extraction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    /// Mel or bark channels.
    pub num_filters: usize,
    /// Cepstral output dimension (MFCC, PLP).
    pub num_ceps: usize,
    /// Linear-prediction order (LPC, PLP).
    pub lpc_order: usize,
    /// 0 = static only, 1 = +delta, 2 = +delta-delta.
    pub include_deltas: u8,
    /// Floor applied before logs and compression.
    pub energy_floor: f64,
    /// Regression half-width for the delta computation.
    pub delta_window: usize,
    /// Keep the raw DCT coefficient 0 instead of the log frame energy.
    pub use_raw_c0: bool,
    pub frame: FrameConfig,
}

impl FeatureConfig {
    pub fn new(kind: FeatureKind) -> Self {
        FeatureConfig {
            kind,
            num_filters: 26,
            num_ceps: 12,
            lpc_order: 12,
            include_deltas: 2,
            energy_floor: 1e-10,
            delta_window: 2,
            use_raw_c0: false,
            frame: FrameConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FeatureError::BadConfig(msg));
        if self.num_filters < 2 {
            return bad(format!("num_filters {} < 2", self.num_filters));
        }
        if self.num_ceps == 0 || self.lpc_order == 0 || self.delta_window == 0 {
            return bad("num_ceps, lpc_order and delta_window must be >= 1".into());
        }
        if matches!(self.kind, FeatureKind::Mfcc | FeatureKind::Plp)
            && self.num_ceps > self.num_filters
        {
            return bad(format!(
                "num_ceps {} exceeds num_filters {}",
                self.num_ceps, self.num_filters
            ));
        }
        if self.include_deltas > 2 {
            return bad(format!("include_deltas {} > 2", self.include_deltas));
        }
        if self.energy_floor.is_nan() || self.energy_floor <= 0.0 {
            return bad("energy_floor must be positive".into());
        }
        let frame = &self.frame;
        if frame.frame_shift_ms.is_nan()
            || frame.frame_shift_ms <= 0.0
            || frame.frame_shift_ms > frame.frame_length_ms
        {
            return bad(format!(
                "frame shift {} ms must be positive and no longer than the frame length {} ms",
                frame.frame_shift_ms, frame.frame_length_ms
            ));
        }
        if !(0.0..1.0).contains(&frame.pre_emphasis) {
            return bad(format!(
                "pre_emphasis {} outside [0, 1)",
                frame.pre_emphasis
            ));
        }
        Ok(())
    }

    /// Static (pre-derivative) dimension of one row.
    pub fn base_dim(&self) -> usize {
        match self.kind {
            FeatureKind::Mfcc => self.num_ceps + 1,
            FeatureKind::Lpc => self.lpc_order,
            FeatureKind::Plp => self.num_ceps,
            FeatureKind::Fbank | FeatureKind::Melspec => self.num_filters,
        }
    }

    /// Final dimension after derivative augmentation.
    pub fn dim(&self) -> usize {
        self.base_dim() * (1 + self.include_deltas as usize)
    }
}

/// Frames x coefficients, stored row-major as f32 - the same precision the
/// feature-file format uses, so disk round-trips are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub dim: usize,
    pub frame_shift_us: u32,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn from_rows(
        kind: FeatureKind,
        frame_shift_us: u32,
        rows: &[Vec<f64>],
    ) -> FeatureMatrix {
        let dim = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|r| r.len() == dim));
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        FeatureMatrix {
            kind,
            dim,
            frame_shift_us,
            data,
        }
    }

    pub(crate) fn from_raw(
        kind: FeatureKind,
        dim: usize,
        frame_shift_us: u32,
        data: Vec<f32>,
    ) -> FeatureMatrix {
        debug_assert!(dim > 0 && data.len().is_multiple_of(dim) || data.is_empty());
        FeatureMatrix {
            kind,
            dim,
            frame_shift_us,
            data,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub(crate) fn raw(&self) -> &[f32] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn signature(&self) -> FeatureSignature {
        FeatureSignature {
            kind: self.kind,
            dim: self.dim as u32,
            frame_shift_us: self.frame_shift_us,
        }
    }
}

/// Compatibility stamp checked between features and models. Only fields the
/// feature-file format persists participate, so signatures survive disk
/// round-trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSignature {
    pub kind: FeatureKind,
    pub dim: u32,
    pub frame_shift_us: u32,
}

impl FeatureSignature {
    pub fn hash_u64(&self) -> u64 {
        let mut bytes = Vec::with_capacity(9);
        bytes.push(self.kind.tag());
        bytes.extend_from_slice(&self.dim.to_le_bytes());
        bytes.extend_from_slice(&self.frame_shift_us.to_le_bytes());
        fnv1a(&bytes)
    }
}

/// Run the full pipeline for one utterance: pre-emphasis, framing and
/// windowing, the per-kind transform, then derivative augmentation.
pub fn extract_features(buffer: &AudioBuffer, config: &FeatureConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let emphasized = dsp::pre_emphasize(buffer, config.frame.pre_emphasis);
    let frames = dsp::frame_signal(&emphasized, &config.frame);
    extract_from_frames(&frames, config)
}

/// Per-kind extraction from already-framed audio, plus deltas.
pub fn extract_from_frames(frames: &FrameMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let rows = match config.kind {
        FeatureKind::Melspec => extract_melspec_rows(frames, config)?,
        FeatureKind::Fbank => extract_fbank_rows(frames, config)?,
        FeatureKind::Mfcc => extract_mfcc_rows(frames, config)?,
        FeatureKind::Lpc => lpc::extract_lpc_rows(frames, config)?,
        FeatureKind::Plp => plp::extract_plp_rows(frames, config)?,
    };
    debug_assert!(rows.iter().all(|r| r.len() == config.base_dim()));
    let matrix = FeatureMatrix::from_rows(config.kind, frames.config.frame_shift_us(), &rows);
    let matrix = if config.include_deltas > 0 && matrix.num_frames() > 0 {
        append_deltas(&matrix, config.include_deltas, config.delta_window)
    } else {
        matrix
    };
    debug_assert!(matrix.is_finite());
    Ok(matrix)
}

/// Linear mel-filterbank energies (MELSPEC). No flooring: flooring belongs
/// to the log kinds.
pub fn extract_melspec(frames: &FrameMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = extract_melspec_rows(frames, config)?;
    Ok(FeatureMatrix::from_rows(
        FeatureKind::Melspec,
        frames.config.frame_shift_us(),
        &rows,
    ))
}

/// Log mel-filterbank energies (FBANK): `ln(max(e, energy_floor))`.
pub fn extract_fbank(frames: &FrameMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = extract_fbank_rows(frames, config)?;
    Ok(FeatureMatrix::from_rows(
        FeatureKind::Fbank,
        frames.config.frame_shift_us(),
        &rows,
    ))
}

/// Mel-frequency cepstra: DCT-II of the FBANK row.
pub fn extract_mfcc(frames: &FrameMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = extract_mfcc_rows(frames, config)?;
    Ok(FeatureMatrix::from_rows(
        FeatureKind::Mfcc,
        frames.config.frame_shift_us(),
        &rows,
    ))
}

/// Linear-prediction coefficients per frame.
pub fn extract_lpc(frames: &FrameMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = lpc::extract_lpc_rows(frames, config)?;
    Ok(FeatureMatrix::from_rows(
        FeatureKind::Lpc,
        frames.config.frame_shift_us(),
        &rows,
    ))
}

/// Perceptual linear prediction cepstra per frame.
pub fn extract_plp(frames: &FrameMatrix, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = plp::extract_plp_rows(frames, config)?;
    Ok(FeatureMatrix::from_rows(
        FeatureKind::Plp,
        frames.config.frame_shift_us(),
        &rows,
    ))
}

fn filterbank_for(frames: &FrameMatrix, config: &FeatureConfig) -> Result<(Vec<Vec<f64>>, usize)> {
    let frame_len = frames.frames.first().map_or(2, Vec::len);
    let fft_size = dsp::next_pow2(frame_len);
    let bank = mel::mel_filterbank_matrix(config.num_filters, fft_size, frames.sample_rate)?;
    Ok((bank, fft_size))
}

fn extract_melspec_rows(frames: &FrameMatrix, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let (bank, fft_size) = filterbank_for(frames, config)?;
    frames
        .frames
        .iter()
        .map(|frame| {
            let spectrum = dsp::power_spectrum(frame, fft_size)?;
            Ok(mel::apply_filterbank(&spectrum, &bank))
        })
        .collect()
}

fn extract_fbank_rows(frames: &FrameMatrix, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let melspec = extract_melspec_rows(frames, config)?;
    Ok(melspec
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|e| e.max(config.energy_floor).ln())
                .collect()
        })
        .collect())
}

fn extract_mfcc_rows(frames: &FrameMatrix, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let fbank = extract_fbank_rows(frames, config)?;
    let mut rows = Vec::with_capacity(fbank.len());
    for (t, log_energies) in fbank.iter().enumerate() {
        let ceps = mel::dct_ii_orthonormal(log_energies, config.num_ceps + 1);
        let mut row = Vec::with_capacity(config.num_ceps + 1);
        if config.use_raw_c0 {
            row.push(ceps[0]);
        } else {
            let energy: f64 = frames.frames[t].iter().map(|x| x * x).sum();
            row.push(energy.max(config.energy_floor).ln());
        }
        row.extend_from_slice(&ceps[1..]);
        rows.push(row);
    }
    Ok(rows)
}

/// Append delta (and with `order == 2` delta-delta) streams computed by the
/// standard regression
/// `d_t = sum_w w * (c_{t+w} - c_{t-w}) / (2 * sum_w w^2)`
/// with edge frames replicated beyond the matrix boundary.
pub fn append_deltas(features: &FeatureMatrix, order: u8, delta_window: usize) -> FeatureMatrix {
    assert!((1..=2).contains(&order), "order must be 1 or 2");
    assert!(delta_window >= 1);
    let base: Vec<Vec<f64>> = features
        .rows()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    let delta = regression(&base, delta_window);
    let delta2 = (order == 2).then(|| regression(&delta, delta_window));
    let mut all = Vec::with_capacity(base.len());
    for t in 0..base.len() {
        let mut row = base[t].clone();
        row.extend_from_slice(&delta[t]);
        if let Some(dd) = &delta2 {
            row.extend_from_slice(&dd[t]);
        }
        all.push(row);
    }
    FeatureMatrix::from_rows(features.kind, features.frame_shift_us, &all)
}

fn regression(rows: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let t_len = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let denom: f64 = 2.0 * (1..=window).map(|w| (w * w) as f64).sum::<f64>();
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut row = vec![0.0; dim];
        for w in 1..=window {
            let fwd = &rows[(t + w).min(t_len - 1)];
            let bwd = &rows[t.saturating_sub(w)];
            for d in 0..dim {
                row[d] += w as f64 * (fwd[d] - bwd[d]);
            }
        }
        for v in &mut row {
            *v /= denom;
        }
        out.push(row);
    }
    out
}
