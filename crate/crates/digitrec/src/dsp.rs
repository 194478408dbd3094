//! Short-time analysis substrate shared by every feature extractor:
//! pre-emphasis, framing, windowing, FFT power spectra and autocorrelation.

use crate::audio::AudioBuffer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("fft size {0} is not a power of two >= the frame length")]
    InvalidFftSize(usize),
    #[error("lag {lag} too large for frame of {frame_len} samples")]
    LagTooLarge { lag: usize, frame_len: usize },
}

pub type Result<T> = std::result::Result<T, DspError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hamming,
    Rectangular,
}

/// Short-time analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub pre_emphasis: f64,
    pub window: WindowKind,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            pre_emphasis: 0.97,
            window: WindowKind::Hamming,
        }
    }
}

impl FrameConfig {
    pub fn frame_len_samples(&self, sample_rate: u32) -> usize {
        (self.frame_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn frame_shift_samples(&self, sample_rate: u32) -> usize {
        (self.frame_shift_ms * sample_rate as f64 / 1000.0).round().max(1.0) as usize
    }

    pub fn frame_shift_us(&self) -> u32 {
        (self.frame_shift_ms * 1000.0).round() as u32
    }
}

/// Windowed frames cut from one utterance. All frames have equal length.
#[derive(Debug, Clone)]
pub struct FrameMatrix {
    pub frames: Vec<Vec<f64>>,
    pub config: FrameConfig,
    pub sample_rate: u32,
}

impl FrameMatrix {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// First-order high-pass: `y[n] = x[n] - coeff * x[n-1]`, with the first
/// sample scaled by `1 - coeff` so a constant input maps to a constant
/// residual from the start.
pub fn pre_emphasize(buffer: &AudioBuffer, coeff: f64) -> AudioBuffer {
    debug_assert!((0.0..1.0).contains(&coeff));
    let x = &buffer.samples;
    let mut y = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        y.push(first * (1.0 - coeff));
        for n in 1..x.len() {
            y.push(x[n] - coeff * x[n - 1]);
        }
    }
    AudioBuffer {
        samples: y,
        sample_rate: buffer.sample_rate,
        source_bit_depth: buffer.source_bit_depth,
    }
}

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Cut the signal into overlapping frames and apply the window. A trailing
/// partial frame is dropped, not padded.
pub fn frame_signal(buffer: &AudioBuffer, config: &FrameConfig) -> FrameMatrix {
    let frame_len = config.frame_len_samples(buffer.sample_rate).max(2);
    let shift = config.frame_shift_samples(buffer.sample_rate);
    let x = &buffer.samples;

    let mut frames = Vec::new();
    if x.len() >= frame_len {
        let count = (x.len() - frame_len) / shift + 1;
        let window = match config.window {
            WindowKind::Hamming => hamming(frame_len),
            WindowKind::Rectangular => vec![1.0; frame_len],
        };
        frames.reserve(count);
        for f in 0..count {
            let start = f * shift;
            let frame: Vec<f64> = x[start..start + frame_len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect();
            frames.push(frame);
        }
    }
    FrameMatrix {
        frames,
        config: *config,
        sample_rate: buffer.sample_rate,
    }
}

/// Complex value for the FFT; kept minimal on purpose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    fn add(self, other: Complex) -> Complex {
        Complex {
            re: self.re + other.re,
            im: self.im + other.im,
        }
    }

    fn sub(self, other: Complex) -> Complex {
        Complex {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }

    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// In-place radix-2 decimation-in-time FFT. `data.len()` must be a power of
/// two.
pub fn fft(data: &mut [Complex]) -> Result<()> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(DspError::InvalidFftSize(n));
    }
    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let angle = -std::f64::consts::TAU / len as f64;
        let w_len = Complex::new(angle.cos(), angle.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex::new(1.0, 0.0);
            for k in 0..len / 2 {
                let even = data[start + k];
                let odd = data[start + k + len / 2].mul(w);
                data[start + k] = even.add(odd);
                data[start + k + len / 2] = even.sub(odd);
                w = w.mul(w_len);
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// `|DFT|^2` of the zero-padded frame: bins `0..=fft_size/2`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    if !fft_size.is_power_of_two() || fft_size < frame.len() || fft_size == 0 {
        return Err(DspError::InvalidFftSize(fft_size));
    }
    let mut data: Vec<Complex> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_size)
        .collect();
    fft(&mut data)?;
    Ok(data[..=fft_size / 2].iter().map(|c| c.norm_sq()).collect())
}

/// Smallest power of two >= n.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Biased autocorrelation `r[k] = sum_n x[n] * x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= frame.len() {
        return Err(DspError::LagTooLarge {
            lag: max_lag,
            frame_len: frame.len(),
        });
    }
    let mut r = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let mut acc = 0.0;
        for n in 0..frame.len() - k {
            acc += frame[n] * frame[n + k];
        }
        r.push(acc);
    }
    Ok(r)
}
