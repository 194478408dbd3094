//! Isolated-digit speech recognition toolkit.
//!
//! The crate covers the whole experimental loop for a ten-digit vocabulary:
//!
//! * [`audio`] - mono PCM WAV I/O, encoding profiles (bit depth x sampling
//!   rate), requantization, anti-aliased resampling, and SNR-controlled
//!   noise mixing.
//! * [`dsp`] - short-time analysis shared by all feature extractors:
//!   pre-emphasis, framing, windowing, FFT power spectra, autocorrelation.
//! * [`features`] - the five feature families (MFCC, LPC, PLP, FBANK,
//!   MELSPEC) with optional delta / delta-delta augmentation and a binary
//!   feature-file format.
//! * [`hmm`] - left-to-right Gaussian-mixture HMMs: flat start, Baum-Welch
//!   training, forward scoring, Viterbi decoding, and maximum-likelihood
//!   word classification.
//! * [`scoring`] - edit-distance alignment, word error rate, and per-digit
//!   Correct/In-Correct tables.
//! * [`corpus`] - dataset manifests, deterministic synthetic corpus
//!   generation, builtin noise sources, and the degradation pipeline that
//!   manufactures every (profile, noise) condition from a master corpus.
//! * [`grid`] - the benchmark runner enumerating conditions x profiles x
//!   features into report tables and CSV files.
//!
//! All randomness is driven by explicit seeds through [`rng`]; identical
//! seeds produce byte-identical corpora, models, and reports.

pub mod audio;
pub mod corpus;
pub mod dsp;
pub mod features;
pub mod grid;
pub mod hmm;
pub mod rng;
pub mod scoring;

/// The ten-digit vocabulary in conventional table order.
pub const DIGITS: [&str; 10] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "zero",
];

/// Display form of a digit label ("one" -> "One").
pub fn digit_display(label: &str) -> String {
    let mut chars = label.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}
