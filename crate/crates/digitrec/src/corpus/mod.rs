//! Dataset manifests, deterministic synthetic corpus generation, builtin
//! noise sources, and the degradation pipeline that manufactures each
//! (encoding profile, noise condition) variant of a master corpus.

use crate::audio::{
    self, AudioBuffer, AudioError, EncodingProfile, NoiseCondition, NoiseKind,
};
use crate::rng::{fnv1a, Rng};
use crate::DIGITS;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad manifest: {0}")]
    BadManifest(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One audio file. `path` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
    pub speaker: String,
    pub split: Split,
    pub condition: String,
}

/// A corpus listing plus the profile its audio is stored at.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub master_profile: EncodingProfile,
    pub entries: Vec<ManifestEntry>,
    /// Directory entry paths are relative to (the manifest file's parent).
    pub root: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    master_profile: EncodingProfile,
}

impl Manifest {
    pub fn audio_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// A manifest containing only one split, sharing this root.
    pub fn filtered(&self, split: Split) -> Manifest {
        Manifest {
            master_profile: self.master_profile.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| e.split == split)
                .cloned()
                .collect(),
            root: self.root.clone(),
        }
    }

    /// Write as JSON lines: a header object carrying the profile, then one
    /// entry object per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&ManifestHeader {
            master_profile: self.master_profile.clone(),
        })?);
        out.push('\n');
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry)?);
            out.push('\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let file = fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| CorpusError::BadManifest("empty manifest".into()))??;
        let header: ManifestHeader = serde_json::from_str(&header_line)?;
        let mut entries = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        Ok(Manifest {
            master_profile: header.master_profile,
            entries,
            root: path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

/// Token perturbation ranges for the synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Relative pitch spread (multiplier 1 +/- pitch).
    pub pitch: f64,
    /// Relative duration spread.
    pub duration: f64,
    /// Relative amplitude spread.
    pub amplitude: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            pitch: 0.02,
            duration: 0.10,
            amplitude: 0.10,
        }
    }
}

/// Everything that pins a synthetic corpus bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub train_per_digit: usize,
    pub test_per_digit: usize,
    pub base_profile: EncodingProfile,
    #[serde(default)]
    pub jitter: Jitter,
    #[serde(default = "default_duration")]
    pub base_duration_secs: f64,
}

fn default_duration() -> f64 {
    0.36
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            train_per_digit: 20,
            test_per_digit: 10,
            base_profile: EncodingProfile::new("24 bit 48000 Hz Mono PCM", 24, 48000),
            jitter: Jitter::default(),
            base_duration_secs: default_duration(),
        }
    }
}

/// Deterministic two-tone pattern for one digit: a base trajectory plus a
/// higher partial, each gliding over three segments. Base frequencies are
/// spaced widely enough apart that digit classes stay separable after the
/// narrowest encoding profile.
struct DigitPattern {
    base_hz: f64,
    partial_ratio: f64,
    /// (duration fraction, frequency multiplier at start, at end).
    segments: [(f64, f64, f64); 3],
}

fn digit_pattern(index: usize) -> DigitPattern {
    let base_hz = 250.0 + 200.0 * index as f64;
    let partial_ratio = 1.4 + 0.02 * ((index * 3) % 5) as f64;
    let updown = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
    let bend = 0.06 + 0.02 * ((index / 2) % 3) as f64;
    DigitPattern {
        base_hz,
        partial_ratio,
        segments: [
            (0.3, 1.0 - updown * bend, 1.0),
            (0.4, 1.0, 1.0),
            (0.3, 1.0, 1.0 + updown * bend),
        ],
    }
}

/// Render one token of `digit` with the given per-token jitter draws.
fn synthesize_token(
    digit_index: usize,
    sample_rate: u32,
    base_duration_secs: f64,
    jitter: &Jitter,
    rng: &mut Rng,
) -> AudioBuffer {
    let pattern = digit_pattern(digit_index);
    let duration = base_duration_secs * (1.0 + jitter.duration * rng.next_signed());
    let pitch = 1.0 + jitter.pitch * rng.next_signed();
    let amp = 0.5 * (1.0 + jitter.amplitude * rng.next_signed());

    let n = (duration * sample_rate as f64).round() as usize;
    let dt = 1.0 / sample_rate as f64;
    let ramp = (0.015 * sample_rate as f64) as usize; // 15 ms attack/release

    let mut samples = Vec::with_capacity(n);
    let mut phase1 = 0.0f64;
    let mut phase2 = 0.0f64;
    for i in 0..n {
        let pos = i as f64 / n as f64;
        // Locate the segment and interpolate its frequency multiplier.
        let mut seg_start = 0.0;
        let mut mult = 1.0;
        for &(frac, m0, m1) in &pattern.segments {
            if pos < seg_start + frac || seg_start + frac >= 1.0 - 1e-12 {
                let local = ((pos - seg_start) / frac).clamp(0.0, 1.0);
                mult = m0 + (m1 - m0) * local;
                break;
            }
            seg_start += frac;
        }
        let f1 = pattern.base_hz * mult * pitch;
        let f2 = f1 * pattern.partial_ratio;
        phase1 += std::f64::consts::TAU * f1 * dt;
        phase2 += std::f64::consts::TAU * f2 * dt;

        let env_in = if i < ramp {
            0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        let env_out = if i + ramp > n {
            0.5 - 0.5 * (std::f64::consts::PI * (n - i) as f64 / ramp as f64).cos()
        } else {
            1.0
        };
        samples.push(amp * env_in * env_out * (0.7 * phase1.sin() + 0.3 * phase2.sin()));
    }
    AudioBuffer::new(samples, sample_rate, 24)
}

/// Generate the master corpus: WAVs at the base profile under
/// `<out_dir>/master/<profile-slug>/<digit>/` plus `manifest.jsonl`.
/// The same spec always produces a byte-identical tree.
pub fn generate_synthetic_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    let mut entries = Vec::new();
    let profile_slug = spec.base_profile.slug();
    for (digit_index, digit) in DIGITS.iter().enumerate() {
        for (split, count) in [
            (Split::Train, spec.train_per_digit),
            (Split::Test, spec.test_per_digit),
        ] {
            for token in 0..count {
                let stream = fnv1a(
                    format!("{digit}/{}/{token}", split.as_str()).as_bytes(),
                );
                let mut rng = Rng::substream(spec.seed, stream);
                let buffer = synthesize_token(
                    digit_index,
                    spec.base_profile.sample_rate,
                    spec.base_duration_secs,
                    &spec.jitter,
                    &mut rng,
                );
                let rel = PathBuf::from("master")
                    .join(&profile_slug)
                    .join(digit)
                    .join(format!("{}_{token:03}.wav", split.as_str()));
                audio::write_wav(&buffer, spec.base_profile.bit_depth, &out_dir.join(&rel))?;
                entries.push(ManifestEntry {
                    path: rel,
                    label: digit.to_string(),
                    speaker: format!("spk{:02}", token % 8),
                    split,
                    condition: "master".to_string(),
                });
            }
        }
    }
    let manifest = Manifest {
        master_profile: spec.base_profile.clone(),
        entries,
        root: out_dir.to_path_buf(),
    };
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

/// RMS the builtin noise generators normalize to. Unity RMS would push
/// samples outside the buffer's [-1, 1] range, so a fixed fraction is used;
/// the mixing gain is RMS-relative, making the reference level irrelevant
/// to the realized SNR.
pub const NOISE_RMS: f64 = 0.2;

/// Seeded synthetic noise: `Random` is uniform white noise, `Fan` is white
/// noise shaped by a one-pole low-pass for the broadband low-frequency
/// character of fan hum. Both are normalized to [`NOISE_RMS`].
pub fn builtin_noise(
    kind: NoiseKind,
    num_samples: usize,
    sample_rate: u32,
    seed: u64,
) -> AudioBuffer {
    assert!(
        kind != NoiseKind::Clean,
        "clean condition has no noise source"
    );
    let mut rng = Rng::new(seed);
    let mut samples: Vec<f64> = (0..num_samples).map(|_| rng.next_signed()).collect();
    if kind == NoiseKind::Fan {
        // One-pole low-pass at ~250 Hz.
        let alpha = (-std::f64::consts::TAU * 250.0 / sample_rate as f64).exp();
        let mut prev = 0.0;
        for s in &mut samples {
            prev = alpha * prev + (1.0 - alpha) * *s;
            *s = prev;
        }
    }
    let rms = (samples.iter().map(|s| s * s).sum::<f64>() / num_samples.max(1) as f64).sqrt();
    if rms > 0.0 {
        let mut gain = NOISE_RMS / rms;
        let peak = samples.iter().fold(0.0f64, |a, &s| a.max(s.abs()));
        if peak * gain > 0.98 {
            gain = 0.98 / peak;
        }
        for s in &mut samples {
            *s *= gain;
        }
    }
    AudioBuffer::new(samples, sample_rate, 24)
}

fn condition_tag(condition: &NoiseCondition) -> String {
    match condition.kind {
        NoiseKind::Clean => "clean".to_string(),
        kind => {
            if condition.snr_db.fract() == 0.0 {
                format!("{}@{}dB", kind.as_str(), condition.snr_db as i64)
            } else {
                format!("{}@{}dB", kind.as_str(), condition.snr_db)
            }
        }
    }
}

/// Degrade every manifest entry to `(profile, condition)`: resample to the
/// profile rate, mix the condition's noise at its SNR, requantize to the
/// profile depth, and write under
/// `<out_dir>/<condition>/<profile-slug>/<digit>/<token>.wav`.
/// Noise streams are derived from (seed, condition, profile, file path), so
/// results do not depend on processing order.
pub fn degrade_corpus(
    manifest: &Manifest,
    profile: &EncodingProfile,
    condition: &NoiseCondition,
    out_dir: &Path,
    seed: u64,
) -> Result<Manifest> {
    let tag = condition_tag(condition);
    // A supplied noise recording is loaded and resampled once.
    let noise_wav: Option<AudioBuffer> = match &condition.noise_wav {
        Some(path) => {
            let raw = audio::read_wav(path)?;
            Some(audio::resample(&raw, profile.sample_rate)?)
        }
        None => None,
    };

    let mut entries = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let source = audio::read_wav(&manifest.audio_path(entry))?;
        let resampled = audio::resample(&source, profile.sample_rate)?;
        let mixed = match condition.kind {
            NoiseKind::Clean => resampled,
            kind => {
                let noise = match &noise_wav {
                    Some(buf) => buf.clone(),
                    None => {
                        let stream = fnv1a(
                            format!(
                                "{}/{}/{}",
                                condition.slug(),
                                profile.slug(),
                                entry.path.display()
                            )
                            .as_bytes(),
                        );
                        let mut rng = Rng::substream(seed, stream);
                        builtin_noise(
                            kind,
                            resampled.len(),
                            profile.sample_rate,
                            rng.next_u64(),
                        )
                    }
                };
                audio::mix_noise(&resampled, &noise, condition.snr_db)?.buffer
            }
        };
        let degraded = audio::requantize(&mixed, profile.bit_depth)?;

        let file_name = entry
            .path
            .file_name()
            .ok_or_else(|| CorpusError::BadManifest(format!("bad path {:?}", entry.path)))?;
        let rel = PathBuf::from(condition.slug())
            .join(profile.slug())
            .join(&entry.label)
            .join(file_name);
        audio::write_wav(&degraded, profile.bit_depth, &out_dir.join(&rel))?;
        entries.push(ManifestEntry {
            path: rel,
            label: entry.label.clone(),
            speaker: entry.speaker.clone(),
            split: entry.split,
            condition: tag.clone(),
        });
    }

    let degraded = Manifest {
        master_profile: profile.clone(),
        entries,
        root: out_dir.to_path_buf(),
    };
    degraded.save(&out_dir.join(format!(
        "manifest-{}-{}.jsonl",
        condition.slug(),
        profile.slug()
    )))?;
    Ok(degraded)
}
