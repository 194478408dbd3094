//! `digitrec` - isolated-digit recognition experiments from the shell.
//!
//! Subcommands cover every pipeline stage: corpus synthesis, degradation to
//! an encoding profile and noise condition, feature extraction, HMM
//! training, recognition, scoring, and the full benchmark grid.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use digitrec::audio::{self, EncodingProfile, NoiseCondition, NoiseKind};
use digitrec::corpus::{self, Manifest, Split, SynthSpec};
use digitrec::features::{self, FeatureConfig, FeatureKind, FeatureMatrix};
use digitrec::grid::{self, FeatureOpts, GridConfig};
use digitrec::hmm::{self, WordModelSet};
use digitrec::scoring;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "digitrec",
    version,
    about = "Isolated-digit recognition toolkit: corpora, features, HMMs, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the deterministic synthetic digit corpus.
    SynthCorpus(SynthCorpusArgs),
    /// Re-encode a corpus to a profile and noise condition.
    Degrade(DegradeArgs),
    /// Extract features for every manifest entry into .dfe files.
    Extract(ExtractArgs),
    /// Train one HMM per digit from extracted features.
    Train(TrainArgs),
    /// Classify utterances against trained models.
    Recognize(RecognizeArgs),
    /// Score recognition results or word-sequence files.
    Score(ScoreArgs),
    /// Run the full conditions x profiles x features benchmark grid.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthCorpusArgs {
    /// Seed fixing the corpus bit-exactly.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    train_per_digit: usize,
    #[arg(long, default_value_t = 10)]
    test_per_digit: usize,
    /// Master bit depth (8, 16 or 24).
    #[arg(long, default_value_t = 24)]
    bit_depth: u16,
    /// Master sampling rate in Hz.
    #[arg(long, default_value_t = 48000)]
    sample_rate: u32,
    /// Base token duration in seconds.
    #[arg(long, default_value_t = 0.36)]
    duration: f64,
}

#[derive(Args)]
struct DegradeArgs {
    /// Source manifest (JSON lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Target profile: a catalog label or slug such as "8bit-8000hz".
    #[arg(long)]
    profile: String,
    /// Noise condition.
    #[arg(long, value_parser = parse_noise_kind)]
    condition: NoiseKind,
    /// Signal-to-noise ratio in dB (fan defaults to 20, random to 10).
    #[arg(long)]
    snr: Option<f64>,
    /// Use a noise recording instead of the builtin generators.
    #[arg(long)]
    noise_wav: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Feature kind: mfcc, lpc, plp, fbank or melspec.
    #[arg(long, value_parser = parse_feature_kind)]
    feature: FeatureKind,
    /// Optional TOML file with extraction knobs (num_filters, num_ceps,
    /// lpc_order, deltas, delta_window, energy_floor).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Derivative streams to append: 0, 1 or 2 (overrides the config file).
    #[arg(long)]
    deltas: Option<u8>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of .dfe files produced by `extract`.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    states: usize,
    #[arg(long, default_value_t = 1)]
    mixtures: usize,
    #[arg(long, default_value_t = 15)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Directory the per-digit .dhm model files go to.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecognizeArgs {
    /// Directory of .dhm model files.
    #[arg(long)]
    models: PathBuf,
    /// Directory of .dfe feature files.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Which split to classify.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: SplitChoice,
    /// Where the per-utterance CSV report goes.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Clone, Copy)]
enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["results", "reference"])))]
struct ScoreArgs {
    /// CSV from `recognize` (path,label,predicted) to tabulate.
    #[arg(long, conflicts_with_all = ["reference", "hypothesis"])]
    results: Option<PathBuf>,
    /// Reference word-sequence file (one utterance per line).
    #[arg(long = "ref", requires = "hypothesis")]
    reference: Option<PathBuf>,
    /// Hypothesis word-sequence file, line-aligned with the reference.
    #[arg(long = "hyp", requires = "reference")]
    hypothesis: Option<PathBuf>,
    /// Per-digit verdict threshold for tabulated results.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid config file (TOML); the builtin default grid when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core). Defaults to DIGITREC_THREADS or 0.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_noise_kind(s: &str) -> Result<NoiseKind, String> {
    s.parse()
}

fn parse_feature_kind(s: &str) -> Result<FeatureKind, String> {
    s.parse()
}

fn parse_split(s: &str) -> Result<SplitChoice, String> {
    match s.to_ascii_lowercase().as_str() {
        "train" => Ok(SplitChoice::Train),
        "test" => Ok(SplitChoice::Test),
        "all" => Ok(SplitChoice::All),
        other => Err(format!("unknown split '{other}' (train|test|all)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::SynthCorpus(args) => synth_corpus(args),
        Command::Degrade(args) => degrade(args),
        Command::Extract(args) => extract(args),
        Command::Train(args) => train(args),
        Command::Recognize(args) => recognize(args),
        Command::Score(args) => score(args),
        Command::Bench(args) => bench(args),
    }
}

fn synth_corpus(args: SynthCorpusArgs) -> Result<()> {
    let spec = SynthSpec {
        seed: args.seed,
        train_per_digit: args.train_per_digit,
        test_per_digit: args.test_per_digit,
        base_profile: EncodingProfile::new(
            format!("{} bit {} Hz Mono PCM", args.bit_depth, args.sample_rate),
            args.bit_depth,
            args.sample_rate,
        ),
        base_duration_secs: args.duration,
        ..SynthSpec::default()
    };
    let manifest = corpus::generate_synthetic_corpus(&spec, &args.out)
        .context("corpus generation failed")?;
    println!(
        "wrote {} utterances under {} (manifest.jsonl)",
        manifest.entries.len(),
        args.out.display()
    );
    Ok(())
}

/// Accept a catalog label, a "24bit-48000hz" slug, or "DEPTH:RATE".
fn resolve_profile(spec: &str) -> Result<EncodingProfile> {
    let lowered = spec.to_ascii_lowercase();
    for profile in audio::catalog().into_iter().chain(audio::grid_profiles()) {
        if profile.label.to_ascii_lowercase() == lowered || profile.slug() == lowered {
            return Ok(profile);
        }
    }
    if let Some((depth, rate)) = lowered.split_once(':') {
        let bit_depth: u16 = depth.trim().parse().context("bad bit depth")?;
        let sample_rate: u32 = rate.trim().parse().context("bad sample rate")?;
        return Ok(EncodingProfile::new(
            format!("{bit_depth} bit {sample_rate} Hz Mono PCM"),
            bit_depth,
            sample_rate,
        ));
    }
    bail!(
        "unknown profile '{spec}' (use a catalog label, a slug like 8bit-8000hz, or DEPTH:RATE)"
    )
}

fn degrade(args: DegradeArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest).context("loading manifest")?;
    let profile = resolve_profile(&args.profile)?;
    let snr = args.snr.unwrap_or(match args.condition {
        NoiseKind::Fan => 20.0,
        _ => 10.0,
    });
    let condition = NoiseCondition {
        kind: args.condition,
        snr_db: if args.condition == NoiseKind::Clean {
            f64::INFINITY
        } else {
            snr
        },
        noise_wav: args.noise_wav,
    };
    let degraded = corpus::degrade_corpus(&manifest, &profile, &condition, &args.out, args.seed)
        .context("degradation failed")?;
    println!(
        "degraded {} files to {} / {} under {}",
        degraded.entries.len(),
        condition.slug(),
        profile.slug(),
        args.out.display()
    );
    Ok(())
}

/// Feature file path mirroring a manifest entry: `<dir>/<label>/<stem>.dfe`.
fn feature_path(dir: &Path, entry: &corpus::ManifestEntry) -> Result<PathBuf> {
    let stem = entry
        .path
        .file_stem()
        .ok_or_else(|| anyhow!("entry path {:?} has no file name", entry.path))?;
    let mut name = stem.to_os_string();
    name.push(".dfe");
    Ok(dir.join(&entry.label).join(name))
}

fn load_feature_opts(path: Option<&Path>) -> Result<FeatureOpts> {
    match path {
        None => Ok(FeatureOpts::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).context("parsing feature config")
        }
    }
}

fn extract(args: ExtractArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest).context("loading manifest")?;
    let mut opts = load_feature_opts(args.config.as_deref())?;
    if let Some(d) = args.deltas {
        opts.deltas = d;
    }
    let config: FeatureConfig = opts.config_for(args.feature);
    let mut written = 0usize;
    for entry in &manifest.entries {
        let buffer = audio::read_wav(&manifest.audio_path(entry))
            .with_context(|| format!("reading {}", entry.path.display()))?;
        let matrix = features::extract_features(&buffer, &config)
            .with_context(|| format!("extracting {}", entry.path.display()))?;
        features::write_features(&matrix, &feature_path(&args.out, entry)?)?;
        written += 1;
    }
    println!(
        "extracted {} {} feature files into {}",
        written,
        args.feature.display(),
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest).context("loading manifest")?;
    let mut per_digit: BTreeMap<String, Vec<FeatureMatrix>> = BTreeMap::new();
    for entry in manifest.split_entries(Split::Train) {
        let path = feature_path(&args.features, entry)?;
        let matrix = features::read_features(&path, None)
            .with_context(|| format!("reading {}", path.display()))?;
        per_digit.entry(entry.label.clone()).or_default().push(matrix);
    }
    if per_digit.is_empty() {
        bail!("manifest has no train-split entries");
    }
    fs::create_dir_all(&args.out)?;
    for (digit, utterances) in &per_digit {
        let seed = hmm::flat_start(digit, utterances, args.states, args.mixtures)?;
        let outcome = hmm::baum_welch(&seed, utterances, args.max_iters, args.tol)?;
        let final_ll = outcome.log_likelihood_trace.last().copied().unwrap_or(f64::NAN);
        hmm::save_model(&outcome.model, &args.out.join(format!("{digit}.dhm")))?;
        println!(
            "{digit}: {} utterances, {} iterations, final log-likelihood {final_ll:.3}",
            utterances.len(),
            outcome.log_likelihood_trace.len()
        );
    }
    Ok(())
}

fn load_model_set(dir: &Path) -> Result<WordModelSet> {
    let mut models = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "dhm"))
        .collect();
    paths.sort();
    for path in paths {
        models.push(hmm::load_model(&path)?);
    }
    if models.is_empty() {
        bail!("no .dhm model files in {}", dir.display());
    }
    Ok(WordModelSet::new(models)?)
}

fn recognize(args: RecognizeArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest).context("loading manifest")?;
    let models = load_model_set(&args.models)?;
    let entries: Vec<&corpus::ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| match args.split {
            SplitChoice::Train => e.split == Split::Train,
            SplitChoice::Test => e.split == Split::Test,
            SplitChoice::All => true,
        })
        .collect();
    if entries.is_empty() {
        bail!("no entries in the requested split");
    }

    let mut csv = String::from("path,label,predicted\n");
    let mut correct = 0usize;
    for entry in &entries {
        let path = feature_path(&args.features, entry)?;
        let matrix = features::read_features(&path, None)
            .with_context(|| format!("reading {}", path.display()))?;
        let (winner, _) = hmm::recognize(&models, &matrix)?;
        if winner == entry.label {
            correct += 1;
        }
        csv.push_str(&format!(
            "{},{},{}\n",
            entry.path.display(),
            entry.label,
            winner
        ));
    }
    if let Some(parent) = args.report.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.report, csv)?;
    println!(
        "recognized {} utterances, accuracy {:.2}% -> {}",
        entries.len(),
        100.0 * correct as f64 / entries.len() as f64,
        args.report.display()
    );
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    match (&args.results, &args.reference, &args.hypothesis) {
        (Some(results), None, None) => score_results(results, args.threshold),
        (None, Some(reference), Some(hypothesis)) => score_word_files(reference, hypothesis),
        _ => bail!("pass either --results FILE or both --ref FILE and --hyp FILE"),
    }
}

fn score_results(path: &Path, threshold: f64) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("path,") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            bail!("line {} of {} is not path,label,predicted", i + 1, path.display());
        }
        pairs.push((fields[1].to_string(), fields[2].to_string()));
    }
    let report = scoring::tabulate(&pairs, threshold)?;
    println!("{:<12}{:<12}{:<8}Correct", "Digit", "Verdict", "Trials");
    for (digit, stats) in &report.per_digit {
        println!(
            "{:<12}{:<12}{:<8}{}",
            digitrec::digit_display(digit),
            stats.verdict.as_str(),
            stats.trials,
            stats.correct
        );
    }
    println!("Percentage {:.0}%", report.percentage);
    println!(
        "accuracy {:.2}%  WER {:.4}  (S={} D={} I={} N={})",
        report.accuracy_pct,
        report.wer,
        report.substitutions,
        report.deletions,
        report.insertions,
        report.reference_words
    );
    Ok(())
}

fn score_word_files(reference: &Path, hypothesis: &Path) -> Result<()> {
    let ref_text = fs::read_to_string(reference)
        .with_context(|| format!("reading {}", reference.display()))?;
    let hyp_text = fs::read_to_string(hypothesis)
        .with_context(|| format!("reading {}", hypothesis.display()))?;
    let ref_lines: Vec<&str> = ref_text.lines().collect();
    let hyp_lines: Vec<&str> = hyp_text.lines().collect();
    if ref_lines.len() != hyp_lines.len() {
        bail!(
            "line counts differ: {} reference vs {} hypothesis",
            ref_lines.len(),
            hyp_lines.len()
        );
    }
    let mut s = 0usize;
    let mut d = 0usize;
    let mut i = 0usize;
    let mut n = 0usize;
    for (r_line, h_line) in ref_lines.iter().zip(&hyp_lines) {
        let r: Vec<&str> = r_line.split_whitespace().collect();
        let h: Vec<&str> = h_line.split_whitespace().collect();
        let counts = scoring::align(&r, &h);
        s += counts.substitutions;
        d += counts.deletions;
        i += counts.insertions;
        n += r.len();
    }
    let wer = scoring::wer(s, d, i, n)?;
    println!("WER {wer:.4} (S={s} D={d} I={i} N={n})");
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            GridConfig::from_toml(&text)?
        }
        None => GridConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let threads = match args.threads {
        Some(t) => t,
        None => std::env::var("DIGITREC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0),
    };

    let report = grid::run_grid(&config, &args.out, threads)?;
    let files = grid::emit_reports(&report, &args.out.join("reports"))?;

    let failed = report
        .cells
        .values()
        .filter(|c| matches!(c, grid::CellOutcome::Failed(_)))
        .count();
    println!(
        "grid complete: {} cells ({} failed), {} report files under {}",
        report.cells.len(),
        failed,
        files.len(),
        args.out.join("reports").display()
    );
    let order: Vec<&str> = report.ranking.iter().map(|(f, _)| f.display()).collect();
    println!("feature ranking (mean table percentage): {}", order.join(" > "));
    Ok(())
}
