//! Benchmark grid runner: conditions x encoding profiles x feature kinds,
//! each cell scored by a freshly trained per-digit model set, reported as
//! condition tables, a long-format CSV and per-condition plot data.

use crate::audio::{self, EncodingProfile, NoiseCondition};
use crate::corpus::{
    degrade_corpus, generate_synthetic_corpus, CorpusError, Manifest, Split, SynthSpec,
};
use crate::dsp::FrameConfig;
use crate::features::{
    extract_features, FeatureConfig, FeatureError, FeatureKind, FeatureMatrix,
};
use crate::hmm::{self, HmmError, WordModelSet};
use crate::scoring::{tabulate, EvalReport, ScoreError, DEFAULT_VERDICT_THRESHOLD};
use crate::{digit_display, DIGITS};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("bad grid config: {0}")]
    Config(String),
    #[error("no cells to report")]
    EmptyReport,
    #[error(transparent)]
    Audio(#[from] audio::AudioError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GridError>;

/// HMM training knobs.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct HmmParams {
    pub states: usize,
    pub mixtures: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for HmmParams {
    fn default() -> Self {
        HmmParams {
            states: 5,
            mixtures: 1,
            max_iters: 15,
            tol: 0.01,
        }
    }
}

/// Shared feature-extraction knobs applied to every kind in the grid,
/// including the short-time analysis frame.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct FeatureOpts {
    pub num_filters: usize,
    pub num_ceps: usize,
    pub lpc_order: usize,
    pub deltas: u8,
    pub delta_window: usize,
    pub energy_floor: f64,
    pub frame: FrameConfig,
}

impl Default for FeatureOpts {
    fn default() -> Self {
        FeatureOpts {
            num_filters: 26,
            num_ceps: 12,
            lpc_order: 12,
            deltas: 2,
            delta_window: 2,
            energy_floor: 1e-10,
            frame: FrameConfig::default(),
        }
    }
}

impl FeatureOpts {
    pub fn config_for(&self, kind: FeatureKind) -> FeatureConfig {
        FeatureConfig {
            num_filters: self.num_filters,
            num_ceps: self.num_ceps,
            lpc_order: self.lpc_order,
            include_deltas: self.deltas,
            delta_window: self.delta_window,
            energy_floor: self.energy_floor,
            frame: self.frame,
            ..FeatureConfig::new(kind)
        }
    }
}

/// The full experiment description. One seed pins every stochastic choice:
/// corpus synthesis and per-file noise streams.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub seed: u64,
    /// Existing master manifest; when absent a synthetic corpus is built.
    pub corpus_manifest: Option<PathBuf>,
    pub synth: SynthSpec,
    pub profiles: Vec<EncodingProfile>,
    pub conditions: Vec<NoiseCondition>,
    pub features: Vec<FeatureKind>,
    pub feature_opts: FeatureOpts,
    pub hmm: HmmParams,
    /// Condition the training split is degraded with (clean by default;
    /// matched-noise training is an override).
    pub train_condition: NoiseCondition,
    pub verdict_threshold: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            seed: 42,
            corpus_manifest: None,
            synth: SynthSpec::default(),
            profiles: audio::grid_profiles(),
            conditions: default_conditions(),
            features: FeatureKind::ALL.to_vec(),
            feature_opts: FeatureOpts::default(),
            hmm: HmmParams::default(),
            train_condition: NoiseCondition::clean(),
            verdict_threshold: DEFAULT_VERDICT_THRESHOLD,
        }
    }
}

fn default_conditions() -> Vec<NoiseCondition> {
    vec![
        NoiseCondition::clean(),
        NoiseCondition::fan(20.0),
        NoiseCondition::random(10.0),
    ]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfigFile {
    seed: Option<u64>,
    corpus: Option<PathBuf>,
    features: Option<Vec<FeatureKind>>,
    profiles: Option<Vec<EncodingProfile>>,
    conditions: Option<Vec<NoiseCondition>>,
    synth: Option<SynthSection>,
    hmm: Option<HmmParams>,
    feature_opts: Option<FeatureOpts>,
    train_condition: Option<NoiseCondition>,
    verdict_threshold: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SynthSection {
    train_per_digit: Option<usize>,
    test_per_digit: Option<usize>,
    base_duration_secs: Option<f64>,
}

impl GridConfig {
    /// Parse the declarative config document; omitted keys fall back to the
    /// standard grid.
    pub fn from_toml(text: &str) -> Result<GridConfig> {
        let file: GridConfigFile =
            toml::from_str(text).map_err(|e| GridError::Config(e.to_string()))?;
        let mut config = GridConfig::default();
        if let Some(seed) = file.seed {
            config.seed = seed;
        }
        config.corpus_manifest = file.corpus;
        if let Some(features) = file.features {
            config.features = features;
        }
        if let Some(profiles) = file.profiles {
            config.profiles = profiles;
        }
        if let Some(conditions) = file.conditions {
            config.conditions = conditions;
        }
        // A clean condition has no meaningful SNR; pin the sentinel so
        // configs with and without a redundant snr_db compare equal.
        for condition in &mut config.conditions {
            if condition.kind == crate::audio::NoiseKind::Clean {
                condition.snr_db = f64::INFINITY;
                condition.noise_wav = None;
            }
        }
        if let Some(synth) = file.synth {
            if let Some(v) = synth.train_per_digit {
                config.synth.train_per_digit = v;
            }
            if let Some(v) = synth.test_per_digit {
                config.synth.test_per_digit = v;
            }
            if let Some(v) = synth.base_duration_secs {
                config.synth.base_duration_secs = v;
            }
        }
        if let Some(hmm) = file.hmm {
            config.hmm = hmm;
        }
        if let Some(opts) = file.feature_opts {
            config.feature_opts = opts;
        }
        if let Some(tc) = file.train_condition {
            config.train_condition = tc;
        }
        if let Some(t) = file.verdict_threshold {
            config.verdict_threshold = t;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() || self.conditions.is_empty() || self.features.is_empty() {
            return Err(GridError::Config(
                "profiles, conditions and features must be non-empty".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.verdict_threshold) {
            return Err(GridError::Config("verdict_threshold must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// (condition slug, profile slug, feature name).
pub type CellKey = (String, String, String);

#[derive(Debug, Clone)]
pub enum CellOutcome {
    Report(EvalReport),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct GridReport {
    /// Condition slugs in config order.
    pub conditions: Vec<String>,
    /// Profiles in config order.
    pub profiles: Vec<EncodingProfile>,
    /// Feature kinds in config order.
    pub features: Vec<FeatureKind>,
    pub cells: BTreeMap<CellKey, CellOutcome>,
    /// Feature kinds ordered by mean table percentage, best first.
    pub ranking: Vec<(FeatureKind, f64)>,
}

impl GridReport {
    pub fn cell(
        &self,
        condition: &str,
        profile_slug: &str,
        feature: FeatureKind,
    ) -> Option<&CellOutcome> {
        self.cells.get(&(
            condition.to_string(),
            profile_slug.to_string(),
            feature.as_str().to_string(),
        ))
    }
}

/// Run the whole grid. `threads` bounds the worker pool (0 means one per
/// available core); results are identical for any thread count.
pub fn run_grid(config: &GridConfig, out_dir: &Path, threads: usize) -> Result<GridReport> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;

    // Master corpus: load if given, otherwise synthesize deterministically.
    let master = match &config.corpus_manifest {
        Some(path) => Manifest::load(path)?,
        None => {
            let spec = SynthSpec {
                seed: config.seed,
                ..config.synth.clone()
            };
            generate_synthetic_corpus(&spec, &out_dir.join("corpus-master"))?
        }
    };

    // Degradation phase: one train corpus per profile, one test corpus per
    // (profile, condition).
    let train_master = master.filtered(Split::Train);
    let test_master = master.filtered(Split::Test);
    let mut train_sets: BTreeMap<String, Manifest> = BTreeMap::new();
    let mut test_sets: BTreeMap<(String, String), Manifest> = BTreeMap::new();
    for profile in &config.profiles {
        let train_dir = out_dir.join("corpus").join("train");
        let manifest = degrade_corpus(
            &train_master,
            profile,
            &config.train_condition,
            &train_dir,
            config.seed,
        )?;
        train_sets.insert(profile.slug(), manifest);
        for condition in &config.conditions {
            let test_dir = out_dir.join("corpus").join("test");
            let manifest =
                degrade_corpus(&test_master, profile, condition, &test_dir, config.seed)?;
            test_sets.insert((profile.slug(), condition.slug()), manifest);
        }
    }

    // Work queue over (profile, feature) jobs; each trains once and scores
    // every condition.
    struct Job<'a> {
        profile: &'a EncodingProfile,
        feature: FeatureKind,
    }
    let jobs: Vec<Job> = config
        .profiles
        .iter()
        .flat_map(|profile| {
            config
                .features
                .iter()
                .map(move |&feature| Job { profile, feature })
        })
        .collect();

    let workers = if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    }
    .min(jobs.len().max(1));

    let next_job = AtomicUsize::new(0);
    let cells: Mutex<BTreeMap<CellKey, CellOutcome>> = Mutex::new(BTreeMap::new());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next_job.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(index) else { break };
                let slug = job.profile.slug();
                let train_manifest = &train_sets[&slug];
                let outcome = run_profile_feature(
                    config,
                    job.profile,
                    job.feature,
                    train_manifest,
                    &test_sets,
                );
                let mut map = cells.lock().unwrap();
                match outcome {
                    Ok(per_condition) => {
                        for (condition_slug, cell) in per_condition {
                            map.insert(
                                (condition_slug, slug.clone(), job.feature.as_str().into()),
                                cell,
                            );
                        }
                    }
                    Err(err) => {
                        // The whole training job failed: every dependent
                        // cell records the error.
                        for condition in &config.conditions {
                            map.insert(
                                (
                                    condition.slug(),
                                    slug.clone(),
                                    job.feature.as_str().into(),
                                ),
                                CellOutcome::Failed(err.to_string()),
                            );
                        }
                    }
                }
            });
        }
    });

    let cells = cells.into_inner().unwrap();
    let ranking = compute_ranking(&config.features, &cells);
    Ok(GridReport {
        conditions: config.conditions.iter().map(|c| c.slug()).collect(),
        profiles: config.profiles.clone(),
        features: config.features.clone(),
        cells,
        ranking,
    })
}

/// Train per-digit models for one (profile, feature) pair and score every
/// condition's test set.
fn run_profile_feature(
    config: &GridConfig,
    profile: &EncodingProfile,
    feature: FeatureKind,
    train_manifest: &Manifest,
    test_sets: &BTreeMap<(String, String), Manifest>,
) -> Result<Vec<(String, CellOutcome)>> {
    let feature_config = config.feature_opts.config_for(feature);

    // Group training features by digit.
    let mut per_digit: BTreeMap<&str, Vec<FeatureMatrix>> = BTreeMap::new();
    for entry in &train_manifest.entries {
        let buffer = audio::read_wav(&train_manifest.audio_path(entry))?;
        let features = extract_features(&buffer, &feature_config)?;
        per_digit.entry(entry.label.as_str()).or_default().push(features);
    }

    let mut models = Vec::with_capacity(per_digit.len());
    for (digit, utterances) in &per_digit {
        let seed_model =
            hmm::flat_start(digit, utterances, config.hmm.states, config.hmm.mixtures)?;
        let outcome = hmm::baum_welch(
            &seed_model,
            utterances,
            config.hmm.max_iters,
            config.hmm.tol,
        )?;
        models.push(outcome.model);
    }
    let set = WordModelSet::new(models)?;

    let mut out = Vec::with_capacity(config.conditions.len());
    for condition in &config.conditions {
        let key = (profile.slug(), condition.slug());
        let test_manifest = &test_sets[&key];
        let cell = match score_condition(test_manifest, &set, &feature_config, config) {
            Ok(report) => CellOutcome::Report(report),
            Err(err) => CellOutcome::Failed(err.to_string()),
        };
        out.push((condition.slug(), cell));
    }
    Ok(out)
}

fn score_condition(
    test_manifest: &Manifest,
    models: &WordModelSet,
    feature_config: &FeatureConfig,
    config: &GridConfig,
) -> Result<EvalReport> {
    let mut results = Vec::with_capacity(test_manifest.entries.len());
    for entry in &test_manifest.entries {
        let buffer = audio::read_wav(&test_manifest.audio_path(entry))?;
        let features = extract_features(&buffer, feature_config)?;
        let (winner, _) = hmm::recognize(models, &features)?;
        results.push((entry.label.clone(), winner));
    }
    Ok(tabulate(&results, config.verdict_threshold)?)
}

fn compute_ranking(
    features: &[FeatureKind],
    cells: &BTreeMap<CellKey, CellOutcome>,
) -> Vec<(FeatureKind, f64)> {
    let mut ranking: Vec<(FeatureKind, f64)> = features
        .iter()
        .map(|&feature| {
            let mut total = 0.0;
            let mut count = 0usize;
            for ((_, _, f), outcome) in cells {
                if f == feature.as_str() {
                    if let CellOutcome::Report(report) = outcome {
                        total += report.percentage;
                        count += 1;
                    }
                }
            }
            let mean = if count == 0 { 0.0 } else { total / count as f64 };
            (feature, mean)
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.as_str().cmp(b.0.as_str()))
    });
    ranking
}

fn format_pct(p: f64) -> String {
    if (p - p.round()).abs() < 1e-9 {
        format!("{:.0}%", p)
    } else {
        format!("{:.1}%", p)
    }
}

/// The profile condition tables are reported at: the highest bit rate
/// configured (first one on ties).
pub fn reference_profile(report: &GridReport) -> &EncodingProfile {
    let mut best = &report.profiles[0];
    for profile in &report.profiles[1..] {
        if profile.bit_rate() > best.bit_rate() {
            best = profile;
        }
    }
    best
}

/// Write every report artifact under `out_dir`:
///
/// * `table-<condition>.txt` - one per condition at the reference profile:
///   digits as rows, feature kinds as columns, Correct/In-Correct cells and
///   a closing Percentage row
/// * `results.csv` - long format, one row per (cell, digit)
/// * `plot-<condition>.csv` - feature x profile accuracy grid
/// * `ranking.txt` - feature kinds by mean table percentage
/// * `failures.txt` - any failed cells (only when failures happened)
pub fn emit_reports(report: &GridReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.cells.is_empty() {
        return Err(GridError::EmptyReport);
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    // Condition tables at the reference profile.
    let reference = reference_profile(report);
    for condition in &report.conditions {
        let mut text = String::new();
        write!(text, "{:<12}", "Digit").unwrap();
        for feature in &report.features {
            write!(text, "{:<12}", feature.display()).unwrap();
        }
        text.push('\n');
        for digit in DIGITS {
            write!(text, "{:<12}", digit_display(digit)).unwrap();
            for feature in &report.features {
                let cell = report.cell(condition, &reference.slug(), *feature);
                let value = match cell {
                    Some(CellOutcome::Report(r)) => r
                        .per_digit
                        .get(digit)
                        .map_or("n/a", |s| s.verdict.as_str()),
                    Some(CellOutcome::Failed(_)) => "Failed",
                    None => "n/a",
                };
                write!(text, "{:<12}", value).unwrap();
            }
            text.push('\n');
        }
        write!(text, "{:<12}", "Percentage").unwrap();
        for feature in &report.features {
            let value = match report.cell(condition, &reference.slug(), *feature) {
                Some(CellOutcome::Report(r)) => format_pct(r.percentage),
                Some(CellOutcome::Failed(_)) => "Failed".to_string(),
                None => "n/a".to_string(),
            };
            write!(text, "{:<12}", value).unwrap();
        }
        text.push('\n');

        let path = out_dir.join(format!("table-{condition}.txt"));
        fs::write(&path, text)?;
        written.push(path);
    }

    // Long-format CSV.
    {
        let mut csv = String::from("condition,profile,feature,digit,trials,correct,rate\n");
        for ((condition, profile, feature), outcome) in &report.cells {
            if let CellOutcome::Report(r) = outcome {
                for (digit, stats) in &r.per_digit {
                    writeln!(
                        csv,
                        "{condition},{profile},{feature},{digit},{},{},{:.4}",
                        stats.trials,
                        stats.correct,
                        stats.rate()
                    )
                    .unwrap();
                }
            }
        }
        let path = out_dir.join("results.csv");
        fs::write(&path, csv)?;
        written.push(path);
    }

    // Per-condition plot data: per-sample accuracy, feature x profile.
    for condition in &report.conditions {
        let mut csv = String::from("feature");
        for profile in &report.profiles {
            write!(csv, ",{}", profile.slug()).unwrap();
        }
        csv.push('\n');
        for feature in &report.features {
            write!(csv, "{}", feature.display()).unwrap();
            for profile in &report.profiles {
                match report.cell(condition, &profile.slug(), *feature) {
                    Some(CellOutcome::Report(r)) => {
                        write!(csv, ",{:.2}", r.accuracy_pct).unwrap()
                    }
                    _ => write!(csv, ",").unwrap(),
                }
            }
            csv.push('\n');
        }
        let path = out_dir.join(format!("plot-{condition}.csv"));
        fs::write(&path, csv)?;
        written.push(path);
    }

    // Ranking (informational).
    {
        let mut text = String::new();
        let order: Vec<&str> = report.ranking.iter().map(|(f, _)| f.display()).collect();
        writeln!(text, "{}", order.join(" > ")).unwrap();
        for (feature, mean) in &report.ranking {
            writeln!(text, "{:<8} mean percentage {:.2}", feature.display(), mean).unwrap();
        }
        let path = out_dir.join("ranking.txt");
        fs::write(&path, text)?;
        written.push(path);
    }

    // Failures, when any.
    let failures: Vec<String> = report
        .cells
        .iter()
        .filter_map(|((c, p, f), outcome)| match outcome {
            CellOutcome::Failed(err) => Some(format!("{c}/{p}/{f}: {err}")),
            CellOutcome::Report(_) => None,
        })
        .collect();
    if !failures.is_empty() {
        let path = out_dir.join("failures.txt");
        fs::write(&path, failures.join("\n") + "\n")?;
        written.push(path);
    }

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_has_the_full_grid_shape() {
        let config = GridConfig::default();
        assert_eq!(config.profiles.len(), 5);
        assert_eq!(config.conditions.len(), 3);
        assert_eq!(config.features.len(), 5);
        config.validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_defaults() {
        let text = r#"
            seed = 7
            features = ["mfcc", "lpc"]

            [synth]
            train_per_digit = 4
            test_per_digit = 2

            [hmm]
            states = 3
            max_iters = 5

            [[profiles]]
            label = "toy"
            bit_depth = 16
            sample_rate = 16000

            [[conditions]]
            kind = "clean"

            [[conditions]]
            kind = "random"
            snr_db = 12.0
        "#;
        let config = GridConfig::from_toml(text).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.features, vec![FeatureKind::Mfcc, FeatureKind::Lpc]);
        assert_eq!(config.profiles.len(), 1);
        assert_eq!(config.conditions.len(), 2);
        assert_eq!(config.hmm.states, 3);
        assert_eq!(config.hmm.max_iters, 5);
        assert_eq!(config.hmm.mixtures, 1); // default survives partial [hmm]
        assert_eq!(config.synth.train_per_digit, 4);
    }

    #[test]
    fn bad_toml_is_a_config_error() {
        assert!(matches!(
            GridConfig::from_toml("features = [\"sonogram\"]"),
            Err(GridError::Config(_))
        ));
        assert!(matches!(
            GridConfig::from_toml("unknown_key = 3"),
            Err(GridError::Config(_))
        ));
    }

    #[test]
    fn empty_lists_are_rejected() {
        let mut config = GridConfig::default();
        config.features.clear();
        assert!(matches!(config.validate(), Err(GridError::Config(_))));
    }

    #[test]
    fn one_cell_grid_runs_end_to_end() {
        let out = tempfile::tempdir().unwrap();
        let config = GridConfig {
            synth: SynthSpec {
                train_per_digit: 3,
                test_per_digit: 1,
                ..SynthSpec::default()
            },
            profiles: vec![EncodingProfile::new("16 bit 16000 Hz Mono PCM", 16, 16000)],
            conditions: vec![NoiseCondition::clean()],
            features: vec![FeatureKind::Mfcc],
            hmm: HmmParams {
                max_iters: 4,
                ..HmmParams::default()
            },
            ..GridConfig::default()
        };
        let report = run_grid(&config, out.path(), 1).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = report
            .cell("clean", "16bit-16000hz", FeatureKind::Mfcc)
            .unwrap();
        match cell {
            CellOutcome::Report(r) => {
                assert_eq!(r.per_digit.len(), 10);
                assert_eq!(r.reference_words, 10);
            }
            CellOutcome::Failed(e) => panic!("cell failed: {e}"),
        }
        let files = emit_reports(&report, &out.path().join("reports")).unwrap();
        assert!(files.iter().any(|p| p.ends_with("results.csv")));
        let table =
            fs::read_to_string(out.path().join("reports").join("table-clean.txt")).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 12); // header + 10 digits + Percentage
        assert!(lines[1].starts_with("One"));
        assert!(lines[10].starts_with("Zero"));
        assert!(lines[11].starts_with("Percentage"));
    }

    #[test]
    fn emit_reports_rejects_empty() {
        let report = GridReport {
            conditions: vec![],
            profiles: vec![],
            features: vec![],
            cells: BTreeMap::new(),
            ranking: vec![],
        };
        let out = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_reports(&report, out.path()),
            Err(GridError::EmptyReport)
        ));
    }

    #[test]
    fn shipped_default_config_parses_to_the_default_grid() {
        let text = fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/default_grid.toml"
        ))
        .expect("shipped grid config");
        let parsed = GridConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, GridConfig::default());
    }

    #[test]
    fn failed_cells_do_not_disturb_healthy_ones() {
        let synth = SynthSpec {
            train_per_digit: 2,
            test_per_digit: 1,
            ..SynthSpec::default()
        };
        // 300 Hz leaves the fft far too coarse for 26 mel filters, so every
        // cell of that profile fails during extraction.
        let broken = EncodingProfile::new("broken", 16, 300);
        let good = EncodingProfile::new("16 bit 16000 Hz Mono PCM", 16, 16000);
        let hmm = HmmParams {
            max_iters: 3,
            ..HmmParams::default()
        };
        let base = GridConfig {
            synth: synth.clone(),
            conditions: vec![NoiseCondition::clean()],
            features: vec![FeatureKind::Mfcc],
            hmm,
            ..GridConfig::default()
        };

        let out_mixed = tempfile::tempdir().unwrap();
        let mixed = run_grid(
            &GridConfig {
                profiles: vec![good.clone(), broken.clone()],
                ..base.clone()
            },
            out_mixed.path(),
            1,
        )
        .unwrap();
        assert!(matches!(
            mixed.cell("clean", "16bit-300hz", FeatureKind::Mfcc),
            Some(CellOutcome::Failed(_))
        ));

        let out_alone = tempfile::tempdir().unwrap();
        let alone = run_grid(
            &GridConfig {
                profiles: vec![good.clone()],
                ..base
            },
            out_alone.path(),
            1,
        )
        .unwrap();

        let pick = |r: &GridReport| match r.cell("clean", &good.slug(), FeatureKind::Mfcc) {
            Some(CellOutcome::Report(rep)) => rep.clone(),
            other => panic!("healthy cell missing or failed: {other:?}"),
        };
        assert_eq!(pick(&mixed), pick(&alone));
    }

    #[test]
    fn ranking_is_a_permutation_of_features() {
        let out = tempfile::tempdir().unwrap();
        let config = GridConfig {
            synth: SynthSpec {
                train_per_digit: 2,
                test_per_digit: 1,
                ..SynthSpec::default()
            },
            profiles: vec![EncodingProfile::new("8 bit 8000 Hz Mono PCM", 8, 8000)],
            conditions: vec![NoiseCondition::clean()],
            features: vec![FeatureKind::Fbank, FeatureKind::Lpc],
            hmm: HmmParams {
                max_iters: 3,
                ..HmmParams::default()
            },
            ..GridConfig::default()
        };
        let report = run_grid(&config, out.path(), 2).unwrap();
        let mut ranked: Vec<FeatureKind> = report.ranking.iter().map(|(f, _)| *f).collect();
        ranked.sort_by_key(|f| f.as_str().to_string());
        let mut configured = config.features.clone();
        configured.sort_by_key(|f| f.as_str().to_string());
        assert_eq!(ranked, configured);

        // Recomputing mean percentages from the public cells reproduces the
        // emitted ranking values.
        for (feature, mean) in &report.ranking {
            let values: Vec<f64> = report
                .cells
                .iter()
                .filter(|((_, _, f), _)| f == feature.as_str())
                .filter_map(|(_, outcome)| match outcome {
                    CellOutcome::Report(r) => Some(r.percentage),
                    CellOutcome::Failed(_) => None,
                })
                .collect();
            let expected = values.iter().sum::<f64>() / values.len() as f64;
            assert_eq!(*mean, expected);
        }
    }
}
