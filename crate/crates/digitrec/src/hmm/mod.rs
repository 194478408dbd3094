//! Left-to-right Gaussian-mixture hidden Markov models, one per word.
//!
//! Topology: non-emitting entry and exit states bracket `num_states`
//! emitting states; each emitting state may loop on itself or advance to its
//! right neighbour, the last one advances to the exit. All probability math
//! runs in the natural-log domain with log-sum-exp, so scores stay finite
//! for utterances of tens of thousands of frames.

mod io;

pub use io::{load_model, save_model};

use crate::features::{FeatureMatrix, FeatureSignature};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("feature signature mismatch: model expects {expected:?}, got {found:?}")]
    SignatureMismatch {
        expected: FeatureSignature,
        found: FeatureSignature,
    },
    #[error("empty observation sequence")]
    EmptyObservation,
    #[error("no legal path: {frames} frames cannot traverse {states} states")]
    NoLegalPath { frames: usize, states: usize },
    #[error("duplicate word label '{0}' in model set")]
    DuplicateLabel(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("model file version {found} not supported (expected {supported})")]
    VersionMismatch { found: u16, supported: u16 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HmmError>;

/// Diagonal-covariance Gaussian mixture attached to one emitting state.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub weights: Vec<f64>,
    /// One mean vector per component.
    pub means: Vec<Vec<f64>>,
    /// One diagonal-variance vector per component.
    pub variances: Vec<Vec<f64>>,
}

impl GmmState {
    pub fn num_mixtures(&self) -> usize {
        self.weights.len()
    }
}

/// One word's HMM.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub word_label: String,
    /// Emitting-state count; the transition matrix is (num_states + 2)^2
    /// with row/column 0 the entry state and row/column num_states + 1 the
    /// exit state.
    pub num_states: usize,
    pub transitions: Vec<Vec<f64>>,
    pub states: Vec<GmmState>,
    pub signature: FeatureSignature,
    /// Per-dimension variance floor applied at every re-estimation.
    pub var_floor: Vec<f64>,
}

impl HmmModel {
    pub fn dim(&self) -> usize {
        self.signature.dim as usize
    }

    fn check_features(&self, features: &FeatureMatrix) -> Result<()> {
        if features.num_frames() == 0 {
            return Err(HmmError::EmptyObservation);
        }
        let sig = features.signature();
        if sig != self.signature {
            return Err(HmmError::SignatureMismatch {
                expected: self.signature,
                found: sig,
            });
        }
        Ok(())
    }

    /// Row-stochastic within tolerance, mixture weights normalized,
    /// variances floored. Debug aid and test hook.
    pub fn is_well_formed(&self) -> bool {
        let n = self.num_states + 2;
        let rows_ok = self.transitions.len() == n
            && self.transitions.iter().all(|row| {
                row.len() == n && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            });
        let states_ok = self.states.iter().all(|s| {
            (s.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9
                && s.variances
                    .iter()
                    .all(|v| v.iter().zip(&self.var_floor).all(|(x, f)| x >= f))
        });
        rows_ok && states_ok
    }

    fn log_transitions(&self) -> Vec<Vec<f64>> {
        self.transitions
            .iter()
            .map(|row| row.iter().map(|&p| safe_ln(p)).collect())
            .collect()
    }

    /// Log emission densities: `out[t][j] = ln b_j(o_t)`.
    fn emission_table(&self, features: &FeatureMatrix) -> Vec<Vec<f64>> {
        features
            .rows()
            .map(|obs| {
                self.states
                    .iter()
                    .map(|s| log_gmm_density(s, obs))
                    .collect()
            })
            .collect()
    }
}

fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut buf: Vec<f64> = Vec::new();
    for v in values {
        buf.push(v);
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + buf.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn log_gaussian(obs: &[f32], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&x, &m), &v) in obs.iter().zip(mean).zip(var) {
        let d = x as f64 - m;
        acc += (std::f64::consts::TAU * v).ln() + d * d / v;
    }
    -0.5 * acc
}

fn log_gmm_density(state: &GmmState, obs: &[f32]) -> f64 {
    log_sum_exp((0..state.num_mixtures()).map(|m| {
        safe_ln(state.weights[m]) + log_gaussian(obs, &state.means[m], &state.variances[m])
    }))
}

const VAR_FLOOR_FRACTION: f64 = 1e-4;
const VAR_FLOOR_ABS: f64 = 1e-12;
/// Below this total occupancy a state's parameters are held fixed.
const MIN_OCCUPANCY: f64 = 1e-3;

/// Initialize a model from global data statistics: every state starts with
/// the pooled frame mean and variance, mixtures are split off the global
/// Gaussian by deterministic mean perturbation, and transitions are uniform
/// over the allowed left-to-right arcs.
pub fn flat_start(
    label: &str,
    training: &[FeatureMatrix],
    num_states: usize,
    num_mixtures: usize,
) -> Result<HmmModel> {
    assert!(num_states >= 1 && num_mixtures >= 1);
    let first = training.first().ok_or(HmmError::EmptyTrainingSet)?;
    let signature = first.signature();
    let dim = signature.dim as usize;
    for m in training {
        if m.signature().dim as usize != dim {
            return Err(HmmError::DimMismatch {
                expected: dim,
                found: m.signature().dim as usize,
            });
        }
    }

    let mut count = 0usize;
    let mut sum = vec![0.0f64; dim];
    let mut sq_sum = vec![0.0f64; dim];
    for matrix in training {
        for row in matrix.rows() {
            for (d, &v) in row.iter().enumerate() {
                sum[d] += v as f64;
                sq_sum[d] += (v as f64) * (v as f64);
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(HmmError::EmptyTrainingSet);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let variance: Vec<f64> = sq_sum
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq / count as f64 - m * m).max(0.0))
        .collect();
    let var_floor: Vec<f64> = variance
        .iter()
        .map(|v| (VAR_FLOOR_FRACTION * v).max(VAR_FLOOR_ABS))
        .collect();
    let floored: Vec<f64> = variance
        .iter()
        .zip(&var_floor)
        .map(|(v, f)| v.max(*f))
        .collect();
    let sigma: Vec<f64> = floored.iter().map(|v| v.sqrt()).collect();

    let mut states = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut weights = Vec::with_capacity(num_mixtures);
        let mut means = Vec::with_capacity(num_mixtures);
        let mut variances = Vec::with_capacity(num_mixtures);
        for m in 0..num_mixtures {
            let offset = 0.2 * (m as f64 - (num_mixtures as f64 - 1.0) / 2.0);
            weights.push(1.0 / num_mixtures as f64);
            means.push(
                mean.iter()
                    .zip(&sigma)
                    .map(|(mu, s)| mu + offset * s)
                    .collect(),
            );
            variances.push(floored.clone());
        }
        states.push(GmmState {
            weights,
            means,
            variances,
        });
    }

    let size = num_states + 2;
    let mut transitions = vec![vec![0.0; size]; size];
    transitions[0][1] = 1.0; // entry -> first emitting state
    for s in 1..=num_states {
        transitions[s][s] = 0.5;
        transitions[s][s + 1] = 0.5; // advance (or exit for the last state)
    }
    transitions[size - 1][size - 1] = 1.0; // exit is absorbing

    Ok(HmmModel {
        word_label: label.to_string(),
        num_states,
        transitions,
        states,
        signature,
        var_floor,
    })
}

/// Total forward-algorithm log-probability of the observation sequence.
/// Returns negative infinity when the topology admits no path (for example
/// fewer frames than emitting states).
pub fn log_likelihood(model: &HmmModel, features: &FeatureMatrix) -> Result<f64> {
    model.check_features(features)?;
    let emis = model.emission_table(features);
    let log_a = model.log_transitions();
    Ok(forward_ll(model, &emis, &log_a))
}

fn forward_ll(model: &HmmModel, emis: &[Vec<f64>], log_a: &[Vec<f64>]) -> f64 {
    forward_lattice(model, emis, log_a).1
}

fn forward_lattice(
    model: &HmmModel,
    emis: &[Vec<f64>],
    log_a: &[Vec<f64>],
) -> (Vec<Vec<f64>>, f64) {
    let n = model.num_states;
    let t_len = emis.len();
    let exit = n + 1;
    let mut alpha = vec![vec![f64::NEG_INFINITY; n]; t_len];
    for j in 0..n {
        alpha[0][j] = log_a[0][j + 1] + emis[0][j];
    }
    for t in 1..t_len {
        for j in 0..n {
            let incoming =
                log_sum_exp((0..n).map(|i| alpha[t - 1][i] + log_a[i + 1][j + 1]));
            alpha[t][j] = incoming + emis[t][j];
        }
    }
    let ll = log_sum_exp((0..n).map(|i| alpha[t_len - 1][i] + log_a[i + 1][exit]));
    (alpha, ll)
}

/// Most likely state path (emitting-state indices, 0-based) and its log
/// probability.
pub fn viterbi(model: &HmmModel, features: &FeatureMatrix) -> Result<(Vec<usize>, f64)> {
    model.check_features(features)?;
    let t_len = features.num_frames();
    let n = model.num_states;
    if t_len < n {
        return Err(HmmError::NoLegalPath {
            frames: t_len,
            states: n,
        });
    }
    let emis = model.emission_table(features);
    let log_a = model.log_transitions();
    let exit = n + 1;

    let mut delta = vec![vec![f64::NEG_INFINITY; n]; t_len];
    let mut back = vec![vec![0usize; n]; t_len];
    for j in 0..n {
        delta[0][j] = log_a[0][j + 1] + emis[0][j];
    }
    for t in 1..t_len {
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            for i in 0..n {
                let v = delta[t - 1][i] + log_a[i + 1][j + 1];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            delta[t][j] = best + emis[t][j];
            back[t][j] = arg;
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = 0usize;
    for i in 0..n {
        let v = delta[t_len - 1][i] + log_a[i + 1][exit];
        if v > best {
            best = v;
            last = i;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(HmmError::NoLegalPath {
            frames: t_len,
            states: n,
        });
    }
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = last;
    for t in (0..t_len - 1).rev() {
        path[t] = back[t + 1][path[t + 1]];
    }
    Ok((path, best))
}

/// Training outcome: the re-estimated model, the per-iteration total
/// log-likelihood (measured before each re-estimation), and any states whose
/// occupancy was too small to re-estimate.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HmmModel,
    pub log_likelihood_trace: Vec<f64>,
    /// (iteration, emitting-state index) pairs that were held fixed.
    pub degenerate_states: Vec<(usize, usize)>,
}

/// Baum-Welch (EM) re-estimation over a training collection. Stops after
/// `max_iters` iterations or as soon as the total log-likelihood improves by
/// less than `tol`. Utterances the topology cannot traverse (fewer frames
/// than states) contribute nothing and are skipped.
pub fn baum_welch(
    model: &HmmModel,
    training: &[FeatureMatrix],
    max_iters: usize,
    tol: f64,
) -> Result<TrainOutcome> {
    if training.is_empty() {
        return Err(HmmError::EmptyTrainingSet);
    }
    for m in training {
        model.check_features(m)?;
    }

    let mut current = model.clone();
    let mut trace: Vec<f64> = Vec::with_capacity(max_iters);
    let mut degenerate = Vec::new();

    for iter in 0..max_iters {
        let (total_ll, next, starved) = em_step(&current, training);
        trace.push(total_ll);
        for s in starved {
            degenerate.push((iter, s));
        }
        current = next;
        if iter > 0 && total_ll - trace[iter - 1] < tol {
            break;
        }
    }

    Ok(TrainOutcome {
        model: current,
        log_likelihood_trace: trace,
        degenerate_states: degenerate,
    })
}

struct Accumulators {
    /// Expected transition counts between emitting states.
    trans: Vec<Vec<f64>>,
    /// Expected exits from each emitting state.
    exit: Vec<f64>,
    /// Expected entry-arc use per emitting state.
    entry: Vec<f64>,
    /// Total state occupancy (equals the transition-row denominator).
    occupancy: Vec<f64>,
    mix_occ: Vec<Vec<f64>>,
    mix_sum: Vec<Vec<Vec<f64>>>,
    mix_sq_sum: Vec<Vec<Vec<f64>>>,
    utterances: f64,
}

impl Accumulators {
    fn new(n: usize, m: usize, dim: usize) -> Accumulators {
        Accumulators {
            trans: vec![vec![0.0; n]; n],
            exit: vec![0.0; n],
            entry: vec![0.0; n],
            occupancy: vec![0.0; n],
            mix_occ: vec![vec![0.0; m]; n],
            mix_sum: vec![vec![vec![0.0; dim]; m]; n],
            mix_sq_sum: vec![vec![vec![0.0; dim]; m]; n],
            utterances: 0.0,
        }
    }
}

/// One EM iteration: returns the total log-likelihood of the *current*
/// model, the re-estimated model, and the list of starved states.
fn em_step(model: &HmmModel, training: &[FeatureMatrix]) -> (f64, HmmModel, Vec<usize>) {
    let n = model.num_states;
    let dim = model.dim();
    let num_mix = model.states[0].num_mixtures();
    let log_a = model.log_transitions();
    let exit_col = n + 1;

    let mut acc = Accumulators::new(n, num_mix, dim);
    let mut total_ll = 0.0;

    for features in training {
        let t_len = features.num_frames();
        let emis = model.emission_table(features);
        let (alpha, ll) = forward_lattice(model, &emis, &log_a);
        if !ll.is_finite() {
            continue;
        }
        total_ll += ll;
        acc.utterances += 1.0;

        // Backward pass; beta[T-1] carries the exit arc.
        let mut beta = vec![vec![f64::NEG_INFINITY; n]; t_len];
        for i in 0..n {
            beta[t_len - 1][i] = log_a[i + 1][exit_col];
        }
        for t in (0..t_len - 1).rev() {
            for i in 0..n {
                beta[t][i] = log_sum_exp(
                    (0..n).map(|j| log_a[i + 1][j + 1] + emis[t + 1][j] + beta[t + 1][j]),
                );
            }
        }

        for t in 0..t_len {
            let obs = features.row(t);
            for j in 0..n {
                let log_gamma = alpha[t][j] + beta[t][j] - ll;
                if log_gamma == f64::NEG_INFINITY {
                    continue;
                }
                let gamma = log_gamma.exp();
                acc.occupancy[j] += gamma;
                if t == 0 {
                    acc.entry[j] += gamma;
                }
                if t == t_len - 1 {
                    acc.exit[j] += gamma;
                }
                // Mixture responsibilities within the state posterior.
                let state = &model.states[j];
                for m in 0..num_mix {
                    let log_comp = safe_ln(state.weights[m])
                        + log_gaussian(obs, &state.means[m], &state.variances[m]);
                    let resp = (log_gamma + log_comp - emis[t][j]).exp();
                    if resp <= 0.0 {
                        continue;
                    }
                    acc.mix_occ[j][m] += resp;
                    for (d, &x) in obs.iter().enumerate() {
                        let x = x as f64;
                        acc.mix_sum[j][m][d] += resp * x;
                        acc.mix_sq_sum[j][m][d] += resp * x * x;
                    }
                }
            }
            if t + 1 < t_len {
                for i in 0..n {
                    for j in 0..n {
                        if model.transitions[i + 1][j + 1] <= 0.0 {
                            continue;
                        }
                        let log_xi = alpha[t][i]
                            + log_a[i + 1][j + 1]
                            + emis[t + 1][j]
                            + beta[t + 1][j]
                            - ll;
                        if log_xi > f64::NEG_INFINITY {
                            acc.trans[i][j] += log_xi.exp();
                        }
                    }
                }
            }
        }
    }

    let (next, starved) = reestimate(model, &acc);
    (total_ll, next, starved)
}

fn reestimate(model: &HmmModel, acc: &Accumulators) -> (HmmModel, Vec<usize>) {
    let n = model.num_states;
    let num_mix = model.states[0].num_mixtures();
    let mut next = model.clone();
    let mut starved = Vec::new();

    if acc.utterances > 0.0 {
        let entry_total: f64 = acc.entry.iter().sum();
        if entry_total > 0.0 {
            for j in 0..n {
                next.transitions[0][j + 1] = acc.entry[j] / entry_total;
            }
        }
    }

    for j in 0..n {
        if acc.occupancy[j] < MIN_OCCUPANCY {
            starved.push(j);
            continue;
        }
        // Transition row: outgoing mass over total occupancy, renormalized
        // to kill residual rounding.
        let mut row = vec![0.0; n + 2];
        row[1..=n].copy_from_slice(&acc.trans[j]);
        row[n + 1] = acc.exit[j];
        let row_sum: f64 = row.iter().sum();
        if row_sum > 0.0 {
            for v in &mut row {
                *v /= row_sum;
            }
            next.transitions[j + 1] = row;
        }

        let mix_total: f64 = acc.mix_occ[j].iter().sum();
        if mix_total <= 0.0 {
            continue;
        }
        let state = &mut next.states[j];
        for m in 0..num_mix {
            let occ = acc.mix_occ[j][m];
            if occ < MIN_OCCUPANCY {
                // Keep the old component; re-balance only its weight.
                state.weights[m] = acc.mix_occ[j][m] / mix_total;
                continue;
            }
            state.weights[m] = occ / mix_total;
            for d in 0..model.dim() {
                let mean = acc.mix_sum[j][m][d] / occ;
                let var = (acc.mix_sq_sum[j][m][d] / occ - mean * mean)
                    .max(model.var_floor[d]);
                state.means[m][d] = mean;
                state.variances[m][d] = var;
            }
        }
        // Weights can drift a hair from 1 after the starved-component path.
        let w_sum: f64 = state.weights.iter().sum();
        if w_sum > 0.0 {
            for w in &mut state.weights {
                *w /= w_sum;
            }
        }
    }
    (next, starved)
}

/// A trained model per word, all sharing one feature signature.
#[derive(Debug, Clone)]
pub struct WordModelSet {
    models: BTreeMap<String, HmmModel>,
}

impl WordModelSet {
    pub fn new(models: impl IntoIterator<Item = HmmModel>) -> Result<WordModelSet> {
        let mut map = BTreeMap::new();
        for model in models {
            let label = model.word_label.clone();
            if map.insert(label.clone(), model).is_some() {
                return Err(HmmError::DuplicateLabel(label));
            }
        }
        if map.is_empty() {
            return Err(HmmError::EmptyTrainingSet);
        }
        let signature = map.values().next().unwrap().signature;
        for model in map.values() {
            if model.signature != signature {
                return Err(HmmError::SignatureMismatch {
                    expected: signature,
                    found: model.signature,
                });
            }
        }
        Ok(WordModelSet { models: map })
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn get(&self, label: &str) -> Option<&HmmModel> {
        self.models.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &HmmModel)> {
        self.models.iter()
    }

    pub fn signature(&self) -> FeatureSignature {
        self.models.values().next().unwrap().signature
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Classify one utterance: the winner is the model with the highest forward
/// log-likelihood; exact ties go to the lexicographically first label.
pub fn recognize(
    models: &WordModelSet,
    features: &FeatureMatrix,
) -> Result<(String, Vec<(String, f64)>)> {
    let mut scores = Vec::with_capacity(models.len());
    let mut best: Option<(&str, f64)> = None;
    for (label, model) in models.iter() {
        let ll = log_likelihood(model, features)?;
        scores.push((label.clone(), ll));
        // Strict comparison over the label-sorted iteration order makes
        // ties resolve to the first label.
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((label, ll));
        }
    }
    let (label, _) = best.expect("non-empty model set");
    Ok((label.to_string(), scores))
}

/// Draw one utterance from the model's own generative distribution.
/// Intended for sanity checks and synthetic experiments.
pub fn sample(model: &HmmModel, rng: &mut crate::rng::Rng) -> FeatureMatrix {
    let n = model.num_states;
    let exit = n + 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    // Walk from the entry state until absorption (with a hard cap in case a
    // degenerate model lost its exit mass).
    let mut state = pick(&model.transitions[0], rng);
    while state != exit && state != 0 && rows.len() < 100_000 {
        let gmm = &model.states[state - 1];
        let m = pick_weighted(&gmm.weights, rng);
        let row: Vec<f64> = gmm.means[m]
            .iter()
            .zip(&gmm.variances[m])
            .map(|(mu, v)| mu + v.sqrt() * rng.next_gaussian())
            .collect();
        rows.push(row);
        state = pick(&model.transitions[state], rng);
    }
    FeatureMatrix::from_rows(
        model.signature.kind,
        model.signature.frame_shift_us,
        &rows,
    )
}

fn pick(probs: &[f64], rng: &mut crate::rng::Rng) -> usize {
    pick_weighted(probs, rng)
}

fn pick_weighted(weights: &[f64], rng: &mut crate::rng::Rng) -> usize {
    let mut u = rng.next_f64();
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::features::FeatureKind;
    use crate::rng::Rng;

    pub fn signature(dim: u32) -> FeatureSignature {
        FeatureSignature {
            kind: FeatureKind::Mfcc,
            dim,
            frame_shift_us: 10_000,
        }
    }

    pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(FeatureKind::Mfcc, 10_000, rows)
    }

    /// Random left-to-right model with the standard topology.
    pub fn random_model(rng: &mut Rng, num_states: usize, num_mix: usize, dim: usize) -> HmmModel {
        let size = num_states + 2;
        let mut transitions = vec![vec![0.0; size]; size];
        transitions[0][1] = 1.0;
        for s in 1..=num_states {
            let stay = 0.2 + 0.6 * rng.next_f64();
            transitions[s][s] = stay;
            transitions[s][s + 1] = 1.0 - stay;
        }
        transitions[size - 1][size - 1] = 1.0;
        let states = (0..num_states)
            .map(|_| {
                let mut weights: Vec<f64> = (0..num_mix).map(|_| 0.2 + rng.next_f64()).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                GmmState {
                    weights,
                    means: (0..num_mix)
                        .map(|_| (0..dim).map(|_| rng.next_signed() * 3.0).collect())
                        .collect(),
                    variances: (0..num_mix)
                        .map(|_| (0..dim).map(|_| 0.2 + rng.next_f64()).collect())
                        .collect(),
                }
            })
            .collect();
        HmmModel {
            word_label: "test".into(),
            num_states,
            transitions,
            states,
            signature: signature(dim as u32),
            var_floor: vec![1e-8; dim],
        }
    }

    pub fn random_features(rng: &mut Rng, t_len: usize, dim: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..t_len)
            .map(|_| (0..dim).map(|_| rng.next_signed() * 3.0).collect())
            .collect();
        matrix(&rows)
    }

    /// Exhaustive path enumeration: total (log-sum) and best (max) path
    /// scores over every emitting-state sequence of length `t_len`.
    pub fn brute_force_scores(
        model: &HmmModel,
        features: &FeatureMatrix,
    ) -> (f64, f64, Vec<usize>) {
        let n = model.num_states;
        let t_len = features.num_frames();
        let emis = model.emission_table(features);
        let log_a = model.log_transitions();
        let exit = n + 1;

        let mut total = f64::NEG_INFINITY;
        let mut best = f64::NEG_INFINITY;
        let mut best_path = Vec::new();
        let paths = (n as u64).pow(t_len as u32);
        for code in 0..paths {
            let mut c = code;
            let mut path = Vec::with_capacity(t_len);
            for _ in 0..t_len {
                path.push((c % n as u64) as usize);
                c /= n as u64;
            }
            let mut score = log_a[0][path[0] + 1] + emis[0][path[0]];
            for t in 1..t_len {
                score += log_a[path[t - 1] + 1][path[t] + 1] + emis[t][path[t]];
            }
            score += log_a[path[t_len - 1] + 1][exit];
            if score == f64::NEG_INFINITY {
                continue;
            }
            total = super::log_sum_exp([total, score]);
            if score > best {
                best = score;
                best_path = path;
            }
        }
        (total, best, best_path)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::features::FeatureKind;
    use crate::rng::Rng;

    #[test]
    fn single_state_chain_matches_closed_form() {
        // One emitting state with self-loop a and exit 1 - a, constant
        // observations: ln L = T ln g(x) + (T-1) ln a + ln(1 - a).
        let dim = 3;
        let stay = 0.7;
        let mut model = random_model(&mut Rng::new(1), 1, 1, dim);
        model.transitions[1][1] = stay;
        model.transitions[1][2] = 1.0 - stay;
        let obs = vec![vec![0.25, -0.5, 1.0]; 12];
        let features = matrix(&obs);
        let ll = log_likelihood(&model, &features).unwrap();

        let obs_f32: Vec<f32> = obs[0].iter().map(|&v| v as f32).collect();
        let g = log_gaussian(
            &obs_f32,
            &model.states[0].means[0],
            &model.states[0].variances[0],
        );
        let expected = 12.0 * g + 11.0 * stay.ln() + (1.0 - stay).ln();
        assert!((ll - expected).abs() < 1e-9, "{ll} vs {expected}");
    }

    #[test]
    fn forward_and_viterbi_match_brute_force() {
        let mut rng = Rng::new(7);
        for _ in 0..60 {
            let n = 1 + (rng.below(4) as usize);
            let m = 1 + (rng.below(2) as usize);
            let dim = 1 + (rng.below(3) as usize);
            let t_len = n + (rng.below((7 - n) as u64) as usize);
            let model = random_model(&mut rng, n, m, dim);
            let features = random_features(&mut rng, t_len, dim);

            let (oracle_total, oracle_best, oracle_path) =
                brute_force_scores(&model, &features);
            let ll = log_likelihood(&model, &features).unwrap();
            let (path, score) = viterbi(&model, &features).unwrap();

            assert!((ll - oracle_total).abs() < 1e-9, "forward {ll} vs {oracle_total}");
            assert!((score - oracle_best).abs() < 1e-9, "viterbi {score} vs {oracle_best}");
            assert_eq!(path, oracle_path);
            assert!(score <= ll + 1e-12, "viterbi above forward");
        }
    }

    #[test]
    fn single_state_path_is_all_zero() {
        let mut rng = Rng::new(3);
        let model = random_model(&mut rng, 1, 1, 2);
        let features = random_features(&mut rng, 9, 2);
        let (path, _) = viterbi(&model, &features).unwrap();
        assert_eq!(path, vec![0; 9]);
    }

    #[test]
    fn forced_traversal_is_strictly_increasing() {
        let mut rng = Rng::new(4);
        let model = random_model(&mut rng, 5, 1, 2);
        let features = random_features(&mut rng, 5, 2);
        let (path, _) = viterbi(&model, &features).unwrap();
        assert_eq!(path, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn too_few_frames_is_no_legal_path() {
        let mut rng = Rng::new(5);
        let model = random_model(&mut rng, 5, 1, 2);
        let features = random_features(&mut rng, 4, 2);
        assert!(matches!(
            viterbi(&model, &features),
            Err(HmmError::NoLegalPath { frames: 4, states: 5 })
        ));
        // The forward score of an impossible sequence is -inf, not an error.
        let ll = log_likelihood(&model, &features).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn signature_and_emptiness_are_checked() {
        let mut rng = Rng::new(6);
        let model = random_model(&mut rng, 2, 1, 3);
        let wrong_dim = random_features(&mut rng, 5, 4);
        assert!(matches!(
            log_likelihood(&model, &wrong_dim),
            Err(HmmError::SignatureMismatch { .. })
        ));
        let empty = matrix(&[]);
        assert!(matches!(
            log_likelihood(&model, &empty),
            Err(HmmError::EmptyObservation)
        ));
    }

    #[test]
    fn scores_stay_finite_on_very_long_utterances() {
        let mut rng = Rng::new(8);
        let model = random_model(&mut rng, 1, 1, 2);
        let features = random_features(&mut rng, 10_000, 2);
        let ll = log_likelihood(&model, &features).unwrap();
        assert!(ll.is_finite());
        let (_, score) = viterbi(&model, &features).unwrap();
        assert!(score.is_finite());
        assert!(score <= ll);
    }

    #[test]
    fn flat_start_single_state_mean_is_global_mean() {
        let utt1 = matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let model = flat_start("x", &[utt1], 1, 1).unwrap();
        assert_eq!(model.states[0].means[0], vec![2.0, 3.0]);
    }

    #[test]
    fn flat_start_pools_over_utterances() {
        // Global mean is frame-count weighted: (1*1 + 3*4) / 4 frames.
        let a = matrix(&[vec![1.0]]);
        let b = matrix(&[vec![3.0], vec![3.0], vec![3.0]]);
        let model = flat_start("x", &[a, b], 2, 1).unwrap();
        for state in &model.states {
            assert!((state.means[0][0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_start_rejects_empty_and_mismatched() {
        assert!(matches!(
            flat_start("x", &[], 3, 1),
            Err(HmmError::EmptyTrainingSet)
        ));
        let a = matrix(&[vec![1.0, 2.0]]);
        let b = matrix(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            flat_start("x", &[a, b], 3, 1),
            Err(HmmError::DimMismatch { .. })
        ));
    }

    #[test]
    fn flat_start_splits_mixtures_deterministically() {
        let utt = matrix(&[vec![0.0, 0.0], vec![2.0, 2.0], vec![4.0, 4.0]]);
        let model = flat_start("x", &[utt], 1, 2).unwrap();
        let s = &model.states[0];
        assert_eq!(s.num_mixtures(), 2);
        assert!(s.means[0][0] < s.means[1][0]);
        assert!((s.weights[0] - 0.5).abs() < 1e-12);
        assert!(model.is_well_formed());
    }

    #[test]
    fn baum_welch_single_state_recovers_sample_statistics() {
        // With one state and one mixture the EM fixed point is the pooled
        // ML Gaussian: sample mean and (floored) sample variance.
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, -1.0],
            vec![2.0, 0.0],
            vec![3.0, 1.0],
            vec![4.0, 2.0],
        ];
        let utt = matrix(&rows);
        let model = flat_start("x", std::slice::from_ref(&utt), 1, 1).unwrap();
        let outcome = baum_welch(&model, &[utt], 10, 1e-9).unwrap();
        let s = &outcome.model.states[0];
        assert!((s.means[0][0] - 2.5).abs() < 1e-9);
        assert!((s.means[0][1] - 0.5).abs() < 1e-9);
        let expected_var = 1.25; // population variance of 1,2,3,4
        assert!((s.variances[0][0] - expected_var).abs() < 1e-9);
    }

    #[test]
    fn baum_welch_trace_is_monotone() {
        let mut rng = Rng::new(42);
        // Two well-separated clusters in time: first half low, second high.
        let utts: Vec<FeatureMatrix> = (0..6)
            .map(|_| {
                let rows: Vec<Vec<f64>> = (0..20)
                    .map(|t| {
                        let center = if t < 10 { -2.0 } else { 2.0 };
                        vec![center + 0.3 * rng.next_gaussian()]
                    })
                    .collect();
                matrix(&rows)
            })
            .collect();
        let model = flat_start("x", &utts, 2, 1).unwrap();
        let outcome = baum_welch(&model, &utts, 20, f64::NEG_INFINITY).unwrap();
        assert_eq!(outcome.log_likelihood_trace.len(), 20);
        for w in outcome.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "trace decreased: {} -> {}", w[0], w[1]);
        }
        assert!(outcome.model.is_well_formed());
    }

    #[test]
    fn converged_model_improves_less_than_tol() {
        let utt = matrix(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]]);
        let model = flat_start("x", std::slice::from_ref(&utt), 1, 1).unwrap();
        let trained = baum_welch(&model, std::slice::from_ref(&utt), 30, 1e-12)
            .unwrap()
            .model;
        let again = baum_welch(&trained, &[utt], 2, 1e-3).unwrap();
        let t = &again.log_likelihood_trace;
        assert!(t.len() == 2 && (t[1] - t[0]).abs() < 1e-3, "trace {t:?}");
    }

    #[test]
    fn stochasticity_preserved_after_training() {
        let mut rng = Rng::new(17);
        let utts: Vec<FeatureMatrix> =
            (0..4).map(|_| random_features(&mut rng, 15, 2)).collect();
        let model = flat_start("x", &utts, 3, 2).unwrap();
        let outcome = baum_welch(&model, &utts, 8, 0.0).unwrap();
        assert!(outcome.model.is_well_formed());
        // Left-to-right zero pattern intact.
        let t = &outcome.model.transitions;
        for (i, row) in t.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if model.transitions[i][j] == 0.0 {
                    assert_eq!(p, 0.0, "arc {i}->{j} appeared");
                }
            }
        }
    }

    #[test]
    fn recognize_prefers_generating_model() {
        let mut rng = Rng::new(2718);
        let dim = 2;
        let mut model_a = random_model(&mut rng, 3, 1, dim);
        model_a.word_label = "alpha".into();
        let mut model_b = random_model(&mut rng, 3, 1, dim);
        model_b.word_label = "beta".into();
        let set = WordModelSet::new([model_a.clone(), model_b]).unwrap();
        let mut wins = 0;
        for _ in 0..100 {
            let utt = sample(&model_a, &mut rng);
            if utt.num_frames() == 0 {
                continue;
            }
            let (winner, _) = recognize(&set, &utt).unwrap();
            if winner == "alpha" {
                wins += 1;
            }
        }
        assert!(wins >= 95, "only {wins} wins");
    }

    #[test]
    fn recognize_breaks_ties_lexicographically() {
        let mut rng = Rng::new(99);
        let mut m1 = random_model(&mut rng, 2, 1, 2);
        m1.word_label = "zulu".into();
        let mut m2 = m1.clone();
        m2.word_label = "echo".into();
        let set = WordModelSet::new([m1, m2]).unwrap();
        let features = random_features(&mut rng, 6, 2);
        let (winner, scores) = recognize(&set, &features).unwrap();
        assert_eq!(winner, "echo");
        assert_eq!(scores.len(), 2);
        assert_eq!(scores[0].1, scores[1].1);
    }

    #[test]
    fn recognize_singleton_set_wins() {
        let mut rng = Rng::new(12);
        let model = random_model(&mut rng, 2, 1, 2);
        let features = random_features(&mut rng, 5, 2);
        let set = WordModelSet::new([model]).unwrap();
        let (winner, _) = recognize(&set, &features).unwrap();
        assert_eq!(winner, "test");
    }

    #[test]
    fn model_set_rejects_duplicate_labels() {
        let mut rng = Rng::new(30);
        let a = random_model(&mut rng, 2, 1, 2);
        let b = random_model(&mut rng, 2, 1, 2);
        assert!(matches!(
            WordModelSet::new([a, b]),
            Err(HmmError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn model_set_rejects_mixed_signatures() {
        let mut rng = Rng::new(13);
        let mut a = random_model(&mut rng, 2, 1, 2);
        a.word_label = "a".into();
        let mut b = random_model(&mut rng, 2, 1, 3);
        b.word_label = "b".into();
        assert!(matches!(
            WordModelSet::new([a, b]),
            Err(HmmError::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn model_round_trips_through_disk() {
        let mut rng = Rng::new(14);
        let model = random_model(&mut rng, 4, 2, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dhm");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn truncated_model_file_is_corrupt() {
        let mut rng = Rng::new(15);
        let model = random_model(&mut rng, 2, 1, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dhm");
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(HmmError::CorruptModel(_))
        ));
    }

    #[test]
    fn future_version_is_rejected() {
        let mut rng = Rng::new(16);
        let model = random_model(&mut rng, 2, 1, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dhm");
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..6].copy_from_slice(&9u16.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(HmmError::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn scoring_is_deterministic() {
        let mut rng = Rng::new(20);
        let model = random_model(&mut rng, 3, 2, 4);
        let features = random_features(&mut rng, 12, 4);
        let a = log_likelihood(&model, &features).unwrap();
        let b = log_likelihood(&model, &features).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_utterances_carry_model_signature() {
        let mut rng = Rng::new(21);
        let model = random_model(&mut rng, 2, 1, 3);
        let utt = sample(&model, &mut rng);
        assert_eq!(utt.signature(), model.signature);
        assert_eq!(utt.kind, FeatureKind::Mfcc);
    }
}
