//! Utility metrics comparing synthetic output against real data.
//!
//! Two views of fidelity are provided. [`kway_distance`] measures how well
//! low-order marginals survive: for every k-subset of attributes, both
//! datasets' marginals (over rows complete on the subset) are normalized to
//! probabilities and compared cell-by-cell, and the per-subset maxima are
//! averaged. [`f1_evaluation`] measures downstream usefulness: lightweight
//! classifiers are trained on a 70% split of the synthetic data and scored
//! (binary F1) on a 30% split of the real data, averaged over a grid of
//! binarized target attributes and both built-in models.
//!
//! [`evaluate_utility`] bundles both into a serializable [`UtilityReport`].

mod classify;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::subsets_of_size;
use crate::tabular::{AttrKind, Cell, Dataset};
use classify::{ordinal_features, Logistic, Tree};

/// Subset cap for k-way averaging: all subsets are enumerated for k <= 2 (and
/// whenever there are at most this many), larger families are sampled.
pub const KWAY_SAMPLE_LIMIT: usize = 200;

/// Fixed base seed for subset sampling, mixed with k so each order draws its
/// own reproducible family.
const KWAY_SAMPLE_SEED: u64 = 0x6b77_6179;

/// Per-subset comparison between two normalized marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Largest absolute cell difference (the reported metric).
    MaxCell,
    /// Half the L1 difference, the total-variation convention common in other
    /// toolkits. Offered for cross-tool comparison only; reported numbers use
    /// [`DistanceKind::MaxCell`].
    TotalVariation,
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceKind::MaxCell => "max-cell",
            DistanceKind::TotalVariation => "tv",
        })
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<DistanceKind> {
        match s {
            "max-cell" | "max_cell" => Ok(DistanceKind::MaxCell),
            "tv" | "total-variation" | "total_variation" => Ok(DistanceKind::TotalVariation),
            other => Err(Error::invalid(format!(
                "unknown distance kind {other:?}; expected \"max-cell\" or \"tv\""
            ))),
        }
    }
}

/// Average k-way marginal distance under the default max-cell metric.
pub fn kway_distance(real: &Dataset, synth: &Dataset, k: usize) -> Result<f64> {
    kway_distance_with(real, synth, k, DistanceKind::MaxCell)
}

/// Average k-way marginal distance under an explicit per-subset metric.
///
/// Rows missing any attribute of a subset are excluded from that subset's
/// marginal. If either side has no complete rows for a subset, that subset
/// contributes the worst-case distance 1. For k >= 3 with more than
/// [`KWAY_SAMPLE_LIMIT`] subsets, a fixed-seed sample of subsets is averaged
/// instead of the full family, so repeated calls agree exactly.
pub fn kway_distance_with(
    real: &Dataset,
    synth: &Dataset,
    k: usize,
    kind: DistanceKind,
) -> Result<f64> {
    if real.schema() != synth.schema() {
        return Err(Error::Schema(
            "k-way distance needs both datasets on the same schema".into(),
        ));
    }
    let k_attrs = real.schema().k();
    if k == 0 || k > k_attrs {
        return Err(Error::invalid(format!(
            "marginal order k={k} must be in 1..={k_attrs}"
        )));
    }

    let subsets = subset_family(k_attrs, k);
    let total: f64 = subsets
        .par_iter()
        .map(|set| subset_distance(real, synth, set, kind))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum();
    Ok(total / subsets.len() as f64)
}

fn subset_family(k_attrs: usize, k: usize) -> Vec<Vec<usize>> {
    let pool: Vec<usize> = (0..k_attrs).collect();
    if k <= 2 || binomial_at_most(k_attrs, k, KWAY_SAMPLE_LIMIT) {
        return subsets_of_size(&pool, k);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(KWAY_SAMPLE_SEED ^ k as u64);
    let mut seen = HashSet::new();
    let mut family = Vec::with_capacity(KWAY_SAMPLE_LIMIT);
    let mut scratch = pool.clone();
    while family.len() < KWAY_SAMPLE_LIMIT {
        scratch.shuffle(&mut rng);
        let mut set: Vec<usize> = scratch[..k].to_vec();
        set.sort_unstable();
        if seen.insert(set.clone()) {
            family.push(set);
        }
    }
    family
}

/// True when C(n, k) <= cap, evaluated without overflow.
fn binomial_at_most(n: usize, k: usize, cap: usize) -> bool {
    let k = k.min(n - k);
    let mut c = 1u128;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > cap as u128 {
            return false;
        }
    }
    true
}

fn subset_distance(
    real: &Dataset,
    synth: &Dataset,
    set: &[usize],
    kind: DistanceKind,
) -> Result<f64> {
    let rt = real.marginal(set)?;
    let st = synth.marginal(set)?;
    if rt.observed_rows == 0 || st.observed_rows == 0 {
        return Ok(1.0);
    }
    let rp = rt.normalized();
    let sp = st.normalized();
    let d = match kind {
        DistanceKind::MaxCell => rp
            .iter()
            .zip(&sp)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
        DistanceKind::TotalVariation => {
            0.5 * rp
                .iter()
                .zip(&sp)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        }
    };
    Ok(d.clamp(0.0, 1.0))
}

/// Per-target F1 scores from [`f1_breakdown`]. A skipped target carries a
/// `note` explaining why and no scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetScore {
    pub target: usize,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TargetScore {
    fn skipped(target: usize, name: String, note: impl Into<String>) -> TargetScore {
        TargetScore {
            target,
            name,
            logistic: None,
            tree: None,
            note: Some(note.into()),
        }
    }
}

/// Grand-average F1 of the synthetic-train/real-test protocol.
///
/// Each target attribute is binarized from the real data (majority class vs
/// rest for categorical targets, observed-median split for numerical ones),
/// then both built-in classifiers are trained on a seeded 70% split of the
/// synthetic rows and scored on a seeded 30% split of the real rows. Rows
/// whose target cell is missing are dropped from their split; missing feature
/// cells are mean/mode-filled per dataset. Targets whose labels collapse to
/// one class are skipped with a note; if every target is skipped the
/// evaluation is unattainable. An empty `targets` set is rejected.
pub fn f1_evaluation(real: &Dataset, synth: &Dataset, targets: &[usize], seed: u64) -> Result<f64> {
    f1_breakdown(real, synth, targets, seed).map(|(grand, _)| grand)
}

/// [`f1_evaluation`] plus the per-target score table.
pub fn f1_breakdown(
    real: &Dataset,
    synth: &Dataset,
    targets: &[usize],
    seed: u64,
) -> Result<(f64, Vec<TargetScore>)> {
    if real.schema() != synth.schema() {
        return Err(Error::Schema(
            "F1 evaluation needs both datasets on the same schema".into(),
        ));
    }
    if targets.is_empty() {
        return Err(Error::invalid("F1 evaluation needs at least one target"));
    }
    let k = real.schema().k();
    let mut dedup = HashSet::new();
    for &t in targets {
        if t >= k {
            return Err(Error::invalid(format!(
                "target index {t} out of range for {k} attributes"
            )));
        }
        if !dedup.insert(t) {
            return Err(Error::invalid(format!("duplicate target index {t}")));
        }
    }
    if k < 2 {
        return Err(Error::invalid(
            "F1 evaluation needs at least two attributes (features plus target)",
        ));
    }

    // One split pair per evaluation, shared across targets: synth shuffle
    // first, then real, so the draw order is independent of the target list.
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut synth_idx: Vec<usize> = (0..synth.n()).collect();
    synth_idx.shuffle(&mut rng);
    let train_take = synth.n() * 7 / 10;
    if train_take == 0 {
        return Err(Error::EmptyInput(
            "too few synthetic rows for a 70% training split".into(),
        ));
    }
    let mut real_idx: Vec<usize> = (0..real.n()).collect();
    real_idx.shuffle(&mut rng);
    let test_take = real.n() * 3 / 10;
    if test_take == 0 {
        return Err(Error::EmptyInput("too few real rows for a 30% test split".into()));
    }
    let train_idx = &synth_idx[..train_take];
    let test_idx = &real_idx[..test_take];

    let scores: Vec<TargetScore> = targets
        .par_iter()
        .map(|&t| score_target(real, synth, t, train_idx, test_idx))
        .collect();

    let flat: Vec<f64> = scores
        .iter()
        .flat_map(|s| [s.logistic, s.tree])
        .flatten()
        .collect();
    if flat.is_empty() {
        return Err(Error::Unattainable(
            "every requested target was degenerate; no F1 score could be computed".into(),
        ));
    }
    let grand = flat.iter().sum::<f64>() / flat.len() as f64;
    Ok((grand, scores))
}

/// Positive-class test fitted from the real data.
enum Binarizer {
    /// Positive iff the label equals the majority class.
    Majority(usize),
    /// Positive iff the value is at most the observed median.
    Median(f64),
}

fn fit_binarizer(real: &Dataset, j: usize) -> Option<Binarizer> {
    match &real.schema().attr(j).kind {
        AttrKind::Categorical { domain } => {
            let mut counts = vec![0usize; domain.len()];
            for i in 0..real.n() {
                if let Cell::Cat(l) = real.cell(i, j) {
                    counts[l] += 1;
                }
            }
            if counts.iter().all(|&c| c == 0) {
                return None;
            }
            // first maximum breaks ties deterministically
            let majority = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(l, _)| l)?;
            Some(Binarizer::Majority(majority))
        }
        AttrKind::Numerical { .. } => {
            let mut vals: Vec<f64> = (0..real.n())
                .filter_map(|i| match real.cell(i, j) {
                    Cell::Num(v) => Some(v),
                    _ => None,
                })
                .collect();
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(|a, b| a.total_cmp(b));
            let mid = vals.len() / 2;
            let median = if vals.len() % 2 == 1 {
                vals[mid]
            } else {
                0.5 * (vals[mid - 1] + vals[mid])
            };
            Some(Binarizer::Median(median))
        }
    }
}

impl Binarizer {
    fn label(&self, cell: Cell) -> Option<bool> {
        match (self, cell) {
            (Binarizer::Majority(m), Cell::Cat(l)) => Some(l == *m),
            (Binarizer::Median(med), Cell::Num(v)) => Some(v <= *med),
            _ => None,
        }
    }
}

fn score_target(
    real: &Dataset,
    synth: &Dataset,
    target: usize,
    train_idx: &[usize],
    test_idx: &[usize],
) -> TargetScore {
    let name = real.schema().attr(target).name.clone();
    let Some(binarizer) = fit_binarizer(real, target) else {
        return TargetScore::skipped(target, name, "no observed values in the real target column");
    };

    let (train_rows, train_labels) = labeled_rows(synth, train_idx, target, &binarizer);
    let (test_rows, test_labels) = labeled_rows(real, test_idx, target, &binarizer);
    if train_rows.is_empty() {
        return TargetScore::skipped(target, name, "no labeled synthetic training rows");
    }
    if test_rows.is_empty() {
        return TargetScore::skipped(target, name, "no labeled real test rows");
    }
    if single_class(&train_labels) {
        return TargetScore::skipped(target, name, "synthetic training labels are one class");
    }
    if single_class(&test_labels) {
        return TargetScore::skipped(target, name, "real test labels are one class");
    }

    let feats: Vec<usize> = (0..real.schema().k()).filter(|&j| j != target).collect();
    let cards: Vec<usize> = feats.iter().map(|&j| real.schema().cardinality(j)).collect();
    let x_train = ordinal_features(synth, &train_rows, &feats);
    let x_test = ordinal_features(real, &test_rows, &feats);

    let logistic = Logistic::train(&x_train, &train_labels, &cards);
    let tree = Tree::train(&x_train, &train_labels, &cards);
    TargetScore {
        target,
        name,
        logistic: Some(f1_score(
            &test_labels,
            x_test.iter().map(|r| logistic.predict(r)),
        )),
        tree: Some(f1_score(&test_labels, x_test.iter().map(|r| tree.predict(r)))),
        note: None,
    }
}

fn labeled_rows(
    d: &Dataset,
    idx: &[usize],
    target: usize,
    binarizer: &Binarizer,
) -> (Vec<usize>, Vec<bool>) {
    let mut rows = Vec::with_capacity(idx.len());
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        if let Some(y) = binarizer.label(d.cell(i, target)) {
            rows.push(i);
            labels.push(y);
        }
    }
    (rows, labels)
}

fn single_class(labels: &[bool]) -> bool {
    labels.iter().all(|&y| y) || labels.iter().all(|&y| !y)
}

/// Binary F1 of the positive class; 0 when there are no true or predicted
/// positives at all.
fn f1_score(truth: &[bool], predictions: impl Iterator<Item = bool>) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&y, p) in truth.iter().zip(predictions) {
        match (y, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Combined utility evaluation: one k-way distance per requested order plus
/// the F1 protocol averaged over `repetitions` consecutive seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityReport {
    /// Average marginal distance per requested order k.
    pub kway: BTreeMap<usize, f64>,
    /// Grand-average F1 over targets, classifiers, and repetitions.
    pub f1: f64,
    /// Per-target scores, averaged over repetitions where present.
    pub per_target: Vec<TargetScore>,
    pub seed: u64,
    pub repetitions: usize,
}

/// Runs [`kway_distance`] for each order in `ks` and [`f1_breakdown`] for
/// seeds `seed..seed + repetitions`, averaging the F1 side across runs.
pub fn evaluate_utility(
    real: &Dataset,
    synth: &Dataset,
    ks: &[usize],
    targets: &[usize],
    seed: u64,
    repetitions: usize,
) -> Result<UtilityReport> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let mut kway = BTreeMap::new();
    for &k in ks {
        kway.insert(k, kway_distance(real, synth, k)?);
    }

    let mut grand_sum = 0.0;
    let mut per_target: Vec<TargetScore> = Vec::new();
    let mut logistic_acc: Vec<(f64, usize)> = Vec::new();
    let mut tree_acc: Vec<(f64, usize)> = Vec::new();
    for r in 0..repetitions {
        let (grand, scores) = f1_breakdown(real, synth, targets, seed + r as u64)?;
        grand_sum += grand;
        if r == 0 {
            logistic_acc = vec![(0.0, 0); scores.len()];
            tree_acc = vec![(0.0, 0); scores.len()];
            per_target = scores.clone();
        }
        for (i, s) in scores.iter().enumerate() {
            if let Some(v) = s.logistic {
                logistic_acc[i].0 += v;
                logistic_acc[i].1 += 1;
            }
            if let Some(v) = s.tree {
                tree_acc[i].0 += v;
                tree_acc[i].1 += 1;
            }
            // keep the first explanation if any repetition skipped the target
            if per_target[i].note.is_none() {
                per_target[i].note = s.note.clone();
            }
        }
    }
    for (i, s) in per_target.iter_mut().enumerate() {
        s.logistic = (logistic_acc[i].1 > 0).then(|| logistic_acc[i].0 / logistic_acc[i].1 as f64);
        s.tree = (tree_acc[i].1 > 0).then(|| tree_acc[i].0 / tree_acc[i].1 as f64);
    }

    Ok(UtilityReport {
        kway,
        f1: grand_sum / repetitions as f64,
        per_target,
        seed,
        repetitions,
    })
}
