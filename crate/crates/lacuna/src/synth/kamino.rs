//! Column-by-column synthesis: a noisy histogram for the first attribute in
//! the sequence, privately selected parents with noisy conditionals for every
//! later one, and an impute-as-you-fit variant that fills missing cells with
//! model draws so later columns train on progressively completed data.

use super::{
    draw_weighted, mi_sensitivity, noisy_counts, noisy_distribution, normalize_or_uniform,
    split_budget, subsets_of_size, SynthConfig,
};
use crate::dp::{
    exponential_mechanism, gaussian_noise, gaussian_sigma, laplace_scale, BudgetLedger,
};
use crate::error::{Error, Result};
use crate::tabular::{mutual_information_of, Cell, Dataset, Schema};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which rows feed the fit, and whether missing cells get filled on the way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaminoVariant {
    /// Drop every row with any missing cell before fitting.
    CompleteRow,
    /// Fit each column on what is observed so far, then fill the column's
    /// missing cells by sampling its predictor.
    Impute,
}

/// Noisy conditional from a parent set to one target attribute, laid out with
/// the target coordinate first. Every parent assignment's slice sums to 1;
/// assignments that drew no mass are replaced by the target marginal when the
/// model is fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub target: usize,
    pub parents: Vec<usize>,
    /// Cardinalities of `[target, parents...]`.
    pub cards: Vec<usize>,
    pub conditional: Vec<f64>,
}

/// Column-by-column model over a fixed attribute sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnModel {
    /// Permutation of the attribute indices; generation follows it.
    pub sequence: Vec<usize>,
    /// Distribution over the first attribute of the sequence.
    pub first_hist: Vec<f64>,
    /// One predictor per later sequence position, in order.
    pub predictors: Vec<Predictor>,
    pub parent_cap: usize,
}

impl ColumnModel {
    /// Structural invariants: the sequence is a permutation, the histogram
    /// and every conditional slice are distributions, and parents come only
    /// from earlier sequence positions within the cap.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let k = schema.k();
        if self.parent_cap == 0 {
            return Err(Error::invalid("parent cap must be at least 1"));
        }
        if self.sequence.len() != k {
            return Err(Error::invalid(format!(
                "sequence has {} entries, schema has {k} attributes",
                self.sequence.len()
            )));
        }
        let mut seen = vec![false; k];
        for &a in &self.sequence {
            if a >= k || seen[a] {
                return Err(Error::invalid(format!(
                    "sequence is not a permutation: bad entry {a}"
                )));
            }
            seen[a] = true;
        }
        check_distribution(&self.first_hist, schema.cardinality(self.sequence[0]), "histogram")?;
        if self.predictors.len() + 1 != k {
            return Err(Error::invalid(format!(
                "{} predictors for {k} attributes; one per later sequence position required",
                self.predictors.len()
            )));
        }
        for (pos, pred) in self.predictors.iter().enumerate() {
            let j = pos + 1;
            if pred.target != self.sequence[j] {
                return Err(Error::invalid(format!(
                    "predictor {pos} targets {}, sequence position {j} is {}",
                    pred.target, self.sequence[j]
                )));
            }
            if pred.parents.is_empty() || pred.parents.len() > self.parent_cap {
                return Err(Error::invalid(format!(
                    "predictor for {} has {} parents, cap is {}",
                    pred.target,
                    pred.parents.len(),
                    self.parent_cap
                )));
            }
            let earlier = &self.sequence[..j];
            let mut seen_parent = vec![false; k];
            for &p in &pred.parents {
                if !earlier.contains(&p) || seen_parent[p] {
                    return Err(Error::invalid(format!(
                        "predictor for {}: parent {p} must be a distinct, earlier attribute",
                        pred.target
                    )));
                }
                seen_parent[p] = true;
            }
            let mut cards = vec![schema.cardinality(pred.target)];
            cards.extend(pred.parents.iter().map(|&p| schema.cardinality(p)));
            if pred.cards != cards {
                return Err(Error::invalid(format!(
                    "predictor for {}: shape {:?} does not match attributes {:?}",
                    pred.target, pred.cards, cards
                )));
            }
            let size: usize = cards.iter().product();
            if pred.conditional.len() != size {
                return Err(Error::invalid(format!(
                    "predictor for {}: {} cells, shape needs {size}",
                    pred.target,
                    pred.conditional.len()
                )));
            }
            let card_x = cards[0];
            let psi_size = size / card_x;
            for p in 0..psi_size {
                let slice: Vec<f64> = (0..card_x)
                    .map(|x| pred.conditional[x * psi_size + p])
                    .collect();
                check_distribution(&slice, card_x, "conditional slice")?;
            }
        }
        Ok(())
    }
}

fn check_distribution(probs: &[f64], card: usize, what: &str) -> Result<()> {
    if probs.len() != card {
        return Err(Error::invalid(format!(
            "{what} has {} cells, expected {card}",
            probs.len()
        )));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid(format!(
            "{what} entries must be finite and non-negative"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} sums to {total}, expected 1")));
    }
    Ok(())
}

/// A fitted model, plus the filled input when the variant imputes.
#[derive(Debug, Clone, PartialEq)]
pub struct KaminoFit {
    pub model: ColumnModel,
    /// The input with every missing cell filled; `Some` for [`KaminoVariant::Impute`].
    pub working: Option<Dataset>,
}

/// Normalizes noisy joint counts into per-parent-assignment conditionals;
/// assignments with no mass take the target marginal instead.
fn conditional_from_counts(mut w: Vec<f64>, card_x: usize, psi_size: usize) -> Vec<f64> {
    let mut marg = vec![0.0f64; card_x];
    for x in 0..card_x {
        for p in 0..psi_size {
            marg[x] += w[x * psi_size + p];
        }
    }
    normalize_or_uniform(&mut marg);
    for p in 0..psi_size {
        let total: f64 = (0..card_x).map(|x| w[x * psi_size + p]).sum();
        if total > 0.0 {
            for x in 0..card_x {
                w[x * psi_size + p] /= total;
            }
        } else {
            for x in 0..card_x {
                w[x * psi_size + p] = marg[x];
            }
        }
    }
    w
}

/// Flat index of a row's parent assignment under the predictor's layout.
/// Parents must be present in the row.
fn parent_index(d: &Dataset, i: usize, pred: &Predictor) -> usize {
    let mut p = 0usize;
    for (pos, &parent) in pred.parents.iter().enumerate() {
        let v = d
            .cell_index(i, parent)
            .expect("parent columns are complete before their target is imputed");
        p = p * pred.cards[pos + 1] + v;
    }
    p
}

fn impute_column<R: Rng + ?Sized>(w: &mut Dataset, pred: &Predictor, rng: &mut R) {
    let card_x = pred.cards[0];
    let psi_size = pred.conditional.len() / card_x;
    for i in 0..w.n() {
        if w.is_missing(i, pred.target) {
            let p = parent_index(w, i, pred);
            let weights: Vec<f64> = (0..card_x)
                .map(|x| pred.conditional[x * psi_size + p])
                .collect();
            let cell = w
                .schema()
                .cell_from_index(pred.target, draw_weighted(&weights, rng));
            w.set_cell(i, pred.target, cell);
        }
    }
}

/// Fits the column model under `budget`, charging the ledger. The structure
/// share of the budget buys the first histogram (Gaussian noise when that
/// share sits below 1 and a positive delta is available, otherwise Laplace,
/// which spends no delta); the rest splits evenly across the later columns,
/// half on exponential-mechanism parent selection and half on the Laplace
/// conditional. The `Impute` variant additionally fills each column's missing
/// cells from its freshly fitted predictor before moving on.
pub fn fit_kamino<R: Rng + ?Sized>(
    d: &Dataset,
    cfg: &SynthConfig,
    budget: f64,
    sequence: Option<&[usize]>,
    variant: KaminoVariant,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<KaminoFit> {
    if !(budget > 0.0) {
        return Err(Error::invalid(format!("budget {budget} must be positive")));
    }
    let k = d.k();
    let seq: Vec<usize> = match sequence {
        Some(s) => {
            let mut seen = vec![false; k];
            if s.len() != k {
                return Err(Error::invalid(format!(
                    "sequence has {} entries, schema has {k} attributes",
                    s.len()
                )));
            }
            for &a in s {
                if a >= k || seen[a] {
                    return Err(Error::invalid(format!(
                        "sequence is not a permutation: bad entry {a}"
                    )));
                }
                seen[a] = true;
            }
            s.to_vec()
        }
        None => (0..k).collect(),
    };
    let imputing = variant == KaminoVariant::Impute;
    let mut working = match variant {
        KaminoVariant::CompleteRow => {
            let reduced = d.complete_rows(&d.all_attrs())?;
            if reduced.n() == 0 {
                return Err(Error::EmptyInput(
                    "no complete rows: every row has at least one missing cell, \
                     so the complete-row fit has no training data"
                        .into(),
                ));
            }
            reduced
        }
        KaminoVariant::Impute => d.clone(),
    };

    let (eps1, eps2) = split_budget(budget, cfg.structure_fraction);
    let delta1 = cfg.delta / 2.0;
    let s1 = seq[0];
    let s1_name = d.schema().attr(s1).name.clone();

    // First histogram from all observed values of the first attribute.
    let hist_counts = working.marginal(&[s1])?.counts;
    let use_gaussian = eps1.is_finite() && eps1 < 1.0 && delta1 > 0.0;
    let first_hist = if use_gaussian {
        ledger.charge(format!("histogram:{s1_name} (gaussian)"), eps1, delta1)?;
        let sigma = gaussian_sigma(eps1, delta1, 1.0)?;
        let mut noisy = gaussian_noise(&hist_counts, sigma, rng)?;
        for v in &mut noisy {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        normalize_or_uniform(&mut noisy);
        noisy
    } else {
        // pure-DP fallback; the half-delta reserved for this release goes unspent
        ledger.charge(format!("histogram:{s1_name} (laplace)"), eps1, 0.0)?;
        noisy_distribution(&hist_counts, laplace_scale(1.0, eps1)?, rng)?
    };
    if imputing {
        for i in 0..working.n() {
            if working.is_missing(i, s1) {
                let cell = working
                    .schema()
                    .cell_from_index(s1, draw_weighted(&first_hist, rng));
                working.set_cell(i, s1, cell);
            }
        }
    }

    let mut predictors = Vec::with_capacity(k.saturating_sub(1));
    if k > 1 {
        let eps_pred = eps2 / (k - 1) as f64;
        let eps_half = eps_pred / 2.0;
        for j in 1..k {
            let target = seq[j];
            let target_name = d.schema().attr(target).name.clone();
            let mut pool: Vec<usize> = seq[..j].to_vec();
            pool.sort_unstable();
            let mut candidates: Vec<Vec<usize>> = Vec::new();
            for m in 1..=cfg.degree.min(j) {
                candidates.extend(subsets_of_size(&pool, m));
            }
            let mut scores = Vec::with_capacity(candidates.len());
            let mut support = usize::MAX;
            for psi in &candidates {
                let mut set = Vec::with_capacity(1 + psi.len());
                set.push(target);
                set.extend_from_slice(psi);
                let table = working.marginal(&set)?;
                support = support.min(table.observed_rows);
                scores.push(mutual_information_of(&table));
            }
            ledger.charge(format!("parents:{target_name}"), eps_half, 0.0)?;
            let pick = exponential_mechanism(&scores, mi_sensitivity(support), eps_half, rng)?;
            let parents = candidates.swap_remove(pick);

            let mut set = Vec::with_capacity(1 + parents.len());
            set.push(target);
            set.extend_from_slice(&parents);
            let table = working.marginal(&set)?;
            ledger.charge(format!("conditional:{target_name}"), eps_half, 0.0)?;
            let noisy = noisy_counts(&table.counts, laplace_scale(1.0, eps_half)?, rng)?;
            let card_x = table.cards[0];
            let psi_size = noisy.len() / card_x;
            let pred = Predictor {
                target,
                parents,
                cards: table.cards,
                conditional: conditional_from_counts(noisy, card_x, psi_size),
            };
            if imputing {
                impute_column(&mut working, &pred, rng);
            }
            predictors.push(pred);
        }
    }

    let model = ColumnModel {
        sequence: seq,
        first_hist,
        predictors,
        parent_cap: cfg.degree,
    };
    model.validate(d.schema())?;
    Ok(KaminoFit {
        model,
        working: imputing.then_some(working),
    })
}

/// Samples `n_out` rows column by column along the model's sequence. The
/// output has no missing cells; numerical attributes emit bin midpoints.
pub fn generate_columnwise<R: Rng + ?Sized>(
    model: &ColumnModel,
    schema: &Schema,
    n_out: usize,
    rng: &mut R,
) -> Result<Dataset> {
    model.validate(schema)?;
    let k = schema.k();
    let mut out = Dataset::empty(schema.clone());
    let mut idxs = vec![0usize; k];
    let mut row = vec![Cell::Missing; k];
    for _ in 0..n_out {
        idxs[model.sequence[0]] = draw_weighted(&model.first_hist, rng);
        for pred in &model.predictors {
            let card_x = pred.cards[0];
            let psi_size = pred.conditional.len() / card_x;
            let mut p = 0usize;
            for (pos, &parent) in pred.parents.iter().enumerate() {
                p = p * pred.cards[pos + 1] + idxs[parent];
            }
            let weights: Vec<f64> = (0..card_x)
                .map(|x| pred.conditional[x * psi_size + p])
                .collect();
            idxs[pred.target] = draw_weighted(&weights, rng);
        }
        for j in 0..k {
            row[j] = schema.cell_from_index(j, idxs[j]);
        }
        out.push_row(&row);
    }
    Ok(out)
}

/// Sequence option: attributes ordered by decreasing share of missing cells,
/// ties keeping schema order.
pub fn sequence_by_missing_desc(d: &Dataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.k()).collect();
    order.sort_by(|&a, &b| d.missing_count(b).cmp(&d.missing_count(a)).then(a.cmp(&b)));
    order
}
