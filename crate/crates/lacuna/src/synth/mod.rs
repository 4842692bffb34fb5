//! Private synthesis: Bayesian-network and column-by-column generators,
//! imputation baselines, and the pipeline that wires them to a budget ledger.
//!
//! Every generator takes an explicit seeded generator and a [`BudgetLedger`];
//! fixed (input, config, seed) reproduces the output bit for bit.

mod bayes;
mod kamino;

pub use bayes::{fit_privbayes, generate_bayes, BayesEntry, BayesModel, BayesTable, BayesVariant};
pub use kamino::{
    fit_kamino, generate_columnwise, sequence_by_missing_desc, ColumnModel, KaminoFit,
    KaminoVariant, Predictor,
};

use crate::dp::{laplace_noise, laplace_scale, BudgetLedger};
use crate::error::{Error, Result};
use crate::tabular::{AttrKind, Cell, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Cell-filling strategy. `Random` draws uniformly from the attribute domain,
/// `MeanMode` uses observed column statistics, and `KaminoImpute` runs the
/// column-by-column model in imputer-only mode (pipeline only, since it needs
/// a budget).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputer {
    Random,
    MeanMode,
    KaminoImpute,
}

impl fmt::Display for Imputer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Imputer::Random => "random",
            Imputer::MeanMode => "mean",
            Imputer::KaminoImpute => "kamino",
        })
    }
}

impl FromStr for Imputer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Imputer::Random),
            "mean" | "mean_mode" | "mean-mode" => Ok(Imputer::MeanMode),
            "kamino" => Ok(Imputer::KaminoImpute),
            other => Err(Error::invalid(format!("unknown imputer '{other}'"))),
        }
    }
}

/// The four self-contained generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseMethod {
    /// Bayesian network fitted to complete rows only.
    #[serde(rename = "privbayes")]
    PrivBayes,
    /// Bayesian network scoring each candidate on the rows complete for it.
    #[serde(rename = "privbayese")]
    PrivBayesE,
    /// Column-by-column model fitted to complete rows only.
    #[serde(rename = "kamino")]
    Kamino,
    /// Column-by-column model that imputes as it fits.
    #[serde(rename = "kamino-i")]
    KaminoI,
}

impl fmt::Display for BaseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseMethod::PrivBayes => "privbayes",
            BaseMethod::PrivBayesE => "privbayese",
            BaseMethod::Kamino => "kamino",
            BaseMethod::KaminoI => "kamino-i",
        })
    }
}

impl FromStr for BaseMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "privbayes" => Ok(BaseMethod::PrivBayes),
            "privbayese" => Ok(BaseMethod::PrivBayesE),
            "kamino" => Ok(BaseMethod::Kamino),
            "kamino-i" | "kamino_i" => Ok(BaseMethod::KaminoI),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// A synthesis method, possibly wrapped in a pre-processing stage. The string
/// form is `privbayes`, `complete-row:privbayes`, or
/// `impute-first:mean:0.5:privbayes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Base(BaseMethod),
    /// Drop incomplete rows, then run the inner method on what is left.
    CompleteRow(BaseMethod),
    /// Fill missing cells first (spending `split` of the budget when the
    /// imputer consumes any), then run the inner method on the filled data.
    ImputeFirst {
        imputer: Imputer,
        split: f64,
        inner: BaseMethod,
    },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Base(b) => write!(f, "{b}"),
            Method::CompleteRow(b) => write!(f, "complete-row:{b}"),
            Method::ImputeFirst {
                imputer,
                split,
                inner,
            } => write!(f, "impute-first:{imputer}:{split}:{inner}"),
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("complete-row:") {
            return Ok(Method::CompleteRow(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("impute-first:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::invalid(format!(
                    "expected impute-first:<imputer>:<split>:<method>, got '{s}'"
                )));
            }
            let imputer: Imputer = parts[0].parse()?;
            let split: f64 = parts[1]
                .parse()
                .map_err(|_| Error::invalid(format!("bad split fraction '{}'", parts[1])))?;
            if !(split > 0.0 && split < 1.0) {
                return Err(Error::invalid(format!(
                    "split fraction {split} must lie strictly between 0 and 1"
                )));
            }
            return Ok(Method::ImputeFirst {
                imputer,
                split,
                inner: parts[2].parse()?,
            });
        }
        Ok(Method::Base(s.parse()?))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn default_degree() -> usize {
    2
}

fn default_structure_fraction() -> f64 {
    0.5
}

/// Configuration for one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub method: Method,
    #[serde(with = "crate::jsonio::eps")]
    pub epsilon: f64,
    pub delta: f64,
    /// Maximum parents per attribute, for both model families.
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub seed: u64,
    /// Share of the method budget spent on structure selection (network
    /// methods) or the first histogram (column methods).
    #[serde(default = "default_structure_fraction")]
    pub structure_fraction: f64,
    /// Output row count; defaults to the input row count.
    #[serde(default)]
    pub rows: Option<usize>,
}

impl SynthConfig {
    pub fn new(method: Method, epsilon: f64, delta: f64, seed: u64) -> Self {
        SynthConfig {
            method,
            epsilon,
            delta,
            degree: default_degree(),
            seed,
            structure_fraction: default_structure_fraction(),
            rows: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon {} must be positive or infinite",
                self.epsilon
            )));
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta {} must lie in [0, 1)",
                self.delta
            )));
        }
        if self.degree == 0 {
            return Err(Error::invalid("degree must be at least 1"));
        }
        if !(self.structure_fraction > 0.0 && self.structure_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "structure fraction {} must lie strictly between 0 and 1",
                self.structure_fraction
            )));
        }
        if let Method::ImputeFirst { split, .. } = &self.method {
            if !(*split > 0.0 && *split < 1.0) {
                return Err(Error::invalid(format!(
                    "split fraction {split} must lie strictly between 0 and 1"
                )));
            }
        }
        if self.rows == Some(0) {
            return Err(Error::invalid("cannot generate zero rows"));
        }
        Ok(())
    }
}

/// Splits a budget into (fraction, remainder) shares; infinity stays infinite
/// on both sides.
pub(crate) fn split_budget(budget: f64, fraction: f64) -> (f64, f64) {
    if budget.is_infinite() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (budget * fraction, budget * (1.0 - fraction))
    }
}

/// Score-scaling bound for mutual-information selection over an n-row table,
/// clamped below at n = 2 so it stays finite on degenerate inputs.
pub(crate) fn mi_sensitivity(rows: usize) -> f64 {
    let n = rows.max(2) as f64;
    (2.0 / n) * ((n + 1.0) / 2.0).log2() + ((n - 1.0) / n) * ((n + 1.0) / (n - 1.0)).log2()
}

/// All size-`m` subsets of `pool` in lexicographic order.
pub(crate) fn subsets_of_size(pool: &[usize], m: usize) -> Vec<Vec<usize>> {
    fn rec(pool: &[usize], m: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        let need = m - cur.len();
        for i in start..=pool.len().saturating_sub(need) {
            cur.push(pool[i]);
            rec(pool, m, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 {
        out.push(Vec::new());
    } else if m <= pool.len() {
        rec(pool, m, 0, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

/// Adds Laplace noise to raw counts and clamps negatives to zero.
pub(crate) fn noisy_counts<R: Rng + ?Sized>(
    counts: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut noisy = laplace_noise(counts, scale, rng)?;
    for v in &mut noisy {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(noisy)
}

/// Normalizes weights to sum 1 in place; an all-zero vector becomes uniform.
pub(crate) fn normalize_or_uniform(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for v in weights.iter_mut() {
            *v /= total;
        }
    } else {
        let u = 1.0 / weights.len() as f64;
        for v in weights.iter_mut() {
            *v = u;
        }
    }
}

/// Noisy counts normalized into a distribution.
pub(crate) fn noisy_distribution<R: Rng + ?Sized>(
    counts: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut noisy = noisy_counts(counts, scale, rng)?;
    normalize_or_uniform(&mut noisy);
    Ok(noisy)
}

/// Samples an index proportionally to `weights`; zero-weight cells are never
/// selected. The caller guarantees at least one positive weight.
pub(crate) fn draw_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "weighted draw over zero total mass");
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if w > 0.0 && u <= 0.0 {
            return i;
        }
    }
    // floating-point slack: land on the last positive cell
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

/// Fills every missing cell of `d` without touching observed ones. `Random`
/// draws uniformly from the attribute domain (labels, or the numeric range);
/// `MeanMode` fills numerical cells with the observed column mean and samples
/// categorical cells from the observed label distribution. A column with no
/// observed values falls back to random filling with a warning. The output
/// has no missing cells.
pub fn impute<R: Rng + ?Sized>(d: &Dataset, imputer: Imputer, rng: &mut R) -> Result<Dataset> {
    if imputer == Imputer::KaminoImpute {
        return Err(Error::invalid(
            "kamino imputation needs a privacy budget; run it through the pipeline",
        ));
    }
    let mut out = d.clone();
    for j in 0..d.k() {
        if d.missing_count(j) == 0 {
            continue;
        }
        match imputer {
            Imputer::Random => fill_random(d, &mut out, j, rng),
            Imputer::MeanMode => match &d.schema().attr(j).kind {
                AttrKind::Numerical { .. } => {
                    let (mut sum, mut cnt) = (0.0f64, 0usize);
                    for i in 0..d.n() {
                        if let Cell::Num(v) = d.cell(i, j) {
                            sum += v;
                            cnt += 1;
                        }
                    }
                    if cnt == 0 {
                        warn_unobserved(d, j);
                        fill_random(d, &mut out, j, rng);
                    } else {
                        let mean = sum / cnt as f64;
                        fill_missing(d, &mut out, j, rng, |_| Cell::Num(mean));
                    }
                }
                AttrKind::Categorical { domain } => {
                    let mut counts = vec![0.0f64; domain.len()];
                    for i in 0..d.n() {
                        if let Cell::Cat(l) = d.cell(i, j) {
                            counts[l] += 1.0;
                        }
                    }
                    if counts.iter().sum::<f64>() == 0.0 {
                        warn_unobserved(d, j);
                        fill_random(d, &mut out, j, rng);
                    } else {
                        fill_missing(d, &mut out, j, rng, |rng| {
                            Cell::Cat(draw_weighted(&counts, rng))
                        });
                    }
                }
            },
            Imputer::KaminoImpute => unreachable!(),
        }
    }
    Ok(out)
}

fn warn_unobserved(d: &Dataset, j: usize) {
    log::warn!(
        "column '{}' has no observed values; imputing randomly",
        d.schema().attr(j).name
    );
}

fn fill_missing<R: Rng + ?Sized>(
    d: &Dataset,
    out: &mut Dataset,
    j: usize,
    rng: &mut R,
    mut value: impl FnMut(&mut R) -> Cell,
) {
    for i in 0..d.n() {
        if d.is_missing(i, j) {
            out.set_cell(i, j, value(rng));
        }
    }
}

fn fill_random<R: Rng + ?Sized>(d: &Dataset, out: &mut Dataset, j: usize, rng: &mut R) {
    match &d.schema().attr(j).kind {
        AttrKind::Numerical { min, max, .. } => {
            for i in 0..d.n() {
                if d.is_missing(i, j) {
                    out.set_cell(i, j, Cell::Num(rng.gen_range(*min..*max)));
                }
            }
        }
        AttrKind::Categorical { domain } => {
            for i in 0..d.n() {
                if d.is_missing(i, j) {
                    out.set_cell(i, j, Cell::Cat(rng.gen_range(0..domain.len())));
                }
            }
        }
    }
}

/// Differentially private release of per-column means (numerical: Laplace on
/// sum and count) and label histograms (categorical: Laplace on counts),
/// driving the MeanMode imputer inside the pipeline. The budget splits evenly
/// across the columns that have missing cells.
fn dp_mean_mode_impute<R: Rng + ?Sized>(
    d: &Dataset,
    budget: f64,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<Dataset> {
    let mut out = d.clone();
    let cols: Vec<usize> = (0..d.k()).filter(|&j| d.missing_count(j) > 0).collect();
    if cols.is_empty() {
        return Ok(out);
    }
    let per_col = if budget.is_infinite() {
        f64::INFINITY
    } else {
        budget / cols.len() as f64
    };
    for &j in &cols {
        let attr = d.schema().attr(j);
        ledger.charge(format!("impute:{}", attr.name), per_col, 0.0)?;
        match &attr.kind {
            AttrKind::Numerical { min, max, .. } => {
                let (mut sum, mut cnt) = (0.0f64, 0.0f64);
                for i in 0..d.n() {
                    if let Cell::Num(v) = d.cell(i, j) {
                        sum += v;
                        cnt += 1.0;
                    }
                }
                let noisy_sum =
                    laplace_noise(&[sum], laplace_scale(max - min, per_col / 2.0)?, rng)?[0];
                let noisy_cnt = laplace_noise(&[cnt], laplace_scale(1.0, per_col / 2.0)?, rng)?[0];
                let mean = if noisy_cnt >= 1.0 {
                    (noisy_sum / noisy_cnt).clamp(*min, *max)
                } else {
                    // too noisy (or nothing observed) to divide by: neutral fill
                    log::warn!(
                        "noisy count for '{}' fell below one; imputing the range midpoint",
                        attr.name
                    );
                    (min + max) / 2.0
                };
                for i in 0..d.n() {
                    if d.is_missing(i, j) {
                        out.set_cell(i, j, Cell::Num(mean));
                    }
                }
            }
            AttrKind::Categorical { domain } => {
                let mut counts = vec![0.0f64; domain.len()];
                for i in 0..d.n() {
                    if let Cell::Cat(l) = d.cell(i, j) {
                        counts[l] += 1.0;
                    }
                }
                let dist = noisy_distribution(&counts, laplace_scale(1.0, per_col)?, rng)?;
                for i in 0..d.n() {
                    if d.is_missing(i, j) {
                        out.set_cell(i, j, Cell::Cat(draw_weighted(&dist, rng)));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn require_complete(d: &Dataset) -> Result<Dataset> {
    let reduced = d.complete_rows(&d.all_attrs())?;
    if reduced.n() == 0 {
        return Err(Error::EmptyInput(
            "no complete rows: every row has at least one missing cell, \
             so complete-row methods have no training data"
                .into(),
        ));
    }
    Ok(reduced)
}

/// Fitted generation model saved alongside a pipeline's output.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum ModelArtifact {
    Bayes(BayesModel),
    Columnwise(ColumnModel),
}

fn run_base(
    d: &Dataset,
    base: BaseMethod,
    cfg: &SynthConfig,
    budget: f64,
    n_out: usize,
    ledger: &mut BudgetLedger,
    rng: &mut ChaCha12Rng,
) -> Result<(Dataset, ModelArtifact)> {
    match base {
        BaseMethod::PrivBayes => {
            let model = fit_privbayes(d, cfg, budget, BayesVariant::CompleteRow, ledger, rng)?;
            let out = generate_bayes(&model, d.schema(), n_out, rng)?;
            Ok((out, ModelArtifact::Bayes(model)))
        }
        BaseMethod::PrivBayesE => {
            let model =
                fit_privbayes(d, cfg, budget, BayesVariant::PartialObservation, ledger, rng)?;
            let out = generate_bayes(&model, d.schema(), n_out, rng)?;
            Ok((out, ModelArtifact::Bayes(model)))
        }
        BaseMethod::Kamino => {
            let fit = fit_kamino(d, cfg, budget, None, KaminoVariant::CompleteRow, ledger, rng)?;
            let out = generate_columnwise(&fit.model, d.schema(), n_out, rng)?;
            Ok((out, ModelArtifact::Columnwise(fit.model)))
        }
        BaseMethod::KaminoI => {
            let fit = fit_kamino(d, cfg, budget, None, KaminoVariant::Impute, ledger, rng)?;
            let out = generate_columnwise(&fit.model, d.schema(), n_out, rng)?;
            Ok((out, ModelArtifact::Columnwise(fit.model)))
        }
    }
}

/// Runs one synthesis method end to end and returns the synthetic dataset
/// with the ledger of everything it spent. The ledger is verified against
/// `(cfg.epsilon, cfg.delta)` before returning.
pub fn run_pipeline(d: &Dataset, cfg: &SynthConfig) -> Result<(Dataset, BudgetLedger)> {
    run_pipeline_full(d, cfg).map(|(out, ledger, _)| (out, ledger))
}

/// [`run_pipeline`] plus the fitted generation model (for impute-first
/// methods, the inner method's model; a budgeted imputer's own model is
/// spent and discarded).
pub fn run_pipeline_full(
    d: &Dataset,
    cfg: &SynthConfig,
) -> Result<(Dataset, BudgetLedger, ModelArtifact)> {
    cfg.validate()?;
    if d.n() == 0 {
        return Err(Error::EmptyInput("synthesis needs at least one input row".into()));
    }
    let mut ledger = BudgetLedger::new(cfg.epsilon, cfg.delta)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let n_out = cfg.rows.unwrap_or(d.n());
    let (out, artifact) = match &cfg.method {
        Method::Base(base) => run_base(d, *base, cfg, cfg.epsilon, n_out, &mut ledger, &mut rng)?,
        Method::CompleteRow(base) => {
            let reduced = require_complete(d)?;
            run_base(&reduced, *base, cfg, cfg.epsilon, n_out, &mut ledger, &mut rng)?
        }
        Method::ImputeFirst {
            imputer,
            split,
            inner,
        } => {
            let (imp_budget, gen_budget) = split_budget(cfg.epsilon, *split);
            match imputer {
                Imputer::Random => {
                    // draws from the domain alone touch no data
                    let filled = impute(d, Imputer::Random, &mut rng)?;
                    ledger.charge("impute:random", 0.0, 0.0)?;
                    run_base(&filled, *inner, cfg, cfg.epsilon, n_out, &mut ledger, &mut rng)?
                }
                Imputer::MeanMode => {
                    let filled = dp_mean_mode_impute(d, imp_budget, &mut ledger, &mut rng)?;
                    run_base(&filled, *inner, cfg, gen_budget, n_out, &mut ledger, &mut rng)?
                }
                Imputer::KaminoImpute => {
                    let fit = fit_kamino(
                        d,
                        cfg,
                        imp_budget,
                        None,
                        KaminoVariant::Impute,
                        &mut ledger,
                        &mut rng,
                    )?;
                    let filled = fit.working.expect("impute variant returns a working dataset");
                    run_base(&filled, *inner, cfg, gen_budget, n_out, &mut ledger, &mut rng)?
                }
            }
        }
    };
    ledger.check()?;
    Ok((out, ledger, artifact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::missing::MissingSpec;
    use crate::tabular::{AttributeSpec, Schema};

    fn binary_schema(names: &[&str]) -> Schema {
        Schema::new(
            names
                .iter()
                .map(|n| AttributeSpec::categorical(*n, &["0", "1"]))
                .collect(),
        )
        .unwrap()
    }

    fn correlated_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.gen_range(0..2usize);
            let b = if rng.gen::<f64>() < 0.2 { 1 - a } else { a };
            let c = if rng.gen::<f64>() < 0.2 { 1 - b } else { b };
            rows.push(vec![Cell::Cat(a), Cell::Cat(b), Cell::Cat(c)]);
        }
        Dataset::new(binary_schema(&["a", "b", "c"]), rows).unwrap()
    }

    fn masked_dataset(n: usize, seed: u64, rate: f64) -> Dataset {
        let d = correlated_dataset(n, seed);
        let spec = MissingSpec::mcar_global(rate, seed ^ 0x5eed).unwrap();
        crate::missing::inject(&d, &spec).unwrap()
    }

    #[test]
    fn method_strings_round_trip() {
        let cases = [
            "privbayes",
            "privbayese",
            "kamino",
            "kamino-i",
            "complete-row:privbayes",
            "complete-row:kamino-i",
            "impute-first:mean:0.5:privbayes",
            "impute-first:random:0.25:kamino",
            "impute-first:kamino:0.75:privbayese",
        ];
        for s in cases {
            let m: Method = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
            let json = serde_json::to_string(&m).unwrap();
            let back: Method = serde_json::from_str(&json).unwrap();
            assert_eq!(m, back);
        }
        for bad in [
            "gan",
            "complete-row:",
            "complete-row:turbo",
            "impute-first:mean:privbayes",
            "impute-first:mean:0:privbayes",
            "impute-first:mean:1:privbayes",
            "impute-first:modal:0.5:privbayes",
        ] {
            assert!(bad.parse::<Method>().is_err(), "accepted '{bad}'");
        }
    }

    #[test]
    fn mean_imputation_is_the_column_mean() {
        let schema = Schema::new(vec![AttributeSpec::numerical("v", 0.0, 4.0, 4)]).unwrap();
        let rows = vec![
            vec![Cell::Num(1.0)],
            vec![Cell::Num(2.0)],
            vec![Cell::Missing],
            vec![Cell::Num(3.0)],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let out = impute(&d, Imputer::MeanMode, &mut rng).unwrap();
        assert_eq!(out.cell(2, 0), Cell::Num(2.0));
        assert_eq!(out.total_missing(), 0);
    }

    #[test]
    fn imputation_is_identity_on_complete_data() {
        let d = correlated_dataset(50, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(impute(&d, Imputer::MeanMode, &mut rng).unwrap(), d);
        assert_eq!(impute(&d, Imputer::Random, &mut rng).unwrap(), d);
    }

    #[test]
    fn mode_imputation_samples_the_observed_distribution() {
        let schema = Schema::new(vec![AttributeSpec::categorical("c", &["a", "b"])]).unwrap();
        let mut rows = vec![
            vec![Cell::Cat(0)],
            vec![Cell::Cat(0)],
            vec![Cell::Cat(0)],
            vec![Cell::Cat(1)],
        ];
        rows.extend(std::iter::repeat(vec![Cell::Missing]).take(10_000));
        let d = Dataset::new(schema, rows).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let out = impute(&d, Imputer::MeanMode, &mut rng).unwrap();
        let a = (4..out.n())
            .filter(|&i| out.cell(i, 0) == Cell::Cat(0))
            .count();
        let frac = a as f64 / 10_000.0;
        assert!((frac - 0.75).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn unobserved_column_falls_back_to_random() {
        let schema = Schema::new(vec![
            AttributeSpec::categorical("c", &["a", "b"]),
            AttributeSpec::numerical("v", 0.0, 1.0, 2),
        ])
        .unwrap();
        let rows = vec![vec![Cell::Missing, Cell::Missing]; 100];
        let d = Dataset::new(schema, rows).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let out = impute(&d, Imputer::MeanMode, &mut rng).unwrap();
        assert_eq!(out.total_missing(), 0);
        // random fallback reaches both labels with overwhelming probability
        let zeros = (0..out.n())
            .filter(|&i| out.cell(i, 0) == Cell::Cat(0))
            .count();
        assert!(zeros > 0 && zeros < 100);
    }

    #[test]
    fn budgeted_imputer_is_rejected_outside_the_pipeline() {
        let d = correlated_dataset(10, 4);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        assert!(impute(&d, Imputer::KaminoImpute, &mut rng).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let base = SynthConfig::new(Method::Base(BaseMethod::PrivBayes), 1.0, 1e-6, 0);
        assert!(base.validate().is_ok());

        let mut bad = base.clone();
        bad.epsilon = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = base.clone();
        bad.epsilon = f64::NAN;
        assert!(bad.validate().is_err());

        let mut bad = base.clone();
        bad.delta = 1.0;
        assert!(bad.validate().is_err());

        let mut bad = base.clone();
        bad.degree = 0;
        assert!(bad.validate().is_err());

        let mut bad = base.clone();
        bad.structure_fraction = 1.0;
        assert!(bad.validate().is_err());

        let mut bad = base;
        bad.rows = Some(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn every_method_stays_within_budget_on_masked_data() {
        let d = masked_dataset(300, 5, 0.2);
        let methods = [
            "privbayes",
            "privbayese",
            "kamino",
            "kamino-i",
            "complete-row:privbayese",
            "impute-first:mean:0.5:privbayes",
            "impute-first:random:0.5:kamino",
            "impute-first:kamino:0.5:privbayes",
        ];
        for s in methods {
            let cfg = SynthConfig::new(s.parse().unwrap(), 1.0, 1e-5, 7);
            let (out, ledger) = run_pipeline(&d, &cfg).unwrap();
            assert_eq!(out.n(), d.n(), "{s}");
            assert_eq!(out.total_missing(), 0, "{s}");
            assert!(ledger.check().is_ok(), "{s}");
            assert!(ledger.spent_epsilon() <= 1.0 + 1e-9, "{s}");
            assert!(ledger.spent_delta() <= 1e-5 + 1e-18, "{s}");
        }
    }

    #[test]
    fn random_imputation_charges_nothing() {
        let d = masked_dataset(200, 6, 0.2);
        let cfg = SynthConfig::new(
            "impute-first:random:0.5:privbayes".parse().unwrap(),
            1.0,
            0.0,
            3,
        );
        let (_, ledger) = run_pipeline(&d, &cfg).unwrap();
        let entry = &ledger.entries()[0];
        assert_eq!(entry.label, "impute:random");
        assert_eq!(entry.epsilon, 0.0);
        assert_eq!(entry.delta, 0.0);
        // the full budget went to generation
        assert!((ledger.spent_epsilon() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mean_imputation_shows_the_configured_split() {
        let d = masked_dataset(200, 8, 0.3);
        let cfg = SynthConfig::new(
            "impute-first:mean:0.25:privbayes".parse().unwrap(),
            2.0,
            0.0,
            5,
        );
        let (_, ledger) = run_pipeline(&d, &cfg).unwrap();
        let impute_spend: f64 = ledger
            .entries()
            .iter()
            .filter(|e| e.label.starts_with("impute:"))
            .map(|e| e.epsilon)
            .sum();
        let generation_spend: f64 = ledger
            .entries()
            .iter()
            .filter(|e| !e.label.starts_with("impute:"))
            .map(|e| e.epsilon)
            .sum();
        assert!((impute_spend - 0.5).abs() < 1e-9, "imputation {impute_spend}");
        assert!(
            (generation_spend - 1.5).abs() < 1e-9,
            "generation {generation_spend}"
        );
    }

    #[test]
    fn complete_row_spends_the_whole_budget_on_generation() {
        let d = masked_dataset(200, 9, 0.2);
        let cfg = SynthConfig::new("complete-row:privbayes".parse().unwrap(), 1.0, 0.0, 2);
        let (_, ledger) = run_pipeline(&d, &cfg).unwrap();
        assert!((ledger.spent_epsilon() - 1.0).abs() < 1e-9);
        assert!(ledger
            .entries()
            .iter()
            .all(|e| !e.label.starts_with("impute:")));
    }

    #[test]
    fn infinite_budget_variant_pairs_are_identical_on_complete_data() {
        let d = correlated_dataset(150, 10);
        let run = |method: &str| {
            let cfg = SynthConfig::new(method.parse().unwrap(), f64::INFINITY, 0.0, 11);
            run_pipeline(&d, &cfg).unwrap().0
        };
        assert_eq!(run("privbayes"), run("privbayese"));
        assert_eq!(run("kamino"), run("kamino-i"));
    }

    #[test]
    fn pipelines_are_deterministic_in_the_seed() {
        let d = masked_dataset(250, 12, 0.2);
        let run = |seed: u64| {
            let cfg = SynthConfig::new(Method::Base(BaseMethod::PrivBayesE), 1.0, 0.0, seed);
            run_pipeline(&d, &cfg).unwrap().0
        };
        assert_eq!(run(17), run(17));
        assert_ne!(run(17), run(18));
    }

    #[test]
    fn complete_row_without_complete_rows_is_a_runtime_failure() {
        let schema = binary_schema(&["a", "b"]);
        let rows = vec![
            vec![Cell::Missing, Cell::Cat(0)],
            vec![Cell::Cat(1), Cell::Missing],
        ];
        let d = Dataset::new(schema, rows).unwrap();
        let cfg = SynthConfig::new("complete-row:kamino".parse().unwrap(), 1.0, 0.0, 0);
        let err = run_pipeline(&d, &cfg).unwrap_err();
        assert!(err.to_string().contains("no complete rows"));
        assert!(!err.is_validation());
    }

    #[test]
    fn row_override_controls_the_output_size() {
        let d = correlated_dataset(100, 13);
        let mut cfg = SynthConfig::new(Method::Base(BaseMethod::PrivBayes), 1.0, 0.0, 1);
        cfg.rows = Some(37);
        let (out, _) = run_pipeline(&d, &cfg).unwrap();
        assert_eq!(out.n(), 37);
    }

    #[test]
    fn numeric_columns_are_imputed_privately() {
        let schema = Schema::new(vec![
            AttributeSpec::numerical("v", 0.0, 10.0, 5),
            AttributeSpec::categorical("c", &["x", "y"]),
        ])
        .unwrap();
        let mut rows = Vec::new();
        for i in 0..200 {
            let v = if i % 4 == 0 {
                Cell::Missing
            } else {
                Cell::Num(4.0)
            };
            let c = if i % 5 == 0 {
                Cell::Missing
            } else {
                Cell::Cat(i % 2)
            };
            rows.push(vec![v, c]);
        }
        let d = Dataset::new(schema, rows).unwrap();
        let cfg = SynthConfig::new(
            "impute-first:mean:0.5:privbayese".parse().unwrap(),
            f64::INFINITY,
            0.0,
            21,
        );
        let (out, ledger) = run_pipeline(&d, &cfg).unwrap();
        assert_eq!(out.total_missing(), 0);
        // noiseless release: the numeric fill is exactly the observed mean
        let labels: Vec<&str> = ledger
            .entries()
            .iter()
            .map(|e| e.label.as_str())
            .collect();
        assert!(labels.contains(&"impute:v"));
        assert!(labels.contains(&"impute:c"));
    }
}
