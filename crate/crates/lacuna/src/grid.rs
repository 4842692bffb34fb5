//! Experiment grid runner: methods x mechanisms x missing rates x budgets.
//!
//! Each grid cell masks the real data, synthesizes under the configured
//! budget, and measures utility against the original (unmasked) data,
//! repeated over consecutive derived seeds. Results come back as flat rows
//! (one per cell and metric) ready for CSV export and plotting. Cells are
//! independent and run on the shared thread pool; every cell derives its own
//! seeds, so concurrency never changes the numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::BudgetLedger;
use crate::error::{Error, Result};
use crate::metrics::{f1_evaluation, kway_distance};
use crate::missing::MissingSpec;
use crate::synth::{run_pipeline, Method, SynthConfig};
use crate::tabular::Dataset;

/// Masking mechanism axis of the grid. Per-column MCAR rates are a
/// single-cell concern; the grid's one rate knob drives all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMechanism {
    Mcar,
    Mar,
    Mnar,
}

impl GridMechanism {
    pub const ALL: [GridMechanism; 3] = [GridMechanism::Mcar, GridMechanism::Mar, GridMechanism::Mnar];

    fn spec(self, rate: f64, seed: u64) -> Result<MissingSpec> {
        match self {
            GridMechanism::Mcar => MissingSpec::mcar_global(rate, seed),
            GridMechanism::Mar => MissingSpec::mar(rate, seed),
            GridMechanism::Mnar => MissingSpec::mnar(rate, seed),
        }
    }
}

impl std::fmt::Display for GridMechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GridMechanism::Mcar => "mcar",
            GridMechanism::Mar => "mar",
            GridMechanism::Mnar => "mnar",
        })
    }
}

impl std::str::FromStr for GridMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<GridMechanism> {
        match s {
            "mcar" => Ok(GridMechanism::Mcar),
            "mar" => Ok(GridMechanism::Mar),
            "mnar" => Ok(GridMechanism::Mnar),
            other => Err(Error::invalid(format!(
                "unknown mechanism {other:?}; expected mcar, mar, or mnar"
            ))),
        }
    }
}

/// Default missing-rate axis: 1%, 5%, 10%, 20%, 30%.
pub const DEFAULT_RATES: [f64; 5] = [0.01, 0.05, 0.10, 0.20, 0.30];

/// Default budget axis, infinity last.
pub const DEFAULT_EPSILONS: [f64; 6] = [0.5, 1.0, 3.0, 5.0, 10.0, f64::INFINITY];

/// Full grid description. `methods` entries are pipeline method strings
/// (e.g. "privbayese" or "impute-first:mean:0.5:kamino").
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub methods: Vec<Method>,
    pub mechanisms: Vec<GridMechanism>,
    pub rates: Vec<f64>,
    #[serde(with = "crate::jsonio::eps_vec")]
    pub epsilons: Vec<f64>,
    pub delta: f64,
    /// Marginal orders to report, one metric row per order.
    pub ks: Vec<usize>,
    /// Target attributes for the F1 metric; empty skips F1 entirely.
    #[serde(default)]
    pub f1_targets: Vec<usize>,
    /// Seeded repetitions per cell, aggregated into mean and std.
    pub repetitions: usize,
    pub seed: u64,
}

impl GridSpec {
    /// The benchmark defaults: all mechanisms, the standard rate and budget
    /// axes, 1- and 2-way marginals, three repetitions, no F1.
    pub fn standard(methods: Vec<Method>, delta: f64, seed: u64) -> GridSpec {
        GridSpec {
            methods,
            mechanisms: GridMechanism::ALL.to_vec(),
            rates: DEFAULT_RATES.to_vec(),
            epsilons: DEFAULT_EPSILONS.to_vec(),
            delta,
            ks: vec![1, 2],
            f1_targets: Vec::new(),
            repetitions: 3,
            seed: 0,
        }
        .with_seed(seed)
    }

    fn with_seed(mut self, seed: u64) -> GridSpec {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("grid needs at least one method"));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::invalid("grid needs at least one mechanism"));
        }
        if self.rates.is_empty() || self.epsilons.is_empty() {
            return Err(Error::invalid("grid needs at least one rate and one epsilon"));
        }
        for &r in &self.rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::invalid(format!("missing rate {r} outside [0, 1)")));
            }
        }
        if self.ks.is_empty() && self.f1_targets.is_empty() {
            return Err(Error::invalid("grid measures nothing: no ks and no F1 targets"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        Ok(())
    }
}

/// Identity of one grid cell, handed to ledger inspectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub method: Method,
    pub mechanism: GridMechanism,
    pub rate: f64,
    pub epsilon: f64,
    pub repetition: usize,
}

/// One aggregated metric row of the flat result table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub method: String,
    pub mechanism: String,
    pub rate: f64,
    #[serde(with = "crate::jsonio::eps")]
    pub epsilon: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Runs the grid over complete real data, reporting utility against that
/// same data. See [`run_grid_with`] for the ledger-inspecting variant.
pub fn run_grid(real: &Dataset, spec: &GridSpec) -> Result<Vec<GridRow>> {
    run_grid_with(real, spec, |_, _| {})
}

/// [`run_grid`] plus a callback invoked with every repetition's budget
/// ledger, letting callers audit spending cell by cell.
pub fn run_grid_with(
    real: &Dataset,
    spec: &GridSpec,
    inspect: impl Fn(&GridPoint, &BudgetLedger) + Sync,
) -> Result<Vec<GridRow>> {
    spec.validate()?;
    if real.has_missing() {
        return Err(Error::invalid(
            "grid input must be complete; the grid injects its own missingness",
        ));
    }

    let mut cells = Vec::new();
    for method in &spec.methods {
        for &mechanism in &spec.mechanisms {
            for &rate in &spec.rates {
                for &epsilon in &spec.epsilons {
                    cells.push((method.clone(), mechanism, rate, epsilon));
                }
            }
        }
    }

    let rows: Vec<Vec<GridRow>> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, (method, mechanism, rate, epsilon))| {
            run_cell(real, spec, idx, method, *mechanism, *rate, *epsilon, &inspect)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    real: &Dataset,
    spec: &GridSpec,
    cell_idx: usize,
    method: &Method,
    mechanism: GridMechanism,
    rate: f64,
    epsilon: f64,
    inspect: &(impl Fn(&GridPoint, &BudgetLedger) + Sync),
) -> Result<Vec<GridRow>> {
    let mut kway_samples: Vec<Vec<f64>> = vec![Vec::new(); spec.ks.len()];
    let mut f1_samples: Vec<f64> = Vec::new();

    for rep in 0..spec.repetitions {
        let seed = cell_seed(spec.seed, cell_idx, rep);
        let masked = inject_at(real, mechanism, rate, seed)?;
        let mut cfg = SynthConfig::new(method.clone(), epsilon, spec.delta, seed);
        cfg.rows = Some(real.n());
        let (synth, ledger) = run_pipeline(&masked, &cfg)?;
        inspect(
            &GridPoint {
                method: method.clone(),
                mechanism,
                rate,
                epsilon,
                repetition: rep,
            },
            &ledger,
        );
        for (i, &k) in spec.ks.iter().enumerate() {
            kway_samples[i].push(kway_distance(real, &synth, k)?);
        }
        if !spec.f1_targets.is_empty() {
            f1_samples.push(f1_evaluation(real, &synth, &spec.f1_targets, seed)?);
        }
    }

    let mut out = Vec::new();
    let mut push = |metric: String, samples: &[f64]| {
        let (mean, std) = mean_std(samples);
        out.push(GridRow {
            method: method.to_string(),
            mechanism: mechanism.to_string(),
            rate,
            epsilon,
            metric,
            mean,
            std,
        });
    };
    for (i, &k) in spec.ks.iter().enumerate() {
        push(format!("kway{k}"), &kway_samples[i]);
    }
    if !spec.f1_targets.is_empty() {
        push("f1".to_string(), &f1_samples);
    }
    Ok(out)
}

fn inject_at(real: &Dataset, mechanism: GridMechanism, rate: f64, seed: u64) -> Result<Dataset> {
    if rate == 0.0 {
        return Ok(real.clone());
    }
    crate::missing::inject(real, &mechanism.spec(rate, seed)?)
}

/// Per-repetition seed: a splitmix-style scramble keeps neighbouring cells'
/// streams unrelated without any shared state.
fn cell_seed(base: u64, cell: usize, rep: usize) -> u64 {
    let mut z = base
        ^ (cell as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (rep as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample mean and sample standard deviation (n-1 denominator; 0 for a
/// single sample).
fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Flat CSV of grid rows: header plus one line per row, floats printed in
/// shortest round-trip form and the infinite budget as "inf".
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut s = String::from("method,mechanism,rate,epsilon,metric,mean,std\n");
    for r in rows {
        let eps = if r.epsilon.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", r.epsilon)
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method, r.mechanism, r.rate, eps, r.metric, r.mean, r.std
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{AttributeSpec, Cell, Dataset, Schema};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::sync::Mutex;

    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        let schema = Schema::new(vec![
            AttributeSpec::categorical("a", &["x", "y"]),
            AttributeSpec::categorical("b", &["x", "y"]),
            AttributeSpec::categorical("c", &["x", "y", "z"]),
        ])
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut d = Dataset::empty(schema);
        for _ in 0..n {
            let a = rng.gen_range(0..2);
            let b = if rng.gen::<f64>() < 0.8 { a } else { 1 - a };
            let c = rng.gen_range(0..3);
            d.push_row(&[Cell::Cat(a), Cell::Cat(b), Cell::Cat(c)]);
        }
        d
    }

    fn toy_spec() -> GridSpec {
        GridSpec {
            methods: vec![
                "privbayese".parse().unwrap(),
                "impute-first:mean:0.5:privbayes".parse().unwrap(),
            ],
            mechanisms: vec![GridMechanism::Mcar],
            rates: vec![0.2],
            epsilons: vec![1.0, f64::INFINITY],
            delta: 1e-6,
            ks: vec![1],
            f1_targets: Vec::new(),
            repetitions: 2,
            seed: 7,
        }
    }

    #[test]
    fn toy_grid_produces_one_row_per_cell_and_metric() {
        let real = toy_dataset(80, 1);
        let rows = run_grid(&real, &toy_spec()).unwrap();
        // 2 methods x 1 mechanism x 1 rate x 2 epsilons x 1 metric
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert_eq!(r.metric, "kway1");
            assert!((0.0..=1.0).contains(&r.mean), "mean {}", r.mean);
            assert!(r.std >= 0.0);
        }
        // infinite-budget synthesis should sit closer to the real marginals
        // than the eps=1 run of the same method on average
        let mean_at = |m: &str, eps: f64| {
            rows.iter()
                .find(|r| r.method == m && r.epsilon == eps)
                .unwrap()
                .mean
        };
        assert!(mean_at("privbayese", f64::INFINITY) <= mean_at("privbayese", 1.0) + 0.05);
    }

    #[test]
    fn grid_is_deterministic() {
        let real = toy_dataset(60, 2);
        let spec = toy_spec();
        let a = run_grid(&real, &spec).unwrap();
        let b = run_grid(&real, &spec).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mean, y.mean);
            assert_eq!(x.std, y.std);
        }
    }

    #[test]
    fn ledgers_are_observable_and_within_budget() {
        let real = toy_dataset(60, 3);
        let spec = toy_spec();
        let seen = Mutex::new(0usize);
        run_grid_with(&real, &spec, |point, ledger| {
            *seen.lock().unwrap() += 1;
            assert!(ledger.spent_epsilon() <= point.epsilon + 1e-9);
            if let Method::ImputeFirst { .. } = point.method {
                assert!(ledger.entries().iter().any(|e| e.label.starts_with("impute:")));
            }
        })
        .unwrap();
        // cells x repetitions
        assert_eq!(*seen.lock().unwrap(), 4 * 2);
    }

    #[test]
    fn f1_metric_rows_appear_when_targets_are_set() {
        let real = toy_dataset(120, 4);
        let mut spec = toy_spec();
        spec.methods.truncate(1);
        spec.epsilons = vec![f64::INFINITY];
        spec.f1_targets = vec![1];
        let rows = run_grid(&real, &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().any(|r| r.metric == "f1"));
    }

    #[test]
    fn masked_input_and_bad_specs_are_rejected() {
        let real = toy_dataset(40, 5);
        let mut masked = real.clone();
        masked.set_cell(0, 0, Cell::Missing);
        assert!(run_grid(&masked, &toy_spec()).unwrap_err().is_validation());

        let mut spec = toy_spec();
        spec.rates = vec![1.5];
        assert!(run_grid(&real, &spec).unwrap_err().is_validation());
        let mut spec = toy_spec();
        spec.repetitions = 0;
        assert!(run_grid(&real, &spec).unwrap_err().is_validation());
        let mut spec = toy_spec();
        spec.ks.clear();
        assert!(run_grid(&real, &spec).unwrap_err().is_validation());
    }

    #[test]
    fn csv_layout_is_flat_and_parseable() {
        let real = toy_dataset(60, 6);
        let rows = run_grid(&real, &toy_spec()).unwrap();
        let csv = grid_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,mechanism,rate,epsilon,metric,mean,std"
        );
        let mut eps_inf = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            if fields[3] == "inf" {
                eps_inf += 1;
            } else {
                fields[3].parse::<f64>().unwrap();
            }
            fields[5].parse::<f64>().unwrap();
            fields[6].parse::<f64>().unwrap();
        }
        assert_eq!(eps_inf, 2);
    }

    #[test]
    fn standard_spec_matches_the_benchmark_axes() {
        let spec = GridSpec::standard(vec!["privbayes".parse().unwrap()], 1e-5, 3);
        assert_eq!(spec.mechanisms.len(), 3);
        assert_eq!(spec.rates, DEFAULT_RATES.to_vec());
        assert_eq!(spec.epsilons.len(), 6);
        assert!(spec.epsilons[5].is_infinite());
        assert_eq!(spec.repetitions, 3);
        assert_eq!(spec.seed, 3);
        spec.validate().unwrap();
    }

    #[test]
    fn cell_seeds_do_not_collide_across_neighbours() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..50 {
            for rep in 0..5 {
                assert!(seen.insert(cell_seed(9, cell, rep)));
            }
        }
    }
}
