//! Missingness injectors for complete datasets, plus empirical
//! missing-probability estimation.
//!
//! All mechanisms are exact-count or seeded-Bernoulli constructions:
//!
//! * `McarGlobal(rate)` masks exactly `round(rate·n·k)` cells uniformly over
//!   the whole grid.
//! * `Mcar(phi)` masks exactly `round(phi_j·n)` cells per column.
//! * `Mar(rate)` designates a random `ceil(feature_fraction·k)`-subset of
//!   attributes as features (never masked) and masks the remaining cells
//!   row-wise with probability `sigmoid(w·x + b)`, where `x` holds the
//!   feature columns as per-column z-scored discretized indices, `w` is
//!   i.i.d. standard normal, and `b` is fitted per target by bisection so the
//!   expected masked fraction matches `rate` to 1e-4.
//! * `Mnar(rate)` is the same logistic construction with the feature columns
//!   themselves masked afterwards by an independent per-column MCAR at
//!   `rate`; the logistic inputs use the pre-masking values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Mcar { phi: Vec<f64> },
    McarGlobal { rate: f64 },
    Mar { rate: f64, feature_fraction: f64 },
    Mnar { rate: f64, feature_fraction: f64 },
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Mcar { .. } => "mcar",
            Mechanism::McarGlobal { .. } => "mcar-global",
            Mechanism::Mar { .. } => "mar",
            Mechanism::Mnar { .. } => "mnar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingSpec {
    pub mechanism: Mechanism,
    pub seed: u64,
}

impl MissingSpec {
    pub fn new(mechanism: Mechanism, seed: u64) -> Result<Self> {
        let spec = MissingSpec { mechanism, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn mcar(phi: Vec<f64>, seed: u64) -> Result<Self> {
        Self::new(Mechanism::Mcar { phi }, seed)
    }

    pub fn mcar_global(rate: f64, seed: u64) -> Result<Self> {
        Self::new(Mechanism::McarGlobal { rate }, seed)
    }

    pub fn mar(rate: f64, seed: u64) -> Result<Self> {
        Self::new(
            Mechanism::Mar {
                rate,
                feature_fraction: 0.5,
            },
            seed,
        )
    }

    pub fn mnar(rate: f64, seed: u64) -> Result<Self> {
        Self::new(
            Mechanism::Mnar {
                rate,
                feature_fraction: 0.5,
            },
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let check_prob = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} {p} outside [0, 1]")))
            }
        };
        match &self.mechanism {
            Mechanism::Mcar { phi } => {
                for &p in phi {
                    check_prob(p, "missing probability")?;
                }
            }
            Mechanism::McarGlobal { rate } => check_prob(*rate, "rate")?,
            Mechanism::Mar {
                rate,
                feature_fraction,
            }
            | Mechanism::Mnar {
                rate,
                feature_fraction,
            } => {
                check_prob(*rate, "rate")?;
                if !(*feature_fraction > 0.0 && *feature_fraction < 1.0) {
                    return Err(Error::invalid(format!(
                        "feature fraction {feature_fraction} outside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-column empirical missing fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub phi: Vec<f64>,
    pub n: usize,
}

impl PhiEstimate {
    pub fn new(phi: Vec<f64>, n: usize) -> Result<Self> {
        for &p in &phi {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("phi entry {p} outside [0, 1]")));
            }
        }
        Ok(PhiEstimate { phi, n })
    }

    pub fn k(&self) -> usize {
        self.phi.len()
    }
}

/// Apply a missingness mechanism to a complete dataset. Present cell values
/// are never altered and cells are never unmasked; the result differs from
/// the input only by newly missing cells.
pub fn inject(d: &Dataset, spec: &MissingSpec) -> Result<Dataset> {
    spec.validate()?;
    if d.has_missing() {
        return Err(Error::invalid(
            "inject requires a complete dataset (input already has missing cells)",
        ));
    }
    let n = d.n();
    let k = d.k();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mask = match &spec.mechanism {
        Mechanism::McarGlobal { rate } => {
            let cells = n * k;
            let m = (rate * cells as f64).round() as usize;
            if m > cells {
                return Err(Error::invalid(format!(
                    "rate {rate} requires {m} masked cells but only {cells} exist"
                )));
            }
            let mut mask = vec![false; cells];
            for idx in rand::seq::index::sample(&mut rng, cells, m) {
                mask[idx] = true;
            }
            mask
        }
        Mechanism::Mcar { phi } => {
            if phi.len() != k {
                return Err(Error::invalid(format!(
                    "phi has {} entries, dataset has {k} attributes",
                    phi.len()
                )));
            }
            let mut mask = vec![false; n * k];
            for (j, &p) in phi.iter().enumerate() {
                mask_column_exact(&mut mask, n, k, j, p, &mut rng)?;
            }
            mask
        }
        Mechanism::Mar {
            rate,
            feature_fraction,
        } => logistic_mask(d, *rate, *feature_fraction, false, &mut rng)?,
        Mechanism::Mnar {
            rate,
            feature_fraction,
        } => logistic_mask(d, *rate, *feature_fraction, true, &mut rng)?,
    };

    let mut out = d.clone();
    for i in 0..n {
        for j in 0..k {
            if mask[i * k + j] {
                out.set_cell(i, j, Cell::Missing);
            }
        }
    }
    Ok(out)
}

fn mask_column_exact(
    mask: &mut [bool],
    n: usize,
    k: usize,
    j: usize,
    p: f64,
    rng: &mut ChaCha12Rng,
) -> Result<()> {
    let m = (p * n as f64).round() as usize;
    if m > n {
        return Err(Error::invalid(format!(
            "column {j}: probability {p} requires {m} masked cells of {n}"
        )));
    }
    for i in rand::seq::index::sample(rng, n, m) {
        mask[i * k + j] = true;
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Shared MAR/MNAR construction; `premask_features` adds the MNAR step.
fn logistic_mask(
    d: &Dataset,
    rate: f64,
    feature_fraction: f64,
    premask_features: bool,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<bool>> {
    let n = d.n();
    let k = d.k();
    if k < 2 {
        return Err(Error::invalid("logistic mechanisms need at least 2 attributes"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let n_feat = (feature_fraction * k as f64).ceil() as usize;
    if n_feat >= k {
        return Err(Error::invalid(format!(
            "feature fraction {feature_fraction} leaves no target attributes (k = {k})"
        )));
    }
    let mut features: Vec<usize> = rand::seq::index::sample(rng, k, n_feat).into_vec();
    features.sort_unstable();
    let targets: Vec<usize> = (0..k).filter(|j| !features.contains(j)).collect();

    // z-scored discretized indices; constant columns contribute 0
    let mut x = vec![0.0f64; n * n_feat];
    for (f, &j) in features.iter().enumerate() {
        let vals: Vec<f64> = (0..n)
            .map(|i| d.cell_index(i, j).expect("input is complete") as f64)
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            x[i * n_feat + f] = if sd > 0.0 { (vals[i] - mean) / sd } else { 0.0 };
        }
    }

    let mut mask = vec![false; n * k];
    for &t in &targets {
        let w: Vec<f64> = (0..n_feat)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let logits: Vec<f64> = (0..n)
            .map(|i| {
                w.iter()
                    .zip(&x[i * n_feat..(i + 1) * n_feat])
                    .map(|(wf, xf)| wf * xf)
                    .sum()
            })
            .collect();
        let b = fit_bias(&logits, rate);
        for (i, &z) in logits.iter().enumerate() {
            if rng.gen_bool(sigmoid(z + b).clamp(0.0, 1.0)) {
                mask[i * k + t] = true;
            }
        }
    }

    if premask_features {
        for &j in &features {
            mask_column_exact(&mut mask, n, k, j, rate, rng)?;
        }
    }
    Ok(mask)
}

/// Bisection for the intercept b with mean sigmoid(logit + b) = rate.
fn fit_bias(logits: &[f64], rate: f64) -> f64 {
    let mean_prob = |b: f64| {
        logits.iter().map(|&z| sigmoid(z + b)).sum::<f64>() / logits.len() as f64
    };
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let g = mean_prob(mid) - rate;
        if g.abs() < 1e-4 {
            return mid;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Empirical per-column missing fractions.
pub fn estimate_phi(d: &Dataset) -> Result<PhiEstimate> {
    if d.n() == 0 {
        return Err(Error::invalid("cannot estimate phi from an empty dataset"));
    }
    let n = d.n() as f64;
    let phi = (0..d.k()).map(|j| d.missing_count(j) as f64 / n).collect();
    PhiEstimate::new(phi, d.n())
}

/// MAR with post-hoc rate escalation: raise the rate until the complete-row
/// count drops to `target_complete_rows` or below, so MAR runs can be
/// compared against mechanisms that leave fewer complete rows.
pub fn inject_mar_sr(
    d: &Dataset,
    start_rate: f64,
    seed: u64,
    target_complete_rows: usize,
) -> Result<(Dataset, f64)> {
    let mut rate = start_rate;
    loop {
        let spec = MissingSpec::new(
            Mechanism::Mar {
                rate,
                feature_fraction: 0.5,
            },
            seed,
        )?;
        let masked = inject(d, &spec)?;
        let complete = masked.complete_rows(&masked.all_attrs())?.n();
        if complete <= target_complete_rows {
            return Ok((masked, rate));
        }
        rate += 0.01;
        if rate > 1.0 {
            return Err(Error::Unattainable(format!(
                "rate escalation reached 1.0 with {complete} complete rows, target {target_complete_rows}"
            )));
        }
    }
}
