//! Privacy amplification from incomplete rows.
//!
//! A cell that is missing with probability φ means the row participates in a
//! computation over complete rows only with probability Π(1−φ) across the
//! attributes that computation touches. That inclusion probability amplifies
//! a mechanism's (ε, δ) exactly like subsampling. This module prices the
//! amplification: per-attribute-set factors, imputation stability costs,
//! single-release amplification, and the partition search that assigns
//! disjoint amplification sets to a whole workload of marginals.

mod partition;

pub use partition::{
    exhaustive_reference, greedy_partition, naive_baseline, optimal_partition, validate_plan,
    AmplificationPlan, BaselineReport, MarginalQuery, EXACT_SEARCH_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::missing::{Mechanism, PhiEstimate};
use crate::tabular::Dataset;

/// Which reading of the subsampling theorem a reported budget uses.
/// `Linear` is the small-ε approximation p·ε; `Exact` is ln(1 + p(e^ε − 1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplifyMode {
    Linear,
    Exact,
}

/// Amplify one (ε, δ) release that sees the data only with probability `p`.
///
/// Exact mode returns `ln(1 + p(e^ε − 1))`; linear mode the first-order
/// `p·ε`. Both scale δ to `p·δ`. `p = 0` yields (0, 0) even at ε = ∞.
pub fn sampling_amplify(p: f64, epsilon: f64, delta: f64, mode: AmplifyMode) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("inclusion probability {p} outside [0, 1]")));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon {epsilon} must be >= 0")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::invalid(format!("delta {delta} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok((0.0, 0.0));
    }
    let amplified = match mode {
        AmplifyMode::Exact => (p * epsilon.exp_m1()).ln_1p(),
        AmplifyMode::Linear => p * epsilon,
    };
    Ok((amplified, p * delta))
}

fn check_phi(phi: &PhiEstimate) -> Result<()> {
    if let Some(bad) = phi.phi.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("phi value {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Inclusion probability of a row in a computation over `attrs`:
/// `Π_{j ∈ attrs} (1 − φ_j)`. The empty set has factor 1.
pub fn mcar_factor(phi: &PhiEstimate, attrs: &[usize]) -> Result<f64> {
    check_phi(phi)?;
    let k = phi.phi.len();
    let mut seen = vec![false; k];
    let mut factor = 1.0;
    for &a in attrs {
        if a >= k {
            return Err(Error::invalid(format!("attribute {a} out of range (k = {k})")));
        }
        if seen[a] {
            return Err(Error::invalid(format!("attribute {a} listed twice")));
        }
        seen[a] = true;
        factor *= 1.0 - phi.phi[a];
    }
    Ok(factor)
}

/// Budget for per-attribute models where only one model can claim the
/// amplification: the model of the most-missing attribute (smallest factor)
/// is amplified, the rest pay full price. Ties break to the lowest index.
pub fn columnwise_amplify(phi: &PhiEstimate, per_attr_epsilon: &[f64]) -> Result<f64> {
    check_phi(phi)?;
    let k = phi.phi.len();
    if per_attr_epsilon.len() != k {
        return Err(Error::invalid(format!(
            "{} epsilons for {k} attributes",
            per_attr_epsilon.len()
        )));
    }
    if per_attr_epsilon.iter().any(|e| e.is_nan() || *e < 0.0) {
        return Err(Error::invalid("per-attribute epsilons must be >= 0"));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let target = (0..k)
        .max_by(|&a, &b| {
            phi.phi[a]
                .partial_cmp(&phi.phi[b])
                .unwrap()
                .then(b.cmp(&a)) // tie: keep the lower index
        })
        .unwrap();
    let mut total = 0.0;
    for (j, &eps) in per_attr_epsilon.iter().enumerate() {
        let factor = if j == target { 1.0 - phi.phi[j] } else { 1.0 };
        // 0 * inf must read as "never runs", not NaN
        total += if factor == 0.0 { 0.0 } else { factor * eps };
    }
    Ok(total)
}

/// Stability of one imputation pass over an attribute with `missing` absent
/// cells: neighbors can disagree on every imputed cell plus the row that
/// changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeStability {
    pub attr: usize,
    pub missing: usize,
    pub stability: usize,
}

/// Stability costs of an imputation schedule, plus the end-to-end budget
/// multiplier for a mechanism run after all of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_attribute: Vec<AttributeStability>,
    pub multiplier: usize,
}

/// Per-attribute stability `m_A + 1` for each step of `imputation_order`,
/// and the composed multiplier `min(1 + Σ m_A, n)`: row differences add up
/// across passes but can never exceed the dataset itself.
pub fn stability_cost(d: &Dataset, imputation_order: &[usize]) -> Result<StabilityReport> {
    let k = d.k();
    let mut seen = vec![false; k];
    let mut per_attribute = Vec::with_capacity(imputation_order.len());
    let mut total_missing = 0usize;
    for &attr in imputation_order {
        if attr >= k {
            return Err(Error::invalid(format!("attribute {attr} out of range (k = {k})")));
        }
        if seen[attr] {
            return Err(Error::invalid(format!("attribute {attr} imputed twice")));
        }
        seen[attr] = true;
        let missing = d.missing_count(attr);
        total_missing += missing;
        per_attribute.push(AttributeStability {
            attr,
            missing,
            stability: missing + 1,
        });
    }
    let multiplier = (1 + total_missing).min(d.n().max(1));
    Ok(StabilityReport {
        per_attribute,
        multiplier,
    })
}

/// Whether an amplification claim is honest for a given missingness process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplifyPermission {
    /// Cell-independent missingness: the subsampling argument applies.
    Permitted,
    /// Row-independent but value- or feature-driven missingness: report
    /// the unamplified budget, never a tighter one.
    NoAmplification,
    /// Unknown process: refuse any ground-truth claim.
    Refused,
}

impl std::fmt::Display for AmplifyPermission {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AmplifyPermission::Permitted => write!(f, "amplification permitted"),
            AmplifyPermission::NoAmplification => {
                write!(f, "no amplification: amplified epsilon equals requested epsilon")
            }
            AmplifyPermission::Refused => {
                write!(f, "unknown missingness process: no ground-truth claim")
            }
        }
    }
}

/// Gate amplification on how the holes were made. Only the cell-independent
/// mechanisms admit the subsampling argument; pass `None` when the
/// provenance of the mask is unknown.
pub fn ground_truth_guard(mechanism: Option<&Mechanism>) -> AmplifyPermission {
    match mechanism {
        Some(Mechanism::Mcar { .. }) | Some(Mechanism::McarGlobal { .. }) => {
            AmplifyPermission::Permitted
        }
        Some(Mechanism::Mar { .. }) | Some(Mechanism::Mnar { .. }) => {
            AmplifyPermission::NoAmplification
        }
        None => AmplifyPermission::Refused,
    }
}
