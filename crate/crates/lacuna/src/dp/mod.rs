//! Noise mechanisms and privacy-budget bookkeeping.
//!
//! Mechanisms take explicit seeded generators and never touch global state.
//! An infinite epsilon is a first-class budget: scales computed from it are 0
//! and every mechanism degrades to the identity / argmax, so non-private runs
//! share the exact code path of private ones.

mod accountant;

pub use accountant::{
    default_delta, misgan_curve, misgan_total_rdp, rdp_to_dp, sgm_rdp, sigma_for_budget,
    MisganAccountingParams, RdpCurve, SgmForm, SgmParams,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Laplace scale for a sensitivity/epsilon pair; 0 under an infinite budget.
pub fn laplace_scale(sensitivity: f64, epsilon: f64) -> Result<f64> {
    if !(sensitivity > 0.0) {
        return Err(Error::invalid(format!(
            "sensitivity {sensitivity} must be positive"
        )));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} must be positive")));
    }
    Ok(sensitivity / epsilon)
}

/// One Laplace(0, scale) draw via the inverse CDF.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    // u in the open interval (-0.5, 0.5); the closed endpoint has measure
    // 2^-53 and would map to -infinity
    let u = loop {
        let u = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            break u;
        }
    };
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Add i.i.d. Laplace(0, scale) noise per coordinate. A scale of exactly 0
/// (infinite budget) is the identity.
pub fn laplace_noise<R: Rng + ?Sized>(values: &[f64], scale: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!(
            "laplace scale {scale} must be finite and nonnegative"
        )));
    }
    if scale == 0.0 {
        return Ok(values.to_vec());
    }
    Ok(values
        .iter()
        .map(|&v| v + laplace_sample(scale, rng))
        .collect())
}

/// Standard-deviation bound for the classic Gaussian mechanism:
/// `sensitivity * sqrt(2 ln(1.25/delta)) / epsilon`. Only valid for
/// epsilon in (0, 1); larger budgets are rejected rather than extrapolated.
pub fn gaussian_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "gaussian mechanism bound requires epsilon in (0, 1), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta {delta} outside (0, 1)")));
    }
    if !(sensitivity > 0.0) {
        return Err(Error::invalid(format!(
            "sensitivity {sensitivity} must be positive"
        )));
    }
    Ok(sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Add i.i.d. N(0, sigma^2) noise per coordinate; sigma 0 is the identity.
pub fn gaussian_noise<R: Rng + ?Sized>(values: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "gaussian sigma {sigma} must be finite and nonnegative"
        )));
    }
    if sigma == 0.0 {
        return Ok(values.to_vec());
    }
    let normal = rand_distr::Normal::new(0.0, sigma)
        .map_err(|e| Error::invalid(format!("bad normal parameters: {e}")))?;
    Ok(values
        .iter()
        .map(|&v| v + rng.sample::<f64, _>(normal))
        .collect())
}

/// Exponential mechanism over a scored candidate list; returns the selected
/// index. Candidate i is drawn with probability proportional to
/// `exp(epsilon * score_i / (2 * sensitivity))`; an infinite epsilon selects
/// the argmax deterministically with first-index tie-break.
pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::invalid("exponential mechanism over no candidates"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("exponential mechanism scores must be finite"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if epsilon.is_infinite() {
        return Ok(scores.iter().position(|&s| s == max).unwrap());
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} must be >= 0")));
    }
    if !(sensitivity > 0.0) {
        return Err(Error::invalid(format!(
            "sensitivity {sensitivity} must be positive for a finite budget"
        )));
    }
    // shift by the max before exponentiation so weights stay in (0, 1]
    let weights: Vec<f64> = scores
        .iter()
        .map(|&s| (epsilon * (s - max) / (2.0 * sensitivity)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return Ok(i);
        }
    }
    Ok(weights.len() - 1)
}

/// Running record of (epsilon, delta) consumptions against a fixed budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    #[serde(with = "crate::jsonio::eps")]
    pub epsilon: f64,
    pub delta: f64,
    entries: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    #[serde(with = "crate::jsonio::eps")]
    pub epsilon: f64,
    pub delta: f64,
}

impl BudgetLedger {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::invalid(format!("epsilon {epsilon} must be >= 0")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid(format!("delta {delta} outside [0, 1)")));
        }
        Ok(BudgetLedger {
            epsilon,
            delta,
            entries: Vec::new(),
        })
    }

    /// True when the budget disables noise entirely.
    pub fn is_noiseless(&self) -> bool {
        self.epsilon.is_infinite()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn spent_epsilon(&self) -> f64 {
        self.entries.iter().map(|e| e.epsilon).sum()
    }

    pub fn spent_delta(&self) -> f64 {
        self.entries.iter().map(|e| e.delta).sum()
    }

    /// Record a consumption; rejects charges that would exceed the budget
    /// (with 1-ulp-scale slack for split arithmetic).
    pub fn charge(&mut self, label: impl Into<String>, epsilon: f64, delta: f64) -> Result<()> {
        if epsilon.is_nan() || epsilon < 0.0 || delta < 0.0 {
            return Err(Error::invalid("negative consumption"));
        }
        self.entries.push(LedgerEntry {
            label: label.into(),
            epsilon,
            delta,
        });
        match self.check() {
            Ok(()) => Ok(()),
            Err(e) => {
                self.entries.pop();
                Err(e)
            }
        }
    }

    /// Sequential composition: total spend must stay within the budget.
    pub fn check(&self) -> Result<()> {
        let slack = 1e-9;
        let eps_ok = self.epsilon.is_infinite()
            || self.spent_epsilon() <= self.epsilon * (1.0 + slack) + slack * 1e-3;
        let delta_ok = self.spent_delta() <= self.delta * (1.0 + slack) + f64::MIN_POSITIVE;
        if !eps_ok {
            return Err(Error::Budget(format!(
                "spent epsilon {} over budget {}",
                self.spent_epsilon(),
                self.epsilon
            )));
        }
        if !delta_ok {
            return Err(Error::Budget(format!(
                "spent delta {} over budget {}",
                self.spent_delta(),
                self.delta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use statrs::distribution::ContinuousCDF;

    #[test]
    fn laplace_scale_handles_infinity() {
        assert_eq!(laplace_scale(1.0, f64::INFINITY).unwrap(), 0.0);
        assert_eq!(laplace_scale(3.0, 1.5).unwrap(), 2.0);
        assert!(laplace_scale(1.0, 0.0).is_err());
        assert!(laplace_scale(0.0, 1.0).is_err());
    }

    #[test]
    fn laplace_zero_scale_is_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(laplace_noise(&v, 0.0, &mut rng).unwrap(), v);
    }

    #[test]
    fn laplace_rejects_negative_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(laplace_noise(&[0.0], -1.0, &mut rng).is_err());
    }

    #[test]
    fn laplace_is_deterministic_under_a_seed() {
        let mut a = ChaCha12Rng::seed_from_u64(42);
        let mut b = ChaCha12Rng::seed_from_u64(42);
        let v = vec![0.0; 32];
        assert_eq!(
            laplace_noise(&v, 2.0, &mut a).unwrap(),
            laplace_noise(&v, 2.0, &mut b).unwrap()
        );
    }

    #[test]
    fn laplace_sample_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n).map(|_| laplace_sample(2.0, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 8.0).abs() < 0.1, "variance {var}"); // Var = 2 scale^2
    }

    fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (((i + 1) as f64 / n) - f).abs().max((f - i as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplace_sampler_passes_ks_at_1_percent() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 100_000usize;
        let samples: Vec<f64> = (0..n).map(|_| laplace_sample(1.5, &mut rng)).collect();
        let reference = statrs::distribution::Laplace::new(0.0, 1.5).unwrap();
        let d = ks_statistic(samples, |x| reference.cdf(x));
        let critical = 1.6276 / (n as f64).sqrt(); // alpha = 0.01
        assert!(d < critical, "KS statistic {d} over critical {critical}");
    }

    #[test]
    fn gaussian_sampler_passes_ks_at_1_percent() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let n = 100_000usize;
        let noisy = gaussian_noise(&vec![0.0; n], 2.5, &mut rng).unwrap();
        let reference = statrs::distribution::Normal::new(0.0, 2.5).unwrap();
        let d = ks_statistic(noisy, |x| reference.cdf(x));
        let critical = 1.6276 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} over critical {critical}");
    }

    #[test]
    fn gaussian_sigma_matches_the_bound() {
        // sqrt(2 ln(1.25e5)) / 0.5, evaluated independently
        let got = gaussian_sigma(0.5, 1e-5, 1.0).unwrap();
        assert!((got - 9.689610525210778).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn gaussian_sigma_is_linear_in_sensitivity() {
        let one = gaussian_sigma(0.3, 1e-6, 1.0).unwrap();
        let two = gaussian_sigma(0.3, 1e-6, 2.0).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sigma_rejects_large_epsilon() {
        assert!(gaussian_sigma(1.5, 1e-5, 1.0).is_err());
        assert!(gaussian_sigma(1.0, 1e-5, 1.0).is_err());
    }

    #[test]
    fn exponential_single_candidate() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert_eq!(exponential_mechanism(&[0.3], 1.0, 1.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn exponential_infinite_budget_takes_first_max() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let idx = exponential_mechanism(&[0.1, 0.9, 0.9], 1.0, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(idx, 1); // first of the tied maxima
    }

    #[test]
    fn exponential_rejects_empty_candidates() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(exponential_mechanism(&[], 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn exponential_frequencies_match_softmax() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let scores = [0.0, 1.0, 2.0];
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[exponential_mechanism(&scores, 1.0, 2.0, &mut rng).unwrap()] += 1;
        }
        // softmax(eps * s / 2) = softmax(0, 1, 2)
        let weights: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let total: f64 = weights.iter().sum();
        for i in 0..3 {
            let got = counts[i] as f64 / draws as f64;
            let want = weights[i] / total;
            assert!((got - want).abs() < 0.01, "candidate {i}: {got} vs {want}");
        }
    }

    #[test]
    fn exponential_selection_is_scale_invariant() {
        // multiplying scores and sensitivity by the same constant leaves the
        // normalized weight vector unchanged
        let scores = [0.2, 1.7, -0.4, 0.9];
        let eps = 1.3;
        let weight_vec = |s: &[f64], sens: f64| {
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = s.iter().map(|&x| (eps * (x - max) / (2.0 * sens)).exp()).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect::<Vec<f64>>()
        };
        for c in [0.1, 2.0, 17.5] {
            let scaled: Vec<f64> = scores.iter().map(|&s| c * s).collect();
            let a = weight_vec(&scores, 1.0);
            let b = weight_vec(&scaled, c);
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ledger_tracks_and_enforces_budget() {
        let mut ledger = BudgetLedger::new(1.0, 1e-5).unwrap();
        ledger.charge("structure", 0.5, 0.0).unwrap();
        ledger.charge("tables", 0.5, 0.0).unwrap();
        assert!((ledger.spent_epsilon() - 1.0).abs() < 1e-12);
        assert!(ledger.charge("extra", 0.1, 0.0).is_err());
        assert_eq!(ledger.entries().len(), 2); // failed charge not recorded
        ledger.check().unwrap();
    }

    #[test]
    fn ledger_split_arithmetic_tolerates_rounding() {
        let mut ledger = BudgetLedger::new(1.0, 0.0).unwrap();
        for i in 0..3 {
            ledger.charge(format!("part {i}"), 1.0 / 3.0, 0.0).unwrap();
        }
        ledger.check().unwrap();
    }

    #[test]
    fn infinite_budget_accepts_infinite_charges() {
        let mut ledger = BudgetLedger::new(f64::INFINITY, 0.0).unwrap();
        assert!(ledger.is_noiseless());
        ledger.charge("everything", f64::INFINITY, 0.0).unwrap();
        ledger.check().unwrap();
    }

    #[test]
    fn ledger_delta_budget_is_enforced() {
        let mut ledger = BudgetLedger::new(1.0, 1e-6).unwrap();
        assert!(ledger.charge("gauss", 0.1, 1e-5).is_err());
        ledger.charge("gauss", 0.1, 5e-7).unwrap();
    }
}
