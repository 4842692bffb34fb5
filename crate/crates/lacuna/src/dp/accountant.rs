//! Rényi-DP accounting: per-step cost of the sampled Gaussian mechanism,
//! pointwise composition over an order grid, and conversion back to (ε, δ).
//!
//! Costs are tracked as a curve over integer orders α ≥ 2. Composition is
//! addition of curves on a shared grid; the final guarantee is the minimum
//! over orders of `R(α) + ln(1/δ)/(α − 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rényi-DP cost tabulated on an ascending grid of integer orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RdpCurveRepr")]
pub struct RdpCurve {
    orders: Vec<u32>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RdpCurveRepr {
    orders: Vec<u32>,
    values: Vec<f64>,
}

impl TryFrom<RdpCurveRepr> for RdpCurve {
    type Error = Error;

    fn try_from(repr: RdpCurveRepr) -> Result<Self> {
        RdpCurve::new(repr.orders, repr.values)
    }
}

impl RdpCurve {
    pub fn new(orders: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::invalid("empty order grid"));
        }
        if orders.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} orders but {} values",
                orders.len(),
                values.len()
            )));
        }
        if orders[0] < 2 || orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "orders must be strictly ascending integers >= 2",
            ));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::invalid("curve values must be nonnegative"));
        }
        Ok(RdpCurve { orders, values })
    }

    /// The all-zero curve (a mechanism with no privacy cost).
    pub fn zero(orders: Vec<u32>) -> Result<Self> {
        let values = vec![0.0; orders.len()];
        RdpCurve::new(orders, values)
    }

    /// Standard grid of integer orders 2 through 64.
    pub fn default_orders() -> Vec<u32> {
        (2..=64).collect()
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sequential composition: pointwise sum on an identical grid.
    pub fn add(&self, other: &RdpCurve) -> Result<RdpCurve> {
        if self.orders != other.orders {
            return Err(Error::invalid("cannot compose curves on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        RdpCurve::new(self.orders.clone(), values)
    }
}

/// Which reading of the sampled-Gaussian cost to return.
///
/// The subsampled sum is the α-th moment of the privacy loss; `Moment`
/// returns it raw, `LogMoment` returns the Rényi divergence
/// `ln(sum)/(α − 1)`. Composition and conversion operate on `LogMoment`;
/// `Moment` is retained for reproducing tabulated raw values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgmForm {
    Moment,
    LogMoment,
}

/// Parameters of one sampled-Gaussian release: noise multiplier, sampling
/// rate, and query sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgmParams {
    pub sigma: f64,
    pub rate: f64,
    pub sensitivity: f64,
}

impl SgmParams {
    pub fn new(sigma: f64, rate: f64, sensitivity: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma {sigma} must be positive")));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::invalid(format!("rate {rate} outside [0, 1]")));
        }
        if !(sensitivity > 0.0) || !sensitivity.is_finite() {
            return Err(Error::invalid(format!(
                "sensitivity {sensitivity} must be positive"
            )));
        }
        Ok(SgmParams {
            sigma,
            rate,
            sensitivity,
        })
    }
}

/// ln C(alpha, k) for k = 0..=alpha. Exact integer binomials (Pascal row)
/// up to alpha = 64, log-factorials beyond.
fn ln_binomials(alpha: u32) -> Vec<f64> {
    if alpha <= 64 {
        // C(64, 32) < 2^61, so the row fits in u128 with room to spare
        let mut row: Vec<u128> = vec![1];
        for _ in 0..alpha {
            let mut next = vec![1u128; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        row.iter().map(|&c| (c as f64).ln()).collect()
    } else {
        let mut log_fact = vec![0.0f64; alpha as usize + 1];
        for i in 1..=alpha as usize {
            log_fact[i] = log_fact[i - 1] + (i as f64).ln();
        }
        (0..=alpha as usize)
            .map(|k| log_fact[alpha as usize] - log_fact[k] - log_fact[alpha as usize - k])
            .collect()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Rényi cost of one sampled-Gaussian release at integer order `alpha`.
///
/// At rate 1 both forms return `alpha / (2 (S σ)^2)`. For rate r in (0, 1)
/// the moment is `Σ_{k=0..alpha} C(alpha,k) (1−r)^{alpha−k} r^k ·
/// exp((k² − k) / (2 (S σ)^2))`, accumulated in log space so large orders
/// cannot overflow prematurely.
pub fn sgm_rdp(p: &SgmParams, alpha: u32, form: SgmForm) -> Result<f64> {
    SgmParams::new(p.sigma, p.rate, p.sensitivity)?;
    if alpha < 2 {
        return Err(Error::invalid(format!("order {alpha} must be >= 2")));
    }
    let s2 = (p.sensitivity * p.sigma).powi(2);
    if p.rate == 1.0 {
        return Ok(alpha as f64 / (2.0 * s2));
    }
    if p.rate == 0.0 {
        // only the k = 0 term survives: the moment is exactly 1
        return Ok(match form {
            SgmForm::Moment => 1.0,
            SgmForm::LogMoment => 0.0,
        });
    }
    let ln_c = ln_binomials(alpha);
    let ln_r = p.rate.ln();
    let ln_keep = (1.0 - p.rate).ln();
    let mut log_sum = f64::NEG_INFINITY;
    for k in 0..=alpha {
        let mut term = ln_c[k as usize];
        if k < alpha {
            term += (alpha - k) as f64 * ln_keep;
        }
        if k > 0 {
            term += k as f64 * ln_r;
        }
        term += (k as f64 * k as f64 - k as f64) / (2.0 * s2);
        log_sum = log_add_exp(log_sum, term);
    }
    Ok(match form {
        SgmForm::Moment => log_sum.exp(),
        SgmForm::LogMoment => log_sum / (alpha as f64 - 1.0),
    })
}

/// Training-loop shape for the adversarial imputation trainer: total
/// discriminator steps, generator update interval, batch size, and dataset
/// size. Each discriminator step costs two sampled-Gaussian releases at
/// sensitivity 2 and rate batch/data_size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisganAccountingParams {
    pub steps: u64,
    pub generator_interval: u64,
    pub batch: u64,
    pub data_size: u64,
    pub sigma: f64,
}

impl MisganAccountingParams {
    pub fn new(steps: u64, generator_interval: u64, batch: u64, data_size: u64, sigma: f64) -> Result<Self> {
        if steps == 0 || generator_interval == 0 || batch == 0 || data_size == 0 {
            return Err(Error::invalid("counts must be positive"));
        }
        if batch > data_size {
            return Err(Error::invalid(format!(
                "batch {batch} exceeds data size {data_size}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma {sigma} must be positive")));
        }
        Ok(MisganAccountingParams {
            steps,
            generator_interval,
            batch,
            data_size,
            sigma,
        })
    }

    fn per_step(&self) -> Result<SgmParams> {
        SgmParams::new(self.sigma, self.batch as f64 / self.data_size as f64, 2.0)
    }

    /// Number of sampled-Gaussian charges over the whole run.
    pub fn release_count(&self) -> u64 {
        2 * self.steps.div_ceil(self.generator_interval)
    }
}

/// Total training cost at one order: `2 ⌈T / T_G⌉` identical releases.
pub fn misgan_total_rdp(p: &MisganAccountingParams, alpha: u32, form: SgmForm) -> Result<f64> {
    MisganAccountingParams::new(p.steps, p.generator_interval, p.batch, p.data_size, p.sigma)?;
    let per = sgm_rdp(&p.per_step()?, alpha, form)?;
    Ok(p.release_count() as f64 * per)
}

/// Total training cost over an order grid.
pub fn misgan_curve(p: &MisganAccountingParams, orders: &[u32], form: SgmForm) -> Result<RdpCurve> {
    let values = orders
        .iter()
        .map(|&a| misgan_total_rdp(p, a, form))
        .collect::<Result<Vec<f64>>>()?;
    RdpCurve::new(orders.to_vec(), values)
}

/// Tightest (ε, δ) guarantee implied by a curve:
/// `min_α R(α) + ln(1/δ)/(α − 1)`.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta {delta} outside (0, 1)")));
    }
    let log_inv_delta = (1.0 / delta).ln();
    Ok(curve
        .orders()
        .iter()
        .zip(curve.values())
        .map(|(&a, &v)| v + log_inv_delta / (a as f64 - 1.0))
        .fold(f64::INFINITY, f64::min))
}

/// Smallest noise multiplier whose full training run stays within
/// `target_epsilon` at the given δ, located by bisection to 1e-3. The
/// `sigma` field of `p` is ignored. Errors if even σ = 10^4 overshoots.
pub fn sigma_for_budget(
    target_epsilon: f64,
    delta: f64,
    p: &MisganAccountingParams,
    orders: &[u32],
) -> Result<f64> {
    if !(target_epsilon > 0.0) || !target_epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "target epsilon {target_epsilon} must be positive and finite"
        )));
    }
    let eps_at = |sigma: f64| -> Result<f64> {
        let params =
            MisganAccountingParams::new(p.steps, p.generator_interval, p.batch, p.data_size, sigma)?;
        rdp_to_dp(&misgan_curve(&params, orders, SgmForm::LogMoment)?, delta)
    };
    let (mut lo, mut hi) = (1e-6, 1e4);
    if eps_at(hi)? > target_epsilon {
        return Err(Error::Unattainable(format!(
            "no noise multiplier up to {hi} meets epsilon {target_epsilon}"
        )));
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid)? <= target_epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Conventional δ for a dataset of n rows: one order of magnitude below
/// 1/n, i.e. `10^-(ceil(log10 n) + 1)`.
pub fn default_delta(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("empty dataset has no default delta"));
    }
    let digits = n.ilog10();
    let ceil_log = if n == 10usize.pow(digits) { digits } else { digits + 1 };
    Ok(10f64.powi(-(ceil_log as i32 + 1)))
}
