//! AR(1) model Y_i = φ Y_{i-1} + σ ε_i, Y_0 = 0, with truncated-normal
//! priors on φ and σ. The posterior is sampled in u-space, where the prior is
//! uniform, by random-walk Metropolis on logit u.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::GenerativeModel;
use crate::pvalue::PValue;
use crate::rng::rng_from_seed;
use crate::special::{norm_cdf, norm_ppf};
use crate::stat_tests::{ad_test, hoeffding_statistic, p_extreme, HoeffdingNullTable};
use crate::udraw::{LabelSchema, Role, StrataValue, UDraw, ULabel};

use super::bernoulli::lag_pairs;
use super::truncnorm::{tn_cdf, tn_inv_cdf, TruncNormal};

/// Null tables keyed by sample size.
pub type HoeffdingTables = BTreeMap<usize, HoeffdingNullTable>;

/// Smallest series length for which all six tests are defined (lag 2 needs
/// five pairs).
pub const AR1_MIN_N: usize = 7;

#[derive(Debug, Clone)]
pub struct Ar1Model {
    pub prior_phi: TruncNormal,
    pub prior_sigma: TruncNormal,
    schema: LabelSchema,
}

impl Ar1Model {
    pub fn new(prior_phi: TruncNormal, prior_sigma: TruncNormal, n: usize) -> Result<Self> {
        if !(prior_sigma.lo > 0.0) {
            return domain(format!("sigma prior support must be positive, got lo = {}", prior_sigma.lo));
        }
        if n < 2 {
            return domain(format!("AR(1) model needs n >= 2, got {n}"));
        }
        let mut labels = vec![ULabel::param("phi", 0), ULabel::param("sigma", 0)];
        labels.extend((0..n).map(|i| ULabel::data("y", i).with_stratum("t", StrataValue::Num((i + 1) as f64))));
        Ok(Self {
            prior_phi,
            prior_sigma,
            schema: LabelSchema::new(labels)?,
        })
    }

    /// φ ~ TN(0, 0.4², [-0.5, 0.5]), σ ~ TN(1.5, 0.4², [1, 2]).
    pub fn reference(n: usize) -> Result<Self> {
        Self::new(
            TruncNormal::new(0.0, 0.4, -0.5, 0.5)?,
            TruncNormal::new(1.5, 0.4, 1.0, 2.0)?,
            n,
        )
    }

    pub fn n(&self) -> usize {
        self.schema.len() - 2
    }

    fn params_from_u(&self, u1: f64, u2: f64) -> Result<(f64, f64)> {
        Ok((tn_inv_cdf(u1, &self.prior_phi)?, tn_inv_cdf(u2, &self.prior_sigma)?))
    }

    /// Labeled u-vector from parameter u-values and the observed series.
    pub fn udraw_from_u(&self, u1: f64, u2: f64, y: &[f64]) -> Result<UDraw> {
        if y.len() != self.n() {
            return domain(format!("series length {} does not match model n = {}", y.len(), self.n()));
        }
        let (phi, sigma) = self.params_from_u(u1, u2)?;
        let mut u = vec![u1, u2];
        u.extend(ar1_data_uvalues(phi, sigma, y)?);
        UDraw::new(u, self.schema.clone())
    }
}

/// Y from given innovations: Y_i = φ Y_{i-1} + σ ε_i.
pub fn ar1_from_innovations(phi: f64, sigma: f64, eps: &[f64]) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let mut prev = 0.0;
    Ok(eps
        .iter()
        .map(|e| {
            prev = phi * prev + sigma * e;
            prev
        })
        .collect())
}

pub fn ar1_simulate<R: Rng + ?Sized>(phi: f64, sigma: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return domain("AR(1) series needs n >= 1");
    }
    let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    ar1_from_innovations(phi, sigma, &eps)
}

/// Sufficient statistics of the AR(1) likelihood.
#[derive(Debug, Clone, Copy)]
struct Ar1Suff {
    n: f64,
    syy: f64,
    sxy: f64,
    sxx: f64,
}

impl Ar1Suff {
    fn new(y: &[f64]) -> Self {
        let mut s = Self { n: y.len() as f64, syy: 0.0, sxy: 0.0, sxx: 0.0 };
        let mut prev = 0.0;
        for &v in y {
            s.syy += v * v;
            s.sxy += v * prev;
            s.sxx += prev * prev;
            prev = v;
        }
        s
    }

    fn rss(&self, phi: f64) -> f64 {
        (self.syy - 2.0 * phi * self.sxy + phi * phi * self.sxx).max(0.0)
    }

    fn loglik(&self, phi: f64, sigma: f64) -> f64 {
        -self.n * (sigma.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
            - self.rss(phi) / (2.0 * sigma * sigma)
    }
}

fn check_series(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return domain("AR(1) posterior needs a non-empty series");
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return domain(format!("non-finite observation {v}"));
    }
    Ok(())
}

/// Log posterior density in u-space (uniform prior), i.e. the Gaussian
/// log likelihood at φ = F_φ⁻¹(u1), σ = F_σ⁻¹(u2).
pub fn ar1_logpost_u(u1: f64, u2: f64, y: &[f64], model: &Ar1Model) -> Result<f64> {
    check_series(y)?;
    let (phi, sigma) = model.params_from_u(u1, u2)?;
    Ok(Ar1Suff::new(y).loglik(phi, sigma))
}

/// Data u-values Φ((Y_i - φ Y_{i-1})/σ).
pub fn ar1_data_uvalues(phi: f64, sigma: f64, y: &[f64]) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let mut prev = 0.0;
    Ok(y.iter()
        .map(|&v| {
            let u = norm_cdf((v - phi * prev) / sigma);
            prev = v;
            u
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub step_sizes: Vec<f64>,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            step_sizes: vec![0.15, 0.15],
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return domain(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            ));
        }
        if self.thin == 0 {
            return domain("thin must be at least 1");
        }
        if self.step_sizes.len() != 2 || self.step_sizes.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return domain("need two positive step sizes");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Post-burn-in draws of (u_φ, u_σ) with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Chain {
    pub draws: Vec<[f64; 2]>,
    pub acceptance_rate: f64,
    pub step_sizes: Vec<f64>,
    pub warning: Option<String>,
}

/// Proposals beyond this logit are outside the clamped unit interval.
const LOGIT_MAX: f64 = 27.631_021_115_871_83; // logit(1 - 1e-12)
const TARGET_ACCEPT: f64 = 0.35;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// ln(u (1 - u)) for u = logistic(z).
fn ln_jacobian(z: f64) -> f64 {
    -z.abs() - 2.0 * (-z.abs()).exp().ln_1p()
}

/// Random-walk Metropolis on (logit u_φ, logit u_σ). Starts at the least
/// squares fit; step sizes follow a Robbins–Monro schedule towards 35%
/// acceptance during burn-in and are frozen afterwards.
pub fn ar1_mcmc(y: &[f64], model: &Ar1Model, config: &McmcConfig) -> Result<Ar1Chain> {
    config.validate()?;
    check_series(y)?;
    let suff = Ar1Suff::new(y);
    let target = |z: [f64; 2]| -> f64 {
        if z.iter().any(|v| v.abs() > LOGIT_MAX) {
            return f64::NEG_INFINITY;
        }
        match model.params_from_u(logistic(z[0]), logistic(z[1])) {
            Ok((phi, sigma)) => suff.loglik(phi, sigma) + ln_jacobian(z[0]) + ln_jacobian(z[1]),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let phi_hat = if suff.sxx > 0.0 { suff.sxy / suff.sxx } else { 0.0 };
    let phi0 = phi_hat.clamp(model.prior_phi.lo, model.prior_phi.hi);
    let sigma0 = (suff.rss(phi0) / suff.n).sqrt().clamp(model.prior_sigma.lo, model.prior_sigma.hi);
    let start_u = |x: f64, tn: &TruncNormal| tn_cdf(x, tn).clamp(1e-6, 1.0 - 1e-6);
    let mut z = [
        logit(start_u(phi0, &model.prior_phi)),
        logit(start_u(sigma0, &model.prior_sigma)),
    ];
    let mut current = target(z);

    let mut rng = rng_from_seed(config.seed);
    let mut log_scale = 0.0f64;
    let mut accepted_after = 0usize;
    let mut draws = Vec::with_capacity((config.iterations - config.burn_in) / config.thin + 1);
    for t in 0..config.iterations {
        let scale = log_scale.exp();
        let mut prop = z;
        for (k, p) in prop.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *p += scale * config.step_sizes[k] * e;
        }
        let cand = target(prop);
        let log_ratio = cand - current;
        let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        if accept {
            z = prop;
            current = cand;
        }
        if t < config.burn_in {
            let rate = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            log_scale = (log_scale + (rate - TARGET_ACCEPT) / ((t + 1) as f64).powf(0.6)).clamp(-12.0, 4.0);
        } else {
            accepted_after += accept as usize;
            if (t - config.burn_in).is_multiple_of(config.thin) {
                draws.push([logistic(z[0]), logistic(z[1])]);
            }
        }
    }
    let acceptance_rate = accepted_after as f64 / (config.iterations - config.burn_in) as f64;
    let warning = if !(0.05..=0.95).contains(&acceptance_rate) {
        let msg = format!("acceptance rate {acceptance_rate:.3} outside [0.05, 0.95]");
        log::warn!("AR(1) sampler: {msg}");
        Some(msg)
    } else {
        None
    };
    Ok(Ar1Chain {
        draws,
        acceptance_rate,
        step_sizes: config.step_sizes.iter().map(|s| s * log_scale.exp()).collect(),
        warning,
    })
}

/// The six AR(1) p-values of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Pvalues {
    pub phi: PValue,
    pub sigma: PValue,
    pub data_unif: PValue,
    pub data_index: PValue,
    pub data_lag1: PValue,
    pub data_lag2: PValue,
}

pub const AR1_TEST_NAMES: [&str; 6] = [
    "p_phi",
    "p_sigma",
    "p_data_unif",
    "p_data_index",
    "p_data_lag1",
    "p_data_lag2",
];

impl Ar1Pvalues {
    /// Values in the order of [`AR1_TEST_NAMES`].
    pub fn to_array(&self) -> [PValue; 6] {
        [self.phi, self.sigma, self.data_unif, self.data_index, self.data_lag1, self.data_lag2]
    }
}

/// Null table sizes the suite needs for a series of length n.
pub fn ar1_table_sizes(n: usize) -> [usize; 3] {
    [n, n - 1, n - 2]
}

fn table(tables: &HoeffdingTables, n: usize) -> Result<&HoeffdingNullTable> {
    tables
        .get(&n)
        .ok_or_else(|| crate::error::UpcError::Domain(format!("no Hoeffding null table for n = {n}")))
}

/// Extremeness of φ and σ, Anderson–Darling on the data u-values, and
/// Hoeffding tests of the data u-values against the index i/n and against
/// their lag-1 and lag-2 successors.
pub fn ar1_test_suite(udraw: &UDraw, tables: &HoeffdingTables) -> Result<Ar1Pvalues> {
    let labels = udraw.labels();
    let ok = labels.len() >= 2 + AR1_MIN_N
        && labels[0].role == Role::Parameter
        && labels[0].name == "phi"
        && labels[1].role == Role::Parameter
        && labels[1].name == "sigma"
        && labels[2..].iter().enumerate().all(|(i, l)| l.role == Role::Data && l.index == i);
    if !ok {
        return domain("draw does not follow the AR(1) label schema (phi, sigma, y[0..n], n >= 7)");
    }
    let v = udraw.values();
    let data = &v[2..];
    let n = data.len();
    let index: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let hoeff = |x: &[f64], y: &[f64]| -> Result<PValue> {
        let d = hoeffding_statistic(x, y)?;
        Ok(table(tables, x.len())?.pvalue(d))
    };
    let (l1x, l1y) = lag_pairs(data, 1)?;
    let (l2x, l2y) = lag_pairs(data, 2)?;
    Ok(Ar1Pvalues {
        phi: p_extreme(v[0])?,
        sigma: p_extreme(v[1])?,
        data_unif: ad_test(data)?,
        data_index: hoeff(data, &index)?,
        data_lag1: hoeff(&l1x, &l1y)?,
        data_lag2: hoeff(&l2x, &l2y)?,
    })
}

impl GenerativeModel for Ar1Model {
    type Params = (f64, f64);
    type Data = Vec<f64>;

    fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    fn sample_params(&self, u: &[f64]) -> Result<(f64, f64)> {
        let [u1, u2] = u else {
            return domain("AR(1) model has two parameter u-values");
        };
        self.params_from_u(*u1, *u2)
    }

    fn sample_data(&self, u: &[f64], &(phi, sigma): &(f64, f64)) -> Result<Vec<f64>> {
        if u.len() != self.n() {
            return domain(format!("expected {} data u-values, got {}", self.n(), u.len()));
        }
        let eps: Vec<f64> = u.iter().map(|&v| norm_ppf(v)).collect();
        ar1_from_innovations(phi, sigma, &eps)
    }

    fn recover_param_uvalues<R: Rng + ?Sized>(
        &self,
        &(phi, sigma): &(f64, f64),
        _data: &Vec<f64>,
        _rng: &mut R,
    ) -> Result<Vec<f64>> {
        Ok(vec![tn_cdf(phi, &self.prior_phi), tn_cdf(sigma, &self.prior_sigma)])
    }

    fn recover_data_uvalues<R: Rng + ?Sized>(
        &self,
        &(phi, sigma): &(f64, f64),
        data: &Vec<f64>,
        _rng: &mut R,
    ) -> Result<Vec<f64>> {
        ar1_data_uvalues(phi, sigma, data)
    }

    fn deterministic_recovery(&self) -> bool {
        true
    }
}
