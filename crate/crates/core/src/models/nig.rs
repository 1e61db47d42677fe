//! Normal model with a conjugate Normal–InverseGamma prior:
//! μ | σ² ~ N(μ0, σ²/κ0), σ² ~ InvGamma(α0, β0), Y_i ~ N(μ, σ²).

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, UpcError};
use crate::model::GenerativeModel;
use crate::pvalue::PValue;
use crate::rng::rng_from_seed;
use crate::special::{
    gamma_ln_pdf, inv_gamma_cdf, inv_gamma_ppf, norm_cdf, norm_ln_pdf, norm_pdf, norm_ppf, norm_sf,
};
use crate::stat_tests::{ad_test, p_extreme};
use crate::udraw::{LabelSchema, Role, UDraw, ULabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl NigParams {
    pub fn new(mu0: f64, kappa0: f64, alpha0: f64, beta0: f64) -> Result<Self> {
        let ok = mu0.is_finite()
            && [kappa0, alpha0, beta0].iter().all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return domain(format!(
                "NIG hyperparameters need finite mu0 and positive kappa0, alpha0, beta0; got ({mu0}, {kappa0}, {alpha0}, {beta0})"
            ));
        }
        Ok(Self { mu0, kappa0, alpha0, beta0 })
    }

    /// μ0 = 0, κ0 = 1/10, α0 = 2, β0 = 300.
    pub fn weakly_informative() -> Self {
        Self { mu0: 0.0, kappa0: 0.1, alpha0: 2.0, beta0: 300.0 }
    }

    /// μ0 = ȳ, κ0 = n, α0 = n/2, β0 = σ̂² α0 with σ̂² the 1/n sample variance.
    pub fn data_dependent(data: &[f64]) -> Result<Self> {
        let (mean, ss) = mean_and_ss(data)?;
        let n = data.len() as f64;
        Self::new(mean, n, n / 2.0, ss / n * n / 2.0)
    }

    /// μ0 = 179, κ0 = n, α0 = n/2, β0 = 42² α0 κ0.
    pub fn poorly_chosen(n: usize) -> Result<Self> {
        let n = n as f64;
        Self::new(179.0, n, n / 2.0, 42.0 * 42.0 * (n / 2.0) * n)
    }

    /// Named configuration: `weak`, `data_dependent` or `poor`.
    pub fn named(name: &str, data: &[f64]) -> Result<Self> {
        match name {
            "weak" => Ok(Self::weakly_informative()),
            "data_dependent" => Self::data_dependent(data),
            "poor" => Self::poorly_chosen(data.len()),
            other => Err(UpcError::Domain(format!("unknown NIG prior `{other}`"))),
        }
    }
}

fn mean_and_ss(data: &[f64]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return domain("empty dataset");
    }
    if let Some(y) = data.iter().find(|y| !y.is_finite()) {
        return domain(format!("non-finite datum {y}"));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss = data.iter().map(|y| (y - mean).powi(2)).sum();
    Ok((mean, ss))
}

/// Conjugate posterior hyperparameters. Empty data returns the prior.
pub fn nig_update(prior: &NigParams, data: &[f64]) -> Result<NigParams> {
    if data.is_empty() {
        return Ok(*prior);
    }
    let (mean, ss) = mean_and_ss(data)?;
    let n = data.len() as f64;
    let kappa_n = prior.kappa0 + n;
    NigParams::new(
        (prior.kappa0 * prior.mu0 + n * mean) / kappa_n,
        kappa_n,
        prior.alpha0 + n / 2.0,
        prior.beta0
            + 0.5 * ss
            + 0.5 * prior.kappa0 * n / kappa_n * (mean - prior.mu0).powi(2),
    )
}

/// One draw (μ, σ²): λ ~ Gamma(α, rate β), σ² = 1/λ, μ ~ N(μ0, σ²/κ).
pub fn nig_draw<R: Rng + ?Sized>(p: &NigParams, rng: &mut R) -> (f64, f64) {
    let lambda = Gamma::new(p.alpha0, 1.0 / p.beta0)
        .expect("validated gamma parameters")
        .sample(rng);
    let sigma2 = 1.0 / lambda;
    let z: f64 = StandardNormal.sample(rng);
    (p.mu0 + z * (sigma2 / p.kappa0).sqrt(), sigma2)
}

/// T draws of (μ, σ²) from an NIG distribution.
pub fn nig_sample(posterior: &NigParams, draws: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if draws == 0 {
        return domain("need at least one posterior draw");
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..draws).map(|_| nig_draw(posterior, &mut rng)).collect())
}

fn nig_schema(n: usize) -> LabelSchema {
    let mut labels = vec![ULabel::param("mu", 0), ULabel::param("sigma2", 0)];
    labels.extend((0..n).map(|i| ULabel::data("y", i)));
    LabelSchema::new(labels).expect("static NIG schema is valid")
}

/// Parameter u-values (Φ((μ - μ0)√κ0/σ), F_InvGamma(σ²)).
pub fn nig_param_uvalues(mu: f64, sigma2: f64, prior: &NigParams) -> Result<[f64; 2]> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) || !mu.is_finite() {
        return domain(format!("need finite mu and positive sigma2, got ({mu}, {sigma2})"));
    }
    let sigma = sigma2.sqrt();
    Ok([
        norm_cdf((mu - prior.mu0) * prior.kappa0.sqrt() / sigma),
        inv_gamma_cdf(prior.alpha0, prior.beta0, sigma2),
    ])
}

/// Data u-values Φ((y_i - μ)/σ).
pub fn nig_data_uvalues(mu: f64, sigma2: f64, data: &[f64]) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return domain(format!("sigma2 must be positive, got {sigma2}"));
    }
    let sigma = sigma2.sqrt();
    Ok(data.iter().map(|y| norm_cdf((y - mu) / sigma)).collect())
}

/// Full u-vector for one posterior draw: labels `mu`, `sigma2`, then `y[i]`.
pub fn nig_uvalues(mu: f64, sigma2: f64, prior: &NigParams, data: &[f64]) -> Result<UDraw> {
    let mut u = nig_param_uvalues(mu, sigma2, prior)?.to_vec();
    u.extend(nig_data_uvalues(mu, sigma2, data)?);
    UDraw::new(u, nig_schema(data.len()))
}

/// Exact posterior density of the σ-extremeness p-value under a Gamma(1, 1)
/// prior on λ = 1/σ².
pub fn plambda_density(grid: &[f64], prior: &NigParams, posterior: &NigParams) -> Result<Vec<f64>> {
    if prior.alpha0 != 1.0 || prior.beta0 != 1.0 {
        return Err(UpcError::Unsupported(format!(
            "p_lambda density needs alpha0 = beta0 = 1, got ({}, {})",
            prior.alpha0, prior.beta0
        )));
    }
    let f = |lambda: f64| gamma_ln_pdf(posterior.alpha0, posterior.beta0, lambda).exp();
    grid.iter()
        .map(|&p| {
            if !(p > 0.0 && p < 1.0) {
                return domain(format!("p_lambda grid point {p} outside (0, 1)"));
            }
            Ok(f(-(-p / 2.0).ln_1p()) / (2.0 - p) + f(-(p / 2.0).ln()) / p)
        })
        .collect()
}

/// Density of the μ-extremeness p-value, averaged over posterior λ draws.
/// For each λ the two inverse branches μ0 ± Φ⁻¹(p/2)/√(κ0 λ) are weighted
/// by the full conditional N(μn, 1/(κn λ)) and the Jacobian.
pub fn pmu_density(
    grid: &[f64],
    prior: &NigParams,
    posterior: &NigParams,
    lambda_draws: &[f64],
) -> Result<Vec<f64>> {
    if lambda_draws.is_empty() {
        return domain("p_mu density needs at least one lambda draw");
    }
    if let Some(l) = lambda_draws.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return domain(format!("lambda draws must be positive, got {l}"));
    }
    let s = lambda_draws.len() as f64;
    grid.iter()
        .map(|&p| {
            if !(p > 0.0 && p <= 1.0) {
                return domain(format!("p_mu grid point {p} outside (0, 1]"));
            }
            let z = norm_ppf(p / 2.0);
            let dz = 0.5 / norm_pdf(z);
            let total: f64 = lambda_draws
                .iter()
                .map(|&lambda| {
                    let scale = (prior.kappa0 * lambda).sqrt();
                    let cond_sd = 1.0 / (posterior.kappa0 * lambda).sqrt();
                    let dens = |mu: f64| {
                        (norm_ln_pdf((mu - posterior.mu0) / cond_sd)).exp() / cond_sd
                    };
                    let jac = dz / scale;
                    (dens(prior.mu0 + z / scale) + dens(prior.mu0 - z / scale)) * jac
                })
                .sum();
            Ok(total / s)
        })
        .collect()
}

/// Rao–Blackwellized posterior predictive p-value of T = min(Y):
/// the average over draws of 1 - (1 - Φ((T(y) - μ_s)/σ_s))^n.
pub fn ppc_min_pvalue(data: &[f64], draws: &[(f64, f64)]) -> Result<PValue> {
    if data.is_empty() || draws.is_empty() {
        return domain("PPC needs data and posterior draws");
    }
    let t = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = data.len() as f64;
    let total: f64 = draws
        .iter()
        .map(|&(mu, sigma2)| -(n * norm_sf((t - mu) / sigma2.sqrt()).ln()).exp_m1())
        .sum();
    Ok(PValue::clipped(total / draws.len() as f64))
}

pub const NIG_TEST_NAMES: [&str; 3] = ["p_mu", "p_sigma", "p_data_unif"];

/// Extremeness of μ and σ², and Anderson–Darling uniformity of the data
/// u-values, in the order of [`NIG_TEST_NAMES`].
pub fn nig_test_suite(udraw: &UDraw) -> Result<[PValue; 3]> {
    let labels = udraw.labels();
    let ok = labels.len() >= 3
        && labels[0].name == "mu"
        && labels[1].name == "sigma2"
        && labels[2..].iter().all(|l| l.role == Role::Data);
    if !ok {
        return domain("draw does not follow the NIG label schema (mu, sigma2, y...)");
    }
    let v = udraw.values();
    Ok([p_extreme(v[0])?, p_extreme(v[1])?, ad_test(&v[2..])?])
}

/// The normal model with n observations as a generative model.
#[derive(Debug, Clone)]
pub struct NigModel {
    pub prior: NigParams,
    schema: LabelSchema,
}

impl NigModel {
    pub fn new(prior: NigParams, n: usize) -> Self {
        Self { prior, schema: nig_schema(n) }
    }

    pub fn n(&self) -> usize {
        self.schema.len() - 2
    }

    /// Same as [`nig_uvalues`] but shares this model's label schema.
    pub fn uvalues(&self, mu: f64, sigma2: f64, data: &[f64]) -> Result<UDraw> {
        if data.len() != self.n() {
            return domain(format!("expected {} observations, got {}", self.n(), data.len()));
        }
        let mut u = nig_param_uvalues(mu, sigma2, &self.prior)?.to_vec();
        u.extend(nig_data_uvalues(mu, sigma2, data)?);
        UDraw::new(u, self.schema.clone())
    }
}

impl GenerativeModel for NigModel {
    type Params = (f64, f64);
    type Data = Vec<f64>;

    fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    fn sample_params(&self, u: &[f64]) -> Result<(f64, f64)> {
        let [u1, u2] = u else {
            return domain("NIG model has two parameter u-values");
        };
        let sigma2 = inv_gamma_ppf(self.prior.alpha0, self.prior.beta0, *u2);
        let mu = self.prior.mu0 + sigma2.sqrt() / self.prior.kappa0.sqrt() * norm_ppf(*u1);
        Ok((mu, sigma2))
    }

    fn sample_data(&self, u: &[f64], &(mu, sigma2): &(f64, f64)) -> Result<Vec<f64>> {
        if u.len() != self.n() {
            return domain(format!("expected {} data u-values, got {}", self.n(), u.len()));
        }
        let sigma = sigma2.sqrt();
        Ok(u.iter().map(|&v| mu + sigma * norm_ppf(v)).collect())
    }

    fn recover_param_uvalues<R: Rng + ?Sized>(
        &self,
        &(mu, sigma2): &(f64, f64),
        _data: &Vec<f64>,
        _rng: &mut R,
    ) -> Result<Vec<f64>> {
        Ok(nig_param_uvalues(mu, sigma2, &self.prior)?.to_vec())
    }

    fn recover_data_uvalues<R: Rng + ?Sized>(
        &self,
        &(mu, sigma2): &(f64, f64),
        data: &Vec<f64>,
        _rng: &mut R,
    ) -> Result<Vec<f64>> {
        nig_data_uvalues(mu, sigma2, data)
    }

    fn deterministic_recovery(&self) -> bool {
        true
    }
}
