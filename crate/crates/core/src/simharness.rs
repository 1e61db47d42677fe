//! Batch simulations: the AR(1) misspecification scenarios, self-consistency
//! runs under the data-averaged posterior, PPC calibration, external
//! covariate nulls and Cauchy-combiner calibration.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::cauchy_combine;
use crate::ecdf::{ecdf, unit_grid};
use crate::error::{domain, Result};
use crate::io::{fmt_f64, ser_f64, ser_vec_f64};
use crate::model::{open_unit, GenerativeModel};
use crate::models::{
    ar1_mcmc, ar1_table_sizes, ar1_test_suite, bb_test_suite, bb_update, nig_draw, nig_sample,
    nig_test_suite, nig_update, ppc_min_pvalue, ppc_switch_pvalue, tn_inv_cdf, Ar1Model,
    BernoulliPrior, BetaBernoulliModel, HoeffdingTables, McmcConfig, NigModel, NigParams, Tail,
    TruncNormal, AR1_TEST_NAMES, BB_TEST_NAMES, NIG_TEST_NAMES,
};
use crate::pvalue::PValue;
use crate::rng::{derive_seed, stream_rng};
use crate::stat_tests::{mann_whitney_p, HoeffdingNullTable};

/// Grid of the exported expected CDFs (step 0.005).
pub const EXPECTED_CDF_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpVariant {
    Ar1,
    Heteroskedastic,
    Ar2,
}

/// A true data-generating process paired with the hypothesized AR(1) model.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u8,
    pub true_prior_phi: TruncNormal,
    pub true_prior_sigma: TruncNormal,
    pub hyp_prior_phi: TruncNormal,
    pub hyp_prior_sigma: TruncNormal,
    pub dgp_variant: DgpVariant,
    pub n: usize,
}

impl Scenario {
    /// 1: well specified. 2: hypothesized φ prior too narrow. 3: hypothesized
    /// σ prior too narrow. 4: variance growing over time. 5: true AR(2).
    pub fn new(id: u8, n: usize) -> Result<Self> {
        let phi = TruncNormal::new(0.0, 0.4, -0.5, 0.5)?;
        let sigma = TruncNormal::new(1.5, 0.4, 1.0, 2.0)?;
        let (hyp_phi, hyp_sigma, variant) = match id {
            1 => (phi, sigma, DgpVariant::Ar1),
            2 => (TruncNormal::new(0.0, 0.1, -0.5, 0.5)?, sigma, DgpVariant::Ar1),
            3 => (phi, TruncNormal::new(1.5, 0.1, 1.0, 2.0)?, DgpVariant::Ar1),
            4 => (phi, sigma, DgpVariant::Heteroskedastic),
            5 => (phi, sigma, DgpVariant::Ar2),
            other => return domain(format!("scenario id must be 1..=5, got {other}")),
        };
        if n < crate::models::AR1_MIN_N {
            return domain(format!("scenario series need n >= {}, got {n}", crate::models::AR1_MIN_N));
        }
        Ok(Self {
            id,
            true_prior_phi: phi,
            true_prior_sigma: sigma,
            hyp_prior_phi: hyp_phi,
            hyp_prior_sigma: hyp_sigma,
            dgp_variant: variant,
            n,
        })
    }

    pub fn hypothesized_model(&self) -> Result<Ar1Model> {
        Ar1Model::new(self.hyp_prior_phi, self.hyp_prior_sigma, self.n)
    }
}

/// Variance multiplier c_i = 1 + (2i - n - 1)/n for i = 1..=n.
pub fn heteroskedastic_scale(i: usize, n: usize) -> f64 {
    1.0 + (2.0 * i as f64 - n as f64 - 1.0) / n as f64
}

/// Second-lag coefficient sgn(φ)|φ|^{1/4}, with sgn(0) = 0.
pub fn ar2_coefficient(phi: f64) -> f64 {
    if phi == 0.0 {
        0.0
    } else {
        phi.signum() * phi.abs().powf(0.25)
    }
}

/// (φ, σ, Y) with parameters from the true priors and Y_0 = Y_{-1} = 0.
pub fn dgp_draw<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<(f64, f64, Vec<f64>)> {
    let phi = tn_inv_cdf(open_unit(rng), &scenario.true_prior_phi)?;
    let sigma = tn_inv_cdf(open_unit(rng), &scenario.true_prior_sigma)?;
    let n = scenario.n;
    let psi = ar2_coefficient(phi);
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut y = Vec::with_capacity(n);
    for i in 1..=n {
        let e: f64 = StandardNormal.sample(rng);
        let v = match scenario.dgp_variant {
            DgpVariant::Ar1 => phi * y1 + sigma * e,
            DgpVariant::Heteroskedastic => phi * y1 + heteroskedastic_scale(i, n).sqrt() * sigma * e,
            DgpVariant::Ar2 => phi * y1 + psi * y2 + sigma * e,
        };
        y2 = y1;
        y1 = v;
        y.push(v);
    }
    Ok((phi, sigma, y))
}

/// Average of 1(p ≤ g) over replicates on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedCdf {
    #[serde(rename = "name")]
    pub test_name: String,
    #[serde(serialize_with = "ser_vec_f64")]
    pub grid: Vec<f64>,
    #[serde(rename = "cdf", serialize_with = "ser_vec_f64")]
    pub cdf_values: Vec<f64>,
}

impl ExpectedCdf {
    pub fn from_pvalues(test_name: &str, p: &[f64], grid: &[f64]) -> Result<Self> {
        Ok(Self {
            test_name: test_name.to_string(),
            grid: grid.to_vec(),
            cdf_values: ecdf(p, grid)?,
        })
    }

    /// Value at the largest grid point ≤ x.
    pub fn at(&self, x: f64) -> f64 {
        match self.grid.partition_point(|&g| g <= x) {
            0 => 0.0,
            k => self.cdf_values[k - 1],
        }
    }

    /// max_g |F(g) - g| over the grid.
    pub fn grid_deviation(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.cdf_values)
            .map(|(g, f)| (f - g).abs())
            .fold(0.0, f64::max)
    }
}

/// Exact sup_x |F̂(x) - x| of a sample on [0, 1].
pub fn sup_deviation(p: &[f64]) -> Result<f64> {
    crate::stat_tests::ks_distance(p)
}

/// Anderson–Darling p-value of a pooled sample against Uniform(0, 1). Values
/// are clamped into the open interval first, since p-values can equal 1.
pub fn uniformity_pvalue(sample: &[f64]) -> Result<PValue> {
    let eps = <f64 as crate::scalar::Scalar>::unit_eps();
    let clamped = sample
        .iter()
        .map(|&v| crate::udraw::clamp_unit(v, eps))
        .collect::<Result<Vec<f64>>>()?;
    crate::stat_tests::ad_test(&clamped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedInfo {
    pub master: u64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcDiagnostics {
    pub datasets_with_warnings: usize,
    #[serde(serialize_with = "ser_f64")]
    pub mean_acceptance: f64,
    #[serde(serialize_with = "ser_f64")]
    pub min_acceptance: f64,
    #[serde(serialize_with = "ser_f64")]
    pub max_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: u8,
    pub n: usize,
    pub n_datasets: usize,
    pub tests: Vec<ExpectedCdf>,
    pub seeds: SeedInfo,
    pub mcmc_diagnostics_summary: McmcDiagnostics,
    /// Per-dataset p-values in the order of the AR(1) test names.
    #[serde(skip)]
    pub pvalues: Vec<[f64; 6]>,
}

impl ScenarioResult {
    pub fn test(&self, name: &str) -> Option<&ExpectedCdf> {
        self.tests.iter().find(|t| t.test_name == name)
    }

    pub fn pvalues_of(&self, name: &str) -> Option<Vec<f64>> {
        let k = AR1_TEST_NAMES.iter().position(|&t| t == name)?;
        Some(self.pvalues.iter().map(|row| row[k]).collect())
    }

    /// Long-format CSV `test,u,cdf`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "test,u,cdf")?;
        for t in &self.tests {
            for (g, f) in t.grid.iter().zip(&t.cdf_values) {
                writeln!(w, "{},{},{}", t.test_name, fmt_f64(*g), fmt_f64(*f))?;
            }
        }
        Ok(())
    }
}

/// Null tables for sizes n, n - 1, n - 2 of a scenario.
pub fn scenario_tables(
    scenario: &Scenario,
    replicates: usize,
    seed: u64,
    cache: Option<&std::path::Path>,
) -> Result<HoeffdingTables> {
    ar1_table_sizes(scenario.n)
        .iter()
        .map(|&m| Ok((m, HoeffdingNullTable::obtain(cache, m, replicates, seed)?)))
        .collect()
}

/// For each dataset from the true DGP: one posterior u-draw under the
/// hypothesized model (the last kept draw of a chain), the six AR(1) tests,
/// pooled into expected CDFs. Dataset i uses stream i of `seed` for the data
/// and a derived seed for its chain, so results do not depend on threads.
pub fn run_scenario(
    scenario: &Scenario,
    n_datasets: usize,
    config: &McmcConfig,
    seed: u64,
    tables: &HoeffdingTables,
) -> Result<ScenarioResult> {
    if n_datasets == 0 {
        return domain("need at least one dataset");
    }
    config.validate()?;
    let model = scenario.hypothesized_model()?;
    let rows = (0..n_datasets)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let (_, _, y) = dgp_draw(scenario, &mut rng)?;
            let chain = ar1_mcmc(&y, &model, &config.with_seed(derive_seed(seed, i as u64)))?;
            let &[u1, u2] = chain.draws.last().expect("validated config keeps a draw");
            let p = ar1_test_suite(&model.udraw_from_u(u1, u2, &y)?, tables)?;
            Ok((p.to_array().map(|q| q.value()), chain.acceptance_rate, chain.warning.is_some()))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid: Vec<f64> = unit_grid(EXPECTED_CDF_POINTS);
    let pvalues: Vec<[f64; 6]> = rows.iter().map(|r| r.0).collect();
    let tests = AR1_TEST_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let p: Vec<f64> = pvalues.iter().map(|row| row[k]).collect();
            ExpectedCdf::from_pvalues(name, &p, &grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ScenarioResult {
        scenario: scenario.id,
        n: scenario.n,
        n_datasets,
        tests,
        seeds: SeedInfo {
            master: seed,
            scheme: "dataset i: chacha8 stream i of master; chain seed splitmix64(master, i)".into(),
        },
        mcmc_diagnostics_summary: McmcDiagnostics {
            datasets_with_warnings: rows.iter().filter(|r| r.2).count(),
            mean_acceptance: acc.iter().sum::<f64>() / acc.len() as f64,
            min_acceptance: acc.iter().cloned().fold(f64::INFINITY, f64::min),
            max_acceptance: acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        },
        pvalues,
    })
}

/// Conjugate model used by the replicate-based runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Nig { prior: NigParams, n: usize },
    BetaBernoulli { prior: BernoulliPrior, n: usize },
}

impl ModelKind {
    /// Weakly informative NIG prior with 66 observations.
    pub fn nig_default() -> Self {
        Self::Nig { prior: NigParams::weakly_informative(), n: 66 }
    }

    /// Uniform Beta prior with 100 trials.
    pub fn bernoulli_default() -> Self {
        Self::BetaBernoulli { prior: BernoulliPrior::uniform(), n: 100 }
    }

    pub fn test_names(&self) -> [&'static str; 3] {
        match self {
            Self::Nig { .. } => NIG_TEST_NAMES,
            Self::BetaBernoulli { .. } => BB_TEST_NAMES,
        }
    }

    fn n(&self) -> usize {
        match *self {
            Self::Nig { n, .. } | Self::BetaBernoulli { n, .. } => n,
        }
    }

    /// The null table the Bernoulli lag-1 test needs, if any.
    pub fn table_size(&self) -> Option<usize> {
        match self {
            Self::Nig { .. } => None,
            Self::BetaBernoulli { n, .. } => Some(n - 1),
        }
    }
}

const MIN_REPS: usize = 100;

fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps < MIN_REPS {
        return domain(format!("need at least {MIN_REPS} replicates, got {n_reps}"));
    }
    Ok(())
}

fn bernoulli_table(kind: &ModelKind, table: Option<&HoeffdingNullTable>) -> Result<Option<HoeffdingNullTable>> {
    match (kind.table_size(), table) {
        (None, _) => Ok(None),
        (Some(m), Some(t)) if t.n == m => Ok(Some(t.clone())),
        (Some(m), _) => domain(format!("Bernoulli runs need a Hoeffding table for n = {m}")),
    }
}

/// `draws` posterior u-vectors with their test p-values for one dataset
/// simulated from the model, drawn with `rng`.
fn replicate_draws<R: Rng>(
    kind: &ModelKind,
    draws: usize,
    table: Option<&HoeffdingNullTable>,
    rng: &mut R,
) -> Result<Vec<(Vec<f64>, [PValue; 3])>> {
    match *kind {
        ModelKind::Nig { prior, n } => {
            let model = NigModel::new(prior, n);
            let (_, y) = model.simulate(rng)?;
            let post = nig_update(&prior, &y)?;
            (0..draws)
                .map(|_| {
                    let (mu, sigma2) = nig_draw(&post, rng);
                    let u = model.uvalues(mu, sigma2, &y)?;
                    Ok((u.values().to_vec(), nig_test_suite(&u)?))
                })
                .collect()
        }
        ModelKind::BetaBernoulli { prior, n } => {
            let model = BetaBernoulliModel::new(prior, n);
            let table = table.expect("checked by caller");
            let (_, y) = model.simulate(rng)?;
            let post = bb_update(&prior, &y)?;
            (0..draws)
                .map(|_| {
                    let theta = post.draw(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                    let u = model.uvalues(theta, &y, rng)?;
                    Ok((u.values().to_vec(), bb_test_suite(&u, table)?))
                })
                .collect()
        }
    }
}

/// Pooled samples of a self-consistency run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConsistency {
    /// u-values per parameter name, and all data u-values under `data`.
    pub uvalues: BTreeMap<String, Vec<f64>>,
    /// Per-replicate single-draw p-values per test.
    pub pvalues: BTreeMap<String, Vec<f64>>,
}

/// Per replicate: (θ, Y) from the model, one exact posterior draw, its
/// u-values and test p-values. All pooled samples are uniform when the
/// implementation is correct.
pub fn self_consistency_run(
    kind: &ModelKind,
    n_reps: usize,
    seed: u64,
    table: Option<&HoeffdingNullTable>,
) -> Result<SelfConsistency> {
    check_reps(n_reps)?;
    let table = bernoulli_table(kind, table)?;
    let rows = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            Ok(replicate_draws(kind, 1, table.as_ref(), &mut rng)?.remove(0))
        })
        .collect::<Result<Vec<_>>>()?;
    let params: Vec<&str> = match kind {
        ModelKind::Nig { .. } => vec!["mu", "sigma2"],
        ModelKind::BetaBernoulli { .. } => vec!["theta"],
    };
    let mut uvalues: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut pvalues: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (u, p) in &rows {
        for (k, name) in params.iter().enumerate() {
            uvalues.entry(name.to_string()).or_default().push(u[k]);
        }
        uvalues.entry("data".into()).or_default().extend_from_slice(&u[params.len()..]);
        for (name, q) in kind.test_names().iter().zip(p) {
            pvalues.entry(name.to_string()).or_default().push(q.value());
        }
    }
    debug_assert_eq!(uvalues["data"].len(), n_reps * kind.n());
    Ok(SelfConsistency { uvalues, pvalues })
}

/// Posterior predictive p-values of datasets simulated from the model:
/// min statistic for NIG, switch count (lower tail) for Bernoulli, each from
/// `ppc_draws` posterior draws.
pub fn ppc_calibration_run(kind: &ModelKind, n_reps: usize, ppc_draws: usize, seed: u64) -> Result<Vec<PValue>> {
    check_reps(n_reps)?;
    if ppc_draws == 0 {
        return domain("need at least one posterior draw per replicate");
    }
    (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            match *kind {
                ModelKind::Nig { prior, n } => {
                    let (_, y) = NigModel::new(prior, n).simulate(&mut rng)?;
                    let post = nig_update(&prior, &y)?;
                    let draws = nig_sample(&post, ppc_draws, rng.random())?;
                    ppc_min_pvalue(&y, &draws)
                }
                ModelKind::BetaBernoulli { prior, n } => {
                    let (_, y) = BetaBernoulliModel::new(prior, n).simulate(&mut rng)?;
                    let post = bb_update(&prior, &y)?;
                    let thetas: Vec<f64> = (0..ppc_draws).map(|_| post.draw(&mut rng)).collect();
                    ppc_switch_pvalue(&y, &thetas, Tail::Lower, &mut rng)
                }
            }
        })
        .collect()
}

/// Mann–Whitney p-values of data u-values against a binary covariate in a
/// Bernoulli model with a uniform prior and n = 100. The covariate is an
/// independent fair coin, or equal to Y when `inject_dependence` is set.
/// A covariate with a single level gives p = 1.
pub fn external_null_run(n_reps: usize, seed: u64, inject_dependence: bool) -> Result<Vec<PValue>> {
    check_reps(n_reps)?;
    let prior = BernoulliPrior::uniform();
    let model = BetaBernoulliModel::new(prior, 100);
    (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let (_, y) = model.simulate(&mut rng)?;
            let x: Vec<bool> = if inject_dependence {
                y.iter().map(|&v| v == 1).collect()
            } else {
                (0..y.len()).map(|_| rng.random_bool(0.5)).collect()
            };
            let theta = bb_update(&prior, &y)?.draw(&mut rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            let u = model.uvalues(theta, &y, &mut rng)?;
            if x.iter().all(|&g| g) || x.iter().all(|&g| !g) {
                return PValue::new(1.0);
            }
            mann_whitney_p(&u.values()[1..], &x)
        })
        .collect()
}

/// Cauchy-combined p* of each test over `draws` posterior draws, for
/// `n_reps` datasets simulated from the model.
pub fn combiner_calibration_run(
    kind: &ModelKind,
    n_reps: usize,
    draws: usize,
    seed: u64,
    table: Option<&HoeffdingNullTable>,
) -> Result<Vec<[f64; 3]>> {
    check_reps(n_reps)?;
    if draws == 0 {
        return domain("need at least one posterior draw per replicate");
    }
    let table = bernoulli_table(kind, table)?;
    (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let rows = replicate_draws(kind, draws, table.as_ref(), &mut rng)?;
            let mut out = [0.0; 3];
            for (k, o) in out.iter_mut().enumerate() {
                let p: Vec<PValue> = rows.iter().map(|r| r.1[k]).collect();
                *o = cauchy_combine(&p)?.value();
            }
            Ok(out)
        })
        .collect()
}

/// Empirical P(p ≤ α) with its Monte-Carlo standard error.
pub fn rejection_rate(p: &[f64], alpha: f64) -> (f64, f64) {
    let n = p.len() as f64;
    let rate = p.iter().filter(|&&v| v <= alpha).count() as f64 / n;
    (rate, (alpha * (1.0 - alpha) / n).sqrt())
}

/// One named property with its statistic and pass/fail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub statistic: f64,
    pub criterion: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheckReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<PropertyCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckConfig {
    pub seed: u64,
    pub self_consistency_reps: usize,
    pub external_reps: usize,
    pub combiner_reps: usize,
    pub combiner_draws: usize,
    pub table_replicates: usize,
    pub inject_dependence: bool,
}

impl Default for SelfCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            self_consistency_reps: 2000,
            external_reps: 1000,
            combiner_reps: 500,
            combiner_draws: 100,
            table_replicates: 20_000,
            inject_dependence: false,
        }
    }
}

/// Reduced-scale property suite: uniformity of single-draw u-values and test
/// p-values (Anderson–Darling p > 0.001), uniformity of external-covariate
/// p-values (KS p > 0.001) and Cauchy-combiner size at α = 0.05 within
/// [0.5α, 1.5α] widened by three standard errors.
pub fn selfcheck(config: &SelfCheckConfig) -> Result<SelfCheckReport> {
    let seed = config.seed;
    let bern = ModelKind::bernoulli_default();
    let table = HoeffdingNullTable::obtain(
        None,
        bern.table_size().expect("Bernoulli needs a table"),
        config.table_replicates,
        derive_seed(seed, 100),
    )?;
    let mut checks = Vec::new();
    let mut uniform = |name: String, sample: &[f64]| -> Result<()> {
        let p = uniformity_pvalue(sample)?.value();
        checks.push(PropertyCheck { name, statistic: p, criterion: "AD p > 0.001".into(), passed: p > 1e-3 });
        Ok(())
    };
    for (tag, kind) in [(1, ModelKind::nig_default()), (2, bern)] {
        let label = match kind {
            ModelKind::Nig { .. } => "nig",
            ModelKind::BetaBernoulli { .. } => "bernoulli",
        };
        let run = self_consistency_run(&kind, config.self_consistency_reps, derive_seed(seed, tag), Some(&table))?;
        for (group, u) in &run.uvalues {
            uniform(format!("{label}/u/{group}"), u)?;
        }
        for (test, p) in &run.pvalues {
            uniform(format!("{label}/p/{test}"), p)?;
        }
    }
    let ext: Vec<f64> = external_null_run(config.external_reps, derive_seed(seed, 3), config.inject_dependence)?
        .iter()
        .map(|p| p.value())
        .collect();
    let d = sup_deviation(&ext)?;
    let ks = crate::stat_tests::ks_pvalue(d, ext.len())?.value();
    checks.push(PropertyCheck {
        name: "external/mann_whitney".into(),
        statistic: ks,
        criterion: "KS p > 0.001".into(),
        passed: ks > 1e-3,
    });
    let comb = combiner_calibration_run(&bern, config.combiner_reps, config.combiner_draws, derive_seed(seed, 4), Some(&table))?;
    let alpha = 0.05;
    for (k, name) in BB_TEST_NAMES.iter().enumerate() {
        let p: Vec<f64> = comb.iter().map(|r| r[k]).collect();
        let (rate, se) = rejection_rate(&p, alpha);
        checks.push(PropertyCheck {
            name: format!("cauchy/{name}"),
            statistic: rate,
            criterion: "0.5a - 3se <= P(p* <= a) <= 1.5a + 3se, a = 0.05".into(),
            passed: rate >= 0.5 * alpha - 3.0 * se && rate <= 1.5 * alpha + 3.0 * se,
        });
    }
    Ok(SelfCheckReport { seed, passed: checks.iter().all(|c| c.passed), checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stat_tests::build_hoeffding_null;

    #[test]
    fn scenario_definitions() {
        let s1 = Scenario::new(1, 500).unwrap();
        assert_eq!(s1.true_prior_phi, s1.hyp_prior_phi);
        assert_eq!(s1.true_prior_sigma, s1.hyp_prior_sigma);
        assert_eq!(s1.dgp_variant, DgpVariant::Ar1);
        assert_eq!(Scenario::new(2, 500).unwrap().hyp_prior_phi.s, 0.1);
        assert_eq!(Scenario::new(3, 500).unwrap().hyp_prior_sigma.s, 0.1);
        assert_eq!(Scenario::new(4, 500).unwrap().dgp_variant, DgpVariant::Heteroskedastic);
        assert_eq!(Scenario::new(5, 500).unwrap().dgp_variant, DgpVariant::Ar2);
        assert!(Scenario::new(0, 500).is_err());
        assert!(Scenario::new(6, 500).is_err());
        assert!(Scenario::new(1, 3).is_err());
    }

    #[test]
    fn dgp_formula_endpoints() {
        let n = 500;
        assert!((heteroskedastic_scale(1, n) - 1.0 / n as f64).abs() < 1e-15);
        assert!((heteroskedastic_scale(n, n) - (2.0 - 1.0 / n as f64)).abs() < 1e-15);
        assert_eq!(ar2_coefficient(0.0), 0.0);
        assert!((ar2_coefficient(-0.0625) + 0.5).abs() < 1e-15);
        assert!((ar2_coefficient(0.0625) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dgp_moments() {
        // φ pinned near 0 by a degenerate-width prior: variance ≈ σ².
        let mut s = Scenario::new(1, 20_000).unwrap();
        s.true_prior_phi = TruncNormal::new(0.0, 1e-6, -1e-6, 1e-6).unwrap();
        let (phi, sigma, y) = dgp_draw(&s, &mut rng_from_seed(2)).unwrap();
        assert!(phi.abs() <= 1e-6);
        let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05);
        // Variance grows across a heteroskedastic series.
        let mut s4 = Scenario::new(4, 20_000).unwrap();
        s4.true_prior_phi = s.true_prior_phi;
        let (_, sigma, y) = dgp_draw(&s4, &mut rng_from_seed(3)).unwrap();
        let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let (head, tail) = (ms(&y[..2000]), ms(&y[18_000..]));
        assert!((head / (sigma * sigma) - 0.1).abs() < 0.03, "{head}");
        assert!((tail / (sigma * sigma) - 1.9).abs() < 0.2, "{tail}");
    }

    fn tables(s: &Scenario) -> HoeffdingTables {
        ar1_table_sizes(s.n).iter().map(|&m| (m, build_hoeffding_null(m, 2000, 5).unwrap())).collect()
    }

    #[test]
    fn single_dataset_is_a_step_function() {
        let s = Scenario::new(1, 60).unwrap();
        let cfg = McmcConfig { iterations: 400, burn_in: 300, ..Default::default() };
        let r = run_scenario(&s, 1, &cfg, 9, &tables(&s)).unwrap();
        assert_eq!(r.tests.len(), 6);
        for t in &r.tests {
            assert!(t.cdf_values.iter().all(|&f| f == 0.0 || f == 1.0));
            assert!(t.cdf_values.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(run_scenario(&s, 0, &cfg, 9, &tables(&s)).is_err());
    }

    #[test]
    fn scenario_runs_are_reproducible() {
        let s = Scenario::new(4, 60).unwrap();
        let cfg = McmcConfig { iterations: 300, burn_in: 200, ..Default::default() };
        let t = tables(&s);
        let a = run_scenario(&s, 40, &cfg, 1, &t).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_scenario(&s, 40, &cfg, 1, &t)).unwrap();
        assert_eq!(a, b);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 6 * EXPECTED_CDF_POINTS);
    }

    #[test]
    fn expected_cdf_lookup() {
        let grid: Vec<f64> = unit_grid(EXPECTED_CDF_POINTS);
        let e = ExpectedCdf::from_pvalues("x", &[0.01, 0.04, 0.5, 0.9], &grid).unwrap();
        assert_eq!(e.at(0.05), 0.5);
        assert_eq!(e.at(1.0), 1.0);
        assert!(e.grid_deviation() >= 0.45);
    }

    #[test]
    fn replicate_runs_are_deterministic() {
        let t = build_hoeffding_null(99, 2000, 1).unwrap();
        let kind = ModelKind::bernoulli_default();
        let a = self_consistency_run(&kind, 120, 5, Some(&t)).unwrap();
        assert_eq!(a, self_consistency_run(&kind, 120, 5, Some(&t)).unwrap());
        assert_eq!(a.uvalues["data"].len(), 120 * 100);
        assert!(self_consistency_run(&kind, 120, 5, None).is_err());
        assert!(self_consistency_run(&kind, 50, 5, Some(&t)).is_err());
        let p = ppc_calibration_run(&ModelKind::nig_default(), 100, 50, 2).unwrap();
        assert!(p.iter().all(|q| (0.0..=1.0).contains(&q.value())));
        assert_eq!(external_null_run(100, 3, false).unwrap(), external_null_run(100, 3, false).unwrap());
    }

    #[test]
    fn injected_dependence_lowers_external_pvalues() {
        let p = external_null_run(200, 4, true).unwrap();
        let below = p.iter().filter(|q| q.value() < 0.05).count();
        assert!(below > 150, "{below}");
    }
}
