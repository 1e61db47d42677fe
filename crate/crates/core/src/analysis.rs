//! Model checks on one observed dataset: posterior draws, per-draw test
//! p-values, their aggregation, and a posterior predictive baseline.

use std::io::Write;
use std::path::PathBuf;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregate::{adjust_family, AggregatedResult, Combiner, TestOutcome};
use crate::ecdf::{tilted_ecdf, unit_grid, TiltedCdfCurve};
use crate::error::{domain, Result};
use crate::io::{fmt_f64, ser_f64};
use crate::models::{
    ar1_mcmc, ar1_table_sizes, ar1_test_suite, bb_test_suite, bb_update, nig_sample,
    nig_test_suite, nig_update, ppc_min_pvalue, ppc_switch_pvalue, tn_inv_cdf, Ar1Model,
    BernoulliPrior, BetaBernoulliModel, HoeffdingTables, McmcConfig, NigModel, NigParams, Tail,
    AR1_MIN_N, AR1_TEST_NAMES, BB_TEST_NAMES, NIG_TEST_NAMES,
};
use crate::pvalue::PValue;
use crate::rng::{derive_seed, rng_from_seed, stream_rng};
use crate::stat_tests::HoeffdingNullTable;
use crate::udraw::UDraw;

pub const DEFAULT_TABLE_REPLICATES: usize = 100_000;
pub const DEFAULT_TABLE_SEED: u64 = 0;
/// Draws whose data u-values are exported as tilted-CDF curves.
pub const TILTED_CURVES: usize = 100;
pub const TILTED_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub draws: usize,
    pub seed: u64,
    pub combiner: Combiner,
    pub table_replicates: usize,
    pub table_seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            draws: 10_000,
            seed: 0,
            combiner: Combiner::Cauchy,
            table_replicates: DEFAULT_TABLE_REPLICATES,
            table_seed: DEFAULT_TABLE_SEED,
            cache_dir: None,
        }
    }
}

impl AnalysisOptions {
    /// Null table for sample size n under these options.
    pub fn table(&self, n: usize) -> Result<HoeffdingNullTable> {
        HoeffdingNullTable::obtain(self.cache_dir.as_deref(), n, self.table_replicates, self.table_seed)
    }

    pub fn tables(&self, sizes: &[usize]) -> Result<HoeffdingTables> {
        sizes.iter().map(|&n| Ok((n, self.table(n)?))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
}

fn named(pairs: &[(&str, f64)]) -> Vec<NamedValue> {
    pairs
        .iter()
        .map(|&(name, value)| NamedValue { name: name.to_string(), value })
        .collect()
}

fn nig_hyper(p: &NigParams) -> Vec<NamedValue> {
    named(&[("mu0", p.mu0), ("kappa0", p.kappa0), ("alpha0", p.alpha0), ("beta0", p.beta0)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpcSummary {
    pub statistic: String,
    pub tail: String,
    #[serde(serialize_with = "ser_f64")]
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcSummary {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    #[serde(serialize_with = "ser_f64")]
    pub acceptance_rate: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub model: String,
    pub dataset: String,
    pub n: usize,
    pub prior: String,
    pub prior_hyperparameters: Vec<NamedValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub posterior_hyperparameters: Vec<NamedValue>,
    pub draws: usize,
    pub seed: u64,
    pub results: Vec<AggregatedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppc: Option<PpcSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<McmcSummary>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub outcomes: Vec<TestOutcome>,
    /// Tilted CDFs of the data u-values of the first draws.
    pub tilted: Vec<TiltedCdfCurve>,
}

impl Analysis {
    pub fn p_star(&self, test_name: &str) -> Option<f64> {
        self.outcomes
            .iter()
            .find(|o| o.test_name == test_name)
            .map(|o| o.p_star.value())
    }

    /// CSV with one row per draw and one column per test.
    pub fn write_per_draw_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names: Vec<&str> = self.outcomes.iter().map(|o| o.test_name.as_str()).collect();
        writeln!(w, "draw,{}", names.join(","))?;
        for t in 0..self.report.draws {
            let row: Vec<String> = self.outcomes.iter().map(|o| fmt_f64(o.per_draw_p[t].value())).collect();
            writeln!(w, "{t},{}", row.join(","))?;
        }
        Ok(())
    }
}

struct PerDraw<const K: usize> {
    p: [PValue; K],
    data_u: Option<Vec<f64>>,
}

fn per_draw<const K: usize>(udraw: &UDraw, p: [PValue; K], t: usize, params: usize) -> PerDraw<K> {
    PerDraw {
        p,
        data_u: (t < TILTED_CURVES).then(|| udraw.values()[params..].to_vec()),
    }
}

fn assemble<const K: usize>(
    names: [&str; K],
    rows: Vec<PerDraw<K>>,
    combiner: Combiner,
    report: impl FnOnce(Vec<AggregatedResult>) -> AnalysisReport,
) -> Result<Analysis> {
    let outcomes = (0..K)
        .map(|k| TestOutcome::new(names[k], rows.iter().map(|r| r.p[k]).collect(), combiner))
        .collect::<Result<Vec<_>>>()?;
    let mut results: Vec<AggregatedResult> = outcomes.iter().map(TestOutcome::summary).collect();
    adjust_family(&mut results, "upc");
    let grid: Vec<f64> = unit_grid(TILTED_GRID_POINTS);
    let tilted = rows
        .iter()
        .filter_map(|r| r.data_u.as_deref())
        .map(|u| tilted_ecdf(u, &grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(Analysis { report: report(results), outcomes, tilted })
}

fn check_draws(draws: usize) -> Result<()> {
    if draws == 0 {
        return domain("need at least one posterior draw");
    }
    Ok(())
}

/// Normal model with a named NIG prior (`weak`, `data_dependent`, `poor`),
/// exact conjugate posterior draws, and the min-statistic PPC.
pub fn analyze_normal(data: &[f64], dataset: &str, prior_name: &str, opts: &AnalysisOptions) -> Result<Analysis> {
    check_draws(opts.draws)?;
    let prior = NigParams::named(prior_name, data)?;
    let posterior = nig_update(&prior, data)?;
    let draws = nig_sample(&posterior, opts.draws, derive_seed(opts.seed, 1))?;
    let model = NigModel::new(prior, data.len());
    let rows = draws
        .par_iter()
        .enumerate()
        .map(|(t, &(mu, sigma2))| {
            let u = model.uvalues(mu, sigma2, data)?;
            Ok(per_draw(&u, nig_test_suite(&u)?, t, 2))
        })
        .collect::<Result<Vec<_>>>()?;
    let ppc = ppc_min_pvalue(data, &draws)?;
    assemble(NIG_TEST_NAMES, rows, opts.combiner, |results| AnalysisReport {
        model: "normal_nig".into(),
        dataset: dataset.into(),
        n: data.len(),
        prior: prior_name.into(),
        prior_hyperparameters: nig_hyper(&prior),
        posterior_hyperparameters: nig_hyper(&posterior),
        draws: opts.draws,
        seed: opts.seed,
        results,
        ppc: Some(PpcSummary { statistic: "min".into(), tail: "lower".into(), p: ppc.value() }),
        mcmc: None,
    })
}

/// Beta–Bernoulli model with a named prior (`uniform`, `jeffreys`, `poor`),
/// exact posterior draws, randomized PIT data u-values, and the switch-count
/// PPC.
pub fn analyze_bernoulli(data: &[u8], dataset: &str, prior_name: &str, opts: &AnalysisOptions) -> Result<Analysis> {
    check_draws(opts.draws)?;
    if data.len() < 6 {
        return domain(format!("Bernoulli checks need n >= 6, got {}", data.len()));
    }
    let prior = BernoulliPrior::named(prior_name)?;
    let posterior = bb_update(&prior, data)?;
    let table = opts.table(data.len() - 1)?;
    let mut rng = rng_from_seed(derive_seed(opts.seed, 1));
    let thetas: Vec<f64> = (0..opts.draws)
        .map(|_| posterior.draw(&mut rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
        .collect();
    let model = BetaBernoulliModel::new(prior, data.len());
    let pit_seed = derive_seed(opts.seed, 2);
    let rows = thetas
        .par_iter()
        .enumerate()
        .map(|(t, &theta)| {
            let u = model.uvalues(theta, data, &mut stream_rng(pit_seed, t as u64))?;
            Ok(per_draw(&u, bb_test_suite(&u, &table)?, t, 1))
        })
        .collect::<Result<Vec<_>>>()?;
    let ppc = ppc_switch_pvalue(data, &thetas, Tail::Lower, &mut rng_from_seed(derive_seed(opts.seed, 3)))?;
    let hyper = |p: &BernoulliPrior| named(&[("a", p.a), ("b", p.b)]);
    assemble(BB_TEST_NAMES, rows, opts.combiner, |results| AnalysisReport {
        model: "beta_bernoulli".into(),
        dataset: dataset.into(),
        n: data.len(),
        prior: prior_name.into(),
        prior_hyperparameters: hyper(&prior),
        posterior_hyperparameters: hyper(&posterior),
        draws: opts.draws,
        seed: opts.seed,
        results,
        ppc: Some(PpcSummary { statistic: "switches".into(), tail: "lower".into(), p: ppc.value() }),
        mcmc: None,
    })
}

/// AR(1) model fitted by Metropolis; every kept chain draw is tested.
/// `opts.draws` is ignored, the chain length comes from `mcmc`.
pub fn analyze_ar1(
    y: &[f64],
    dataset: &str,
    model: &Ar1Model,
    mcmc: &McmcConfig,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    if y.len() < AR1_MIN_N {
        return domain(format!("AR(1) checks need n >= {AR1_MIN_N}, got {}", y.len()));
    }
    let tables = opts.tables(&ar1_table_sizes(y.len()))?;
    let chain = ar1_mcmc(y, model, mcmc)?;
    let rows = chain
        .draws
        .par_iter()
        .enumerate()
        .map(|(t, &[u1, u2])| {
            let u = model.udraw_from_u(u1, u2, y)?;
            Ok(per_draw(&u, ar1_test_suite(&u, &tables)?.to_array(), t, 2))
        })
        .collect::<Result<Vec<_>>>()?;
    let posterior_mean = |k: usize, tn| -> Result<f64> {
        let total = chain
            .draws
            .iter()
            .map(|d| tn_inv_cdf(d[k], tn))
            .sum::<Result<f64>>()?;
        Ok(total / chain.draws.len() as f64)
    };
    let (phi_mean, sigma_mean) = (posterior_mean(0, &model.prior_phi)?, posterior_mean(1, &model.prior_sigma)?);
    let (pp, ps) = (model.prior_phi, model.prior_sigma);
    assemble(AR1_TEST_NAMES, rows, opts.combiner, |results| AnalysisReport {
        model: "ar1".into(),
        dataset: dataset.into(),
        n: y.len(),
        prior: "truncated_normal".into(),
        prior_hyperparameters: named(&[
            ("phi_m", pp.m),
            ("phi_s", pp.s),
            ("phi_lo", pp.lo),
            ("phi_hi", pp.hi),
            ("sigma_m", ps.m),
            ("sigma_s", ps.s),
            ("sigma_lo", ps.lo),
            ("sigma_hi", ps.hi),
        ]),
        posterior_hyperparameters: named(&[("phi_mean", phi_mean), ("sigma_mean", sigma_mean)]),
        draws: chain.draws.len(),
        seed: mcmc.seed,
        results,
        ppc: None,
        mcmc: Some(McmcSummary {
            iterations: mcmc.iterations,
            burn_in: mcmc.burn_in,
            thin: mcmc.thin,
            acceptance_rate: chain.acceptance_rate,
            warnings: chain.warning.into_iter().collect(),
        }),
    })
}

/// Normal sample of the same size, mean and standard deviation as `data`.
pub fn matched_normal(data: &[f64], seed: u64) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return domain("matched normal data needs n >= 2");
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let dist = Normal::new(mean, sd).map_err(|e| crate::error::UpcError::Domain(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..data.len()).map(|_| dist.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::data::{bernoulli_gelman, newcomb};

    fn small(draws: usize) -> AnalysisOptions {
        AnalysisOptions { draws, seed: 3, table_replicates: 5000, ..Default::default() }
    }

    #[test]
    fn normal_analysis_shape_and_determinism() {
        let y = newcomb();
        let a = analyze_normal(&y, "newcomb", "weak", &small(500)).unwrap();
        assert_eq!(a.outcomes.len(), 3);
        assert_eq!(a.tilted.len(), TILTED_CURVES);
        assert!(a.outcomes.iter().all(|o| o.draws() == 500 && o.is_consistent()));
        assert!(a.report.results.iter().all(|r| r.adjusted_p.unwrap() >= r.p_star));
        let b = analyze_normal(&y, "newcomb", "weak", &small(500)).unwrap();
        assert_eq!(a.report, b.report);
        assert!(analyze_normal(&y, "newcomb", "bogus", &small(10)).is_err());
        assert!(analyze_normal(&y, "newcomb", "weak", &small(0)).is_err());
        let mut csv = Vec::new();
        a.write_per_draw_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 501);
    }

    #[test]
    fn bernoulli_analysis_flags_dependence() {
        let y = bernoulli_gelman();
        let a = analyze_bernoulli(&y, "gelman", "uniform", &small(300)).unwrap();
        assert!(a.p_star("p_data_indep").unwrap() < 1e-2);
        assert!(a.report.ppc.as_ref().unwrap().p < 0.05);
        assert!(analyze_bernoulli(&y[..5], "short", "uniform", &small(10)).is_err());
    }

    #[test]
    fn matched_normal_moments() {
        let y = newcomb();
        let z = matched_normal(&y, 1).unwrap();
        assert_eq!(z.len(), y.len());
        assert_eq!(z, matched_normal(&y, 1).unwrap());
    }
}
