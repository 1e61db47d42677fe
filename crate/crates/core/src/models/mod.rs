//! Concrete models: normal with unknown mean and variance under a
//! normal-inverse-gamma prior, Beta–Bernoulli, and AR(1).

pub mod ar1;
pub mod bernoulli;
pub mod data;
pub mod nig;
pub mod truncnorm;

pub use ar1::{
    ar1_data_uvalues, ar1_from_innovations, ar1_logpost_u, ar1_mcmc, ar1_simulate,
    ar1_table_sizes, ar1_test_suite, Ar1Chain, Ar1Model, Ar1Pvalues, HoeffdingTables, McmcConfig,
    AR1_MIN_N, AR1_TEST_NAMES,
};
pub use bernoulli::{
    bb_data_uvalues, bb_test_suite, bb_update, bb_uvalues, BB_TEST_NAMES, binary_from_f64, lag_pairs, ppc_switch_pvalue,
    switch_count, BernoulliPrior, BetaBernoulliModel, Tail,
};
pub use nig::{
    nig_data_uvalues, nig_draw, nig_test_suite, NIG_TEST_NAMES, nig_param_uvalues, nig_sample, nig_update, nig_uvalues,
    plambda_density, pmu_density, ppc_min_pvalue, NigModel, NigParams,
};
pub use truncnorm::{tn_cdf, tn_inv_cdf, TruncNormal};
