//! Calibrated hypothesis tests on the u-values of a single draw. Each test
//! returns a p-value that is Uniform(0, 1) when the model is correct.

mod anderson_darling;
mod hoeffding;
mod ks;
mod rank;

pub use anderson_darling::{
    ad_pvalue, ad_statistic, ad_test, AdMethod, AdNullTable, AdPValue, AD_MC_REPLICATES,
};
pub use hoeffding::{
    build_hoeffding_null, hoeffding_from_ranks, hoeffding_pvalue, hoeffding_statistic,
    HoeffdingNullTable, HOEFFDING_MIN_N,
};
pub use ks::{ks_distance, ks_pvalue};
pub use rank::{kruskal_wallis_p, mann_whitney_exact, mann_whitney_normal, mann_whitney_p};

use crate::error::{domain, Result};
use crate::pvalue::PValue;
use crate::scalar::Scalar;

/// Two-sided extremeness p-value 2 min(u, 1 - u).
pub fn p_extreme<S: Scalar>(u: S) -> Result<PValue<S>> {
    if !(u > S::zero() && u < S::one()) {
        return domain(format!("extremeness test needs u in (0, 1), got {u:?}"));
    }
    PValue::new(S::lit(2.0) * u.min(S::one() - u))
}

/// Average (midrank) ranks, 1-based, plus the tie-group sizes.
pub(crate) fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}
