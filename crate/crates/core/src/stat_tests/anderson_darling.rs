//! Anderson–Darling goodness of fit against Uniform(0, 1).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::pvalue::PValue;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

/// Replicates used for Monte-Carlo null distributions.
pub const AD_MC_REPLICATES: usize = 100_000;

/// Below this sample size the limiting distribution is not used by default.
const ASYMPTOTIC_MIN_N: usize = 8;

const DEFAULT_MC_SEED: u64 = 0x00AD_5EED;

/// A² = -n - (1/n) Σ (2i - 1) [ln u_(i) + ln(1 - u_(n+1-i))].
pub fn ad_statistic<S: Scalar>(u: &[S]) -> Result<S> {
    if u.is_empty() {
        return domain("Anderson–Darling statistic of an empty sample");
    }
    if let Some(bad) = u.iter().find(|&&v| !(v > S::zero() && v < S::one())) {
        return domain(format!(
            "Anderson–Darling needs values in (0, 1), got {bad:?}; clamp first"
        ));
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let two = S::lit(2.0);
    let mut acc = S::zero();
    for i in 0..n {
        let w = two * S::from_usize_lossy(i + 1) - S::one();
        acc = acc + w * (sorted[i].ln() + (-sorted[n - 1 - i]).ln_1p());
    }
    let nf = S::from_usize_lossy(n);
    Ok(-nf - acc / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdMethod {
    /// Limiting (n → ∞) distribution of A² for a fully specified null.
    Asymptotic,
    MonteCarlo { replicates: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdPValue {
    pub p: PValue,
    /// Set when the asymptotic distribution is used with n < 8.
    pub small_sample: bool,
}

/// Upper tail of the limiting A² distribution for a fully specified null.
///
/// A² converges to Q = Σ_j Z_j² / (j(j+1)). For x ≥ 0.5 the tail is
/// evaluated with Smirnov's alternating-integral series for positive
/// quadratic forms,
///
///   P(Q > x) = (1/π) Σ_k (-1)^(k+1) ∫ e^(-xs/2) / (s √(-D(s))) ds,
///
/// s running over [(2k-1)2k, 2k(2k+1)], where the Fredholm determinant has the
/// closed form D(s) = (4/π) cos(πa) / (1 - 4a²) with a² = s + 1/4. Each
/// term keeps full relative precision, so tiny tail probabilities stay
/// accurate. Near zero the series converges slowly and Marsaglia's `adinf`
/// small-z approximation (|error| < 2e-6) is used instead.
fn asymptotic_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.5 {
        let poly = 2.00012
            + (0.247105
                - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * x) * x) * x) * x)
                * x;
        let cdf = (-1.2337141 / x).exp() / x.sqrt() * poly;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    const NODES: usize = 64;
    let h = std::f64::consts::PI / NODES as f64;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut total = 0.0;
    for k in 1..=200 {
        // a = 2k + t with t = sin(φ)/2 removes the endpoint singularities.
        let mut term = 0.0;
        for i in 0..NODES {
            let phi = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h;
            let t = 0.5 * phi.sin();
            let a = 2.0 * k as f64 + t;
            let c = (std::f64::consts::PI * t).cos();
            if c <= 0.0 {
                continue;
            }
            term += (-x * (a * a - 0.25) / 2.0).exp() * 4.0 * a * sqrt_pi
                / ((4.0 * a * a - 1.0).sqrt() * c.sqrt())
                * 0.5
                * phi.cos();
        }
        term *= h;
        total += if k % 2 == 1 { term } else { -term };
        if term <= 1e-17 * total.abs() || term == 0.0 {
            break;
        }
    }
    (total / std::f64::consts::PI).clamp(0.0, 1.0)
}

/// Sorted Monte-Carlo null sample of A² for uniform samples of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdNullTable {
    pub n: usize,
    pub seed: u64,
    stats: Vec<f64>,
}

impl AdNullTable {
    pub fn build(n: usize, replicates: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return domain("Anderson–Darling null needs n >= 1");
        }
        if replicates == 0 {
            return domain("Monte-Carlo null needs at least one replicate");
        }
        let mut stats: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(seed, j as u64);
                let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>().max(f64::MIN_POSITIVE)).collect();
                ad_statistic(&u).expect("interior uniforms")
            })
            .collect();
        stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { n, seed, stats })
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    /// (1 + #{t ≥ a2}) / (J + 1).
    pub fn pvalue(&self, a2: f64) -> PValue {
        let ge = self.stats.len() - self.stats.partition_point(|&t| t < a2);
        PValue::clipped((1 + ge) as f64 / (self.stats.len() + 1) as f64)
    }
}

fn cached_table(n: usize, replicates: usize, seed: u64) -> Result<Arc<AdNullTable>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u64), Arc<AdNullTable>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap().get(&(n, replicates, seed)) {
        return Ok(t.clone());
    }
    let table = Arc::new(AdNullTable::build(n, replicates, seed)?);
    cache
        .lock()
        .unwrap()
        .insert((n, replicates, seed), table.clone());
    Ok(table)
}

pub fn ad_pvalue(a2: f64, n: usize, method: AdMethod) -> Result<AdPValue> {
    if n == 0 {
        return domain("Anderson–Darling p-value needs n >= 1");
    }
    if a2.is_nan() || a2 < -1e-9 {
        return domain(format!("A² must be nonnegative, got {a2}"));
    }
    let a2 = a2.max(0.0);
    match method {
        AdMethod::Asymptotic => Ok(AdPValue {
            p: PValue::clipped(asymptotic_sf(a2)),
            small_sample: n < ASYMPTOTIC_MIN_N,
        }),
        AdMethod::MonteCarlo { replicates, seed } => {
            let table = cached_table(n, replicates, seed)?;
            Ok(AdPValue {
                p: table.pvalue(a2),
                small_sample: false,
            })
        }
    }
}

/// Anderson–Darling uniformity test with the default p-value policy:
/// limiting distribution for n ≥ 8, Monte-Carlo null otherwise.
pub fn ad_test(u: &[f64]) -> Result<PValue> {
    let a2 = ad_statistic(u)?;
    let method = if u.len() >= ASYMPTOTIC_MIN_N {
        AdMethod::Asymptotic
    } else {
        AdMethod::MonteCarlo {
            replicates: AD_MC_REPLICATES,
            seed: DEFAULT_MC_SEED,
        }
    };
    Ok(ad_pvalue(a2, u.len(), method)?.p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stat_tests::ks_distance;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn statistic_examples() {
        let one = ad_statistic(&[0.5]).unwrap();
        assert!((one - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        // -3 - (1/3)[2 ln 0.1 + 6 ln 0.5 + 10 ln 0.9]
        let three = ad_statistic(&[0.1, 0.5, 0.9]).unwrap();
        let direct = -3.0 - (2.0 * 0.1f64.ln() + 6.0 * 0.5f64.ln() + 10.0 * 0.9f64.ln()) / 3.0;
        assert!((three - direct).abs() < 1e-14);
        assert!((three - 0.272553).abs() < 1e-6);
        assert_eq!(three, ad_statistic(&[0.9, 0.1, 0.5]).unwrap());
        assert!(ad_statistic::<f64>(&[]).is_err());
        assert!(ad_statistic(&[0.0, 0.5]).is_err());
        assert!(ad_statistic(&[0.5, 1.0]).is_err());
    }

    /// Marsaglia & Marsaglia's `adinf`, an independent approximation of the
    /// limiting CDF (absolute error about 1e-5 or better).
    fn adinf_cdf(z: f64) -> f64 {
        if z < 2.0 {
            (-1.2337141 / z).exp() / z.sqrt()
                * (2.00012
                    + (0.247105
                        - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z)
                        * z)
        } else {
            (-(1.0776
                - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z)
                    * z)
                .exp())
            .exp()
        }
    }

    #[test]
    fn asymptotic_percentage_points() {
        // Limiting upper percentage points 1.9329, 2.4924, 3.8781.
        assert!((asymptotic_sf(1.9329) - 0.10).abs() < 2e-5);
        assert!((asymptotic_sf(2.4924) - 0.05).abs() < 2e-5);
        assert!((asymptotic_sf(3.8781) - 0.01).abs() < 5e-6);
    }

    #[test]
    fn asymptotic_agrees_with_adinf() {
        for i in 1..=60 {
            let z = 0.15 * i as f64;
            let diff = (asymptotic_sf(z) - (1.0 - adinf_cdf(z))).abs();
            assert!(diff < 3e-5, "z = {z}: diff {diff}");
        }
        assert!((asymptotic_sf(0.5 - 1e-12) - asymptotic_sf(0.5)).abs() < 1e-5);
    }

    #[test]
    fn asymptotic_tail_keeps_relative_precision() {
        // Largest weight 1/2 dominates: P(Q > x) ≈ C P(Z² > 2x) with
        // C = Π_{j≥2} (1 - 2/(j(j+1)))^(-1/2).
        let c: f64 = (2..200_000)
            .map(|j| {
                let j = j as f64;
                (1.0 - 2.0 / (j * (j + 1.0))).powf(-0.5)
            })
            .product();
        for &x in &[20.0, 40.0, 80.0] {
            let approx = c * 2.0 * crate::special::norm_sf((2.0f64 * x).sqrt());
            let p = asymptotic_sf(x);
            assert!(p > 0.0);
            assert!((p / approx - 1.0).abs() < 0.05, "x = {x}: {p} vs {approx}");
        }
    }

    #[test]
    fn pvalue_edges() {
        let a = ad_pvalue(0.0, 10, AdMethod::Asymptotic).unwrap();
        assert_eq!(a.p.value(), 1.0);
        assert!(!a.small_sample);
        assert!(ad_pvalue(0.5, 5, AdMethod::Asymptotic).unwrap().small_sample);
        let mc = AdMethod::MonteCarlo { replicates: 999, seed: 1 };
        assert_eq!(ad_pvalue(0.0, 5, mc).unwrap().p.value(), 1.0);
        assert_eq!(ad_pvalue(1e6, 5, mc).unwrap().p.value(), 1.0 / 1000.0);
        assert!(ad_pvalue(0.5, 5, AdMethod::MonteCarlo { replicates: 0, seed: 1 }).is_err());
        assert!(ad_pvalue(-1.0, 5, AdMethod::Asymptotic).is_err());
        assert!(ad_pvalue(1.0, 0, AdMethod::Asymptotic).is_err());
    }

    #[test]
    fn asymptotic_calibrated_at_n66() {
        let mut rng = rng_from_seed(66);
        let ps: Vec<f64> = (0..2000)
            .map(|_| {
                let u: Vec<f64> = (0..66).map(|_| rng.random::<f64>()).collect();
                ad_test(&u).unwrap().value()
            })
            .collect();
        assert!(ks_distance(&ps).unwrap() < 0.05);
    }

    #[test]
    fn small_n_uses_monte_carlo_null() {
        let mut rng = rng_from_seed(5);
        let ps: Vec<f64> = (0..2000)
            .map(|_| {
                let u: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                ad_test(&u).unwrap().value()
            })
            .collect();
        assert!(ks_distance(&ps).unwrap() < 0.05);
    }

    proptest! {
        #[test]
        fn statistic_nonnegative_and_permutation_invariant(
            mut u in prop::collection::vec(1e-9f64..1.0 - 1e-9, 1..40)
        ) {
            let a = ad_statistic(&u).unwrap();
            prop_assert!(a >= -1e-12);
            u.reverse();
            prop_assert_eq!(a, ad_statistic(&u).unwrap());
        }
    }
}
