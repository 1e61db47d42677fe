use crate::error::{domain, Result};
use crate::pvalue::PValue;
use crate::scalar::Scalar;

/// sup_u |F̂(u) - u| against Uniform(0, 1), evaluated on both sides of every
/// jump of the empirical CDF.
pub fn ks_distance<S: Scalar>(values: &[S]) -> Result<S> {
    if values.is_empty() {
        return domain("KS distance of an empty sample");
    }
    if values.iter().any(|v| v.is_nan()) {
        return domain("NaN in KS sample");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = S::from_usize_lossy(sorted.len());
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let above = S::from_usize_lossy(i + 1) / n - u;
            let below = u - S::from_usize_lossy(i) / n;
            above.max(below)
        })
        .fold(S::zero(), S::max))
}

/// Asymptotic Kolmogorov p-value for distance `d` at sample size `n`, with
/// Stephens' finite-sample scaling.
pub fn ks_pvalue(d: f64, n: usize) -> Result<PValue> {
    if n == 0 || !(d >= 0.0) {
        return domain("KS p-value needs n >= 1 and d >= 0");
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return PValue::new(1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    Ok(PValue::clipped(2.0 * sum))
}
