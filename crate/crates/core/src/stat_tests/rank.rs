//! Rank tests for dependence between u-values and discrete covariates.

use std::collections::BTreeMap;

use crate::error::{domain, Result};
use crate::pvalue::PValue;
use crate::special::{chi2_sf, norm_sf};

use super::midranks;

/// Group sizes up to which Mann–Whitney uses exact enumeration.
const EXACT_MAX_GROUP: usize = 8;

fn check_groups(values: &[f64], group: &[bool]) -> Result<(usize, usize)> {
    if values.len() != group.len() {
        return domain("values and group indicators differ in length");
    }
    if values.iter().any(|v| v.is_nan()) {
        return domain("NaN in Mann–Whitney input");
    }
    let n1 = group.iter().filter(|&&g| g).count();
    let n0 = group.len() - n1;
    if n1 == 0 || n0 == 0 {
        return domain("Mann–Whitney needs both groups non-empty");
    }
    Ok((n0, n1))
}

/// U statistic of the `true` group from midranks.
fn u_true(ranks: &[f64], group: &[bool], n1: usize) -> f64 {
    let rank_sum: f64 = ranks.iter().zip(group).filter(|(_, &g)| g).map(|(r, _)| r).sum();
    rank_sum - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Two-sided exact p-value by enumerating every assignment of the `true`
/// labels to positions (midranks under ties).
pub fn mann_whitney_exact(values: &[f64], group: &[bool]) -> Result<PValue> {
    let (n0, n1) = check_groups(values, group)?;
    let n = n0 + n1;
    if n > 20 {
        return domain("exact Mann–Whitney limited to n <= 20");
    }
    let (ranks, _) = midranks(values);
    let center = (n0 * n1) as f64 / 2.0;
    let observed = (u_true(&ranks, group, n1) - center).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
        total += 1;
        if (u - center).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    PValue::new(hits as f64 / total as f64)
}

/// Two-sided normal approximation with tie and continuity corrections.
pub fn mann_whitney_normal(values: &[f64], group: &[bool]) -> Result<PValue> {
    let (n0, n1) = check_groups(values, group)?;
    let n = (n0 + n1) as f64;
    let (ranks, ties) = midranks(values);
    let u = u_true(&ranks, group, n1);
    let prod = (n0 * n1) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = prod / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return PValue::new(1.0);
    }
    let z = ((u - prod / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(PValue::clipped(2.0 * norm_sf(z)))
}

/// Mann–Whitney U test between continuous values and a binary covariate:
/// exact when both groups have at most 8 members, normal approximation
/// otherwise.
pub fn mann_whitney_p(values: &[f64], group: &[bool]) -> Result<PValue> {
    let (n0, n1) = check_groups(values, group)?;
    if n0 <= EXACT_MAX_GROUP && n1 <= EXACT_MAX_GROUP {
        mann_whitney_exact(values, group)
    } else {
        mann_whitney_normal(values, group)
    }
}

/// Kruskal–Wallis H test (tie-corrected, chi-square with k - 1 dof).
pub fn kruskal_wallis_p<G: Ord>(values: &[f64], group: &[G]) -> Result<PValue> {
    if values.len() != group.len() {
        return domain("values and group labels differ in length");
    }
    if values.iter().any(|v| v.is_nan()) {
        return domain("NaN in Kruskal–Wallis input");
    }
    if values.is_empty() || values.iter().all(|&v| v == values[0]) {
        return domain("Kruskal–Wallis needs values that are not all tied");
    }
    let (ranks, ties) = midranks(values);
    let mut sums: BTreeMap<&G, (f64, usize)> = BTreeMap::new();
    for (r, g) in ranks.iter().zip(group) {
        let e = sums.entry(g).or_insert((0.0, 0));
        e.0 += r;
        e.1 += 1;
    }
    let k = sums.len();
    if k < 2 {
        return domain("Kruskal–Wallis needs at least two groups");
    }
    let n = values.len() as f64;
    let between: f64 = sums.values().map(|&(s, c)| s * s / c as f64).sum();
    let h = 12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0);
    let correction = 1.0 - ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * n * n - n);
    Ok(PValue::clipped(chi2_sf((k - 1) as f64, h / correction)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stat_tests::ks_distance;
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn exact_examples() {
        let p = mann_whitney_p(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]).unwrap();
        assert!((p.value() - 1.0 / 3.0).abs() < 1e-15);
        let p = mann_whitney_p(&[1.0, 2.0], &[false, true]).unwrap();
        assert_eq!(p.value(), 1.0);
        assert!(mann_whitney_p(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn exact_and_normal_agree_at_size_eight() {
        let mut rng = rng_from_seed(8);
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let values: Vec<f64> = (0..16).map(|_| rng.random()).collect();
            let mut group = vec![false; 8];
            group.extend(vec![true; 8]);
            group.shuffle(&mut rng);
            let e = mann_whitney_exact(&values, &group).unwrap().value();
            let a = mann_whitney_normal(&values, &group).unwrap().value();
            worst = worst.max((e - a).abs());
        }
        assert!(worst < 0.02, "max |exact - normal| = {worst}");
    }

    #[test]
    fn normal_path_calibrated() {
        let mut rng = rng_from_seed(50);
        let ps: Vec<f64> = (0..2000)
            .map(|_| {
                let values: Vec<f64> = (0..100).map(|_| rng.random()).collect();
                let mut group = vec![false; 50];
                group.extend(vec![true; 50]);
                group.shuffle(&mut rng);
                mann_whitney_p(&values, &group).unwrap().value()
            })
            .collect();
        assert!(ks_distance(&ps).unwrap() < 0.05);
    }

    #[test]
    fn kruskal_wallis_examples() {
        let p = kruskal_wallis_p(&[1.0, 2.0, 3.0, 4.0], &["A", "A", "B", "B"]).unwrap();
        assert!((p.value() - chi2_sf(1.0, 2.4)).abs() < 1e-14);
        assert!((p.value() - 0.1213).abs() < 1e-4);
        let p = kruskal_wallis_p(&[1.0, 2.0], &[0, 1]).unwrap();
        assert!((p.value() - 0.3173).abs() < 1e-4);
        assert!(kruskal_wallis_p(&[1.0, 1.0, 1.0], &[0, 1, 2]).is_err());
        assert!(kruskal_wallis_p(&[1.0, 2.0, 3.0], &[0, 0, 0]).is_err());
    }

    #[test]
    fn kruskal_wallis_calibrated_under_exchangeability() {
        let mut rng = rng_from_seed(51);
        let ps: Vec<f64> = (0..2000)
            .map(|_| {
                let values: Vec<f64> = (0..90).map(|_| rng.random()).collect();
                let mut g: Vec<u8> = (0..90).map(|i| (i % 3) as u8).collect();
                g.shuffle(&mut rng);
                kruskal_wallis_p(&values, &g).unwrap().value()
            })
            .collect();
        assert!(ks_distance(&ps).unwrap() < 0.05);
    }
}
