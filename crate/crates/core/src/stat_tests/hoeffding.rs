//! Hoeffding's D test of independence with an empirical null distribution.
//!
//! Off-the-shelf p-value rules for D are not uniform under the null, so
//! p-values here always come from a Monte-Carlo table of null statistics for
//! the given sample size.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Result, UpcError};
use crate::pvalue::PValue;
use crate::rng::{rng_from_seed, stream_rng};
use crate::scalar::Scalar;

pub const HOEFFDING_MIN_N: usize = 5;

const MIN_TABLE_REPLICATES: usize = 1000;
const TIE_JITTER: f64 = 1e-9;
const TIE_JITTER_SEED: u64 = 0x7E55;

/// Classical D from rank vectors that are permutations of 1..=n:
///
/// D = [(n-2)(n-3) D1 + D2 - 2(n-2) D3] / [n(n-1)(n-2)(n-3)(n-4)]
///
/// with Q_i the bivariate rank, D1 = Σ (Q-1)(Q-2),
/// D2 = Σ (R-1)(R-2)(S-1)(S-2), D3 = Σ (R-2)(S-2)(Q-1). Range [-1/60, 1/30].
pub fn hoeffding_from_ranks(r: &[usize], s: &[usize]) -> f64 {
    let n = r.len();
    assert_eq!(n, s.len());
    assert!(n >= HOEFFDING_MIN_N);
    // order[k] = index with x-rank k + 1
    let mut order = vec![0usize; n];
    for (i, &ri) in r.iter().enumerate() {
        order[ri - 1] = i;
    }
    // Fenwick tree over y-ranks: Q_i - 1 = #{j : R_j < R_i, S_j < S_i}
    let mut tree = vec![0i64; n + 1];
    let mut q_minus_1 = vec![0i64; n];
    for &i in &order {
        let mut k = s[i] - 1;
        let mut below = 0;
        while k > 0 {
            below += tree[k];
            k &= k - 1;
        }
        q_minus_1[i] = below;
        let mut k = s[i];
        while k <= n {
            tree[k] += 1;
            k += k & k.wrapping_neg();
        }
    }
    let (mut d1, mut d2, mut d3) = (0i128, 0i128, 0i128);
    for i in 0..n {
        let q = q_minus_1[i] as i128;
        let ri = r[i] as i128;
        let si = s[i] as i128;
        d1 += q * (q - 1);
        d2 += (ri - 1) * (ri - 2) * (si - 1) * (si - 2);
        d3 += (ri - 2) * (si - 2) * q;
    }
    let nn = n as i128;
    let num = (nn - 2) * (nn - 3) * d1 + d2 - 2 * (nn - 2) * d3;
    let den = nn * (nn - 1) * (nn - 2) * (nn - 3) * (nn - 4);
    num as f64 / den as f64
}

fn ordinal_ranks(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut ranks = vec![0; v.len()];
    for (k, &i) in order.iter().enumerate() {
        ranks[i] = k + 1;
    }
    ranks
}

fn has_ties(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.windows(2).any(|w| w[0] == w[1])
}

/// Hoeffding's D for paired samples. Exact ties are broken by a seeded jitter
/// of magnitude 1e-9 (with a logged warning).
pub fn hoeffding_statistic<S: Scalar>(x: &[S], y: &[S]) -> Result<f64> {
    if x.len() != y.len() {
        return domain(format!(
            "Hoeffding needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        ));
    }
    let n = x.len();
    if n < HOEFFDING_MIN_N {
        return domain(format!("Hoeffding needs n >= {HOEFFDING_MIN_N}, got {n}"));
    }
    let to_f64 = |v: &[S]| -> Result<Vec<f64>> {
        v.iter()
            .map(|a| {
                a.to_f64()
                    .filter(|f| !f.is_nan())
                    .ok_or_else(|| UpcError::Domain("NaN in Hoeffding input".into()))
            })
            .collect()
    };
    let mut xs = to_f64(x)?;
    let mut ys = to_f64(y)?;
    for v in [&xs, &ys] {
        if v.iter().all(|&a| a == v[0]) {
            return domain("Hoeffding input is constant (all ranks tied)");
        }
    }
    let mut rng = rng_from_seed(TIE_JITTER_SEED);
    for v in [&mut xs, &mut ys] {
        if has_ties(v) {
            log::warn!("ties in Hoeffding input; breaking with seeded jitter");
            for a in v.iter_mut() {
                *a += TIE_JITTER * (rng.random::<f64>() - 0.5);
            }
        }
    }
    Ok(hoeffding_from_ranks(&ordinal_ranks(&xs), &ordinal_ranks(&ys)))
}

/// Sorted null statistics t_1 ≤ ... ≤ t_J for sample size n.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingNullTable {
    pub n: usize,
    pub seed: u64,
    stats: Vec<f64>,
}

/// Monte-Carlo null of D from J independent uniform samples of size n.
///
/// D depends on the data only through ranks, so each replicate draws a
/// uniformly random pairing of ranks, which has the same law as ranking two
/// independent uniform samples. Replicate j uses its own stream, so the table
/// is identical for any thread count.
pub fn build_hoeffding_null(n: usize, replicates: usize, seed: u64) -> Result<HoeffdingNullTable> {
    if n < HOEFFDING_MIN_N {
        return domain(format!("Hoeffding null needs n >= {HOEFFDING_MIN_N}, got {n}"));
    }
    if replicates < MIN_TABLE_REPLICATES {
        return domain(format!(
            "Hoeffding null needs J >= {MIN_TABLE_REPLICATES}, got {replicates}"
        ));
    }
    let identity: Vec<usize> = (1..=n).collect();
    let mut stats: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map_init(
            || identity.clone(),
            |perm, j| {
                let mut rng = stream_rng(seed, j as u64);
                perm.copy_from_slice(&identity);
                perm.shuffle(&mut rng);
                hoeffding_from_ranks(&identity, perm)
            },
        )
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(HoeffdingNullTable { n, seed, stats })
}

/// Right-tail p-value (1 + #{t_j ≥ d}) / (J + 1).
pub fn hoeffding_pvalue(d: f64, table: &HoeffdingNullTable) -> PValue {
    table.pvalue(d)
}

impl HoeffdingNullTable {
    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    /// Number of null replicates (J).
    pub fn replicates(&self) -> usize {
        self.stats.len()
    }

    pub fn pvalue(&self, d: f64) -> PValue {
        let ge = self.stats.len() - self.stats.partition_point(|&t| t < d);
        PValue::clipped((1 + ge) as f64 / (self.stats.len() + 1) as f64)
    }

    /// Cache file name for (n, J, seed).
    pub fn file_name(n: usize, replicates: usize, seed: u64) -> String {
        format!("hoeffding_n{n}_J{replicates}_seed{seed}.csv")
    }

    /// Header line `n,J,seed,statistic_count`, a value line, then one
    /// statistic per line in shortest round-trip form.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            writeln!(w, "n,J,seed,statistic_count")?;
            writeln!(
                w,
                "{},{},{},{}",
                self.n,
                self.stats.len(),
                self.seed,
                self.stats.len()
            )?;
            for t in &self.stats {
                writeln!(w, "{t:?}")?;
            }
            w.flush()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut lines = BufReader::new(fs::File::open(path)?).lines();
        let bad = |m: &str| UpcError::Parse(format!("{}: {m}", path.display()));
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        if header.trim() != "n,J,seed,statistic_count" {
            return Err(bad("unexpected header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing metadata"))??;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(bad("metadata needs 4 fields"));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let n = parse_usize(fields[0])?;
        let replicates = parse_usize(fields[1])?;
        let seed = fields[2].parse::<u64>().map_err(|_| bad("bad seed"))?;
        let count = parse_usize(fields[3])?;
        let stats = lines
            .map(|l| {
                l.map_err(UpcError::from)
                    .and_then(|l| l.trim().parse::<f64>().map_err(|_| bad("bad statistic")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if stats.len() != count || count != replicates {
            return Err(bad("statistic count mismatch"));
        }
        if stats.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(bad("statistics not sorted"));
        }
        Ok(Self { n, seed, stats })
    }

    /// Loads `(n, J, seed)` from `dir` if cached, otherwise builds and saves it.
    /// Returns the table and whether it was freshly built.
    pub fn load_or_build(
        dir: &Path,
        n: usize,
        replicates: usize,
        seed: u64,
    ) -> Result<(Self, bool)> {
        let path: PathBuf = dir.join(Self::file_name(n, replicates, seed));
        if path.exists() {
            match Self::load(&path) {
                Ok(t) if t.n == n && t.seed == seed && t.replicates() == replicates => {
                    return Ok((t, false))
                }
                Ok(_) | Err(_) => log::warn!("rebuilding invalid cache {}", path.display()),
            }
        }
        let table = build_hoeffding_null(n, replicates, seed)?;
        fs::create_dir_all(dir)?;
        table.save(&path)?;
        Ok((table, true))
    }

    /// Cached table when `cache` is given, otherwise built in memory.
    pub fn obtain(cache: Option<&Path>, n: usize, replicates: usize, seed: u64) -> Result<Self> {
        match cache {
            Some(dir) => Ok(Self::load_or_build(dir, n, replicates, seed)?.0),
            None => build_hoeffding_null(n, replicates, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stat_tests::ks_distance;
    use proptest::prelude::*;
    use rand::Rng;

    /// Independent oracle: the U-statistic average of Hoeffding's kernel over
    /// all ordered 5-tuples of distinct indices.
    fn brute_force_d(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let ind = |a: f64, b: f64| if a >= b { 1.0 } else { 0.0 };
        let (mut total, mut count) = (0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        for e in 0..n {
                            let idx = [a, b, c, d, e];
                            let distinct = (0..5).all(|i| (i + 1..5).all(|j| idx[i] != idx[j]));
                            if !distinct {
                                continue;
                            }
                            let phi = (ind(x[a], x[b]) - ind(x[a], x[c]))
                                * (ind(x[a], x[d]) - ind(x[a], x[e]))
                                * (ind(y[a], y[b]) - ind(y[a], y[c]))
                                * (ind(y[a], y[d]) - ind(y[a], y[e]));
                            total += phi / 4.0;
                            count += 1.0;
                        }
                    }
                }
            }
        }
        total / count
    }

    #[test]
    fn comonotone_and_countermonotone_reach_maximum() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let d = hoeffding_statistic(&x, &x).unwrap();
        assert!((d - brute_force_d(&x, &x)).abs() < 1e-15);
        assert!((d - 1.0 / 30.0).abs() < 1e-15);
        assert_eq!(hoeffding_statistic(&x, &rev).unwrap(), d);
    }

    #[test]
    fn matches_u_statistic_oracle() {
        let mut rng = rng_from_seed(11);
        for _ in 0..5 {
            let x: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            let y: Vec<f64> = x.iter().map(|&a| a + rng.random::<f64>()).collect();
            let fast = hoeffding_statistic(&x, &y).unwrap();
            assert!((fast - brute_force_d(&x, &y)).abs() < 1e-14);
        }
    }

    #[test]
    fn input_errors() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(hoeffding_statistic(&x, &x).is_err());
        let c = [1.0; 6];
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(hoeffding_statistic(&c, &v).is_err());
        assert!(hoeffding_statistic(&v, &v[..5]).is_err());
    }

    #[test]
    fn ties_are_jittered_deterministically() {
        let x = [0.1, 0.2, 0.2, 0.4, 0.5, 0.6];
        let y = [0.3, 0.1, 0.6, 0.2, 0.5, 0.4];
        let a = hoeffding_statistic(&x, &y).unwrap();
        assert_eq!(a, hoeffding_statistic(&x, &y).unwrap());
    }

    #[test]
    fn null_mean_near_zero() {
        let mut rng = rng_from_seed(21);
        let ds: Vec<f64> = (0..10_000)
            .map(|_| {
                let x: Vec<f64> = (0..20).map(|_| rng.random()).collect();
                let y: Vec<f64> = (0..20).map(|_| rng.random()).collect();
                hoeffding_statistic(&x, &y).unwrap()
            })
            .collect();
        let m = ds.iter().sum::<f64>() / ds.len() as f64;
        let sd = (ds.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (ds.len() - 1) as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (ds.len() as f64).sqrt());
    }

    #[test]
    fn table_is_deterministic_and_validated() {
        let a = build_hoeffding_null(12, 2000, 3).unwrap();
        let b = build_hoeffding_null(12, 2000, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates(), 2000);
        assert!(a.stats().windows(2).all(|w| w[0] <= w[1]));
        assert_ne!(a, build_hoeffding_null(12, 2000, 4).unwrap());
        assert!(build_hoeffding_null(4, 2000, 3).is_err());
        assert!(build_hoeffding_null(12, 999, 3).is_err());
    }

    #[test]
    fn pvalue_edges() {
        let t = build_hoeffding_null(10, 1000, 9).unwrap();
        assert_eq!(t.pvalue(-1.0).value(), 1.0);
        assert_eq!(t.pvalue(1.0).value(), 1.0 / 1001.0);
        let med = t.stats()[500];
        assert!((t.pvalue(med).value() - 0.5).abs() < 0.05);
    }

    #[test]
    fn null_pvalues_uniform_on_fresh_pairs() {
        let n = 30;
        let table = build_hoeffding_null(n, 100_000, 17).unwrap();
        let mut rng = rng_from_seed(18);
        let ps: Vec<f64> = (0..20_000)
            .map(|_| {
                let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                table.pvalue(hoeffding_statistic(&x, &y).unwrap()).value()
            })
            .collect();
        assert!(ks_distance(&ps).unwrap() < 0.02);
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (t, built) = HoeffdingNullTable::load_or_build(dir.path(), 15, 1500, 5).unwrap();
        assert!(built);
        let (t2, built2) = HoeffdingNullTable::load_or_build(dir.path(), 15, 1500, 5).unwrap();
        assert!(!built2);
        assert_eq!(t.stats().len(), t2.stats().len());
        assert!(t
            .stats()
            .iter()
            .zip(t2.stats())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_maps(
            pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 6..30)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(!has_ties(&x) && !has_ties(&y));
            let d = hoeffding_statistic(&x, &y).unwrap();
            let x2: Vec<f64> = x.iter().map(|a| a.exp() * 3.0 + 1.0).collect();
            let y2: Vec<f64> = y.iter().map(|a| a.powi(3)).collect();
            prop_assert_eq!(d, hoeffding_statistic(&x2, &y2).unwrap());
            prop_assert!((-1.0 / 60.0 - 1e-15..=1.0 / 30.0 + 1e-15).contains(&d));
        }

        #[test]
        fn pvalue_nonincreasing(d1 in -0.02f64..0.04, d2 in -0.02f64..0.04) {
            let t = build_hoeffding_null(8, 1000, 2).unwrap();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(t.pvalue(lo).value() >= t.pvalue(hi).value());
        }
    }
}
