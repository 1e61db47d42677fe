//! Combining per-draw p-values across dependent posterior draws, and
//! multiple-testing adjustment of the combined values.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, UpcError};
use crate::pvalue::PValue;
use crate::scalar::Scalar;
use crate::special::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Cauchy,
    Fisher,
}

impl Combiner {
    pub fn as_str(self) -> &'static str {
        match self {
            Combiner::Cauchy => "cauchy",
            Combiner::Fisher => "fisher",
        }
    }
}

/// Clamps a p-value away from 0 and 1, logging when it had to move an exact
/// boundary value.
fn clamp_p<S: Scalar>(p: S) -> S {
    let eps = S::pvalue_eps();
    if p <= S::zero() || p >= S::one() {
        log::debug!("p-value {p:?} on the boundary clamped by {eps:?}");
    }
    p.max(eps).min(S::one() - eps)
}

/// tan((0.5 - p) π), evaluated through the smaller of p and 1 - p so small
/// p-values keep their relative precision.
fn cauchy_score<S: Scalar>(p: S) -> S {
    let half = S::lit(0.5);
    if p <= half {
        (p * S::PI()).tan().recip()
    } else {
        -((S::one() - p) * S::PI()).tan().recip()
    }
}

/// Cauchy combination p* = 1 - F(mean_t tan((0.5 - p_t) π)) with F the
/// standard Cauchy CDF. Valid under arbitrary dependence between draws.
pub fn cauchy_combine<S: Scalar>(p: &[PValue<S>]) -> Result<PValue<S>> {
    if p.is_empty() {
        return domain("Cauchy combination of an empty list");
    }
    let sum = p
        .iter()
        .fold(S::zero(), |acc, q| acc + cauchy_score(clamp_p(q.value())));
    let x = sum / S::from_usize_lossy(p.len());
    // 1 - F(x) = atan(1/x)/π for x > 0 keeps precision far in the tail.
    let tail = if x > S::zero() {
        x.recip().atan() / S::PI()
    } else {
        S::lit(0.5) + (-x).atan() / S::PI()
    };
    Ok(PValue::clipped(tail))
}

/// Fisher's method: chi-square(2m) survival of -2 Σ ln p. Needs independent
/// p-values.
pub fn fisher_combine(p: &[PValue]) -> Result<PValue> {
    if p.is_empty() {
        return domain("Fisher combination of an empty list");
    }
    let stat: f64 = p.iter().map(|q| -2.0 * q.value().max(f64::MIN_POSITIVE).ln()).sum();
    Ok(PValue::clipped(chi2_sf(2.0 * p.len() as f64, stat)))
}

pub fn combine(p: &[PValue], method: Combiner) -> Result<PValue> {
    match method {
        Combiner::Cauchy => cauchy_combine(p),
        Combiner::Fisher => fisher_combine(p),
    }
}

fn ascending_order<S: Scalar>(p: &[PValue<S>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].value().partial_cmp(&p[b].value()).unwrap());
    order
}

/// Holm step-down adjusted p-values, in the input order.
pub fn holm_adjust<S: Scalar>(p: &[PValue<S>]) -> Vec<PValue<S>> {
    let m = p.len();
    let order = ascending_order(p);
    let mut out = vec![PValue::clipped(S::one()); m];
    let mut running = S::zero();
    for (i, &k) in order.iter().enumerate() {
        let scaled = p[k].value() * S::from_usize_lossy(m - i);
        running = running.max(scaled).min(S::one());
        out[k] = PValue::clipped(running);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BhMode {
    Independent,
    /// Benjamini–Yekutieli: scaled by the harmonic number H_m.
    Dependent,
}

/// Benjamini–Hochberg step-up adjusted p-values, in the input order.
pub fn bh_adjust<S: Scalar>(p: &[PValue<S>], mode: BhMode) -> Vec<PValue<S>> {
    let m = p.len();
    let factor = match mode {
        BhMode::Independent => S::one(),
        BhMode::Dependent => (1..=m).fold(S::zero(), |acc, i| acc + S::from_usize_lossy(i).recip()),
    };
    let order = ascending_order(p);
    let mut out = vec![PValue::clipped(S::one()); m];
    let mut running = S::one();
    for (i, &k) in order.iter().enumerate().rev() {
        let scaled = p[k].value() * (factor * S::from_usize_lossy(m) / S::from_usize_lossy(i + 1));
        running = running.min(scaled);
        out[k] = PValue::clipped(running);
    }
    out
}

/// Per-draw p-values of one test and their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub test_name: String,
    pub per_draw_p: Vec<PValue>,
    pub p_star: PValue,
    pub method: Combiner,
}

impl TestOutcome {
    pub fn new(test_name: impl Into<String>, per_draw_p: Vec<PValue>, method: Combiner) -> Result<Self> {
        let p_star = combine(&per_draw_p, method)?;
        Ok(Self {
            test_name: test_name.into(),
            per_draw_p,
            p_star,
            method,
        })
    }

    /// Number of draws (T).
    pub fn draws(&self) -> usize {
        self.per_draw_p.len()
    }

    /// Recomputes p* from the per-draw values and compares.
    pub fn is_consistent(&self) -> bool {
        combine(&self.per_draw_p, self.method).is_ok_and(|p| p == self.p_star)
    }

    pub fn summary(&self) -> AggregatedResult {
        AggregatedResult {
            test_name: self.test_name.clone(),
            draws: self.draws(),
            method: self.method,
            p_star: self.p_star.value(),
            adjusted_p: None,
            family_id: None,
        }
    }
}

/// Serialized form of an aggregated test result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedResult {
    pub test_name: String,
    #[serde(rename = "T")]
    pub draws: usize,
    pub method: Combiner,
    #[serde(serialize_with = "crate::io::ser_f64")]
    pub p_star: f64,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "crate::io::ser_opt_f64")]
    pub adjusted_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_id: Option<String>,
}

/// Attaches Holm-adjusted values to a family of results.
pub fn adjust_family(results: &mut [AggregatedResult], family_id: &str) {
    let raw: Vec<PValue> = results.iter().map(|r| PValue::clipped(r.p_star)).collect();
    for (r, adj) in results.iter_mut().zip(holm_adjust(&raw)) {
        r.adjusted_p = Some(adj.value());
        r.family_id = Some(family_id.to_string());
    }
}

/// Pre-registered split of a total Type I error budget over ordered rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSpendingPlan {
    total_alpha: f64,
    rounds: Vec<(String, f64)>,
    next: usize,
    ledger: Vec<RoundDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundDecision {
    pub round: String,
    pub alpha: f64,
    pub adjusted_p: Vec<f64>,
    pub reject: Vec<bool>,
    pub remaining_alpha: f64,
}

impl AlphaSpendingPlan {
    pub fn new(total_alpha: f64, rounds: Vec<(String, f64)>) -> Result<Self> {
        if !(total_alpha > 0.0 && total_alpha < 1.0) {
            return domain(format!("total alpha must lie in (0, 1), got {total_alpha}"));
        }
        if rounds.is_empty() {
            return domain("alpha spending plan needs at least one round");
        }
        if let Some((l, a)) = rounds.iter().find(|(_, a)| !(*a > 0.0)) {
            return domain(format!("round {l} has non-positive alpha {a}"));
        }
        for (i, (l, _)) in rounds.iter().enumerate() {
            if rounds[..i].iter().any(|(k, _)| k == l) {
                return domain(format!("duplicate round label {l}"));
            }
        }
        let sum: f64 = rounds.iter().map(|(_, a)| a).sum();
        if (sum - total_alpha).abs() > 1e-12 {
            return domain(format!("round alphas sum to {sum}, not {total_alpha}"));
        }
        Ok(Self {
            total_alpha,
            rounds,
            next: 0,
            ledger: Vec::new(),
        })
    }

    /// Splits `total_alpha` evenly over the given rounds.
    pub fn even(total_alpha: f64, labels: &[&str]) -> Result<Self> {
        let share = total_alpha / labels.len().max(1) as f64;
        Self::new(total_alpha, labels.iter().map(|l| (l.to_string(), share)).collect())
    }

    pub fn total_alpha(&self) -> f64 {
        self.total_alpha
    }

    pub fn rounds(&self) -> &[(String, f64)] {
        &self.rounds
    }

    pub fn ledger(&self) -> &[RoundDecision] {
        &self.ledger
    }

    pub fn remaining(&self) -> f64 {
        self.rounds[self.next..].iter().map(|(_, a)| a).sum()
    }

    /// Runs one round: Holm within the round at the round's alpha.
    pub fn spend_alpha(&mut self, round: &str, p_star: &[PValue]) -> Result<RoundDecision> {
        let Some(pos) = self.rounds.iter().position(|(l, _)| l == round) else {
            return domain(format!("unknown round {round}"));
        };
        if pos < self.next {
            return Err(UpcError::State(format!("round {round} already spent")));
        }
        if pos > self.next {
            return Err(UpcError::State(format!(
                "round {round} used before round {}",
                self.rounds[self.next].0
            )));
        }
        let alpha = self.rounds[pos].1;
        let adjusted = holm_adjust(p_star);
        self.next += 1;
        let decision = RoundDecision {
            round: round.to_string(),
            alpha,
            reject: adjusted.iter().map(|p| p.value() <= alpha).collect(),
            adjusted_p: adjusted.iter().map(|p| p.value()).collect(),
            remaining_alpha: self.remaining(),
        };
        self.ledger.push(decision.clone());
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvalue::pvalues;
    use proptest::prelude::*;

    fn ps(raw: &[f64]) -> Vec<PValue> {
        pvalues(raw).unwrap()
    }

    /// Direct evaluation 1 - (0.5 + atan(mean)/π), for moderate p only.
    fn cauchy_naive(raw: &[f64]) -> f64 {
        let m = raw.iter().map(|p| ((0.5 - p) * std::f64::consts::PI).tan()).sum::<f64>() / raw.len() as f64;
        0.5 - m.atan() / std::f64::consts::PI
    }

    #[test]
    fn cauchy_examples() {
        for &p in &[0.3, 0.5, 0.01, 1e-9, 0.999] {
            let c = cauchy_combine(&ps(&[p])).unwrap().value();
            assert!((c - p).abs() <= 4.0 * f64::EPSILON * p, "{p} -> {c}");
        }
        assert!((cauchy_combine(&ps(&[0.5, 0.5, 0.5])).unwrap().value() - 0.5).abs() < 1e-16);
        assert!((cauchy_combine(&ps(&[0.1, 0.9])).unwrap().value() - 0.5).abs() < 1e-15);
        let raw = [0.2, 0.7, 0.03, 0.45];
        assert!((cauchy_combine(&ps(&raw)).unwrap().value() - cauchy_naive(&raw)).abs() < 1e-12);
        assert!(cauchy_combine::<f64>(&[]).is_err());
    }

    #[test]
    fn cauchy_boundaries_are_clamped() {
        let c = cauchy_combine(&ps(&[0.0])).unwrap().value();
        assert!((c - 1e-15).abs() < 1e-27);
        let c = cauchy_combine(&ps(&[1.0])).unwrap().value();
        assert!(c < 1.0 && c > 0.999);
        // Tiny p-values dominate: mean of 1/(pπ) over two draws.
        let c = cauchy_combine(&ps(&[1e-12, 0.5])).unwrap().value();
        assert!((c / 2e-12 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cauchy_generic_f32() {
        let p: Vec<PValue<f32>> = pvalues(&[0.1f32, 0.9]).unwrap();
        assert!((cauchy_combine(&p).unwrap().value() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn fisher_examples() {
        assert_eq!(fisher_combine(&ps(&[1.0, 1.0])).unwrap().value(), 1.0);
        let x = 2.0 * 4f64.ln();
        let expect = (-x / 2.0).exp() * (1.0 + x / 2.0);
        assert!((fisher_combine(&ps(&[0.5, 0.5])).unwrap().value() - expect).abs() < 1e-12);
        assert!((expect - 0.5966).abs() < 1e-4);
        assert!((fisher_combine(&ps(&[0.137])).unwrap().value() - 0.137).abs() < 1e-12);
        assert!(fisher_combine(&[]).is_err());
    }

    #[test]
    fn holm_five_test_family() {
        let adj: Vec<f64> = holm_adjust(&ps(&[1.67e-7, 0.72, 8.47e-3, 0.68, 1.81e-11]))
            .iter()
            .map(|p| p.value())
            .collect();
        assert!((adj[0] / 6.69e-7 - 1.0).abs() < 0.01);
        assert!((adj[4] / 9.07e-11 - 1.0).abs() < 0.01);
        assert!((adj[2] - 3.0 * 8.47e-3).abs() < 1e-15);
        assert_eq!((adj[2] * 100.0).round() / 100.0, 0.03);
        assert_eq!(adj[1], 1.0);
        assert_eq!(adj[3], 1.0);
    }

    #[test]
    fn holm_small_cases() {
        assert_eq!(holm_adjust(&ps(&[0.03])), ps(&[0.03]));
        let adj = holm_adjust(&ps(&[0.02, 0.02, 0.02]));
        assert!(adj.iter().all(|p| (p.value() - 0.06).abs() < 1e-15));
        let adj = holm_adjust(&ps(&[0.4, 0.4, 0.4]));
        assert!(adj.iter().all(|p| p.value() == 1.0));
        // Doubling a single p-value: two-test family with one null result.
        let adj = holm_adjust(&ps(&[3.41e-7, 0.9]));
        assert!((adj[0].value() - 6.82e-7).abs() < 1e-18);
    }

    #[test]
    fn bh_examples() {
        for mode in [BhMode::Independent, BhMode::Dependent] {
            assert_eq!(bh_adjust(&ps(&[0.013]), mode), ps(&[0.013]));
        }
        let adj = bh_adjust(&ps(&[0.05, 0.05, 0.05]), BhMode::Independent);
        assert!(adj.iter().all(|p| (p.value() - 0.05).abs() < 1e-15));
        let ind = bh_adjust(&ps(&[0.01, 0.04]), BhMode::Independent);
        let dep = bh_adjust(&ps(&[0.01, 0.04]), BhMode::Dependent);
        assert!((ind[0].value() - 0.02).abs() < 1e-15 && (ind[1].value() - 0.04).abs() < 1e-15);
        for (i, d) in ind.iter().zip(&dep) {
            assert!((d.value() - (1.5 * i.value()).min(1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_spending_rounds() {
        let mut plan = AlphaSpendingPlan::even(0.2, &["first", "second"]).unwrap();
        assert!(plan.rounds().iter().all(|(_, a)| (a - 0.1).abs() < 1e-15));
        let d = plan.spend_alpha("first", &ps(&[0.05])).unwrap();
        assert_eq!(d.reject, vec![true]);
        assert!((d.remaining_alpha - 0.1).abs() < 1e-15);
        assert!(matches!(plan.spend_alpha("first", &[]), Err(UpcError::State(_))));
        assert!(matches!(plan.spend_alpha("third", &[]), Err(UpcError::Domain(_))));
        let d = plan.spend_alpha("second", &[]).unwrap();
        assert!(d.reject.is_empty());
        assert_eq!(d.remaining_alpha, 0.0);
        assert_eq!(plan.ledger().len(), 2);
    }

    #[test]
    fn alpha_spending_order_and_validation() {
        let mut plan = AlphaSpendingPlan::even(0.2, &["a", "b"]).unwrap();
        assert!(matches!(plan.spend_alpha("b", &[]), Err(UpcError::State(_))));
        // Holm within the round: 0.06 * 2 exceeds 0.1.
        let d = plan.spend_alpha("a", &ps(&[0.07, 0.06])).unwrap();
        assert_eq!(d.reject, vec![false, false]);
        let d = plan.spend_alpha("b", &ps(&[0.04, 0.11])).unwrap();
        assert_eq!(d.reject, vec![true, false]);
        assert!(AlphaSpendingPlan::new(0.2, vec![("a".into(), 0.1), ("b".into(), 0.05)]).is_err());
        assert!(AlphaSpendingPlan::new(1.2, vec![("a".into(), 1.2)]).is_err());
        assert!(AlphaSpendingPlan::new(0.1, vec![("a".into(), 0.1), ("a".into(), 0.0)]).is_err());
    }

    #[test]
    fn outcome_is_recomputable() {
        let o = TestOutcome::new("p_mu", ps(&[0.2, 0.4, 0.9]), Combiner::Cauchy).unwrap();
        assert!(o.is_consistent());
        assert_eq!(o.draws(), 3);
        let json = serde_json::to_string(&o.summary()).unwrap();
        assert!(json.starts_with(r#"{"test_name":"p_mu","T":3,"method":"cauchy","p_star":"#));
        assert!(!json.contains("adjusted_p"));
    }

    fn pvec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..30)
    }

    proptest! {
        #[test]
        fn cauchy_monotone_and_symmetric(raw in pvec(), k in any::<prop::sample::Index>(), bump in 0.0f64..1.0) {
            let base = cauchy_combine(&ps(&raw)).unwrap().value();
            let mut rev = raw.clone();
            rev.reverse();
            let r = cauchy_combine(&ps(&rev)).unwrap().value();
            prop_assert!((r - base).abs() <= 1e-12 * base.max(1e-300) + 1e-15);
            let i = k.index(raw.len());
            let mut up = raw.clone();
            up[i] = up[i] + (1.0 - up[i]) * bump;
            prop_assert!(cauchy_combine(&ps(&up)).unwrap().value() >= base * (1.0 - 1e-12));
            prop_assert!(base > 0.0 && base < 1.0);
        }

        #[test]
        fn adjustments_dominate_and_keep_order(raw in pvec()) {
            let p = ps(&raw);
            for adj in [holm_adjust(&p), bh_adjust(&p, BhMode::Independent), bh_adjust(&p, BhMode::Dependent)] {
                for i in 0..raw.len() {
                    prop_assert!(adj[i].value() >= raw[i] && adj[i].value() <= 1.0);
                    for j in 0..raw.len() {
                        if raw[i] < raw[j] {
                            prop_assert!(adj[i].value() <= adj[j].value());
                        }
                    }
                }
            }
        }
    }
}
