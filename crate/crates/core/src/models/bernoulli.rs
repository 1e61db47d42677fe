//! i.i.d. Bernoulli(θ) trials with a Beta(a, b) prior. Data u-values come
//! from the randomized probability integral transform.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::GenerativeModel;
use crate::pvalue::PValue;
use crate::scalar::Scalar;
use crate::special::{beta_cdf, beta_ppf};
use crate::stat_tests::{ad_test, hoeffding_statistic, p_extreme, HoeffdingNullTable};
use crate::udraw::{LabelSchema, Role, UDraw, ULabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliPrior {
    pub a: f64,
    pub b: f64,
}

impl BernoulliPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return domain(format!("Beta shapes must be positive, got ({a}, {b})"));
        }
        Ok(Self { a, b })
    }

    pub fn uniform() -> Self {
        Self { a: 1.0, b: 1.0 }
    }

    pub fn jeffreys() -> Self {
        Self { a: 0.5, b: 0.5 }
    }

    /// Beta(1, 50).
    pub fn poorly_chosen() -> Self {
        Self { a: 1.0, b: 50.0 }
    }

    /// Named configuration: `uniform`, `jeffreys` or `poor`.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::uniform()),
            "jeffreys" => Ok(Self::jeffreys()),
            "poor" => Ok(Self::poorly_chosen()),
            other => domain(format!("unknown Beta prior `{other}`")),
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.a == 1.0 && self.b == 1.0
    }

    /// Prior CDF of θ; the identity under Beta(1, 1).
    pub fn cdf(&self, theta: f64) -> f64 {
        if self.is_uniform() {
            theta
        } else {
            beta_cdf(self.a, self.b, theta)
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        if self.is_uniform() {
            u
        } else {
            beta_ppf(self.a, self.b, u)
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Beta::new(self.a, self.b).expect("validated shapes").sample(rng)
    }
}

/// Converts 0/1 floats (as read from CSV) to binary outcomes.
pub fn binary_from_f64(y: &[f64]) -> Result<Vec<u8>> {
    y.iter()
        .map(|&v| match v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            v => domain(format!("non-binary value {v}")),
        })
        .collect()
}

fn check_binary(data: &[u8]) -> Result<()> {
    match data.iter().find(|&&y| y > 1) {
        Some(y) => domain(format!("non-binary value {y}")),
        None => Ok(()),
    }
}

/// Beta(a + Σy, b + n - Σy).
pub fn bb_update(prior: &BernoulliPrior, data: &[u8]) -> Result<BernoulliPrior> {
    check_binary(data)?;
    let s = data.iter().map(|&y| y as f64).sum::<f64>();
    BernoulliPrior::new(prior.a + s, prior.b + data.len() as f64 - s)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return domain(format!("theta must lie in (0, 1), got {theta}"));
    }
    Ok(())
}

/// Randomized PIT: Uniform(0, 1 - θ) when y = 0, Uniform(1 - θ, 1) when y = 1.
pub fn bb_data_uvalues<R: Rng + ?Sized>(theta: f64, data: &[u8], rng: &mut R) -> Result<Vec<f64>> {
    check_theta(theta)?;
    check_binary(data)?;
    let cut = 1.0 - theta;
    Ok(data
        .iter()
        .map(|&y| {
            let v: f64 = rng.random();
            if y == 1 {
                cut + theta * v
            } else {
                // keep strictly below the cut after rounding
                let u = cut * v;
                if u < cut {
                    u
                } else {
                    cut.next_down()
                }
            }
        })
        .collect())
}

fn bb_schema(n: usize) -> LabelSchema {
    let mut labels = vec![ULabel::param("theta", 0)];
    labels.extend((0..n).map(|i| ULabel::data("y", i)));
    LabelSchema::new(labels).expect("static Bernoulli schema is valid")
}

/// u-vector for one posterior draw of θ: F_Beta(a,b)(θ), then the data.
pub fn bb_uvalues<R: Rng + ?Sized>(
    theta: f64,
    prior: &BernoulliPrior,
    data: &[u8],
    rng: &mut R,
) -> Result<UDraw> {
    check_theta(theta)?;
    let mut u = vec![prior.cdf(theta)];
    u.extend(bb_data_uvalues(theta, data, rng)?);
    UDraw::new(u, bb_schema(data.len()))
}

/// Number of switches Σ 1(y_i ≠ y_{i+1}).
pub fn switch_count(data: &[u8]) -> usize {
    data.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    Lower,
    TwoSided,
}

/// Posterior predictive p-value of the switch count: one replicated dataset
/// per θ draw. Lower tail P(T(Y*) ≤ T(y)) by default.
pub fn ppc_switch_pvalue<R: Rng + ?Sized>(
    data: &[u8],
    theta_draws: &[f64],
    tail: Tail,
    rng: &mut R,
) -> Result<PValue> {
    check_binary(data)?;
    if data.len() < 2 {
        return domain("switch statistic needs n >= 2");
    }
    if theta_draws.is_empty() {
        return domain("PPC needs at least one posterior draw");
    }
    let observed = switch_count(data);
    let mut rep = vec![0u8; data.len()];
    let (mut le, mut ge) = (0usize, 0usize);
    for &theta in theta_draws {
        for y in rep.iter_mut() {
            *y = rng.random_bool(theta.clamp(0.0, 1.0)) as u8;
        }
        let t = switch_count(&rep);
        le += (t <= observed) as usize;
        ge += (t >= observed) as usize;
    }
    let s = theta_draws.len() as f64;
    let p = match tail {
        Tail::Lower => le as f64 / s,
        Tail::TwoSided => (2.0 * (le.min(ge) as f64) / s).min(1.0),
    };
    Ok(PValue::clipped(p))
}

pub const BB_TEST_NAMES: [&str; 3] = ["p_theta", "p_data_unif", "p_data_indep"];

/// Extremeness of θ, Anderson–Darling uniformity of the data u-values and
/// Hoeffding independence of consecutive data u-values. `lag1_table` must be
/// the null table for n - 1 pairs.
pub fn bb_test_suite(udraw: &UDraw, lag1_table: &HoeffdingNullTable) -> Result<[PValue; 3]> {
    let labels = udraw.labels();
    let ok = labels.len() >= 2
        && labels[0].name == "theta"
        && labels[1..].iter().all(|l| l.role == Role::Data);
    if !ok {
        return domain("draw does not follow the Bernoulli label schema (theta, y...)");
    }
    let v = udraw.values();
    let data = &v[1..];
    if lag1_table.n != data.len() - 1 {
        return domain(format!(
            "lag-1 test on {} pairs needs a null table for n = {}, got n = {}",
            data.len() - 1,
            data.len() - 1,
            lag1_table.n
        ));
    }
    let (x, y) = lag_pairs(data, 1)?;
    Ok([
        p_extreme(v[0])?,
        ad_test(data)?,
        lag1_table.pvalue(hoeffding_statistic(&x, &y)?),
    ])
}

/// Pairs (u_i, u_{i+lag}) in order.
pub fn lag_pairs<S: Scalar>(u: &[S], lag: usize) -> Result<(Vec<S>, Vec<S>)> {
    if lag == 0 || u.len() <= lag {
        return domain(format!("lag {lag} needs more than {lag} values, got {}", u.len()));
    }
    Ok((u[..u.len() - lag].to_vec(), u[lag..].to_vec()))
}

/// The Beta–Bernoulli model with n trials.
#[derive(Debug, Clone)]
pub struct BetaBernoulliModel {
    pub prior: BernoulliPrior,
    schema: LabelSchema,
}

impl BetaBernoulliModel {
    pub fn new(prior: BernoulliPrior, n: usize) -> Self {
        Self { prior, schema: bb_schema(n) }
    }

    pub fn n(&self) -> usize {
        self.schema.len() - 1
    }

    /// Same as [`bb_uvalues`] but shares this model's label schema.
    pub fn uvalues<R: Rng + ?Sized>(&self, theta: f64, data: &[u8], rng: &mut R) -> Result<UDraw> {
        if data.len() != self.n() {
            return domain(format!("expected {} observations, got {}", self.n(), data.len()));
        }
        check_theta(theta)?;
        let mut u = vec![self.prior.cdf(theta)];
        u.extend(bb_data_uvalues(theta, data, rng)?);
        UDraw::new(u, self.schema.clone())
    }
}

impl GenerativeModel for BetaBernoulliModel {
    type Params = f64;
    type Data = Vec<u8>;

    fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    fn sample_params(&self, u: &[f64]) -> Result<f64> {
        let [u1] = u else {
            return domain("Bernoulli model has one parameter u-value");
        };
        Ok(self.prior.quantile(*u1))
    }

    /// Y_i = 1(u_i ≥ 1 - θ).
    fn sample_data(&self, u: &[f64], theta: &f64) -> Result<Vec<u8>> {
        if u.len() != self.n() {
            return domain(format!("expected {} data u-values, got {}", self.n(), u.len()));
        }
        let cut = 1.0 - theta;
        Ok(u.iter().map(|&v| (v >= cut) as u8).collect())
    }

    fn recover_param_uvalues<R: Rng + ?Sized>(
        &self,
        theta: &f64,
        _data: &Vec<u8>,
        _rng: &mut R,
    ) -> Result<Vec<f64>> {
        check_theta(*theta)?;
        Ok(vec![self.prior.cdf(*theta)])
    }

    fn recover_data_uvalues<R: Rng + ?Sized>(
        &self,
        theta: &f64,
        data: &Vec<u8>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        bb_data_uvalues(*theta, data, rng)
    }

    fn deterministic_recovery(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::stat_tests::ad_test;

    #[test]
    fn update_examples() {
        let u = BernoulliPrior::uniform();
        assert_eq!(bb_update(&u, &[1, 0]).unwrap(), BernoulliPrior::new(2.0, 2.0).unwrap());
        let p = BernoulliPrior::poorly_chosen();
        assert_eq!(bb_update(&p, &[]).unwrap(), p);
        assert!(bb_update(&u, &[0, 2]).is_err());
        assert!(binary_from_f64(&[0.0, 1.0, 0.5]).is_err());
        assert_eq!(binary_from_f64(&[0.0, 1.0]).unwrap(), vec![0, 1]);
    }

    #[test]
    fn uvalue_intervals_and_identity_prior() {
        let mut rng = rng_from_seed(1);
        let d = bb_uvalues(0.5, &BernoulliPrior::uniform(), &[1, 0, 1], &mut rng).unwrap();
        assert_eq!(d.get(Role::Parameter, "theta", 0), Some(0.5));
        let data = d.data_values();
        assert!(data[0] > 0.5 && data[0] < 1.0);
        assert!(data[1] < 0.5);
        let d = bb_uvalues(0.3, &BernoulliPrior::uniform(), &[], &mut rng).unwrap();
        assert_eq!(d.values()[0], 0.3);
        let d = bb_uvalues(0.3, &BernoulliPrior::jeffreys(), &[], &mut rng).unwrap();
        assert!((d.values()[0] - beta_cdf(0.5, 0.5, 0.3)).abs() < 1e-15);
        assert!(bb_uvalues(1.0, &BernoulliPrior::uniform(), &[1], &mut rng).is_err());
    }

    #[test]
    fn randomized_pit_is_uniform_at_half() {
        let mut rng = rng_from_seed(2);
        let u: Vec<f64> = (0..10_000)
            .map(|_| {
                let y = rng.random_bool(0.5) as u8;
                bb_data_uvalues(0.5, &[y], &mut rng).unwrap()[0]
            })
            .collect();
        assert!(ad_test(&u).unwrap().value() > 0.001);
    }

    #[test]
    fn stochastic_recovery_reproduces_data() {
        let mut rng = rng_from_seed(4);
        for prior in [BernoulliPrior::uniform(), BernoulliPrior::jeffreys(), BernoulliPrior::poorly_chosen()] {
            let model = BetaBernoulliModel::new(prior, 40);
            for _ in 0..500 {
                let (theta, y) = model.simulate(&mut rng).unwrap();
                if !(theta > 0.0 && theta < 1.0) {
                    continue;
                }
                let d = model.udraw(&theta, &y, &mut rng).unwrap();
                let (theta2, y2) = model.from_uvalues(d.values()).unwrap();
                assert_eq!(y2, y);
                assert!((theta2 - theta).abs() < 1e-10);
            }
        }
        assert!(!BetaBernoulliModel::new(BernoulliPrior::uniform(), 3).deterministic_recovery());
    }

    #[test]
    fn switch_examples() {
        assert_eq!(switch_count(&[0, 0, 0]), 0);
        assert_eq!(switch_count(&[0, 1, 0]), 2);
        let mut rng = rng_from_seed(5);
        assert!(ppc_switch_pvalue(&[1], &[0.5], Tail::Lower, &mut rng).is_err());
        assert!(ppc_switch_pvalue(&[1, 0], &[], Tail::Lower, &mut rng).is_err());
        // Observed count at the maximum: the lower tail is certain.
        let alt: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        assert_eq!(ppc_switch_pvalue(&alt, &[0.5; 50], Tail::Lower, &mut rng).unwrap().value(), 1.0);
        let two = ppc_switch_pvalue(&alt, &[0.5; 50], Tail::TwoSided, &mut rng).unwrap().value();
        assert!(two < 0.05);
    }

    #[test]
    fn lag_pair_examples() {
        let (x, y) = lag_pairs(&[0.1, 0.2, 0.3], 1).unwrap();
        assert_eq!((x, y), (vec![0.1, 0.2], vec![0.2, 0.3]));
        let (x, y) = lag_pairs(&[0.1, 0.2, 0.3], 2).unwrap();
        assert_eq!((x, y), (vec![0.1], vec![0.3]));
        let u = vec![0.5f64; 100];
        assert_eq!(lag_pairs(&u, 1).unwrap().0.len(), 99);
        assert!(lag_pairs(&[0.1, 0.2], 2).is_err());
    }
}
