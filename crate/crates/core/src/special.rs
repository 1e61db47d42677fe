//! Special functions named by the distribution quantity they compute. The
//! normal CDF uses `libm`'s erfc (sub-ulp); incomplete gamma and beta come
//! from `statrs`.

use statrs::function::{beta, erf, gamma};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function, accurate in the upper tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Standard normal quantile: `statrs` starting value plus one Halley step
/// against the accurate CDF, working in whichever tail is smaller.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -lower_tail_ppf(1.0 - p);
    }
    lower_tail_ppf(p)
}

fn lower_tail_ppf(p: f64) -> f64 {
    let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let pdf = norm_pdf(x);
    if pdf <= 0.0 {
        return x;
    }
    let e = (norm_cdf(x) - p) / pdf;
    x - e / (1.0 + 0.5 * x * e)
}

/// Gamma(shape, rate) CDF.
pub fn gamma_cdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma::gamma_lr(shape, rate * x)
    }
}

/// Gamma(shape, rate) survival function.
pub fn gamma_sf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma::gamma_ur(shape, rate * x)
    }
}

pub fn gamma_ln_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - gamma::ln_gamma(shape)
}

/// Gamma(shape, rate) quantile.
pub fn gamma_ppf(shape: f64, rate: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return gamma_isf(shape, rate, 1.0 - p);
    }
    gamma_solve(shape, p, false) / rate
}

/// Gamma(shape, rate) inverse survival function: x with P(X > x) = q,
/// accurate for q near 0.
pub fn gamma_isf(shape: f64, rate: f64, q: f64) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if q > 0.5 {
        return gamma_ppf(shape, rate, 1.0 - q);
    }
    gamma_solve(shape, q, true) / rate
}

/// Unit-rate gamma quantile at tail probability `t` (upper tail when
/// `upper`). `statrs` start, then safeguarded Newton on the log tail
/// probability, which is close to linear in x far out.
fn gamma_solve(shape: f64, t: f64, upper: bool) -> f64 {
    use statrs::distribution::{ContinuousCDF, Gamma};
    let tail = |x: f64| {
        if upper {
            gamma::gamma_ur(shape, x)
        } else {
            gamma::gamma_lr(shape, x)
        }
    };
    let start = Gamma::new(shape, 1.0)
        .expect("valid gamma shape")
        .inverse_cdf(if upper { 1.0 - t } else { t });
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut x = if start.is_finite() && start > 0.0 { start } else { shape };
    let ln_t = t.ln();
    for _ in 0..200 {
        let f = tail(x);
        // residual increasing in x
        let r = if upper { ln_t - f.ln() } else { f.ln() - ln_t };
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = gamma_ln_pdf(shape, 1.0, x).exp() / f;
        let mut next = x - r / slope;
        if !(next >= lo && next <= hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1e-300) };
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return next;
        }
        x = next;
    }
    x
}

/// InvGamma(shape, scale) CDF, i.e. P(1/λ ≤ x) for λ ~ Gamma(shape, rate = scale).
pub fn inv_gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma::gamma_ur(shape, scale / x)
    }
}

/// Regularized incomplete beta, the Beta(a, b) CDF.
pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

/// InvGamma(shape, scale) quantile.
pub fn inv_gamma_ppf(shape: f64, scale: f64, u: f64) -> f64 {
    scale / gamma_isf(shape, 1.0, u)
}

/// Beta(a, b) quantile: `statrs` start plus safeguarded Newton steps.
pub fn beta_ppf(a: f64, b: f64, p: f64) -> f64 {
    use statrs::distribution::{Beta, ContinuousCDF};
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let mut x = Beta::new(a, b).expect("valid beta shapes").inverse_cdf(p);
    let ln_b = beta::ln_beta(a, b);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..20 {
        let r = beta_cdf(a, b, x) - p;
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_b).exp();
        let mut next = x - r / dens;
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_sf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma::gamma_ur(dof / 2.0, x / 2.0)
    }
}
