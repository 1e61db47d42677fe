//! Normal distribution truncated to [lo, hi].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::{norm_cdf, norm_ppf, norm_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormal {
    pub m: f64,
    pub s: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncNormal {
    pub fn new(m: f64, s: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(m.is_finite() && s.is_finite() && s > 0.0 && lo < hi) {
            return domain(format!("invalid truncated normal ({m}, {s}, [{lo}, {hi}])"));
        }
        let tn = Self { m, s, lo, hi };
        if tn.mass() < 1e-300 {
            return domain(format!("truncation interval [{lo}, {hi}] carries no normal mass"));
        }
        Ok(tn)
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.m) / self.s
    }

    /// Normal mass of [lo, hi], computed in the tail that avoids cancellation.
    fn mass(&self) -> f64 {
        let (a, b) = (self.z(self.lo), self.z(self.hi));
        if a > 0.0 {
            norm_sf(a) - norm_sf(b)
        } else if b < 0.0 {
            norm_cdf(b) - norm_cdf(a)
        } else {
            1.0 - norm_cdf(a) - norm_sf(b)
        }
    }
}

/// CDF of the truncated normal, clipped to [0, 1].
pub fn tn_cdf(x: f64, tn: &TruncNormal) -> f64 {
    if x <= tn.lo {
        return 0.0;
    }
    if x >= tn.hi {
        return 1.0;
    }
    let (a, b, z) = (tn.z(tn.lo), tn.z(tn.hi), tn.z(x));
    let mass = tn.mass();
    let f = if z <= 0.0 {
        (norm_cdf(z) - norm_cdf(a)) / mass
    } else {
        1.0 - (norm_sf(z) - norm_sf(b)) / mass
    };
    f.clamp(0.0, 1.0)
}

/// Inverse CDF. The target normal probability is formed from whichever end
/// keeps it small, so the quantile stays accurate in both tails.
pub fn tn_inv_cdf(u: f64, tn: &TruncNormal) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("truncated-normal quantile needs u in (0, 1), got {u}"));
    }
    let (a, b) = (tn.z(tn.lo), tn.z(tn.hi));
    let mass = tn.mass();
    let lower = norm_cdf(a) + u * mass;
    let z = if lower <= 0.5 {
        norm_ppf(lower)
    } else {
        -norm_ppf(norm_sf(b) + (1.0 - u) * mass)
    };
    Ok((tn.m + tn.s * z).clamp(tn.lo, tn.hi))
}
