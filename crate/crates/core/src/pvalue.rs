use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// A p-value: finite and within [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PValue<S = f64>(S);

impl<S: Scalar> PValue<S> {
    pub fn new(value: S) -> Result<Self> {
        if value.is_finite() && value >= S::zero() && value <= S::one() {
            Ok(Self(value))
        } else {
            domain(format!("p-value out of range: {value:?}"))
        }
    }

    /// Clips a computed probability into [0, 1]. Panics on NaN.
    pub(crate) fn clipped(value: S) -> Self {
        assert!(!value.is_nan(), "NaN p-value");
        Self(value.max(S::zero()).min(S::one()))
    }

    pub fn value(self) -> S {
        self.0
    }
}

impl<S: Scalar + fmt::Display> fmt::Display for PValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Wraps a slice of raw values, failing on the first invalid entry.
pub fn pvalues<S: Scalar>(raw: &[S]) -> Result<Vec<PValue<S>>> {
    raw.iter().map(|&p| PValue::new(p)).collect()
}
