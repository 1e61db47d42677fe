//! Labeled u-vectors: one posterior draw of U = (U_1, ..., U_D) and sets of
//! such draws conditioned on a single dataset.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, UpcError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[serde(rename = "param")]
    Parameter,
    Data,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Parameter => "param",
            Role::Data => "data",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrataValue {
    Num(f64),
    Cat(String),
}

impl fmt::Display for StrataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrataValue::Num(x) => write!(f, "{x}"),
            StrataValue::Cat(s) => f.write_str(s),
        }
    }
}

/// Identifies one coordinate of the u-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ULabel {
    pub role: Role,
    pub name: String,
    pub index: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub strata: BTreeMap<String, StrataValue>,
}

impl ULabel {
    pub fn param(name: impl Into<String>, index: usize) -> Self {
        Self {
            role: Role::Parameter,
            name: name.into(),
            index,
            strata: BTreeMap::new(),
        }
    }

    pub fn data(name: impl Into<String>, index: usize) -> Self {
        Self {
            role: Role::Data,
            name: name.into(),
            index,
            strata: BTreeMap::new(),
        }
    }

    pub fn with_stratum(mut self, key: impl Into<String>, value: StrataValue) -> Self {
        self.strata.insert(key.into(), value);
        self
    }

    pub fn stratum(&self, key: &str) -> Option<&StrataValue> {
        self.strata.get(key)
    }
}

/// Validated, shared label vector. Cloning is a reference-count bump, so a
/// draw set of any size stores its labels once.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSchema(Arc<[ULabel]>);

impl LabelSchema {
    pub fn new(labels: Vec<ULabel>) -> Result<Self> {
        if labels.is_empty() {
            return domain("label schema must have at least one entry");
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert((l.role, l.name.as_str(), l.index)) {
                return domain(format!(
                    "duplicate label ({}, {}, {})",
                    l.role, l.name, l.index
                ));
            }
            for (k, v) in &l.strata {
                if let StrataValue::Num(x) = v {
                    if !x.is_finite() {
                        return domain(format!("non-finite stratum {k} on {}", l.name));
                    }
                }
            }
        }
        Ok(Self(labels.into()))
    }

    pub fn labels(&self) -> &[ULabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of parameter u-values (K).
    pub fn num_params(&self) -> usize {
        self.0.iter().filter(|l| l.role == Role::Parameter).count()
    }

    pub fn position(&self, role: Role, name: &str, index: usize) -> Option<usize> {
        self.0
            .iter()
            .position(|l| l.role == role && l.name == name && l.index == index)
    }

    fn same_as(&self, other: &LabelSchema) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

/// Clamp `x` into `[eps, 1 - eps]`.
pub fn clamp_unit<S: Scalar>(x: S, eps: S) -> Result<S> {
    if !(eps > S::zero() && eps < S::lit(0.5)) {
        return domain(format!("clamp eps must lie in (0, 0.5), got {eps:?}"));
    }
    if !x.is_finite() {
        return domain(format!("cannot clamp non-finite value {x:?}"));
    }
    Ok(x.max(eps).min(S::one() - eps))
}

/// One posterior draw of the full u-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UDraw<S = f64> {
    values: Vec<S>,
    schema: LabelSchema,
}

impl<S: Scalar> UDraw<S> {
    /// Builds a draw, clamping every value into `[eps, 1 - eps]` with
    /// `eps = S::unit_eps()`.
    pub fn new(values: Vec<S>, schema: LabelSchema) -> Result<Self> {
        if values.len() != schema.len() {
            return domain(format!(
                "draw has {} values but schema has {} labels",
                values.len(),
                schema.len()
            ));
        }
        let eps = S::unit_eps();
        let values = values
            .into_iter()
            .map(|v| clamp_unit(v, eps))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values, schema })
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn labels(&self) -> &[ULabel] {
        self.schema.labels()
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, role: Role, name: &str, index: usize) -> Option<S> {
        self.schema
            .position(role, name, index)
            .map(|i| self.values[i])
    }

    /// Values of all data u-values, in label order.
    pub fn data_values(&self) -> Vec<S> {
        self.values_where(|l| l.role == Role::Data)
    }

    pub fn values_where(&self, pred: impl Fn(&ULabel) -> bool) -> Vec<S> {
        self.values
            .iter()
            .zip(self.labels())
            .filter(|(_, l)| pred(l))
            .map(|(v, _)| *v)
            .collect()
    }
}

/// Entries of `draw` whose labels satisfy `pred`, in label order.
pub fn select_uvalues<'a, S: Scalar>(
    draw: &'a UDraw<S>,
    pred: impl Fn(&ULabel) -> bool,
) -> Vec<(S, &'a ULabel)> {
    draw.values
        .iter()
        .zip(draw.labels())
        .filter(|(_, l)| pred(l))
        .map(|(v, l)| (*v, l))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: String,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
}

/// T draws conditioned on one dataset, sharing one label schema.
#[derive(Debug, Clone)]
pub struct UDrawSet<S = f64> {
    pub dataset_id: String,
    schema: LabelSchema,
    draws: Vec<UDraw<S>>,
    pub provenance: Provenance,
}

impl<S: Scalar> UDrawSet<S> {
    pub fn new(
        dataset_id: impl Into<String>,
        draws: Vec<UDraw<S>>,
        provenance: Provenance,
    ) -> Result<Self> {
        let Some(first) = draws.first() else {
            return domain("a draw set needs at least one draw");
        };
        let schema = first.schema.clone();
        if let Some(t) = draws.iter().position(|d| !d.schema.same_as(&schema)) {
            return Err(UpcError::Domain(format!(
                "draw {t} does not share the label schema of draw 0"
            )));
        }
        Ok(Self {
            dataset_id: dataset_id.into(),
            schema,
            draws,
            provenance,
        })
    }

    pub fn draws(&self) -> &[UDraw<S>] {
        &self.draws
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    /// Number of draws (T).
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Length of each u-vector (D).
    pub fn dim(&self) -> usize {
        self.schema.len()
    }
}
