//! The generative-model contract: θ = g_p(U_{1:K}), Y = g_d(U_{K+1:D}; θ).

use rand::Rng;

use crate::error::{domain, Result};
use crate::udraw::{LabelSchema, UDraw};

pub trait GenerativeModel {
    type Params: Clone;
    type Data: Clone;

    /// Labels of the full u-vector, parameters first.
    fn schema(&self) -> &LabelSchema;

    /// Parameter u-value count K.
    fn num_params(&self) -> usize {
        self.schema().num_params()
    }

    /// Total u-value count D.
    fn dim(&self) -> usize {
        self.schema().len()
    }

    fn sample_params(&self, u: &[f64]) -> Result<Self::Params>;

    fn sample_data(&self, u: &[f64], params: &Self::Params) -> Result<Self::Data>;

    fn recover_param_uvalues<R: Rng + ?Sized>(
        &self,
        params: &Self::Params,
        data: &Self::Data,
        rng: &mut R,
    ) -> Result<Vec<f64>>;

    fn recover_data_uvalues<R: Rng + ?Sized>(
        &self,
        params: &Self::Params,
        data: &Self::Data,
        rng: &mut R,
    ) -> Result<Vec<f64>>;

    /// Whether recovery is a deterministic inverse of g.
    fn deterministic_recovery(&self) -> bool;

    /// Full u-vector of (θ, Y) as a labeled draw.
    fn udraw<R: Rng + ?Sized>(
        &self,
        params: &Self::Params,
        data: &Self::Data,
        rng: &mut R,
    ) -> Result<UDraw> {
        let mut u = self.recover_param_uvalues(params, data, rng)?;
        u.extend(self.recover_data_uvalues(params, data, rng)?);
        UDraw::new(u, self.schema().clone())
    }

    /// Draws (θ, Y) from the model by pushing i.i.d. uniforms through g.
    fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Self::Params, Self::Data)> {
        let u: Vec<f64> = (0..self.dim()).map(|_| open_unit(rng)).collect();
        self.from_uvalues(&u)
    }

    /// g(u) for a full u-vector.
    fn from_uvalues(&self, u: &[f64]) -> Result<(Self::Params, Self::Data)> {
        if u.len() != self.dim() {
            return domain(format!("expected {} u-values, got {}", self.dim(), u.len()));
        }
        let k = self.num_params();
        let params = self.sample_params(&u[..k])?;
        let data = self.sample_data(&u[k..], &params)?;
        Ok((params, data))
    }
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
