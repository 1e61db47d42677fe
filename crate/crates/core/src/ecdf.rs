use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// Default number of grid points for tilted-CDF exports.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// `points` equally spaced values covering [0, 1], endpoints included.
pub fn unit_grid<S: Scalar>(points: usize) -> Vec<S> {
    assert!(points >= 2, "grid needs both endpoints");
    let last = S::from_usize_lossy(points - 1);
    (0..points)
        .map(|j| S::from_usize_lossy(j) / last)
        .collect()
}

fn sorted_finite<S: Scalar>(values: &[S]) -> Result<Vec<S>> {
    if values.is_empty() {
        return domain("empirical CDF of an empty sample");
    }
    if values.iter().any(|v| v.is_nan()) {
        return domain("NaN in empirical CDF sample");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

fn check_ascending<S: Scalar>(grid: &[S]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return domain("grid must be ascending");
    }
    Ok(())
}

/// Empirical CDF F̂(g) = (1/n) #{v ≤ g} at each grid point.
pub fn ecdf<S: Scalar>(values: &[S], grid: &[S]) -> Result<Vec<S>> {
    let sorted = sorted_finite(values)?;
    check_ascending(grid)?;
    let n = S::from_usize_lossy(sorted.len());
    Ok(grid
        .iter()
        .map(|&g| S::from_usize_lossy(sorted.partition_point(|&v| v <= g)) / n)
        .collect())
}

/// F̂(u) - u on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedCdfCurve<S = f64> {
    pub grid: Vec<S>,
    pub values: Vec<S>,
}

pub fn tilted_ecdf<S: Scalar>(values: &[S], grid: &[S]) -> Result<TiltedCdfCurve<S>> {
    if grid.iter().any(|&g| !(g >= S::zero() && g <= S::one())) {
        return domain("tilted CDF grid must lie in [0, 1]");
    }
    let f = ecdf(values, grid)?;
    Ok(TiltedCdfCurve {
        grid: grid.to_vec(),
        values: f.iter().zip(grid).map(|(&fv, &g)| fv - g).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[0.5], &[0.0, 0.5, 1.0]).unwrap(), vec![0.0, 1.0, 1.0]);
        assert_eq!(ecdf(&[0.2, 0.8], &[0.5]).unwrap(), vec![0.5]);
        assert_eq!(ecdf(&[0.1, 0.1, 0.9], &[0.1]).unwrap(), vec![2.0 / 3.0]);
        assert!(ecdf::<f64>(&[], &[0.5]).is_err());
        assert!(ecdf(&[0.5], &[0.6, 0.1]).is_err());
    }

    #[test]
    fn tilted_examples() {
        assert_eq!(tilted_ecdf(&[0.5], &[0.0, 1.0]).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(tilted_ecdf(&[0.25, 0.75], &[0.5]).unwrap().values, vec![0.0]);
        assert_eq!(tilted_ecdf(&[0.1, 0.2, 0.3], &[0.5]).unwrap().values, vec![0.5]);
        assert!(tilted_ecdf(&[0.5], &[1.5]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let t = tilted_ecdf(&[0.1f32, 0.2, 0.3], &[0.5f32]).unwrap();
        assert_eq!(t.values, vec![0.5f32]);
    }

    #[test]
    fn default_grid_shape() {
        let g: Vec<f64> = unit_grid(DEFAULT_GRID_POINTS);
        assert_eq!(g.len(), 512);
        assert_eq!((g[0], g[511]), (0.0, 1.0));
    }

    proptest! {
        #[test]
        fn tilted_is_ecdf_minus_grid(values in prop::collection::vec(1e-9f64..1.0, 1..50)) {
            let grid: Vec<f64> = unit_grid(33);
            let f = ecdf(&values, &grid).unwrap();
            let t = tilted_ecdf(&values, &grid).unwrap();
            for j in 0..grid.len() {
                prop_assert!((t.values[j] - (f[j] - grid[j])).abs() <= 1e-15);
                prop_assert!(t.values[j] >= -1.0 && t.values[j] <= 1.0);
            }
            prop_assert!(f.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(t.values[0], 0.0);
            prop_assert_eq!(t.values[32], 0.0);
        }
    }
}
