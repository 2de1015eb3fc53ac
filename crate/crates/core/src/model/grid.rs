use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized posterior masses on a rectangular parameter grid.
///
/// One axis for the CRM's `log θ`, two for the BLRM's `(log α, log β)`.
/// Masses are stored row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    pub axes: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl GridPosterior {
    /// Normalizes `exp(log_weights - max)` into masses.
    pub(crate) fn from_log_weights(axes: Vec<Vec<f64>>, log_weights: Vec<f64>) -> Result<Self> {
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::GridUnderflow);
        }
        let mut masses: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::GridUnderflow);
        }
        masses.iter_mut().for_each(|m| *m /= total);
        Ok(GridPosterior { axes, masses })
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Posterior mean of the first axis coordinate.
    pub fn mean_of_axis(&self, axis: usize) -> f64 {
        self.expect(|coords| coords[axis])
    }

    /// Marginal masses along one axis.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes[axis].len()];
        self.for_each_point(|idx, _, m| out[idx[axis]] += m);
        out
    }

    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_point(|_, coords, m| acc += m * f(coords));
        acc
    }

    fn for_each_point(&self, mut f: impl FnMut(&[usize], &[f64], f64)) {
        let dims: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let mut idx = vec![0usize; dims.len()];
        let mut coords: Vec<f64> = self.axes.iter().map(|a| a[0]).collect();
        for &m in &self.masses {
            f(&idx, &coords, m);
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    coords[ax] = self.axes[ax][idx[ax]];
                    break;
                }
                idx[ax] = 0;
                coords[ax] = self.axes[ax][0];
            }
        }
    }
}

/// `n` evenly spaced points spanning `center ± half_width`.
pub(crate) fn linspace(center: f64, half_width: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![center];
    }
    let step = 2.0 * half_width / (n - 1) as f64;
    (0..n).map(|i| center - half_width + i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_and_marginalizes() {
        let g = GridPosterior::from_log_weights(
            vec![vec![0.0, 1.0], vec![10.0, 20.0, 30.0]],
            vec![0.0, 0.0, 0.0, 1f64.ln(), 2f64.ln(), 3f64.ln()],
        )
        .unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-15);
        let m0 = g.marginal(0);
        assert!((m0[0] - 3.0 / 9.0).abs() < 1e-12);
        let m1 = g.marginal(1);
        assert!((m1[2] - 4.0 / 9.0).abs() < 1e-12);
        assert!((g.mean_of_axis(1) - (10.0 * 2.0 + 20.0 * 3.0 + 30.0 * 4.0) / 9.0).abs() < 1e-9);
    }

    #[test]
    fn underflow_is_an_error() {
        let r = GridPosterior::from_log_weights(vec![vec![0.0]], vec![f64::NEG_INFINITY]);
        assert_eq!(r, Err(Error::GridUnderflow));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 6.0, 2001);
        assert_eq!(v.len(), 2001);
        assert!((v[0] + 6.0).abs() < 1e-12 && (v[2000] - 6.0).abs() < 1e-12);
        assert!(v[1000].abs() < 1e-12);
    }
}
