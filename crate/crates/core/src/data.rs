//! Input-space bounds and observed datasets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box bounds for the input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("bounds must have dimension >= 1".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "invalid bound pair [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit box `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit box is valid")
    }

    /// The symmetric box `[-half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    /// Largest per-dimension extent; useful for scale heuristics.
    pub fn max_range(&self) -> f64 {
        (0..self.dim()).map(|d| self.range(d)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (lo, hi))| *xi >= *lo && *xi <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (xi, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    /// Uniform draw from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| if hi > lo { rng.gen_range(*lo..*hi) } else { *lo })
            .collect()
    }
}

/// Ordered collection of (input, noisy observation) pairs plus the box they live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    bounds: Bounds,
}

impl Dataset {
    pub fn new(bounds: Bounds) -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            bounds,
        }
    }

    pub fn from_pairs(bounds: Bounds, inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        let mut data = Self::new(bounds);
        if inputs.len() != outputs.len() {
            return Err(Error::Data(format!(
                "inputs ({}) and outputs ({}) differ in length",
                inputs.len(),
                outputs.len()
            )));
        }
        for (x, y) in inputs.into_iter().zip(outputs) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.dim(),
                got: x.len(),
            });
        }
        if !self.bounds.contains(&x) {
            return Err(Error::Data(format!("input {x:?} lies outside the bounds")));
        }
        if !y.is_finite() {
            return Err(Error::Data(format!("non-finite observation {y}")));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn output_mean(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.outputs.iter().sum::<f64>() / self.len() as f64
        }
    }

    pub fn output_variance(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let mean = self.output_mean();
        self.outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_mismatched_bounds() {
        assert!(Bounds::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn degenerate_bounds_sample_to_the_point() {
        let b = Bounds::new(vec![0.5, 0.0], vec![0.5, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = b.sample(&mut rng);
        assert_eq!(x[0], 0.5);
        assert!((0.0..=1.0).contains(&x[1]));
    }

    #[test]
    fn dataset_rejects_out_of_bounds_and_non_finite() {
        let mut data = Dataset::new(Bounds::unit(2));
        assert!(data.push(vec![0.2, 0.4], 1.0).is_ok());
        assert!(data.push(vec![1.5, 0.0], 1.0).is_err());
        assert!(data.push(vec![0.1, 0.1], f64::INFINITY).is_err());
        assert!(data.push(vec![0.1], 1.0).is_err());
        assert_eq!(data.len(), 1);
    }
}
