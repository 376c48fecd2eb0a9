//! The Hilbert tensor `T[i₁, …, i_d] = 1 / (i₁ + … + i_d)` with 1-based indices.

use crate::error::Result;
use crate::oracle::TensorAction;
use crate::shape::Shape;

/// Hilbert tensor whose actions are computed from the entry formula without
/// storing any entries.
///
/// The entries depend only on the index sum, so the non-free inputs are first
/// convolved into a single weight per sum. An action costs `O(d N²)`.
#[derive(Debug, Clone)]
pub struct HilbertTensor {
    shape: Shape,
}

impl HilbertTensor {
    pub fn new(shape: Shape) -> Self {
        Self { shape }
    }

    /// Entry at a 1-based multi-index.
    pub fn entry_one_based(idx: &[usize]) -> f64 {
        1.0 / idx.iter().sum::<usize>() as f64
    }

    /// Entry at a 0-based multi-index.
    pub fn entry(idx: &[usize]) -> f64 {
        1.0 / (idx.iter().sum::<usize>() + idx.len()) as f64
    }
}

impl TensorAction for HilbertTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.shape.check_action(free_mode, inputs)?;
        // conv[s] weighs the 0-based index sum s of the non-free modes
        let mut conv = vec![1.0];
        for x in inputs {
            let mut next = vec![0.0; conv.len() + x.len() - 1];
            for (s, &c) in conv.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for (i, &xi) in x.iter().enumerate() {
                    next[s + i] += c * xi;
                }
            }
            conv = next;
        }
        let d = self.shape.order();
        Ok((0..self.shape.dim(free_mode))
            .map(|i| {
                conv.iter()
                    .enumerate()
                    .map(|(s, &c)| c / (i + s + d) as f64)
                    .sum()
            })
            .collect())
    }
}
