use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Largest number of entries a tensor may have before densification is refused.
pub const DENSE_ENTRY_LIMIT: u128 = 100_000_000;

/// Mode sizes `N_1 … N_d` of a tensor of order `d ≥ 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(CoreError::InvalidShape(format!(
                "tensor order must be at least 2, got {}",
                dims.len()
            )));
        }
        if let Some(k) = dims.iter().position(|&n| n == 0) {
            return Err(CoreError::InvalidShape(format!(
                "mode {} has size zero",
                k + 1
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Total number of entries, computed without overflow.
    pub fn num_entries(&self) -> u128 {
        self.dims.iter().map(|&n| n as u128).product()
    }

    pub fn max_dim(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    pub(crate) fn check_dense_limit(&self) -> Result<usize> {
        let entries = self.num_entries();
        if entries > DENSE_ENTRY_LIMIT {
            return Err(CoreError::Capacity {
                entries,
                limit: DENSE_ENTRY_LIMIT,
            });
        }
        Ok(entries as usize)
    }

    /// Validates the inputs of an action with `free_mode` left open.
    pub fn check_action(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<()> {
        let d = self.order();
        if free_mode >= d {
            return Err(CoreError::ShapeMismatch(format!(
                "free mode {} out of range for an order-{d} tensor",
                free_mode + 1
            )));
        }
        if inputs.len() != d - 1 {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} input vectors, got {}",
                d - 1,
                inputs.len()
            )));
        }
        for (slot, mode) in (0..d).filter(|&j| j != free_mode).enumerate() {
            if inputs[slot].len() != self.dims[mode] {
                return Err(CoreError::ShapeMismatch(format!(
                    "input for mode {} has length {}, expected {}",
                    mode + 1,
                    inputs[slot].len(),
                    self.dims[mode]
                )));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = CoreError;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.dims
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}
