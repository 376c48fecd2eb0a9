//! Random tensor trains for recovery experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CoreError, Result};
use crate::shape::Shape;
use crate::train::{TensorTrain, TtCore};

/// A train with i.i.d. standard normal cores, scaled to unit Frobenius norm.
pub fn random_tt(shape: &Shape, ranks: &[usize], seed: u64) -> Result<TensorTrain> {
    let d = shape.order();
    if ranks.len() != d - 1 {
        return Err(CoreError::Config(format!(
            "expected {} ranks, got {}",
            d - 1,
            ranks.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full = vec![1];
    full.extend_from_slice(ranks);
    full.push(1);
    let cores = (0..d)
        .map(|k| {
            let n = full[k] * shape.dim(k) * full[k + 1];
            let data = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            TtCore::new(full[k], shape.dim(k), full[k + 1], data)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tt = TensorTrain::new(cores)?;
    let norm = tt.frobenius_norm();
    if norm == 0.0 {
        return Err(CoreError::ZeroNorm);
    }
    tt.scale(1.0 / norm);
    Ok(tt)
}
