//! `σ₁(T) = max_{‖x‖=1} ‖T(x, …, x, ·)‖` by a shifted symmetric power method
//! on `x ↦ ‖T(x, …, x, ·)‖²`.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use ttpeel_core::linalg::{dot, norm2};
use ttpeel_core::TensorAction;

use crate::error::{HovdError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma1Options {
    pub n_starts: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for Sigma1Options {
    fn default() -> Self {
        Self {
            n_starts: 5,
            tol: 1e-8,
            max_iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma1Estimate {
    pub value: f64,
    /// At least one start met the tolerance.
    pub converged: bool,
    pub iterations: usize,
}

struct Objective<'a, T: ?Sized> {
    t: &'a T,
    k: usize,
}

impl<T: TensorAction + ?Sized> Objective<'_, T> {
    /// `y = T(x, …, x, ·)`
    fn image(&self, x: &[f64]) -> Result<Vec<f64>> {
        let inputs = vec![x; self.k];
        Ok(self.t.act(self.k, &inputs)?)
    }

    /// `(1/k) Σ_j T(x, …, ·_j, …, x, y)`, half the gradient of `‖y‖²` over `k`.
    fn gradient(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        let mut inputs: Vec<&[f64]> = vec![x; self.k - 1];
        inputs.push(y);
        for j in 0..self.k {
            let v = self.t.act(j, &inputs)?;
            for (a, b) in g.iter_mut().zip(&v) {
                *a += b / self.k as f64;
            }
        }
        Ok(g)
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm2(&v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    for x in &mut v {
        *x /= n;
    }
    Some(v)
}

/// Distance between unit vectors up to sign.
fn gap(a: &[f64], b: &[f64]) -> f64 {
    let (mut p, mut m) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        p += (x - y).powi(2);
        m += (x + y).powi(2);
    }
    p.min(m).sqrt()
}

/// Estimates `σ₁` of a tensor whose modes `0 … k−1` share one size.
///
/// Each start runs `x ← normalize(g(x) + αx)`; the shift `α` starts at zero
/// and becomes `max(2α, λ)` whenever a step fails to increase
/// `λ = ‖T(x, …, x, ·)‖²`, after which the step is retried.
pub fn sigma1_estimate<T: TensorAction + ?Sized>(t: &T, options: &Sigma1Options) -> Result<Sigma1Estimate> {
    let dims = t.shape().dims();
    let k = dims.len() - 1;
    let n = dims[0];
    if dims[..k].iter().any(|&d| d != n) {
        return Err(HovdError::Config(format!(
            "derivative modes must share one size, got shape {}",
            t.shape()
        )));
    }
    let f = Objective { t, k };
    let mut best = 0.0f64;
    let mut any_converged = false;
    let mut total = 0;
    for start in 0..options.n_starts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(start as u64);
        let draw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let Some(mut x) = normalize(draw) else { continue };
        let mut y = f.image(&x)?;
        let mut lambda = dot(&y, &y);
        let mut alpha = 0.0f64;
        let mut converged = false;
        for _ in 0..options.max_iterations {
            total += 1;
            let g = f.gradient(&x, &y)?;
            let (next, y_next, lambda_next) = loop {
                let step: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a + alpha * b).collect();
                let Some(cand) = normalize(step) else {
                    break (x.clone(), y.clone(), lambda);
                };
                let yc = f.image(&cand)?;
                let lc = dot(&yc, &yc);
                if lc >= lambda * (1.0 - 1e-14) || alpha > 1e12 * lambda.max(f64::MIN_POSITIVE) {
                    break (cand, yc, lc);
                }
                alpha = (2.0 * alpha).max(lambda);
            };
            let moved = gap(&next, &x);
            x = next;
            y = y_next;
            lambda = lambda_next;
            if moved < options.tol {
                converged = true;
                break;
            }
        }
        any_converged |= converged;
        best = best.max(lambda);
    }
    if !any_converged {
        warn!("sigma1: no start converged in {} iterations", options.max_iterations);
    }
    Ok(Sigma1Estimate {
        value: best.sqrt(),
        converged: any_converged,
        iterations: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ttpeel_core::{DenseTensor, Shape};

    #[test]
    fn rank_one_symmetric_tensor() {
        let v = [0.6, 0.8, 0.0];
        let w = [1.0, 0.0];
        let t = DenseTensor::from_fn(Shape::new(vec![3, 3, 3, 2]).unwrap(), |i| {
            -2.5 * v[i[0]] * v[i[1]] * v[i[2]] * w[i[3]]
        })
        .unwrap();
        let s = sigma1_estimate(&t, &Sigma1Options::default()).unwrap();
        assert!((s.value - 2.5).abs() < 1e-8, "{}", s.value);
        assert!(s.converged);
    }
}
