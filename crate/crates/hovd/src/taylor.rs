//! Truncated Taylor surrogates `f̃_k(x) = f(0) + Σ_{j=1}^{k} (1/j!) T_j(x, …, x, ·)`
//! with every derivative tensor stored as a tensor train.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use ttpeel_core::linalg::norm2;
use ttpeel_core::{tt_apply, tt_from_actions, BuildConfig, BuildReport, TensorTrain};

use crate::engine::DerivativeEngine;
use crate::error::{HovdError, Result};
use crate::model::ImplicitModel;
use crate::newton::solve_state;
use crate::oracle::DerivativeOracle;
use crate::rd::Whitening;

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSurrogate {
    f0: Vec<f64>,
    /// `terms[j−1]` approximates the order-`j` derivative tensor.
    terms: Vec<TensorTrain>,
}

impl TaylorSurrogate {
    pub fn new(f0: Vec<f64>, terms: Vec<TensorTrain>) -> Result<Self> {
        for (j, t) in terms.iter().enumerate() {
            let dims = t.shape().dims();
            if dims.len() != j + 2 || *dims.last().unwrap() != f0.len() {
                return Err(HovdError::ShapeMismatch(format!(
                    "term {} has shape {}, expected order {} with output size {}",
                    j + 1,
                    t.shape(),
                    j + 2,
                    f0.len()
                )));
            }
        }
        Ok(Self { f0, terms })
    }

    pub fn max_order(&self) -> usize {
        self.terms.len()
    }

    pub fn base_value(&self) -> &[f64] {
        &self.f0
    }

    pub fn terms(&self) -> &[TensorTrain] {
        &self.terms
    }

    /// `f̃_order(x)`.
    pub fn eval(&self, x: &[f64], order: usize) -> Result<Vec<f64>> {
        Ok(self.eval_all(x, order)?.pop().unwrap())
    }

    /// `[f̃_0(x), …, f̃_order(x)]`.
    pub fn eval_all(&self, x: &[f64], order: usize) -> Result<Vec<Vec<f64>>> {
        if order > self.terms.len() {
            return Err(HovdError::Config(format!(
                "order {order} requested but the surrogate stops at order {}",
                self.terms.len()
            )));
        }
        let mut acc = self.f0.clone();
        let mut out = vec![acc.clone()];
        let mut factorial = 1.0;
        for j in 1..=order {
            factorial *= j as f64;
            let inputs = vec![x; j];
            let v = tt_apply(&self.terms[j - 1], j, &inputs)?;
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += b / factorial;
            }
            out.push(acc.clone());
        }
        Ok(out)
    }
}

/// Builds derivative trains of orders `1 … max_order` at the engine's base
/// point. Order 1 is a matrix and goes through the randomized SVD path.
pub fn build_taylor<M: ImplicitModel>(
    engine: &Arc<DerivativeEngine<M>>,
    whitening: Option<&Arc<Whitening>>,
    max_order: usize,
    config: &BuildConfig,
) -> Result<(TaylorSurrogate, Vec<BuildReport>)> {
    let mut terms = Vec::with_capacity(max_order);
    let mut reports = Vec::with_capacity(max_order);
    for j in 1..=max_order {
        let oracle = DerivativeOracle::new(Arc::clone(engine), j, whitening.cloned())?;
        let mut cfg = config.clone();
        if let ttpeel_core::RankSpec::Fixed(r) = &config.ranks {
            cfg.ranks = ttpeel_core::RankSpec::Fixed(vec![r[0]; j]);
        }
        cfg.seed = config.seed.wrapping_add(j as u64);
        let (tt, report) = tt_from_actions(&oracle, &cfg)?;
        terms.push(tt);
        reports.push(report);
        engine.clear_cache();
    }
    Ok((TaylorSurrogate::new(engine.base_output(), terms)?, reports))
}

/// The whitened parameter-to-output map `x ↦ F(u(W x))`.
pub fn whitened_map<'a, M: ImplicitModel>(
    model: &'a M,
    whitening: Option<&'a Whitening>,
) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a {
    move |x| {
        let m = match whitening {
            Some(w) => w.apply(x)?,
            None => x.to_vec(),
        };
        let state = solve_state(model, &m)?;
        Ok(model.output(&m, &state.u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub order: usize,
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorErrors {
    pub stats: Vec<OrderStats>,
    /// `errors[s][k]`: normalized error of order `k` on sample `s`.
    pub errors: Vec<Vec<f64>>,
    /// `E ‖f(x) − f(0)‖` over the samples.
    pub normalizer: f64,
}

/// Normalized errors `‖f(x) − f̃_k(x)‖ / E‖f(x) − f(0)‖` for `x ∼ N(0, I)`.
/// The normalizer is the sample mean, so the order-0 mean is exactly one.
pub fn taylor_error_stats<F>(surrogate: &TaylorSurrogate, f: F, dim: usize, n_samples: usize, seed: u64) -> Result<TaylorErrors>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n_samples == 0 {
        return Err(HovdError::Config("need at least one sample".into()));
    }
    let k = surrogate.max_order();
    let mut raw = Vec::with_capacity(n_samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fx = f(&x)?;
        let approx = surrogate.eval_all(&x, k)?;
        raw.push(
            approx
                .iter()
                .map(|a| norm2(&fx.iter().zip(a).map(|(p, q)| p - q).collect::<Vec<_>>()))
                .collect::<Vec<f64>>(),
        );
    }
    let normalizer = raw.iter().map(|e| e[0]).sum::<f64>() / n_samples as f64;
    if normalizer == 0.0 {
        return Err(HovdError::Config("map is constant on every sample".into()));
    }
    let errors: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|e| e.into_iter().map(|v| v / normalizer).collect())
        .collect();
    let stats = (0..=k)
        .map(|order| {
            let col: Vec<f64> = errors.iter().map(|e| e[order]).collect();
            let mean = col.iter().sum::<f64>() / n_samples as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n_samples as f64;
            OrderStats {
                order,
                mean,
                std: var.sqrt(),
                n_samples,
            }
        })
        .collect();
    Ok(TaylorErrors {
        stats,
        errors,
        normalizer,
    })
}
