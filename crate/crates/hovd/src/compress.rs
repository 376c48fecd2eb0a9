//! Compressing a derivative tensor to a relative `σ₁` tolerance.

use serde::{Deserialize, Serialize};
use ttpeel_core::{tt_from_actions, BuildConfig, BuildReport, Difference, TensorAction, TensorTrain};

use crate::error::{HovdError, Result};
use crate::sigma1::{sigma1_estimate, Sigma1Options};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTrial {
    pub rank: usize,
    pub relative_error: f64,
    pub actions: u64,
}

#[derive(Debug, Clone)]
pub struct Compression {
    pub train: TensorTrain,
    pub report: BuildReport,
    pub rank: usize,
    /// `σ₁(T − T̃) / σ₁(T)` of the returned train.
    pub relative_error: f64,
    pub sigma1: f64,
    pub met_tolerance: bool,
    pub trials: Vec<RankTrial>,
}

/// `σ₁(T − T̃) / σ₁(T)` with `σ₁(T)` given.
pub fn relative_sigma1_error<A: TensorAction + ?Sized>(
    t: &A,
    approx: &TensorTrain,
    sigma_t: f64,
    options: &Sigma1Options,
) -> Result<f64> {
    let diff = Difference::new(t, approx)?;
    Ok(sigma1_estimate(&diff, options)?.value / sigma_t)
}

/// Builds at uniform rank `r = r_start, r_start + 1, …` until
/// `σ₁(T − T̃) / σ₁(T) < eps` or `r_max` is exhausted.
pub fn compress_to_tolerance<A: TensorAction + ?Sized>(
    t: &A,
    eps: f64,
    r_start: usize,
    r_max: usize,
    base: &BuildConfig,
    options: &Sigma1Options,
) -> Result<Compression> {
    if !(eps > 0.0) || r_start > r_max {
        return Err(HovdError::Config(format!(
            "need eps > 0 and r_start ≤ r_max, got eps {eps}, ranks {r_start}..{r_max}"
        )));
    }
    let d = t.shape().order();
    let sigma_t = sigma1_estimate(t, options)?.value;
    if sigma_t == 0.0 {
        return Err(HovdError::Config("tensor has zero σ₁".into()));
    }
    let mut trials = Vec::new();
    let mut last = None;
    for r in r_start..=r_max {
        let mut cfg = base.clone();
        cfg.ranks = ttpeel_core::RankSpec::Fixed(vec![r; d - 1]);
        let (tt, report) = tt_from_actions(t, &cfg)?;
        let err = relative_sigma1_error(t, &tt, sigma_t, options)?;
        trials.push(RankTrial {
            rank: r,
            relative_error: err,
            actions: report.total_actions(),
        });
        let met = err < eps;
        last = Some((tt, report, r, err));
        if met {
            break;
        }
    }
    let (train, report, rank, relative_error) = last.expect("at least one rank is tried");
    Ok(Compression {
        train,
        report,
        rank,
        relative_error,
        sigma1: sigma_t,
        met_tolerance: relative_error < eps,
        trials,
    })
}
