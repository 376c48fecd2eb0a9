//! The experiments behind each subcommand, as plain functions returning
//! serializable results.

use std::sync::Arc;
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use ttpeel_core::linalg::norm2;
use ttpeel_core::shape::DENSE_ENTRY_LIMIT;
use ttpeel_core::{
    random_tt, relative_error, relative_error_entries, tt_from_actions, tt_svd, ActionOracle, BuildConfig,
    HilbertTensor, Shape, StreamedTtSvd, TensorAction, TensorTrain, Truncation,
};
use ttpeel_hovd::{
    build_taylor, compress_to_tolerance, make_derivative_oracle, relative_sigma1_error, sigma1_estimate,
    taylor_error_stats, whitened_map, DerivativeEngine, ImplicitModel, OrderStats, RankTrial, ReactionDiffusion,
    Sigma1Options, Whitening,
};

use crate::error::{CliError, Result};

/// Builder settings shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSettings {
    pub p: usize,
    pub tau_extra: usize,
    pub seed: u64,
}

impl Default for BuildSettings {
    fn default() -> Self {
        Self {
            p: 5,
            tau_extra: 1,
            seed: 0,
        }
    }
}

impl BuildSettings {
    fn config(&self, ranks: Vec<usize>, seed: u64) -> BuildConfig {
        BuildConfig::fixed(ranks, seed)
            .with_oversampling(self.p)
            .with_tau_extra(self.tau_extra)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rsvd,
    Svd,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rsvd => "rsvd",
            Method::Svd => "svd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rsvd" => Ok(Method::Rsvd),
            "svd" => Ok(Method::Svd),
            other => Err(CliError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertConfig {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub methods: Vec<Method>,
}

impl Default for HilbertConfig {
    fn default() -> Self {
        Self {
            dims: vec![41, 42, 43, 44, 45],
            ranks: (2..=10).collect(),
            methods: vec![Method::Rsvd, Method::Svd],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilbertRow {
    pub rank: usize,
    pub method: Method,
    pub rel_error: f64,
    /// Oracle actions; zero for the entry-based SVD.
    pub actions: u64,
    #[serde(skip)]
    pub seconds: f64,
}

/// Relative errors of action-based and SVD-based trains of the Hilbert
/// tensor at uniform ranks.
pub fn hilbert_experiment(cfg: &HilbertConfig, build: &BuildSettings) -> Result<Vec<HilbertRow>> {
    let shape = Shape::new(cfg.dims.clone())?;
    if shape.order() < 3 && cfg.methods.contains(&Method::Svd) {
        return Err(CliError::Config("the Hilbert study needs at least three modes".into()));
    }
    let d = shape.order();
    let hilbert = HilbertTensor::new(shape.clone());
    let r_max = cfg.ranks.iter().copied().max().unwrap_or(0);
    let svd = if cfg.methods.contains(&Method::Svd) {
        let t = Instant::now();
        let s = StreamedTtSvd::new(&shape, HilbertTensor::entry, r_max)?;
        info!("streamed first unfolding in {:.1}s", t.elapsed().as_secs_f64());
        Some(s)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &r in &cfg.ranks {
        for &method in &cfg.methods {
            let t = Instant::now();
            let (tt, actions) = match method {
                Method::Rsvd => {
                    let oracle = ActionOracle::new(&hilbert);
                    let (tt, report) = tt_from_actions(&oracle, &build.config(vec![r; d - 1], build.seed))?;
                    debug_assert_eq!(report.total_actions(), oracle.calls());
                    (tt, oracle.calls())
                }
                Method::Svd => (svd.as_ref().unwrap().train(&vec![r; d - 1])?, 0),
            };
            let rel_error = relative_error_entries(&tt, HilbertTensor::entry)?;
            let seconds = t.elapsed().as_secs_f64();
            info!("hilbert rank {r} {}: {rel_error:.3e} ({seconds:.1}s)", method.name());
            rows.push(HilbertRow {
                rank: r,
                method,
                rel_error,
                actions,
                seconds,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub shape: Vec<usize>,
    pub true_ranks: Vec<usize>,
    pub build_ranks: Vec<usize>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            shape: vec![20; 5],
            true_ranks: vec![4, 5, 6, 4],
            build_ranks: vec![4, 5, 6, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub shape: Vec<usize>,
    pub true_ranks: Vec<usize>,
    pub build_ranks: Vec<usize>,
    pub ranks: Vec<usize>,
    pub relative_error: f64,
    /// `entries` when the error is exact, `probes` for a Monte-Carlo estimate.
    pub error_method: String,
    /// TT-SVD error of the true tensor at the build ranks, when densifiable.
    pub tt_svd_error: Option<f64>,
    pub actions: u64,
    pub predicted_actions: u64,
    pub per_stage_actions: Vec<u64>,
    pub pass: bool,
    pub seed: u64,
}

/// Number of random action probes when the tensor is too large to stream.
const ERROR_PROBES: u64 = 64;

fn probe_error(truth: &TensorTrain, approx: &TensorTrain, seed: u64) -> Result<f64> {
    let dims = truth.shape().dims();
    let d = dims.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for s in 0..ERROR_PROBES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        let vecs: Vec<Vec<f64>> = dims[..d - 1]
            .iter()
            .map(|&n| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let inputs: Vec<&[f64]> = vecs.iter().map(|v| v.as_slice()).collect();
        let a = truth.act(d - 1, &inputs)?;
        let b = approx.act(d - 1, &inputs)?;
        num += a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        den += a.iter().map(|x| x * x).sum::<f64>();
    }
    Ok((num / den).sqrt())
}

/// Rebuilds a random train from its actions and measures the error.
pub fn synthetic_experiment(cfg: &SyntheticConfig, build: &BuildSettings) -> Result<SyntheticReport> {
    let shape = Shape::new(cfg.shape.clone())?;
    let truth = random_tt(&shape, &cfg.true_ranks, build.seed)?;
    let oracle = ActionOracle::new(&truth);
    let config = build.config(cfg.build_ranks.clone(), build.seed.wrapping_add(1));
    let (tt, report) = tt_from_actions(&oracle, &config)?;
    let densifiable = shape.num_entries() <= DENSE_ENTRY_LIMIT;
    let (relative_error_value, error_method) = if densifiable {
        (relative_error(&truth.to_dense()?, &tt.to_dense()?)?, "entries")
    } else {
        (probe_error(&truth, &tt, build.seed)?, "probes")
    };
    let below_truth = cfg.build_ranks.iter().zip(&cfg.true_ranks).any(|(b, t)| b < t);
    let tt_svd_error = if below_truth && densifiable {
        let dense = truth.to_dense()?;
        let best = tt_svd(&dense, &Truncation::Ranks(cfg.build_ranks.clone()))?;
        Some(relative_error(&dense, &best.to_dense()?)?)
    } else {
        None
    };
    Ok(SyntheticReport {
        shape: cfg.shape.clone(),
        true_ranks: cfg.true_ranks.clone(),
        build_ranks: cfg.build_ranks.clone(),
        ranks: report.ranks.clone(),
        relative_error: relative_error_value,
        error_method: error_method.into(),
        tt_svd_error,
        actions: oracle.calls(),
        predicted_actions: report.predicted_actions,
        per_stage_actions: report.per_stage_actions.clone(),
        pass: relative_error_value < 1e-6,
        seed: build.seed,
    })
}

/// Model settings, also accepted as a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n: usize,
    pub order: usize,
    pub rank: usize,
    pub p: usize,
    pub seed: u64,
    pub whiten: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 8,
            order: 2,
            rank: 10,
            p: 5,
            seed: 0,
            whiten: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeConfig {
    pub n: usize,
    pub order: usize,
    /// Fixed rank; ignored when `eps` is set.
    pub rank: usize,
    pub eps: Option<f64>,
    pub r_start: usize,
    pub r_max: usize,
    pub whiten: bool,
    pub sigma_starts: usize,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        Self {
            n: 8,
            order: 2,
            rank: 10,
            eps: None,
            r_start: 2,
            r_max: 40,
            whiten: true,
            sigma_starts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub n: usize,
    pub order: usize,
    pub whiten: bool,
    pub eps: Option<f64>,
    pub rank: usize,
    pub ranks: Vec<usize>,
    pub relative_sigma1_error: f64,
    pub sigma1: f64,
    pub met_tolerance: Option<bool>,
    pub trials: Vec<RankTrial>,
    pub builder_actions: u64,
    pub oracle_actions: u64,
    pub forward_solves: u64,
    pub adjoint_solves: u64,
    pub seed: u64,
}

fn model_at_zero(n: usize, whiten: bool) -> Result<(Arc<DerivativeEngine<ReactionDiffusion>>, Option<Arc<Whitening>>)> {
    let rd = ReactionDiffusion::new(n)?;
    let whitening = if whiten {
        Some(Arc::new(Whitening::new(&rd)?))
    } else {
        None
    };
    let m = vec![0.0; rd.param_dim()];
    Ok((Arc::new(DerivativeEngine::new(rd, m)?), whitening))
}

/// Compresses the order-`k` derivative tensor at `m = 0`, either at a fixed
/// rank or by searching for the smallest rank meeting `eps`.
pub fn derivative_experiment(cfg: &DerivativeConfig, build: &BuildSettings) -> Result<DerivativeReport> {
    let (engine, whitening) = model_at_zero(cfg.n, cfg.whiten)?;
    let oracle = make_derivative_oracle(&engine, cfg.order, whitening.as_ref())?;
    let d = cfg.order + 1;
    let options = Sigma1Options {
        n_starts: cfg.sigma_starts,
        seed: build.seed,
        ..Sigma1Options::default()
    };
    let base = build.config(vec![cfg.rank; d - 1], build.seed);
    let (train, report, sigma1, rel, met, trials) = match cfg.eps {
        Some(eps) => {
            let c = compress_to_tolerance(&oracle, eps, cfg.r_start, cfg.r_max, &base, &options)?;
            (c.train, c.report, c.sigma1, c.relative_error, Some(c.met_tolerance), c.trials)
        }
        None => {
            let (tt, report) = tt_from_actions(&oracle, &base)?;
            let sigma1 = sigma1_estimate(&oracle, &options)?.value;
            let rel = relative_sigma1_error(&oracle, &tt, sigma1, &options)?;
            let trial = RankTrial {
                rank: cfg.rank,
                relative_error: rel,
                actions: report.total_actions(),
            };
            (tt, report, sigma1, rel, None, vec![trial])
        }
    };
    let counts = engine.counts();
    Ok(DerivativeReport {
        n: cfg.n,
        order: cfg.order,
        whiten: cfg.whiten,
        eps: cfg.eps,
        rank: train.ranks().into_iter().max().unwrap_or(0),
        ranks: train.ranks(),
        relative_sigma1_error: rel,
        sigma1,
        met_tolerance: met,
        trials,
        builder_actions: report.total_actions(),
        oracle_actions: counts.actions,
        forward_solves: counts.forward_solves,
        adjoint_solves: counts.adjoint_solves,
        seed: build.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorConfig {
    pub n: usize,
    pub max_order: usize,
    pub rank: usize,
    pub n_samples: usize,
    pub whiten: bool,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        Self {
            n: 12,
            max_order: 3,
            rank: 10,
            n_samples: 200,
            whiten: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub stats: Vec<OrderStats>,
    /// `errors[s][k]`
    pub errors: Vec<Vec<f64>>,
    pub normalizer: f64,
    pub build_actions: Vec<u64>,
    pub ranks: Vec<Vec<usize>>,
}

/// Taylor surrogates of orders `0 … max_order` and their normalized errors.
pub fn taylor_experiment(cfg: &TaylorConfig, build: &BuildSettings) -> Result<TaylorReport> {
    if cfg.max_order == 0 {
        return Err(CliError::Config("max_order must be at least 1".into()));
    }
    let (engine, whitening) = model_at_zero(cfg.n, cfg.whiten)?;
    let config = build.config(vec![cfg.rank], build.seed);
    let (surrogate, reports) = build_taylor(&engine, whitening.as_ref(), cfg.max_order, &config)?;
    let f = whitened_map(engine.model(), whitening.as_deref());
    let errors = taylor_error_stats(
        &surrogate,
        f,
        engine.model().param_dim(),
        cfg.n_samples,
        build.seed.wrapping_add(0x5EED),
    )?;
    let f0 = surrogate.base_value();
    debug_assert!(norm2(f0) > 0.0);
    Ok(TaylorReport {
        stats: errors.stats,
        errors: errors.errors,
        normalizer: errors.normalizer,
        build_actions: reports.iter().map(|r| r.total_actions()).collect(),
        ranks: surrogate.terms().iter().map(|t| t.ranks()).collect(),
    })
}
