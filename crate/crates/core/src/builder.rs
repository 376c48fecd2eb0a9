//! Tensor-train construction from tensor actions by peeling off one core at
//! a time.
//!
//! Core 1 spans the range of `T(·, x₂, …, x_d)`. Every later core spans the
//! range of the unknown remainder, which is applied implicitly by feeding `T`
//! interpolation vectors `ψ`, `ξ`, `η` chosen so the partial train maps them
//! to unit vectors.

use std::time::Instant;

use faer::Mat;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::oracle::{ActionOracle, TensorAction};
use crate::rangefinder::{self, MultilinearMap, RangeBasis, Tolerance};
use crate::shape::Shape;
use crate::train::{TensorTrain, TtCore};

/// Relative pivot threshold below which an interpolation system is rejected.
pub const INTERPOLATION_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum RankSpec {
    /// Ranks `r₁ … r_{d-1}`.
    Fixed(Vec<usize>),
    /// Per-core adaptive range finding, starting from `min_rank`.
    Adaptive { tol: Tolerance, max_rank: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub ranks: RankSpec,
    pub oversampling: usize,
    /// `τ_k = ⌈r_k / N_k⌉ + tau_extra`
    pub tau_extra: usize,
    pub min_rank: usize,
    pub seed: u64,
    /// Right index of the fibers `(C_l)[0, :, psi_column]` used as `ψ_l`.
    pub psi_column: usize,
}

impl BuildConfig {
    pub fn fixed(ranks: Vec<usize>, seed: u64) -> Self {
        Self {
            ranks: RankSpec::Fixed(ranks),
            oversampling: rangefinder::DEFAULT_OVERSAMPLING,
            tau_extra: 1,
            min_rank: rangefinder::MIN_RANK,
            seed,
            psi_column: 0,
        }
    }

    pub fn uniform(d: usize, r: usize, seed: u64) -> Self {
        Self::fixed(vec![r; d.saturating_sub(1)], seed)
    }

    pub fn adaptive(tol: Tolerance, max_rank: usize, seed: u64) -> Self {
        Self {
            ranks: RankSpec::Adaptive { tol, max_rank },
            ..Self::fixed(Vec::new(), seed)
        }
    }

    pub fn with_oversampling(mut self, p: usize) -> Self {
        self.oversampling = p;
        self
    }

    pub fn with_tau_extra(mut self, tau_extra: usize) -> Self {
        self.tau_extra = tau_extra;
        self
    }

    /// Seed of the range finder for core `stage` (1-based).
    pub fn stage_seed(&self, stage: usize) -> u64 {
        self.seed
            .wrapping_add((stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Number of interpolation fibers for a system with `r_k` unknown directions
/// in a mode of size `n_k`.
pub fn tau_for(r_k: usize, n_k: usize, tau_extra: usize) -> usize {
    r_k.div_ceil(n_k) + tau_extra
}

/// Per-stage action counts for ranks `r₁ … r_{d-1}` (after clamping).
///
/// Stage 1 costs `r₁ + p`, stage 2 costs `r₁ (r₂ + p)`, stage `k + 1` costs
/// `τ_k r_k (r_{k+1} + p)` and the last stage `τ_{d-1} r_{d-1}`. For `d = 2`
/// the second stage is the last and costs `r₁`.
pub fn predicted_stage_actions(dims: &[usize], ranks: &[usize], p: usize, tau_extra: usize) -> Vec<u64> {
    let d = dims.len();
    let r = |k: usize| ranks[k - 1] as u64;
    let p = p as u64;
    let mut out = Vec::with_capacity(d);
    out.push(r(1) + p);
    if d == 2 {
        out.push(r(1));
        return out;
    }
    out.push(r(1) * (r(2) + p));
    for k in 2..d - 1 {
        let tau = tau_for(ranks[k - 1], dims[k - 1], tau_extra) as u64;
        out.push(tau * r(k) * (r(k + 1) + p));
    }
    let tau = tau_for(ranks[d - 2], dims[d - 2], tau_extra) as u64;
    out.push(tau * r(d - 1));
    out
}

/// Per-core record of a build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// 1-based index of the core built in this stage.
    pub core: usize,
    pub rank: usize,
    pub tau: usize,
    pub actions: u64,
    pub predicted_actions: u64,
    /// Worst column residual of the interpolation system, if one was solved.
    pub interpolation_residual: Option<f64>,
    /// Posterior range error of the core, if range finding was used.
    pub range_error: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub ranks: Vec<usize>,
    pub per_stage_actions: Vec<u64>,
    pub predicted_actions: u64,
    pub residuals: Vec<Option<f64>>,
    pub seconds: f64,
    pub seed: u64,
    pub stages: Vec<StageReport>,
    pub warnings: Vec<String>,
}

impl BuildReport {
    pub fn total_actions(&self) -> u64 {
        self.per_stage_actions.iter().sum()
    }
}

/// One summand of an implicit remainder evaluation: the vectors saturating
/// modes `1 … c` of `T`.
type Prefix = Vec<Vec<f64>>;

/// `F(x_{c+2} … x_d)`: block `j` is `Σ_t T(prefix_{j,t}, ·, x_{c+2}, …, x_d)`
/// with mode `c + 1` free (0-based mode `c`).
struct RemainderMap<'a, A: ?Sized> {
    oracle: &'a A,
    free_mode: usize,
    blocks: Vec<Vec<Prefix>>,
    input_dims: Vec<usize>,
    output_dim: usize,
}

impl<'a, A: TensorAction + ?Sized> RemainderMap<'a, A> {
    fn new(oracle: &'a A, free_mode: usize, blocks: Vec<Vec<Prefix>>) -> Self {
        let dims = oracle.shape().dims();
        Self {
            oracle,
            free_mode,
            input_dims: dims[free_mode + 1..].to_vec(),
            output_dim: blocks.len() * dims[free_mode],
            blocks,
        }
    }
}

impl<A: TensorAction + ?Sized> MultilinearMap for RemainderMap<'_, A> {
    fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn evaluate(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let n = self.oracle.shape().dim(self.free_mode);
        let mut out = vec![0.0; self.output_dim];
        for (j, terms) in self.blocks.iter().enumerate() {
            let dst = &mut out[j * n..(j + 1) * n];
            for prefix in terms {
                let mut all: Vec<&[f64]> = prefix.iter().map(|v| v.as_slice()).collect();
                all.extend_from_slice(inputs);
                let y = self.oracle.act(self.free_mode, &all)?;
                linalg::axpy(1.0, &y, dst);
            }
        }
        Ok(out)
    }
}

/// Interpolation vectors `η_{i,j}` with `Σᵢ A_iᵀ η_{i,j} = e_j`.
#[derive(Debug, Clone)]
pub struct Interpolation {
    /// `eta[i][j]`, each of length `N_k`.
    pub eta: Vec<Vec<Vec<f64>>>,
    pub residuals: Vec<f64>,
}

impl Interpolation {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Minimum-norm solution of `[A₁ᵀ … A_τᵀ] η_j = e_j` for every `j`, where each
/// `A_i` is `N_k × r_k`.
pub fn solve_interpolation(a: &[Mat<f64>]) -> Result<Interpolation> {
    let Some(first) = a.first() else {
        return Err(CoreError::Config("interpolation needs at least one matrix".into()));
    };
    let (n, r) = first.shape();
    if a.iter().any(|m| m.shape() != (n, r)) {
        return Err(CoreError::ShapeMismatch(
            "interpolation matrices differ in shape".into(),
        ));
    }
    let tau = a.len();
    let stacked = Mat::from_fn(tau * n, r, |row, j| a[row / n][(row % n, j)]);
    let (x, residuals) = linalg::min_norm_right_inverse(stacked.as_ref(), INTERPOLATION_RANK_TOL)?;
    let eta = (0..tau)
        .map(|i| {
            (0..r)
                .map(|j| (0..n).map(|row| x[(i * n + row, j)]).collect())
                .collect()
        })
        .collect();
    Ok(Interpolation { eta, residuals })
}

/// The prefix vectors feeding the remainder behind cores `1 … k`, together
/// with the interpolation used (none for `k = 0, 1`).
fn remainder_prefixes(
    cores: &[TtCore],
    tau_extra: usize,
    psi_column: usize,
) -> Result<(Vec<Vec<Prefix>>, usize, Option<f64>)> {
    let k = cores.len();
    match k {
        0 => Ok((vec![vec![Vec::new()]], 1, None)),
        1 => {
            let c1 = &cores[0];
            let blocks = (0..c1.right_rank())
                .map(|j| vec![vec![c1.fiber(0, j)]])
                .collect();
            Ok((blocks, 1, None))
        }
        _ => {
            let partial = TensorTrain::new(
                cores
                    .iter()
                    .cloned()
                    .chain(std::iter::once(TtCore::zeros(cores[k - 1].right_rank(), 1, 1)))
                    .collect(),
            )?;
            let r_k = cores[k - 1].right_rank();
            let n_k = cores[k - 1].mode_size();
            let tau = tau_for(r_k, n_k, tau_extra);
            let available = cores[k - 2].right_rank();
            if tau > available {
                return Err(CoreError::NeedsBacktracking {
                    tau,
                    core: k - 1,
                    available,
                });
            }
            let psi: Vec<Vec<f64>> = cores[..k - 2]
                .iter()
                .map(|c| c.fiber(0, psi_column.min(c.right_rank() - 1)))
                .collect();
            let xi: Vec<Vec<f64>> = (0..tau).map(|i| cores[k - 2].fiber(0, i)).collect();
            let a = xi
                .iter()
                .map(|x| {
                    let mut inputs: Vec<&[f64]> = psi.iter().map(|v| v.as_slice()).collect();
                    inputs.push(x);
                    partial.partial_open(&inputs)
                })
                .collect::<Result<Vec<_>>>()?;
            let interp = solve_interpolation(&a)?;
            let blocks = (0..r_k)
                .map(|j| {
                    (0..tau)
                        .map(|i| {
                            let mut prefix = psi.clone();
                            prefix.push(xi[i].clone());
                            prefix.push(interp.eta[i][j].clone());
                            prefix
                        })
                        .collect()
                })
                .collect();
            Ok((blocks, tau, Some(interp.max_residual())))
        }
    }
}

fn range_cap(dims: &[usize], left: usize, k: usize) -> usize {
    let right: u128 = dims[k + 1..].iter().map(|&n| n as u128).product();
    ((left * dims[k]) as u128).min(right) as usize
}

/// Builds a tensor train of `oracle` using only its actions.
pub fn tt_from_actions<A: TensorAction + ?Sized>(
    oracle: &A,
    config: &BuildConfig,
) -> Result<(TensorTrain, BuildReport)> {
    let start = Instant::now();
    let shape: Shape = oracle.shape().clone();
    let dims = shape.dims().to_vec();
    let d = dims.len();
    if let RankSpec::Fixed(r) = &config.ranks {
        if r.len() != d - 1 {
            return Err(CoreError::Config(format!(
                "expected {} ranks for an order-{d} tensor, got {}",
                d - 1,
                r.len()
            )));
        }
        if let Some(&bad) = r.iter().find(|&&x| x < config.min_rank.max(1)) {
            return Err(CoreError::Config(format!(
                "rank {bad} is below the minimum rank {}",
                config.min_rank.max(1)
            )));
        }
    }
    let counted = ActionOracle::new(oracle);
    let mut cores: Vec<TtCore> = Vec::with_capacity(d);
    let mut stages = Vec::with_capacity(d);
    let mut warnings = Vec::new();

    for c in 0..d - 1 {
        let stage = c + 1;
        let before = counted.calls();
        let (blocks, tau, residual) =
            remainder_prefixes(&cores, config.tau_extra, config.psi_column).map_err(|e| e.at_stage(stage))?;
        let left = blocks.len();
        let cap = range_cap(&dims, left, c);
        let map = RemainderMap::new(&counted, c, blocks);
        let seed = config.stage_seed(stage);
        let basis: RangeBasis = match &config.ranks {
            RankSpec::Fixed(r) => {
                let mut rank = r[c];
                if rank > cap {
                    let msg = format!("rank {rank} of core {stage} clamped to {cap}");
                    warn!("{msg}");
                    warnings.push(msg);
                    rank = cap;
                }
                rangefinder::randomized_range(&map, rank, config.oversampling, seed)
            }
            RankSpec::Adaptive { tol, max_rank } => rangefinder::adaptive_range_capped(
                &map,
                *tol,
                config.min_rank,
                (*max_rank).min(cap),
                config.oversampling,
                seed,
            ),
        }
        .map_err(|e| e.at_stage(stage))?;
        if !basis.converged {
            let msg = format!("core {stage}: adaptive range did not meet its tolerance at rank {}", basis.rank);
            warn!("{msg}");
            warnings.push(msg);
        }
        let rank = basis.rank;
        let data = linalg::mat_to_row_major(basis.basis.as_ref());
        cores.push(TtCore::new(left, dims[c], rank, data).map_err(|e| e.at_stage(stage))?);
        debug!("core {stage}: rank {rank}, {} actions", counted.calls() - before);
        stages.push(StageReport {
            core: stage,
            rank,
            tau,
            actions: counted.calls() - before,
            predicted_actions: 0,
            interpolation_residual: residual,
            range_error: Some(basis.error_estimate),
            converged: basis.converged,
        });
    }

    // last core, no orthogonalization
    let stage = d;
    let before = counted.calls();
    let (blocks, tau, residual) =
        remainder_prefixes(&cores, config.tau_extra, config.psi_column).map_err(|e| e.at_stage(stage))?;
    let left = blocks.len();
    let map = RemainderMap::new(&counted, d - 1, blocks);
    let data = map.evaluate(&[]).map_err(|e| e.at_stage(stage))?;
    cores.push(TtCore::new(left, dims[d - 1], 1, data).map_err(|e| e.at_stage(stage))?);
    stages.push(StageReport {
        core: stage,
        rank: 1,
        tau,
        actions: counted.calls() - before,
        predicted_actions: 0,
        interpolation_residual: residual,
        range_error: None,
        converged: true,
    });

    let tt = TensorTrain::new(cores)?;
    let ranks = tt.ranks();
    let predicted = predicted_stage_actions(&dims, &ranks, config.oversampling, config.tau_extra);
    for (s, p) in stages.iter_mut().zip(&predicted) {
        s.predicted_actions = *p;
    }
    let report = BuildReport {
        ranks,
        per_stage_actions: stages.iter().map(|s| s.actions).collect(),
        predicted_actions: predicted.iter().sum(),
        residuals: stages.iter().map(|s| s.interpolation_residual).collect(),
        seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
        stages,
        warnings,
    };
    Ok((tt, report))
}

/// Closed-form total action count for uniform rank `r < min N`, `τ = 2`.
pub fn predicted_uniform_actions(d: usize, r: u64, p: u64) -> u64 {
    if d == 2 {
        return (r + p) + r;
    }
    (r + p) + r * (r + p) + (d as u64 - 3) * 2 * r * (r + p) + 2 * r
}
