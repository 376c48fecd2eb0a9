//! Sequential-SVD tensor-train compression of explicitly known tensors.

use faer::Mat;
use log::warn;

use crate::dense::DenseTensor;
use crate::error::{CoreError, Result};
use crate::linalg;
use crate::shape::{Shape, DENSE_ENTRY_LIMIT};
use crate::train::{TensorTrain, TtCore};

/// How bond ranks are chosen during a TT-SVD sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// Ranks `r₁ … r_{d-1}`, clamped to the unfolding sizes.
    Ranks(Vec<usize>),
    /// Relative Frobenius tolerance split evenly over the `d - 1` truncations.
    Tolerance(f64),
}

/// Ranks that no unfolding can exceed: `min(∏_{j≤k} N_j, ∏_{j>k} N_j)`.
pub fn max_ranks(shape: &Shape) -> Vec<usize> {
    let dims = shape.dims();
    let d = dims.len();
    (0..d - 1)
        .map(|k| {
            let left: u128 = dims[..=k].iter().map(|&n| n as u128).product();
            let right: u128 = dims[k + 1..].iter().map(|&n| n as u128).product();
            left.min(right).min(usize::MAX as u128) as usize
        })
        .collect()
}

pub fn tt_svd(t: &DenseTensor, truncation: &Truncation) -> Result<TensorTrain> {
    let dims = t.shape().dims().to_vec();
    check_truncation(&dims, truncation)?;
    let delta = match truncation {
        Truncation::Tolerance(eps) => eps * t.frobenius_norm() / ((dims.len() - 1) as f64).sqrt(),
        Truncation::Ranks(_) => 0.0,
    };
    sweep(Vec::new(), t.data().to_vec(), 1, &dims, 0, truncation, delta)
}

/// TT-SVD of a tensor given entrywise (0-based indices), without storing it.
pub fn tt_svd_streamed<F>(shape: &Shape, entry: F, ranks: &[usize]) -> Result<TensorTrain>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let first = ranks.first().copied().unwrap_or(1);
    StreamedTtSvd::new(shape, entry, first)?.train(ranks)
}

/// The rank-independent first step of a streamed TT-SVD.
///
/// The first unfolding is reduced by a blocked QR over slabs of the second
/// mode; only the `r₁ × (N₂ … N_d)` remainder is held in memory. Trains at
/// any ranks with `r₁ ≤ max_first_rank` can then be cut without touching the
/// entries again. `T` must have at least three modes.
pub struct StreamedTtSvd {
    dims: Vec<usize>,
    u1: Mat<f64>,
    remainder: Vec<f64>,
}

impl StreamedTtSvd {
    pub fn new<F>(shape: &Shape, entry: F, max_first_rank: usize) -> Result<Self>
    where
        F: Fn(&[usize]) -> f64 + Sync,
    {
        let dims = shape.dims().to_vec();
        let d = dims.len();
        if d < 3 {
            return Err(CoreError::InvalidShape(
                "streamed TT-SVD needs at least three modes".into(),
            ));
        }
        let n1 = dims[0];
        let n2 = dims[1];
        let tail: usize = dims[2..].iter().product();
        let width = n2 * tail;
        let r1 = clamp_rank(max_first_rank.max(1), n1.min(width), 1);
        if (r1 as u128) * (width as u128) > DENSE_ENTRY_LIMIT {
            return Err(CoreError::Capacity {
                entries: (r1 as u128) * (width as u128),
                limit: DENSE_ENTRY_LIMIT,
            });
        }

        // slab T[:, i2, ...]ᵀ as a tail × N₁ matrix
        let slab = |i2: usize| -> Mat<f64> {
            let mut idx = vec![0usize; d];
            Mat::from_fn(tail, n1, |row, i1| {
                idx[0] = i1;
                idx[1] = i2;
                let mut rem = row;
                for k in (2..d).rev() {
                    idx[k] = rem % dims[k];
                    rem /= dims[k];
                }
                entry(&idx)
            })
        };
        let mut stacked = Mat::<f64>::zeros(0, n1);
        for i2 in 0..n2 {
            let r = slab(i2).qr().thin_R().to_owned();
            let mut next = Mat::<f64>::zeros(stacked.nrows() + r.nrows(), n1);
            for j in 0..n1 {
                for i in 0..stacked.nrows() {
                    next[(i, j)] = stacked[(i, j)];
                }
                for i in 0..r.nrows() {
                    next[(stacked.nrows() + i, j)] = r[(i, j)];
                }
            }
            stacked = if next.nrows() > n1 {
                next.qr().thin_R().to_owned()
            } else {
                next
            };
        }
        // T₍₁₎ = Rᵀ Qᵀ, so the left singular vectors of T₍₁₎ are those of Rᵀ
        let svd = linalg::thin_svd(stacked.transpose())?;
        let u1 = Mat::from_fn(n1, r1, |i, a| svd.u[(i, a)]);

        let mut remainder = vec![0.0; r1 * width];
        for i2 in 0..n2 {
            let s = slab(i2);
            for a in 0..r1 {
                let dst = &mut remainder[a * width + i2 * tail..a * width + (i2 + 1) * tail];
                for i1 in 0..n1 {
                    linalg::axpy(u1[(i1, a)], s.col(i1).try_as_col_major().unwrap().as_slice(), dst);
                }
            }
        }
        Ok(Self {
            dims,
            u1,
            remainder,
        })
    }

    pub fn max_first_rank(&self) -> usize {
        self.u1.ncols()
    }

    /// The train at `ranks`; `ranks[0]` is clamped to `max_first_rank`.
    pub fn train(&self, ranks: &[usize]) -> Result<TensorTrain> {
        let truncation = Truncation::Ranks(ranks.to_vec());
        check_truncation(&self.dims, &truncation)?;
        let n1 = self.dims[0];
        let r1 = clamp_rank(ranks[0], self.max_first_rank(), 1);
        let width = self.remainder.len() / self.max_first_rank();
        let first = TtCore::new(
            1,
            n1,
            r1,
            (0..n1)
                .flat_map(|i| (0..r1).map(move |a| (i, a)))
                .map(|(i, a)| self.u1[(i, a)])
                .collect(),
        )?;
        let remainder = self.remainder[..r1 * width].to_vec();
        sweep(vec![first], remainder, r1, &self.dims, 1, &truncation, 0.0)
    }
}

fn check_truncation(dims: &[usize], truncation: &Truncation) -> Result<()> {
    match truncation {
        Truncation::Ranks(r) if r.len() != dims.len() - 1 => Err(CoreError::Config(format!(
            "expected {} ranks, got {}",
            dims.len() - 1,
            r.len()
        ))),
        Truncation::Ranks(r) if r.contains(&0) => {
            Err(CoreError::Config("ranks must be positive".into()))
        }
        Truncation::Tolerance(eps) if !(*eps >= 0.0) => {
            Err(CoreError::Config(format!("tolerance must be non-negative, got {eps}")))
        }
        _ => Ok(()),
    }
}

fn clamp_rank(requested: usize, cap: usize, core: usize) -> usize {
    if requested > cap {
        warn!("rank {requested} for core {core} exceeds the unfolding size; clamped to {cap}");
        cap
    } else {
        requested
    }
}

/// Continues a TT-SVD from core `start` given the row-major remainder
/// `r_{start-1} × (N_start … N_d)`.
fn sweep(
    mut cores: Vec<TtCore>,
    mut remainder: Vec<f64>,
    mut left: usize,
    dims: &[usize],
    start: usize,
    truncation: &Truncation,
    delta: f64,
) -> Result<TensorTrain> {
    let d = dims.len();
    for k in start..d - 1 {
        let rows = left * dims[k];
        let cols = remainder.len() / rows;
        let m = linalg::mat_from_row_major(rows, cols, &remainder);
        let svd = linalg::thin_svd(m.as_ref())?;
        let full = svd.s.len();
        let r = match truncation {
            Truncation::Ranks(ranks) => clamp_rank(ranks[k], full, k + 1),
            Truncation::Tolerance(_) => {
                // smallest r with tail energy ≤ δ²
                let mut tail = 0.0;
                let mut r = full;
                while r > 1 {
                    let next = tail + svd.s[r - 1] * svd.s[r - 1];
                    if next > delta * delta {
                        break;
                    }
                    tail = next;
                    r -= 1;
                }
                r
            }
        };
        let mut core = Vec::with_capacity(rows * r);
        for i in 0..rows {
            for a in 0..r {
                core.push(svd.u[(i, a)]);
            }
        }
        cores.push(TtCore::new(left, dims[k], r, core)?);
        let mut next = Vec::with_capacity(r * cols);
        for a in 0..r {
            for j in 0..cols {
                next.push(svd.s[a] * svd.v[(j, a)]);
            }
        }
        remainder = next;
        left = r;
    }
    cores.push(TtCore::new(left, dims[d - 1], 1, remainder)?);
    TensorTrain::new(cores)
}
