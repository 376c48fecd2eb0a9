//! Randomized range finding for vector-valued multilinear maps.

use faer::Mat;
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::linalg;

/// Default oversampling.
pub const DEFAULT_OVERSAMPLING: usize = 5;

/// Smallest rank the adaptive finder returns.
pub const MIN_RANK: usize = 2;

/// A map `F(x₁ … x_n) ∈ ℝᵐ`, linear in each argument.
pub trait MultilinearMap: Sync {
    fn input_dims(&self) -> &[usize];
    fn output_dim(&self) -> usize;
    fn evaluate(&self, inputs: &[&[f64]]) -> Result<Vec<f64>>;
}

/// A [`MultilinearMap`] backed by a closure.
pub struct FnMap<F> {
    input_dims: Vec<usize>,
    output_dim: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&[&[f64]]) -> Result<Vec<f64>> + Sync,
{
    pub fn new(input_dims: Vec<usize>, output_dim: usize, f: F) -> Self {
        Self {
            input_dims,
            output_dim,
            f,
        }
    }
}

impl<F> MultilinearMap for FnMap<F>
where
    F: Fn(&[&[f64]]) -> Result<Vec<f64>> + Sync,
{
    fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn evaluate(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        (self.f)(inputs)
    }
}

/// Orthonormal basis of a sampled range.
#[derive(Debug, Clone)]
pub struct RangeBasis {
    /// `m × r`, orthonormal columns.
    pub basis: Mat<f64>,
    /// Sample vectors `y⁽ⁱ⁾` in sample order.
    pub samples: Vec<Vec<f64>>,
    /// Singular values of the sample matrix, non-increasing.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub oversampling: usize,
    /// Posterior error estimate of the returned basis over all samples.
    pub error_estimate: f64,
    /// False when the adaptive finder hit the output dimension without meeting
    /// its tolerance. Always true for fixed-rank calls.
    pub converged: bool,
}

impl RangeBasis {
    pub fn column(&self, j: usize) -> Vec<f64> {
        linalg::column(self.basis.as_ref(), j)
    }
}

/// Stopping rule for [`adaptive_range`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// `ℰ < tol`
    Absolute(f64),
    /// `ℰ / max_i ‖y⁽ⁱ⁾‖ < tol`
    Relative(f64),
}

/// Draws sample `index`; each index owns its own random stream so samples do
/// not depend on evaluation order.
pub fn draw_sample<M: MultilinearMap + ?Sized>(map: &M, seed: u64, index: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let omegas: Vec<Vec<f64>> = map
        .input_dims()
        .iter()
        .map(|&n| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let inputs: Vec<&[f64]> = omegas.iter().map(|v| v.as_slice()).collect();
    let y = map.evaluate(&inputs)?;
    if y.len() != map.output_dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "map returned a vector of length {}, expected {}",
            y.len(),
            map.output_dim()
        )));
    }
    Ok(y)
}

fn draw_samples<M: MultilinearMap + ?Sized>(
    map: &M,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<Vec<Vec<f64>>> {
    range
        .into_par_iter()
        .map(|i| draw_sample(map, seed, i))
        .collect()
}

fn basis_from_samples(samples: &[Vec<f64>], m: usize, r: usize) -> Result<(Mat<f64>, Vec<f64>)> {
    if samples.iter().all(|y| y.iter().all(|&v| v == 0.0)) {
        return Err(CoreError::DegenerateRange);
    }
    let y = Mat::from_fn(m, samples.len(), |i, j| samples[j][i]);
    let svd = linalg::thin_svd(y.as_ref())?;
    let u = Mat::from_fn(m, r, |i, j| svd.u[(i, j)]);
    Ok((u, svd.s))
}

/// `max_i ‖y⁽ⁱ⁾ − U Uᵀ y⁽ⁱ⁾‖₂`.
pub fn posterior_error(basis: &Mat<f64>, samples: &[Vec<f64>]) -> f64 {
    let r = basis.ncols();
    samples
        .iter()
        .map(|y| {
            let mut res = y.clone();
            for j in 0..r {
                let col = linalg::column(basis.as_ref(), j);
                let c = linalg::dot(&col, y);
                linalg::axpy(-c, &col, &mut res);
            }
            linalg::norm2(&res)
        })
        .fold(0.0, f64::max)
}

fn clamp_to_output(r: usize, m: usize) -> usize {
    if r > m {
        warn!("requested rank {r} exceeds the output dimension {m}; clamped");
        m
    } else {
        r
    }
}

/// Rank-`r` range basis from exactly `r + p` evaluations.
pub fn randomized_range<M: MultilinearMap + ?Sized>(
    map: &M,
    r: usize,
    p: usize,
    seed: u64,
) -> Result<RangeBasis> {
    if r == 0 {
        return Err(CoreError::Config("range rank must be at least 1".into()));
    }
    let m = map.output_dim();
    let samples = draw_samples(map, seed, 0..(r + p) as u64)?;
    let rank = clamp_to_output(r, m).min(samples.len());
    let (basis, singular_values) = basis_from_samples(&samples, m, rank)?;
    let error_estimate = posterior_error(&basis, &samples);
    Ok(RangeBasis {
        basis,
        samples,
        singular_values,
        rank,
        oversampling: p,
        error_estimate,
        converged: true,
    })
}

/// Grows the rank from `r_start` one step at a time until the posterior error
/// meets `tol`, adding a single new sample per step. A converged result at
/// rank `r` costs exactly `r + p` evaluations.
pub fn adaptive_range<M: MultilinearMap + ?Sized>(
    map: &M,
    tol: Tolerance,
    r_start: usize,
    p: usize,
    seed: u64,
) -> Result<RangeBasis> {
    adaptive_range_capped(map, tol, r_start, usize::MAX, p, seed)
}

/// [`adaptive_range`] with an upper bound on the rank.
pub fn adaptive_range_capped<M: MultilinearMap + ?Sized>(
    map: &M,
    tol: Tolerance,
    r_start: usize,
    r_max: usize,
    p: usize,
    seed: u64,
) -> Result<RangeBasis> {
    let limit = match tol {
        Tolerance::Absolute(t) | Tolerance::Relative(t) => t,
    };
    if !(limit > 0.0) {
        return Err(CoreError::Config(format!("tolerance must be positive, got {limit}")));
    }
    let m = map.output_dim();
    let cap = r_max.min(m).max(1);
    let mut r = r_start.max(MIN_RANK).min(cap);
    let mut samples = draw_samples(map, seed, 0..(r + p) as u64)?;
    loop {
        let (basis, singular_values) = basis_from_samples(&samples, m, r)?;
        let err = posterior_error(&basis, &samples);
        let scale = match tol {
            Tolerance::Absolute(_) => 1.0,
            Tolerance::Relative(_) => samples
                .iter()
                .map(|y| linalg::norm2(y))
                .fold(0.0, f64::max),
        };
        let met = err < limit * scale;
        if met || r >= cap {
            return Ok(RangeBasis {
                basis,
                samples,
                singular_values,
                rank: r,
                oversampling: p,
                error_estimate: err,
                converged: met,
            });
        }
        samples.push(draw_sample(map, seed, samples.len() as u64)?);
        r += 1;
    }
}
