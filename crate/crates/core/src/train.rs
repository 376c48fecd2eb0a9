//! Tensor trains: cores, evaluation with one free mode, partial trains and
//! reconstruction.

use faer::Mat;

use crate::dense::DenseTensor;
use crate::error::{CoreError, Result};
use crate::linalg;
use crate::oracle::TensorAction;
use crate::shape::Shape;

/// One 3-way core with entries stored as `(left, mode, right)`, right index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TtCore {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl TtCore {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(CoreError::InvalidShape(format!(
                "core dimensions must be positive, got {left}x{mode}x{right}"
            )));
        }
        if data.len() != left * mode * right {
            return Err(CoreError::ShapeMismatch(format!(
                "core {left}x{mode}x{right} needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Self {
            left,
            mode,
            right,
            data,
        })
    }

    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self {
            left,
            mode,
            right,
            data: vec![0.0; left * mode * right],
        }
    }

    pub fn left_rank(&self) -> usize {
        self.left
    }

    pub fn mode_size(&self) -> usize {
        self.mode
    }

    pub fn right_rank(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.mode + i) * self.right + b]
    }

    /// Fiber `C[a, :, b]`.
    pub fn fiber(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.mode).map(|i| self.get(a, i, b)).collect()
    }

    /// The `(left * mode) × right` unfolding.
    pub fn left_unfolding(&self) -> Mat<f64> {
        linalg::mat_from_row_major(self.left * self.mode, self.right, &self.data)
    }

    /// `max |UᵀU - I|` of the left unfolding.
    pub fn orthonormality_defect(&self) -> f64 {
        linalg::orthonormality_defect(self.left_unfolding().as_ref())
    }

    /// `w[b] = Σ_{a,i} v[a] x[i] C[a,i,b]`
    fn push_left(&self, v: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.right];
        for (a, &va) in v.iter().enumerate() {
            if va == 0.0 {
                continue;
            }
            for (i, &xi) in x.iter().enumerate() {
                let w = va * xi;
                let start = (a * self.mode + i) * self.right;
                linalg::axpy(w, &self.data[start..start + self.right], &mut out);
            }
        }
        out
    }

    /// `w[a] = Σ_{i,b} C[a,i,b] x[i] v[b]`
    fn push_right(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.left];
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &xi) in x.iter().enumerate() {
                let start = (a * self.mode + i) * self.right;
                acc += xi * linalg::dot(&self.data[start..start + self.right], v);
            }
            *o = acc;
        }
        out
    }

    /// `M[i, b] = Σ_a v[a] C[a,i,b]`, row-major `mode × right`.
    fn open_left(&self, v: &[f64]) -> Vec<f64> {
        let block = self.mode * self.right;
        let mut out = vec![0.0; block];
        for (a, &va) in v.iter().enumerate() {
            linalg::axpy(va, &self.data[a * block..(a + 1) * block], &mut out);
        }
        out
    }
}

/// A tensor train `C₁ C₂ … C_d`; the first core has left rank 1 and the last
/// core right rank 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    shape: Shape,
    cores: Vec<TtCore>,
}

impl TensorTrain {
    pub fn new(cores: Vec<TtCore>) -> Result<Self> {
        if cores.len() < 2 {
            return Err(CoreError::InvalidShape(format!(
                "a tensor train needs at least 2 cores, got {}",
                cores.len()
            )));
        }
        if cores[0].left != 1 {
            return Err(CoreError::ShapeMismatch(format!(
                "first core has left rank {}",
                cores[0].left
            )));
        }
        let last = cores.len() - 1;
        if cores[last].right != 1 {
            return Err(CoreError::ShapeMismatch(format!(
                "last core has right rank {}",
                cores[last].right
            )));
        }
        for k in 0..last {
            if cores[k].right != cores[k + 1].left {
                return Err(CoreError::ShapeMismatch(format!(
                    "rank mismatch between cores {} and {}: {} vs {}",
                    k + 1,
                    k + 2,
                    cores[k].right,
                    cores[k + 1].left
                )));
            }
        }
        let shape = Shape::new(cores.iter().map(|c| c.mode).collect())?;
        Ok(Self { shape, cores })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[TtCore] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &TtCore {
        &self.cores[k]
    }

    pub fn into_cores(self) -> Vec<TtCore> {
        self.cores
    }

    /// Bond ranks `r₁ … r_{d-1}`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.right)
            .collect()
    }

    /// Number of stored floating-point values.
    pub fn num_parameters(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Contraction with every mode except `free_mode`, by sweeping from both ends.
    pub fn apply(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.shape.check_action(free_mode, inputs)?;
        let d = self.order();
        let mut left = vec![1.0];
        for k in 0..free_mode {
            left = self.cores[k].push_left(&left, inputs[k]);
        }
        let mut right = vec![1.0];
        for k in (free_mode + 1..d).rev() {
            right = self.cores[k].push_right(inputs[k - 1], &right);
        }
        let open = self.cores[free_mode].open_left(&left);
        let r = self.cores[free_mode].right;
        Ok(open.chunks_exact(r).map(|row| linalg::dot(row, &right)).collect())
    }

    /// `T_k(x₁ … x_k)`: the first `k` cores contracted with `k` vectors,
    /// a vector of length `r_k`.
    pub fn partial_apply(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let k = inputs.len();
        if k == 0 || k >= self.order() {
            return Err(CoreError::ShapeMismatch(format!(
                "partial train needs between 1 and {} vectors, got {k}",
                self.order() - 1
            )));
        }
        self.check_prefix(inputs)?;
        let mut v = vec![1.0];
        for (core, x) in self.cores.iter().zip(inputs) {
            v = core.push_left(&v, x);
        }
        Ok(v)
    }

    /// `T_k(x₁ … x_{k-1}, ·)` with the `k`-th mode open, as an `N_k × r_k`
    /// matrix. `inputs` holds `k - 1` vectors.
    pub fn partial_open(&self, inputs: &[&[f64]]) -> Result<Mat<f64>> {
        let k = inputs.len() + 1;
        if k >= self.order() {
            return Err(CoreError::ShapeMismatch(format!(
                "open partial train needs at most {} vectors, got {}",
                self.order() - 2,
                inputs.len()
            )));
        }
        self.check_prefix(inputs)?;
        let mut v = vec![1.0];
        for (core, x) in self.cores.iter().zip(inputs) {
            v = core.push_left(&v, x);
        }
        let core = &self.cores[k - 1];
        Ok(linalg::mat_from_row_major(core.mode, core.right, &core.open_left(&v)))
    }

    fn check_prefix(&self, inputs: &[&[f64]]) -> Result<()> {
        for (k, x) in inputs.iter().enumerate() {
            if x.len() != self.shape.dim(k) {
                return Err(CoreError::ShapeMismatch(format!(
                    "input for mode {} has length {}, expected {}",
                    k + 1,
                    x.len(),
                    self.shape.dim(k)
                )));
            }
        }
        Ok(())
    }

    /// A single entry at a 0-based multi-index.
    pub fn entry(&self, idx: &[usize]) -> f64 {
        let mut v = vec![1.0];
        for (core, &i) in self.cores.iter().zip(idx) {
            let mut next = vec![0.0; core.right];
            for (a, &va) in v.iter().enumerate() {
                let start = (a * core.mode + i) * core.right;
                linalg::axpy(va, &core.data[start..start + core.right], &mut next);
            }
            v = next;
        }
        v[0]
    }

    /// Row-major contraction of cores `from..d` into a `r_{from-1} × (N_from … N_d)` matrix.
    pub fn right_block(&self, from: usize) -> Result<Vec<f64>> {
        let d = self.order();
        let mut cols = 1u128;
        for core in &self.cores[from..] {
            cols *= core.mode as u128;
        }
        let entries = cols * self.cores[from].left as u128;
        if entries > crate::shape::DENSE_ENTRY_LIMIT {
            return Err(CoreError::Capacity {
                entries,
                limit: crate::shape::DENSE_ENTRY_LIMIT,
            });
        }
        // block has shape (left of core k) × (N_k … N_d), built from the right
        let last = &self.cores[d - 1];
        let mut block = last.data.clone();
        let mut width = last.mode;
        for k in (from..d - 1).rev() {
            let core = &self.cores[k];
            let mut next = vec![0.0; core.left * core.mode * width];
            for a in 0..core.left {
                for i in 0..core.mode {
                    let dst = &mut next[(a * core.mode + i) * width..(a * core.mode + i + 1) * width];
                    for b in 0..core.right {
                        linalg::axpy(core.get(a, i, b), &block[b * width..(b + 1) * width], dst);
                    }
                }
            }
            block = next;
            width *= core.mode;
        }
        Ok(block)
    }

    /// Materializes the full tensor.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.shape.check_dense_limit()?;
        let data = self.right_block(0)?;
        DenseTensor::new(self.shape.clone(), data)
    }

    /// Frobenius norm from the Gram-matrix sweep, without densifying.
    pub fn frobenius_norm(&self) -> f64 {
        let mut gram = vec![1.0];
        let mut size = 1;
        for core in &self.cores {
            let r = core.right;
            let mut next = vec![0.0; r * r];
            for a in 0..size {
                for a2 in 0..size {
                    let g = gram[a * size + a2];
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..core.mode {
                        let x = &core.data[(a * core.mode + i) * r..(a * core.mode + i + 1) * r];
                        let y = &core.data[(a2 * core.mode + i) * r..(a2 * core.mode + i + 1) * r];
                        for b in 0..r {
                            linalg::axpy(g * x[b], y, &mut next[b * r..(b + 1) * r]);
                        }
                    }
                }
            }
            gram = next;
            size = r;
        }
        gram[0].max(0.0).sqrt()
    }

    /// Multiplies the last core by `alpha`.
    pub fn scale(&mut self, alpha: f64) {
        let last = self.cores.len() - 1;
        linalg::scale(alpha, &mut self.cores[last].data);
    }
}

impl TensorAction for TensorTrain {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.apply(free_mode, inputs)
    }
}

pub fn tt_apply(tt: &TensorTrain, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
    tt.apply(free_mode, inputs)
}

pub fn tt_to_dense(tt: &TensorTrain) -> Result<DenseTensor> {
    tt.to_dense()
}

pub fn tt_partial_apply(tt: &TensorTrain, inputs: &[&[f64]]) -> Result<Vec<f64>> {
    tt.partial_apply(inputs)
}

/// `‖T - T̃‖_F / ‖T‖_F` where `T` is given entrywise by `entry` (0-based indices).
///
/// Streams over the first mode, so `T` is never stored; only the contraction
/// of cores `2 … d` is materialized.
pub fn relative_error_entries<F>(tt: &TensorTrain, entry: F) -> Result<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let dims = tt.shape().dims().to_vec();
    let rest = tt.right_block(1)?;
    let width: usize = dims[1..].iter().product();
    let c1 = tt.core(0);
    let r1 = c1.right;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut row = vec![0.0; width];
    let mut idx = vec![0usize; dims.len()];
    for i1 in 0..dims[0] {
        row.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..r1 {
            linalg::axpy(c1.get(0, i1, a), &rest[a * width..(a + 1) * width], &mut row);
        }
        idx.iter_mut().for_each(|v| *v = 0);
        idx[0] = i1;
        for approx in &row {
            let t = entry(&idx);
            num += (t - approx) * (t - approx);
            den += t * t;
            for k in (1..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    if den == 0.0 {
        return Err(CoreError::ZeroNorm);
    }
    Ok((num / den).sqrt())
}
