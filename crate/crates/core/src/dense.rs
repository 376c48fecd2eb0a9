//! Row-major dense tensors, their actions and Frobenius norms.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::oracle::TensorAction;
use crate::shape::Shape;

/// A fully materialized tensor, row-major (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        let n = shape.check_dense_limit()?;
        if data.len() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "shape {shape} needs {n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Result<Self> {
        let n = shape.check_dense_limit()?;
        Ok(Self {
            shape,
            data: vec![0.0; n],
        })
    }

    /// Fills entries from a function of the 0-based multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = shape.check_dense_limit()?;
        let dims = shape.dims().to_vec();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.shape.dims())
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::norm2(&self.data)
    }

    /// Contraction with every mode except `free_mode`.
    pub fn action(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.shape.check_action(free_mode, inputs)?;
        let dims = self.shape.dims();
        let d = dims.len();
        // trailing modes, last to first
        let mut buf: Vec<f64> = self.data.clone();
        for mode in (free_mode + 1..d).rev() {
            let n = dims[mode];
            let x = inputs[mode - 1];
            let rows = buf.len() / n;
            let mut next = vec![0.0; rows];
            for (r, chunk) in buf.chunks_exact(n).enumerate() {
                next[r] = linalg::dot(chunk, x);
            }
            buf = next;
        }
        // leading modes, first to last
        for mode in 0..free_mode {
            let n = dims[mode];
            let x = inputs[mode];
            let len = buf.len() / n;
            let mut next = vec![0.0; len];
            for (i, chunk) in buf.chunks_exact(len).enumerate() {
                linalg::axpy(x[i], chunk, &mut next);
            }
            buf = next;
        }
        debug_assert_eq!(buf.len(), dims[free_mode]);
        Ok(buf)
    }
}

impl TensorAction for DenseTensor {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.action(free_mode, inputs)
    }
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.frobenius_norm()
}

/// `‖reference - approx‖_F / ‖reference‖_F`.
pub fn relative_error(reference: &DenseTensor, approx: &DenseTensor) -> Result<f64> {
    if reference.shape() != approx.shape() {
        return Err(CoreError::ShapeMismatch(format!(
            "relative error between shapes {} and {}",
            reference.shape(),
            approx.shape()
        )));
    }
    let denom = reference.frobenius_norm();
    if denom == 0.0 {
        return Err(CoreError::ZeroNorm);
    }
    let num = reference
        .data
        .iter()
        .zip(&approx.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_action(t: &DenseTensor, free: usize, inputs: &[&[f64]]) -> Vec<f64> {
        let dims = t.shape().dims().to_vec();
        let mut out = vec![0.0; dims[free]];
        let mut idx = vec![0usize; dims.len()];
        for &v in t.data() {
            let mut w = v;
            let mut slot = 0;
            for (k, &i) in idx.iter().enumerate() {
                if k != free {
                    w *= inputs[slot][i];
                    slot += 1;
                }
            }
            out[idx[free]] += w;
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    #[test]
    fn identity_contraction() {
        let t = DenseTensor::new(Shape::new(vec![2, 2]).unwrap(), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.action(0, &[&[1.0, 0.0]]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn hilbert_first_fiber() {
        // 1-based: T[i,j,k] = 1/(i+j+k), so the mode-1 fiber at j=k=1 is 1/(i+2)
        let shape = Shape::new(vec![5, 4, 3]).unwrap();
        let t = DenseTensor::from_fn(shape, |idx| {
            1.0 / (idx.iter().map(|&i| i + 1).sum::<usize>() as f64)
        })
        .unwrap();
        let e4 = [1.0, 0.0, 0.0, 0.0];
        let e3 = [1.0, 0.0, 0.0];
        let fiber = t.action(0, &[&e4, &e3]).unwrap();
        for (i, v) in fiber.iter().enumerate() {
            assert!((v - 1.0 / (i as f64 + 3.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn action_matches_brute_force_every_mode() {
        let shape = Shape::new(vec![3, 2, 4, 2]).unwrap();
        let t = DenseTensor::from_fn(shape.clone(), |idx| {
            (idx[0] as f64 + 1.0).sin() * (idx[1] + 2 * idx[2] + 3 * idx[3]) as f64 - 0.5
        })
        .unwrap();
        let vecs: Vec<Vec<f64>> = shape
            .dims()
            .iter()
            .map(|&n| (0..n).map(|i| 0.3 * i as f64 - 0.7).collect())
            .collect();
        for free in 0..4 {
            let inputs: Vec<&[f64]> = (0..4).filter(|&k| k != free).map(|k| vecs[k].as_slice()).collect();
            let got = t.action(free, &inputs).unwrap();
            let want = brute_action(&t, free, &inputs);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaling_one_slot_scales_output() {
        let shape = Shape::new(vec![3, 3, 3]).unwrap();
        let t = DenseTensor::from_fn(shape, |idx| (idx[0] * 9 + idx[1] * 3 + idx[2]) as f64).unwrap();
        let x = [0.5, -1.0, 2.0];
        let y = [1.5, 0.25, -0.75];
        let base = t.action(1, &[&x, &y]).unwrap();
        let sx: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let scaled = t.action(1, &[&sx, &y]).unwrap();
        for (b, s) in base.iter().zip(&scaled) {
            assert!((3.0 * b - s).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let t = DenseTensor::zeros(Shape::new(vec![2, 3]).unwrap()).unwrap();
        assert!(matches!(t.action(0, &[&[1.0, 2.0]]), Err(CoreError::ShapeMismatch(_))));
    }

    #[test]
    fn norms_and_relative_error() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let t = DenseTensor::new(shape.clone(), vec![1.0, 2.0, -2.0, 4.0]).unwrap();
        assert!((t.frobenius_norm() - 5.0).abs() < 1e-15);
        assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
        let z = DenseTensor::zeros(shape).unwrap();
        assert!((relative_error(&t, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_error(&z, &t), Err(CoreError::ZeroNorm)));
    }

    #[test]
    fn densification_guard() {
        let shape = Shape::new(vec![10_000, 10_000, 2]).unwrap();
        assert!(matches!(DenseTensor::zeros(shape), Err(CoreError::Capacity { .. })));
    }
}
