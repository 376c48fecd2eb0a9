//! The tensor-action abstraction.
//!
//! A tensor is reachable only through contractions with `d - 1` vectors,
//! leaving one mode free. Implementations must be callable from several
//! threads at once.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::Result;
use crate::shape::Shape;

/// A black-box multilinear function answering one-free-mode contractions.
pub trait TensorAction: Sync {
    fn shape(&self) -> &Shape;

    /// Contracts every mode except `free_mode` (0-based) with `inputs`.
    ///
    /// `inputs` holds one vector per non-free mode, in mode order, and the
    /// result has length `N_{free_mode}`.
    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>>;
}

impl<T: TensorAction + ?Sized> TensorAction for &T {
    fn shape(&self) -> &Shape {
        (**self).shape()
    }
    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        (**self).act(free_mode, inputs)
    }
}

impl<T: TensorAction + ?Sized + Send> TensorAction for Box<T> {
    fn shape(&self) -> &Shape {
        (**self).shape()
    }
    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        (**self).act(free_mode, inputs)
    }
}

impl<T: TensorAction + ?Sized + Send> TensorAction for Arc<T> {
    fn shape(&self) -> &Shape {
        (**self).shape()
    }
    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        (**self).act(free_mode, inputs)
    }
}

/// Wraps an action and counts every evaluation atomically.
pub struct ActionOracle<A> {
    inner: A,
    calls: AtomicU64,
}

impl<A: TensorAction> ActionOracle<A> {
    pub fn new(inner: A) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }

    pub fn into_inner(self) -> A {
        self.inner
    }
}

impl<A: TensorAction> TensorAction for ActionOracle<A> {
    fn shape(&self) -> &Shape {
        self.inner.shape()
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.act(free_mode, inputs)
    }
}

/// An action defined by a closure.
pub struct FnAction<F> {
    shape: Shape,
    f: F,
}

impl<F> FnAction<F>
where
    F: Fn(usize, &[&[f64]]) -> Result<Vec<f64>> + Sync,
{
    pub fn new(shape: Shape, f: F) -> Self {
        Self { shape, f }
    }
}

impl<F> TensorAction for FnAction<F>
where
    F: Fn(usize, &[&[f64]]) -> Result<Vec<f64>> + Sync,
{
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        self.shape.check_action(free_mode, inputs)?;
        (self.f)(free_mode, inputs)
    }
}

/// The action of `A - B` for two actions of identical shape.
pub struct Difference<A, B> {
    lhs: A,
    rhs: B,
}

impl<A: TensorAction, B: TensorAction> Difference<A, B> {
    pub fn new(lhs: A, rhs: B) -> Result<Self> {
        if lhs.shape() != rhs.shape() {
            return Err(crate::CoreError::ShapeMismatch(format!(
                "difference of tensors with shapes {} and {}",
                lhs.shape(),
                rhs.shape()
            )));
        }
        Ok(Self { lhs, rhs })
    }
}

impl<A: TensorAction, B: TensorAction> TensorAction for Difference<A, B> {
    fn shape(&self) -> &Shape {
        self.lhs.shape()
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let mut out = self.lhs.act(free_mode, inputs)?;
        let sub = self.rhs.act(free_mode, inputs)?;
        for (o, s) in out.iter_mut().zip(sub) {
            *o -= s;
        }
        Ok(out)
    }
}

/// Relative deviation of a multilinearity probe.
///
/// Compares `act(.., a*x + b*y, ..)` against `a*act(.., x, ..) + b*act(.., y, ..)`
/// in input slot `slot`. Returns `‖lhs - rhs‖ / max(‖lhs‖, ‖rhs‖, tiny)`.
pub fn linearity_defect<A: TensorAction + ?Sized>(
    oracle: &A,
    free_mode: usize,
    inputs: &[&[f64]],
    slot: usize,
    other: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let combined: Vec<f64> = inputs[slot]
        .iter()
        .zip(other)
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    let mut with = inputs.to_vec();
    with[slot] = &combined;
    let lhs = oracle.act(free_mode, &with)?;
    let fx = oracle.act(free_mode, inputs)?;
    with[slot] = other;
    let fy = oracle.act(free_mode, &with)?;
    let rhs: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| alpha * a + beta * b).collect();
    let diff = crate::linalg::norm2(
        &lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>(),
    );
    let scale = crate::linalg::norm2(&lhs)
        .max(crate::linalg::norm2(&rhs))
        .max(f64::MIN_POSITIVE);
    Ok(diff / scale)
}
