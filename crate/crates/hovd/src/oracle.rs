//! Derivative tensors presented as tensor actions.

use std::sync::Arc;

use ttpeel_core::{CoreError, Shape, TensorAction};

use crate::engine::DerivativeEngine;
use crate::error::{HovdError, Result};
use crate::model::ImplicitModel;
use crate::rd::Whitening;

/// The order-`k` derivative tensor `T(x₁ … x_k, q) = S(p₁ … p_k, q)` with
/// `p = W x` when whitened and `p = x` otherwise. Modes `0 … k−1` are
/// derivative slots of size `N_m`, mode `k` is the output of size `N_q`.
pub struct DerivativeOracle<M> {
    engine: Arc<DerivativeEngine<M>>,
    order: usize,
    whitening: Option<Arc<Whitening>>,
    shape: Shape,
}

impl<M: ImplicitModel> DerivativeOracle<M> {
    pub fn new(engine: Arc<DerivativeEngine<M>>, order: usize, whitening: Option<Arc<Whitening>>) -> Result<Self> {
        if order == 0 {
            return Err(HovdError::Config("derivative order must be at least 1".into()));
        }
        let model = engine.model();
        let mut dims = vec![model.param_dim(); order];
        dims.push(model.output_dim());
        Ok(Self {
            shape: Shape::new(dims)?,
            engine,
            order,
            whitening,
        })
    }

    pub fn engine(&self) -> &Arc<DerivativeEngine<M>> {
        &self.engine
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_whitened(&self) -> bool {
        self.whitening.is_some()
    }

    fn map_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.whitening {
            Some(w) => w.apply(x),
            None => Ok(x.to_vec()),
        }
    }

    fn dispatch(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let k = self.order;
        if free_mode == k {
            let p = inputs.iter().map(|x| self.map_input(x)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[f64]> = p.iter().map(|v| v.as_slice()).collect();
            self.engine.output_free(&refs)
        } else {
            let (q, dirs) = inputs.split_last().expect("order ≥ 1 leaves the output input");
            let p = dirs.iter().map(|x| self.map_input(x)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[f64]> = p.iter().map(|v| v.as_slice()).collect();
            let g = self.engine.mode_free(&refs, q)?;
            self.map_input(&g)
        }
    }
}

impl<M: ImplicitModel> TensorAction for DerivativeOracle<M> {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn act(&self, free_mode: usize, inputs: &[&[f64]]) -> Result<Vec<f64>, CoreError> {
        self.shape.check_action(free_mode, inputs)?;
        self.dispatch(free_mode, inputs).map_err(CoreError::from)
    }
}

/// Convenience constructor for an oracle at the same base point.
pub fn make_derivative_oracle<M: ImplicitModel>(
    engine: &Arc<DerivativeEngine<M>>,
    order: usize,
    whitening: Option<&Arc<Whitening>>,
) -> Result<DerivativeOracle<M>> {
    DerivativeOracle::new(Arc::clone(engine), order, whitening.cloned())
}
