//! Damped Newton solve of `G(m, u) = 0`.

use log::debug;

use crate::error::{HovdError, Result};
use crate::model::ImplicitModel;

pub const MAX_NEWTON_ITERATIONS: usize = 50;
pub const NEWTON_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton with backtracking from [`ImplicitModel::initial_state`]. Stops once
/// `‖G(m, u)‖ < 1e−10 · max(1, ‖G(m, 0)‖)`.
pub fn solve_state<M: ImplicitModel + ?Sized>(model: &M, m: &[f64]) -> Result<StateSolution> {
    if m.len() != model.param_dim() {
        return Err(HovdError::ShapeMismatch(format!(
            "parameter has length {}, expected {}",
            m.len(),
            model.param_dim()
        )));
    }
    let zero = vec![0.0; model.state_dim()];
    let tol = NEWTON_RTOL * norm(&model.residual(m, &zero)).max(1.0);
    let mut u = model.initial_state(m);
    let mut g = model.residual(m, &u);
    let mut r = norm(&g);
    for it in 0..=MAX_NEWTON_ITERATIONS {
        if r < tol {
            debug!("Newton converged in {it} steps, residual {r:.3e}");
            return Ok(StateSolution {
                u,
                iterations: it,
                residual_norm: r,
            });
        }
        if it == MAX_NEWTON_ITERATIONS {
            break;
        }
        let step = model.factorize_state_jacobian(m, &u)?.solve(&g)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let gt = model.residual(m, &trial);
            let rt = norm(&gt);
            if rt <= (1.0 - 1e-4 * t) * r || t < 1e-10 {
                u = trial;
                g = gt;
                r = rt;
                break;
            }
            t *= 0.5;
        }
    }
    Err(HovdError::Newton {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: r,
    })
}
