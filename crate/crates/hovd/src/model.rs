//! Implicitly defined maps `m ↦ F(m, u(m))` with `G(m, u(m)) = 0`.

use crate::error::Result;

/// Which argument of `G` or `F` a derivative slot refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    M,
    U,
}

/// Solves with a factorized `∂G/∂u` at a fixed base point.
pub trait StateSolver: Send + Sync {
    /// `x` with `(∂G/∂u) x = rhs`.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;
    /// `x` with `(∂G/∂u)ᵀ x = rhs`.
    fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>>;
}

/// A residual `G(m, u) ∈ ℝ^{N_u}` and an output `F(m, u) ∈ ℝ^{N_q}` with
/// closed-form partial derivatives of every order.
///
/// A partial with `a` parameter directions and `b` state directions is
/// `∂^{a+b} G / ∂m^a ∂u^b` contracted with all of them. `None` means the
/// partial vanishes identically.
pub trait ImplicitModel: Send + Sync {
    fn param_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn residual(&self, m: &[f64], u: &[f64]) -> Vec<f64>;
    fn output(&self, m: &[f64], u: &[f64]) -> Vec<f64>;

    fn residual_partial(&self, m: &[f64], u: &[f64], m_dirs: &[&[f64]], u_dirs: &[&[f64]]) -> Option<Vec<f64>>;

    /// `wᵀ ∂G[m_dirs, u_dirs, ·]` with one extra slot of kind `free` left open.
    fn residual_partial_adjoint(
        &self,
        m: &[f64],
        u: &[f64],
        m_dirs: &[&[f64]],
        u_dirs: &[&[f64]],
        w: &[f64],
        free: Var,
    ) -> Option<Vec<f64>>;

    fn output_partial(&self, m: &[f64], u: &[f64], m_dirs: &[&[f64]], u_dirs: &[&[f64]]) -> Option<Vec<f64>>;

    fn output_partial_adjoint(
        &self,
        m: &[f64],
        u: &[f64],
        m_dirs: &[&[f64]],
        u_dirs: &[&[f64]],
        w: &[f64],
        free: Var,
    ) -> Option<Vec<f64>>;

    fn factorize_state_jacobian(&self, m: &[f64], u: &[f64]) -> Result<Box<dyn StateSolver>>;

    /// Initial guess for the state solve.
    fn initial_state(&self, m: &[f64]) -> Vec<f64> {
        let _ = m;
        vec![0.0; self.state_dim()]
    }
}
