//! High-order derivative tensors of implicitly defined maps
//! `m ↦ F(m, u(m))`, `G(m, u(m)) = 0`, accessed through their actions.
//!
//! [`DerivativeEngine`] solves the lattices of state and adjoint derivative
//! systems with one factorization of `∂G/∂u`. [`DerivativeOracle`] exposes
//! the order-`k` derivative as a [`ttpeel_core::TensorAction`] so it can be
//! compressed by [`ttpeel_core::tt_from_actions`].

pub mod compress;
pub mod engine;
pub mod error;
pub mod model;
pub mod multiindex;
pub mod newton;
pub mod oracle;
pub mod rd;
pub mod sigma1;
pub mod taylor;
pub mod terms;

pub use compress::{compress_to_tolerance, relative_sigma1_error, Compression, RankTrial};
pub use engine::{DerivativeEngine, LatticeSolution, SolveCounts};
pub use error::{HovdError, Result};
pub use model::{ImplicitModel, StateSolver, Var};
pub use multiindex::MultiIndex;
pub use newton::{solve_state, StateSolution};
pub use oracle::{make_derivative_oracle, DerivativeOracle};
pub use rd::{ReactionDiffusion, SparseLu, Whitening};
pub use sigma1::{sigma1_estimate, Sigma1Estimate, Sigma1Options};
pub use taylor::{build_taylor, taylor_error_stats, whitened_map, OrderStats, TaylorErrors, TaylorSurrogate};
