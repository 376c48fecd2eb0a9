//! Matrix-free tensor-train construction.
//!
//! A tensor is accessed only through its *actions*: contractions with `d - 1`
//! vectors that leave one mode free. [`tt_from_actions`] builds a tensor train
//! from such an oracle with a randomized range finder per core.
//!
//! Library indices (modes, entries) are 0-based.

pub mod builder;
pub mod dense;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod rangefinder;
pub mod shape;
pub mod synthetic;
pub mod train;
pub mod ttsvd;

pub use builder::{
    predicted_stage_actions, predicted_uniform_actions, solve_interpolation, tau_for, tt_from_actions,
    BuildConfig, BuildReport, RankSpec, StageReport,
};
pub use dense::{frobenius_norm, relative_error, DenseTensor};
pub use error::{CoreError, Result};
pub use hilbert::HilbertTensor;
pub use io::{tt_load, tt_save};
pub use oracle::{linearity_defect, ActionOracle, Difference, FnAction, TensorAction};
pub use rangefinder::{adaptive_range, posterior_error, randomized_range, MultilinearMap, RangeBasis, Tolerance};
pub use shape::Shape;
pub use synthetic::random_tt;
pub use train::{relative_error_entries, tt_apply, tt_partial_apply, tt_to_dense, TensorTrain, TtCore};
pub use ttsvd::{tt_svd, tt_svd_streamed, StreamedTtSvd, Truncation};
