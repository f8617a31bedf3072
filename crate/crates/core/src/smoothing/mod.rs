//! Kernels, kernel smoothers and bandwidth selection.

mod bandwidth;
mod estimators;
mod kernel;

pub use bandwidth::{cv_bandwidth, default_grid, normal_reference_bandwidth, BandwidthMode, BandwidthSpec, DEFAULT_GRID_POINTS, NORMAL_REFERENCE_CONSTANT};
pub(crate) use bandwidth::{cv_select, normal_reference_from_sd, sample_sd};
pub use estimators::{fitted_values, kde, kde_at_rows, local_linear, local_linear_or_nw, loo_cv_score, nadaraya_watson, NeighborIndex, Smoother};
pub use kernel::{Kernel, KernelKind};
