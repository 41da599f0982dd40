//! Dense linear algebra: the matrix type, truncated and randomized SVD,
//! random rotations and component similarity.
//!
//! Everything here is a pure function of its inputs and runs in `f64`.

mod matrix;
mod svd;

pub use matrix::{dot, norm, Matrix};
pub(crate) use svd::gaussian_matrix;
pub use svd::{
    component_cosine_similarity, max_principal_angle, orthonormal_columns, random_orthogonal,
    svd_randomized, svd_randomized_with, svd_truncated, SvdResult, DEFAULT_POWER_ITERS,
};
