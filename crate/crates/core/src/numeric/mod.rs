//! Dense linear algebra and distance primitives.

mod distance;
mod matrix;
mod pca;
mod scalar;

pub use distance::{cosine_distance_matrix, euclidean_distance_matrix, row_norms, squared_euclidean};
pub use matrix::{dot, norm, Matrix};
pub use pca::{pca_project, Pca, PCA_MAX_ITERATIONS, PCA_TOLERANCE};
pub use scalar::Scalar;
