//! Dense linear algebra: matrices, point clouds, symmetric eigensolver, MDS.

mod cloud;
mod eigen;
mod matrix;
mod mds;

pub use cloud::{direct_sum, PointCloud};
pub use eigen::{sym_eigen, sym_eigenvalues, SymEigen, MAX_QL_ITERATIONS};
pub use matrix::{dist, dist_sq, dot, forward_substitute, norm, solve_dense, Matrix};
pub use mds::{centered_gram, mds_best_effort, mds_isometric_embed, DEFAULT_MDS_TOL};
