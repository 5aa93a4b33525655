//! Deterministic numerical substrate: dense row-major matrices, a seeded
//! splittable random generator, small symmetric eigen-solvers and Gaussian
//! quadrature rules.

mod linalg;
mod matrix;
mod quadrature;
mod rng;

pub use linalg::{
    cholesky, smallest_singular_value, symmetric_eigenvalues, JACOBI_MAX_SWEEPS, QL_MAX_ITERATIONS,
};
pub use matrix::{frobenius_norm, pairwise_dot, pairwise_sum, Matrix};
pub use quadrature::{gauss_hermite_nodes, gauss_laguerre_nodes, QuadratureRule, MAX_ORDER};
pub use rng::{gaussian_matrix, Rng};
