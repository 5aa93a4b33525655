//! Gaussian quadrature by Golub-Welsch: the nodes are the eigenvalues of the
//! Jacobi matrix of the monic orthogonal polynomials, the weights are
//! `mu_0` times the squared first components of its eigenvectors.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::tridiagonal_ql;
use crate::{Error, Result};

/// Largest supported rule size.
pub const MAX_ORDER: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn golub_welsch(mut diag: Vec<f64>, off: &[f64], mu0: f64) -> Result<QuadratureRule> {
    let n = diag.len();
    let mut sub = vec![0.0; n];
    sub[..n - 1].copy_from_slice(off);
    let z = tridiagonal_ql(&mut diag, &mut sub)?;
    let mut pairs: Vec<(f64, f64)> =
        diag.into_iter().zip(z).map(|(x, v)| (x, mu0 * v * v)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Rule for `E[f(G)]`, `G ~ N(0, 1)`, i.e. `int f(x) exp(-x^2/2)/sqrt(2 pi) dx`.
///
/// Exact for polynomials of degree up to `2 * order - 1`. The probabilists'
/// Hermite recurrence `He_{k+1} = x He_k - k He_{k-1}` gives a zero diagonal
/// and off-diagonal `sqrt(k)`.
pub fn gauss_hermite_nodes(order: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    let off: Vec<f64> = (1..order).map(|k| libm::sqrt(k as f64)).collect();
    let mut rule = golub_welsch(vec![0.0; order], &off, 1.0)?;
    // The weight is even; fold the rule so it is exactly symmetric.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if order % 2 == 1 {
        rule.nodes[order / 2] = 0.0;
    }
    Ok(rule)
}

/// Generalized Gauss-Laguerre rule for `int_0^inf u^alpha e^{-u} f(u) du`.
///
/// Supported for `alpha > -1`; used for half-line Gaussian integrals of
/// activations with a kink at the origin.
pub fn gauss_laguerre_nodes(order: usize, alpha: f64) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(alpha > -1.0) {
        return Err(Error::InvalidArgument("laguerre alpha must exceed -1"));
    }
    let diag: Vec<f64> = (0..order).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let off: Vec<f64> =
        (1..order).map(|k| libm::sqrt(k as f64 * (k as f64 + alpha))).collect();
    golub_welsch(diag, &off, libm::tgamma(alpha + 1.0))
}
