use alloc::vec;
use alloc::vec::Vec;

use crate::model::Activation;
use crate::numcore::{gauss_hermite_nodes, gauss_laguerre_nodes, QuadratureRule, MAX_ORDER};
use crate::{Error, Result};

/// Normalized probabilists' Hermite polynomials `h_0(x)..h_rmax(x)`, by
/// `h_{r+1} = (x h_r - sqrt(r) h_{r-1}) / sqrt(r + 1)`.
pub fn hermite_values(x: f64, rmax: usize) -> Vec<f64> {
    let mut h = vec![0.0; rmax + 1];
    h[0] = 1.0;
    if rmax >= 1 {
        h[1] = x;
    }
    for r in 1..rmax {
        h[r + 1] = (x * h[r] - libm::sqrt(r as f64) * h[r - 1]) / libm::sqrt((r + 1) as f64);
    }
    h
}

/// Coefficients `eta_r = E[sigma(G) h_r(G)]`, `G ~ N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteSpectrum {
    pub activation: Activation,
    pub coefficients: Vec<f64>,
    pub order: usize,
    /// `E[sigma(G)^2]` by the same quadrature.
    pub second_moment: f64,
}

impl HermiteSpectrum {
    pub fn rmax(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `|sum_r eta_r^2 - E[sigma(G)^2]|`.
    pub fn parseval_defect(&self) -> f64 {
        let energy: f64 = self.coefficients.iter().map(|e| e * e).sum();
        (energy - self.second_moment).abs()
    }

    /// First `r >= from` with `|eta_r| > threshold`.
    pub fn first_significant(&self, from: usize, threshold: f64) -> Option<usize> {
        (from..self.coefficients.len()).find(|&r| self.coefficients[r].abs() > threshold)
    }
}

/// Expansion of `act` up to degree `rmax` with an `order`-point rule.
///
/// Smooth activations use Gauss-Hermite. Activations with a kink at the
/// origin integrate each half-line separately by generalized Gauss-Laguerre
/// in `u = x^2 / 2`, which is exact for piecewise-polynomial integrands.
pub fn hermite_coefficients(act: Activation, rmax: usize, order: usize) -> Result<HermiteSpectrum> {
    if order < rmax + 10 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut coefficients = vec![0.0; rmax + 1];
    let second_moment;
    if let Some((pos, neg)) = branches(act) {
        let rule = HalfLineRule::new(order)?;
        for (r, c) in coefficients.iter_mut().enumerate() {
            let h = |x: f64| hermite_values(x, r)[r];
            *c = rule.expectation(|x| pos(x) * h(x), |x| neg(x) * h(x));
        }
        second_moment = rule.expectation(|x| pos(x) * pos(x), |x| neg(x) * neg(x));
    } else {
        let rule = gauss_hermite_nodes(order)?;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = act.value(x);
            for (c, h) in coefficients.iter_mut().zip(hermite_values(x, rmax)) {
                *c += w * s * h;
            }
        }
        second_moment = rule.integrate(|x| act.value(x) * act.value(x));
    }
    Ok(HermiteSpectrum { activation: act, coefficients, order, second_moment })
}

/// Polynomial branches `(x >= 0, x < 0)` of an activation with a kink at 0.
fn branches(act: Activation) -> Option<(fn(f64) -> f64, fn(f64) -> f64)> {
    match act {
        Activation::Relu => Some((|x| x, |_| 0.0)),
        _ => {
            debug_assert!(!act.has_kink_at_zero());
            None
        }
    }
}

/// `E[f(G)]` for `f` given by one polynomial on each half-line.
struct HalfLineRule {
    /// `alpha = -1/2`, for even parts.
    even: QuadratureRule,
    /// `alpha = 0`, for odd parts divided by `x`.
    odd: QuadratureRule,
}

impl HalfLineRule {
    fn new(order: usize) -> Result<Self> {
        Ok(HalfLineRule { even: gauss_laguerre_nodes(order, -0.5)?, odd: gauss_laguerre_nodes(order, 0.0)? })
    }

    /// `int_0^inf phi(x) e^{-x^2/2} dx` for a polynomial `phi`.
    fn half(&self, phi: impl Fn(f64) -> f64) -> f64 {
        // with u = x^2 / 2 the even part of phi is a polynomial in u and
        //   int phi_e e^{-x^2/2} dx = 2^{-1/2} int phi_e(sqrt(2u)) u^{-1/2} e^{-u} du,
        // the odd part is x times a polynomial in u and
        //   int phi_o e^{-x^2/2} dx = int (phi_o / x)(sqrt(2u)) e^{-u} du
        let even = self.even.integrate(|u| {
            let x = libm::sqrt(2.0 * u);
            0.5 * (phi(x) + phi(-x))
        });
        let odd = self.odd.integrate(|u| {
            let x = libm::sqrt(2.0 * u);
            0.5 * (phi(x) - phi(-x)) / x
        });
        even / core::f64::consts::SQRT_2 + odd
    }

    fn expectation(&self, pos: impl Fn(f64) -> f64, neg: impl Fn(f64) -> f64) -> f64 {
        let total = self.half(&pos) + self.half(|x| neg(-x));
        total / libm::sqrt(2.0 * core::f64::consts::PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_h1() {
        let spec = hermite_coefficients(Activation::Identity, 40, 80).unwrap();
        assert!((spec.coefficients[1] - 1.0).abs() <= 1e-10);
        for (r, c) in spec.coefficients.iter().enumerate() {
            if r != 1 {
                assert!(c.abs() <= 1e-10, "eta_{r} = {c}");
            }
        }
    }

    #[test]
    fn relu_closed_forms() {
        // E[max(G, 0)] = 1/sqrt(2 pi), E[max(G, 0) G] = 1/2,
        // E[max(G, 0) (G^2 - 1)] / sqrt(2) = 1 / (2 sqrt(pi)), odd r >= 3 vanish
        let spec = hermite_coefficients(Activation::Relu, 12, 40).unwrap();
        let pi = core::f64::consts::PI;
        assert!((spec.coefficients[0] - 1.0 / libm::sqrt(2.0 * pi)).abs() <= 1e-12);
        assert!((spec.coefficients[1] - 0.5).abs() <= 1e-12);
        assert!((spec.coefficients[2] - 1.0 / (2.0 * libm::sqrt(pi))).abs() <= 1e-12);
        for r in (3..=11).step_by(2) {
            assert!(spec.coefficients[r].abs() <= 1e-12);
        }
        assert!((spec.second_moment - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn orthonormal_up_to_40() {
        let rule = gauss_hermite_nodes(80).unwrap();
        let mut gram = vec![vec![0.0; 41]; 41];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let h = hermite_values(x, 40);
            for i in 0..=40 {
                for j in 0..=40 {
                    gram[i][j] += w * h[i] * h[j];
                }
            }
        }
        for i in 0..=40 {
            for j in 0..=40 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - target).abs() <= 1e-9, "({i}, {j}) {}", gram[i][j]);
            }
        }
    }

    #[test]
    fn parseval_and_bessel() {
        for act in [Activation::Gelu, Activation::Tanh] {
            let spec = hermite_coefficients(act, 40, 80).unwrap();
            assert!(spec.parseval_defect() <= 1e-6, "{act}: {}", spec.parseval_defect());
            let energy: f64 = spec.coefficients.iter().map(|e| e * e).sum();
            assert!(energy <= spec.second_moment + 1e-9);
        }
        // odd activation: even coefficients vanish
        let tanh = hermite_coefficients(Activation::Tanh, 10, 40).unwrap();
        assert!(tanh.coefficients.iter().step_by(2).all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn gelu_low_coefficients() {
        // E[G Phi(G)] = 1 / (2 sqrt(pi)), E[G^2 Phi(G)] = 1/2
        let spec = hermite_coefficients(Activation::Gelu, 20, 60).unwrap();
        let pi = core::f64::consts::PI;
        assert!((spec.coefficients[0] - 1.0 / (2.0 * libm::sqrt(pi))).abs() < 1e-12);
        assert!((spec.coefficients[1] - 0.5).abs() < 1e-12);
        assert_eq!(spec.first_significant(2, 0.01), Some(2));
    }

    #[test]
    fn order_preconditions() {
        assert!(matches!(hermite_coefficients(Activation::Gelu, 40, 49), Err(Error::UnsupportedOrder(49))));
        assert!(hermite_coefficients(Activation::Gelu, 40, 257).is_err());
    }
}
