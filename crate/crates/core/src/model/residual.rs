//! The general residual form `h_{k+1} = h_k + f(h_k, Z_{k+1}) / L` and its
//! backpropagation, written against an abstract residual map.
//!
//! The perceptron network has a fused, batched implementation in
//! [`crate::grad`]; this module is the per-sample reference route and the
//! extension point for other residual maps. Callers are responsible for
//! `f(., z)` being Lipschitz uniformly over bounded `z`; nothing here checks it.

use alloc::vec;
use alloc::vec::Vec;

use super::{Activation, Dataset};
use crate::numcore::Matrix;
use crate::{Error, Result};

/// A residual map `f(h, Z)` with `f(0, Z) = 0`.
pub trait GeneralResidualMap {
    type Weights: Clone;

    /// Hidden dimension `q`.
    fn dim(&self) -> usize;

    /// `f(h, z)`.
    fn eval(&self, h: &[f64], z: &Self::Weights) -> Result<Vec<f64>>;

    /// `d f / d h`, a `q x q` Jacobian.
    fn jacobian_state(&self, h: &[f64], z: &Self::Weights) -> Result<Matrix>;

    /// Gradient of `<f(h, z), p>` with respect to `z`.
    fn weight_vjp(&self, h: &[f64], z: &Self::Weights, p: &[f64]) -> Result<Self::Weights>;

    /// `acc += scale * g`.
    fn accumulate(&self, acc: &mut Self::Weights, g: &Self::Weights, scale: f64);

    fn zeros_like(&self, z: &Self::Weights) -> Self::Weights;
}

/// `f(h, (V, W)) = V sigma(W h / sqrt(q)) / sqrt(m)`.
#[derive(Clone, Copy, Debug)]
pub struct Perceptron {
    pub act: Activation,
    pub hidden: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerceptronWeights {
    pub v: Matrix,
    pub w: Matrix,
}

impl Perceptron {
    fn pre_activation(&self, h: &[f64], z: &PerceptronWeights) -> Result<Vec<f64>> {
        let inner = 1.0 / libm::sqrt(self.hidden as f64);
        Ok(z.w.matvec(h)?.into_iter().map(|u| u * inner).collect())
    }
}

impl GeneralResidualMap for Perceptron {
    type Weights = PerceptronWeights;

    fn dim(&self) -> usize {
        self.hidden
    }

    fn eval(&self, h: &[f64], z: &PerceptronWeights) -> Result<Vec<f64>> {
        let s: Vec<f64> =
            self.pre_activation(h, z)?.into_iter().map(|u| self.act.value(u)).collect();
        let outer = 1.0 / libm::sqrt(self.width as f64);
        Ok(z.v.matvec(&s)?.into_iter().map(|x| x * outer).collect())
    }

    fn jacobian_state(&self, h: &[f64], z: &PerceptronWeights) -> Result<Matrix> {
        let u = self.pre_activation(h, z)?;
        let scale = 1.0 / libm::sqrt((self.width * self.hidden) as f64);
        let scaled_w = Matrix::from_fn(self.width, self.hidden, |j, c| {
            self.act.derivative(u[j]) * z.w.get(j, c)
        });
        Ok(z.v.matmul(&scaled_w)?.scaled(scale))
    }

    fn weight_vjp(&self, h: &[f64], z: &PerceptronWeights, p: &[f64]) -> Result<PerceptronWeights> {
        let u = self.pre_activation(h, z)?;
        let s: Vec<f64> = u.iter().map(|&x| self.act.value(x)).collect();
        let inv_sqrt_m = 1.0 / libm::sqrt(self.width as f64);
        let inv_sqrt_mq = 1.0 / libm::sqrt((self.width * self.hidden) as f64);
        let vtp = z.v.matvec_t(p)?;
        let v = Matrix::from_fn(self.hidden, self.width, |i, j| inv_sqrt_m * p[i] * s[j]);
        let w = Matrix::from_fn(self.width, self.hidden, |j, c| {
            inv_sqrt_mq * self.act.derivative(u[j]) * vtp[j] * h[c]
        });
        Ok(PerceptronWeights { v, w })
    }

    fn accumulate(&self, acc: &mut PerceptronWeights, g: &PerceptronWeights, scale: f64) {
        acc.v.axpy(scale, &g.v);
        acc.w.axpy(scale, &g.w);
    }

    fn zeros_like(&self, z: &PerceptronWeights) -> PerceptronWeights {
        PerceptronWeights {
            v: Matrix::zeros(z.v.rows(), z.v.cols()),
            w: Matrix::zeros(z.w.rows(), z.w.cols()),
        }
    }
}

/// States `h_0..h_L` of the general residual network for one input.
pub fn general_forward<M: GeneralResidualMap>(
    map: &M,
    a: &Matrix,
    layers: &[M::Weights],
    x: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if layers.is_empty() {
        return Err(Error::Dimension("depth must be at least 1"));
    }
    let depth = layers.len() as f64;
    let mut states = vec![a.matvec(x)?];
    for z in layers {
        let h = states.last().expect("non-empty");
        let f = map.eval(h, z)?;
        let next: Vec<f64> = h.iter().zip(&f).map(|(hi, fi)| hi + fi / depth).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { iteration: None });
        }
        states.push(next);
    }
    Ok(states)
}

/// Gradients of the mean squared error for the general residual network.
#[derive(Clone, Debug)]
pub struct GeneralGradients<W> {
    pub da: Matrix,
    pub dz: Vec<W>,
    pub db: Matrix,
    pub loss: f64,
}

/// Per-sample backpropagation:
/// `p_L = 2 B^T (F(x) - y)`, `p_k = p_{k+1} + (1/L) (df/dh)^T p_{k+1}`,
/// then `dA = (1/n) sum p_0 x^T`, `dZ_k = (1/(nL)) sum (df/dZ)^T p_k`,
/// `dB = (2/n) sum (F(x) - y) h_L^T`.
pub fn general_gradients<M: GeneralResidualMap>(
    map: &M,
    a: &Matrix,
    layers: &[M::Weights],
    b: &Matrix,
    data: &Dataset,
) -> Result<GeneralGradients<M::Weights>> {
    let n = data.len();
    let depth = layers.len();
    let mut da = Matrix::zeros(a.rows(), a.cols());
    let mut db = Matrix::zeros(b.rows(), b.cols());
    let mut dz: Vec<M::Weights> = layers.iter().map(|z| map.zeros_like(z)).collect();
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    let inv_nl = 1.0 / (n as f64 * depth as f64);
    for i in 0..n {
        let x = data.input(i);
        let y = data.target(i);
        let states = general_forward(map, a, layers, &x)?;
        let h_last = states.last().expect("non-empty");
        let residual: Vec<f64> = b.matvec(h_last)?.iter().zip(&y).map(|(f, t)| f - t).collect();
        loss += residual.iter().map(|r| r * r).sum::<f64>() * inv_n;
        let mut p: Vec<f64> = b.matvec_t(&residual)?.into_iter().map(|v| 2.0 * v).collect();
        for k in (0..depth).rev() {
            let g = map.weight_vjp(&states[k], &layers[k], &p)?;
            map.accumulate(&mut dz[k], &g, inv_nl);
            let jt_p = map.jacobian_state(&states[k], &layers[k])?.matvec_t(&p)?;
            for (pi, ji) in p.iter_mut().zip(&jt_p) {
                *pi += ji / depth as f64;
            }
        }
        for r in 0..da.rows() {
            for c in 0..da.cols() {
                let v = da.get(r, c) + inv_n * p[r] * x[c];
                da.set(r, c, v);
            }
        }
        for r in 0..db.rows() {
            for c in 0..db.cols() {
                let v = db.get(r, c) + 2.0 * inv_n * residual[r] * h_last[c];
                db.set(r, c, v);
            }
        }
    }
    Ok(GeneralGradients { da, dz, db, loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, init_gp_smooth, Dims};
    use crate::numcore::Rng;

    #[test]
    fn perceptron_vanishes_at_zero_state() {
        let p = init_gp_smooth(&Rng::new(1), Dims::new(3, 5, 4, 2, 2), 0.5).unwrap();
        for act in Activation::ALL {
            let map = Perceptron { act, hidden: 5, width: 4 };
            let z = PerceptronWeights { v: p.v(1).clone(), w: p.w(1).clone() };
            assert!(map.eval(&[0.0; 5], &z).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn general_forward_agrees_with_network() {
        let p = init_gp_smooth(&Rng::new(2), Dims::new(4, 5, 3, 2, 2), 0.5).unwrap();
        let map = Perceptron { act: Activation::Tanh, hidden: 5, width: 3 };
        let layers: Vec<PerceptronWeights> = (0..4)
            .map(|k| PerceptronWeights { v: p.v(k).clone(), w: p.w(k).clone() })
            .collect();
        let x = [0.3, -0.8];
        let general = general_forward(&map, p.a(), &layers, &x).unwrap();
        let fused = forward(&p, Activation::Tanh, &x).unwrap();
        for (g, f) in general.iter().zip(&fused.states) {
            for (a, b) in g.iter().zip(f) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = init_gp_smooth(&Rng::new(3), Dims::new(2, 4, 3, 1, 1), 0.5).unwrap();
        let map = Perceptron { act: Activation::Gelu, hidden: 4, width: 3 };
        let z = PerceptronWeights { v: p.v(0).clone(), w: p.w(0).clone() };
        let h = [0.4, -1.1, 0.9, 0.2];
        let jac = map.jacobian_state(&h, &z).unwrap();
        let eps = 1e-6;
        for c in 0..4 {
            let mut hp = h;
            let mut hm = h;
            hp[c] += eps;
            hm[c] -= eps;
            let fp = map.eval(&hp, &z).unwrap();
            let fm = map.eval(&hm, &z).unwrap();
            for r in 0..4 {
                let fd = (fp[r] - fm[r]) / (2.0 * eps);
                assert!((fd - jac.get(r, c)).abs() < 1e-8);
            }
        }
    }
}
