use alloc::vec::Vec;

use super::{Activation, ResNetParams};
use crate::numcore::Matrix;
use crate::{Error, Result};

/// Hidden states `h_0..h_L` of one input.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least h_0")
    }
}

/// Hidden states `h_0..h_L` of a batch, one `q x n` matrix per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchTrajectory {
    pub states: Vec<Matrix>,
}

impl BatchTrajectory {
    pub fn column(&self, i: usize) -> Trajectory {
        Trajectory { states: self.states.iter().map(|h| h.column(i)).collect() }
    }

    pub fn last(&self) -> &Matrix {
        self.states.last().expect("trajectory has at least h_0")
    }
}

/// `(1 / sqrt(q), 1 / (steps * sqrt(m)))`: the inner and outer factors of
/// one residual update. Shared by the network and the Euler solver so that
/// both perform bit-identical arithmetic.
#[inline]
pub(crate) fn layer_scales(steps: usize, hidden: usize, width: usize) -> (f64, f64) {
    (1.0 / libm::sqrt(hidden as f64), 1.0 / (steps as f64 * libm::sqrt(width as f64)))
}

/// `h + outer * V sigma(inner * W h)`.
pub(crate) fn perceptron_increment(
    v: &Matrix,
    w: &Matrix,
    act: Activation,
    h: &[f64],
    inner: f64,
    outer: f64,
) -> Result<Vec<f64>> {
    let u = w.matvec(h)?;
    let s: Vec<f64> = u.iter().map(|&ui| act.value(ui * inner)).collect();
    let vs = v.matvec(&s)?;
    let next: Vec<f64> = h.iter().zip(&vs).map(|(hi, d)| hi + outer * d).collect();
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { iteration: None });
    }
    Ok(next)
}

/// Forward pass of one input `x` (length `d`).
pub fn forward(params: &ResNetParams, act: Activation, x: &[f64]) -> Result<Trajectory> {
    let dims = params.dims();
    if x.len() != dims.input {
        return Err(Error::Dimension("input length must equal d"));
    }
    let (inner, outer) = layer_scales(dims.depth, dims.hidden, dims.width);
    let mut states = Vec::with_capacity(dims.depth + 1);
    let h0 = params.a().matvec(x)?;
    if h0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { iteration: None });
    }
    states.push(h0);
    for k in 0..dims.depth {
        let next = perceptron_increment(params.v(k), params.w(k), act, &states[k], inner, outer)?;
        states.push(next);
    }
    Ok(Trajectory { states })
}

/// Network output `F(x) = B h_L`.
pub fn output(params: &ResNetParams, trajectory: &Trajectory) -> Vec<f64> {
    params
        .b()
        .matvec(trajectory.last())
        .expect("trajectory state has the hidden width")
}

/// Column-parallel forward pass on `X` (`d x n`); column `i` of every
/// state is bit-identical to `forward` on `X[:, i]`.
pub fn forward_batch(params: &ResNetParams, act: Activation, x: &Matrix) -> Result<BatchTrajectory> {
    let dims = params.dims();
    if x.rows() != dims.input {
        return Err(Error::Dimension("input rows must equal d"));
    }
    let n = x.cols();
    let (inner, outer) = layer_scales(dims.depth, dims.hidden, dims.width);
    let mut states = Vec::with_capacity(dims.depth + 1);
    let h0 = params.a().matmul(x)?;
    if !h0.is_finite() {
        return Err(Error::NonFiniteState { iteration: None });
    }
    states.push(h0);
    let mut u = Matrix::zeros(dims.width, n);
    let mut vs = Matrix::zeros(dims.hidden, n);
    for k in 0..dims.depth {
        params.w(k).matmul_into(&states[k], &mut u);
        let s = u.map(|ui| act.value(ui * inner));
        params.v(k).matmul_into(&s, &mut vs);
        let mut next = states[k].clone();
        for (hi, d) in next.as_mut_slice().iter_mut().zip(vs.as_slice()) {
            *hi += outer * d;
        }
        if !next.is_finite() {
            return Err(Error::NonFiniteState { iteration: None });
        }
        states.push(next);
    }
    Ok(BatchTrajectory { states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_gp_smooth, init_iid, init_standard, Dims};
    use crate::numcore::{gaussian_matrix, Rng};

    fn scalar_params(v: f64, w: f64, depth: usize) -> ResNetParams {
        let one = |x: f64| Matrix::new(1, 1, alloc::vec![x]).unwrap();
        ResNetParams::from_parts(
            one(1.0),
            (0..depth).map(|_| one(v)).collect(),
            (0..depth).map(|_| one(w)).collect(),
            one(1.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_v_keeps_state_constant() {
        let p = init_standard(&Rng::new(3), Dims::new(5, 6, 4, 2, 2)).unwrap();
        let x = [0.7, -1.3];
        let t = forward(&p, Activation::Gelu, &x).unwrap();
        let h0 = p.a().matvec(&x).unwrap();
        assert!(t.states.iter().all(|h| *h == h0));
        assert!(output(&p, &t).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_evaluated_scalar_identity() {
        let p = scalar_params(1.0, 1.0, 1);
        let t = forward(&p, Activation::Identity, &[1.0]).unwrap();
        assert_eq!(t.states[1], alloc::vec![2.0]);
        assert_eq!(output(&p, &t), alloc::vec![2.0]);
    }

    #[test]
    fn scalar_gelu_matches_reference_recursion() {
        // L = 2, q = m = 1, all weights 1: h <- h + (1/2) gelu(h)
        fn gelu(x: f64) -> f64 {
            0.5 * x * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
        }
        let mut h = 1.0f64;
        for _ in 0..2 {
            h += 0.5 * gelu(h);
        }
        // gelu(1) = 0.841344746..., h1 = 1.42067237..., h2 = h1 + gelu(h1)/2
        assert!((gelu(1.0) - 0.841_344_746_068_543).abs() < 1e-12);
        let p = scalar_params(1.0, 1.0, 2);
        let t = forward(&p, Activation::Gelu, &[1.0]).unwrap();
        assert!((t.states[2][0] - h).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_single_bitwise() {
        let dims = Dims::new(6, 7, 5, 3, 2);
        let mut p = init_gp_smooth(&Rng::new(8), dims, 0.4).unwrap();
        // random A, B as well
        let (a, v, w, _) = p.clone().into_parts();
        let b = gaussian_matrix(&mut Rng::new(1), 2, 7);
        p = ResNetParams::from_parts(a, v, w, b).unwrap();
        let x = gaussian_matrix(&mut Rng::new(2), 3, 4);
        for act in Activation::ALL {
            let batch = forward_batch(&p, act, &x).unwrap();
            for i in 0..4 {
                let single = forward(&p, act, &x.column(i)).unwrap();
                assert_eq!(batch.column(i), single, "{act} column {i}");
            }
        }
        let one = forward_batch(&p, Activation::Tanh, &Matrix::from_columns(&[x.column(1)]).unwrap())
            .unwrap();
        assert_eq!(one.column(0), forward(&p, Activation::Tanh, &x.column(1)).unwrap());
    }

    #[test]
    fn zero_v_batch_is_ax() {
        let p = init_iid(&Rng::new(3), Dims::new(4, 6, 4, 2, 2)).unwrap();
        let x = gaussian_matrix(&mut Rng::new(5), 2, 3);
        let t = forward_batch(&p, Activation::Gelu, &x).unwrap();
        let ax = p.a().matmul(&x).unwrap();
        assert!(t.states.iter().all(|h| *h == ax));
    }

    #[test]
    fn divergence_is_reported() {
        let p = scalar_params(1e300, 1.0, 3);
        assert_eq!(
            forward(&p, Activation::Identity, &[1e10]),
            Err(Error::NonFiniteState { iteration: None })
        );
        assert!(forward(&p, Activation::Identity, &[1.0, 2.0]).is_err());
    }
}
