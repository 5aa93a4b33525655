//! Exact gradients of the empirical risk by backpropagation, and a
//! central finite-difference oracle.
//!
//! With `u_k = W_k h_{k-1} / sqrt(q)`, `s_k = sigma(u_k)` and per-sample
//! costates `p_L = 2 B^T (F(x) - y)`,
//! `p_{k-1} = p_k + W_k^T (sigma'(u_k) * V_k^T p_k) / (L sqrt(mq))`, the
//! gradients are
//!
//! * `dA   = (1/n) sum_i p_{0,i} x_i^T`
//! * `dV_k = (1 / (n L sqrt(m))) sum_i p_{k,i} s_{k,i}^T`
//! * `dW_k = (1 / (n L sqrt(mq))) sum_i (sigma'(u_{k,i}) * V_k^T p_{k,i}) h_{k-1,i}^T`
//! * `dB   = (2/n) sum_i (F(x_i) - y_i) h_{L,i}^T`
//!
//! Sums over the batch are pairwise, in sample order.

use alloc::vec::Vec;

use crate::model::{layer_scales, Activation, Dataset, ResNetParams};
use crate::numcore::{pairwise_sum, Matrix};
use crate::{Error, Result};

/// Largest parameter count accepted by [`finite_difference_gradient`].
pub const FD_PARAM_CAP: usize = 20_000;

/// Gradients of the loss with respect to every parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub da: Matrix,
    pub dv: Vec<Matrix>,
    pub dw: Vec<Matrix>,
    pub db: Matrix,
    /// Loss at the parameters the gradient was taken at.
    pub loss: f64,
}

impl GradientSet {
    pub fn zeros_like(params: &ResNetParams) -> Self {
        let like = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        GradientSet {
            da: like(params.a()),
            dv: params.vs().iter().map(like).collect(),
            dw: params.ws().iter().map(like).collect(),
            db: like(params.b()),
            loss: 0.0,
        }
    }

    /// `||dA||^2 + L sum_k ||dZ_k||^2 + ||dB||^2` with
    /// `||dZ_k||^2 = ||dV_k||^2 + ||dW_k||^2`: the left side of the PL
    /// inequality, i.e. the squared norm of the gradient-flow velocity.
    pub fn pl_numerator(&self) -> f64 {
        let sq = |m: &Matrix| crate::numcore::pairwise_dot(m.as_slice(), m.as_slice());
        let depth = self.dv.len() as f64;
        let z: Vec<f64> = self.dv.iter().zip(&self.dw).map(|(v, w)| sq(v) + sq(w)).collect();
        sq(&self.da) + depth * pairwise_sum(&z) + sq(&self.db)
    }

    /// Flattened in the parameter order of [`ResNetParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(self.da.as_slice());
        self.dv.iter().for_each(|m| out.extend_from_slice(m.as_slice()));
        self.dw.iter().for_each(|m| out.extend_from_slice(m.as_slice()));
        out.extend_from_slice(self.db.as_slice());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.loss.is_finite()
            && self.da.is_finite()
            && self.db.is_finite()
            && self.dv.iter().all(Matrix::is_finite)
            && self.dw.iter().all(Matrix::is_finite)
    }
}

/// Costates `p_0..p_L` for a batch, one `q x n` matrix per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardTrajectory {
    pub costates: Vec<Matrix>,
}

/// Buffers reused across iterations by the trainer.
pub(crate) struct Workspace {
    h: Vec<Matrix>,
    s: Vec<Matrix>,
    ds: Vec<Matrix>,
    u: Matrix,
    vs: Matrix,
    p: Matrix,
    g: Matrix,
    wt: Matrix,
    residual: Matrix,
    keep_costates: bool,
    costates: Vec<Matrix>,
}

impl Workspace {
    pub(crate) fn new(params: &ResNetParams, n: usize) -> Self {
        let dims = params.dims();
        let (q, m, depth) = (dims.hidden, dims.width, dims.depth);
        Workspace {
            h: (0..=depth).map(|_| Matrix::zeros(q, n)).collect(),
            s: (0..depth).map(|_| Matrix::zeros(m, n)).collect(),
            ds: (0..depth).map(|_| Matrix::zeros(m, n)).collect(),
            u: Matrix::zeros(m, n),
            vs: Matrix::zeros(q, n),
            p: Matrix::zeros(q, n),
            g: Matrix::zeros(m, n),
            wt: Matrix::zeros(q, n),
            residual: Matrix::zeros(dims.output, n),
            keep_costates: false,
            costates: Vec::new(),
        }
    }
}

fn check_shapes(params: &ResNetParams, data: &Dataset) -> Result<()> {
    let dims = params.dims();
    data.check_dims(dims.input, dims.output)
}

fn non_finite() -> Error {
    Error::NonFiniteState { iteration: None }
}

/// Mean squared error `(1/n) sum_i ||F(x_i) - y_i||^2`.
pub fn loss(params: &ResNetParams, act: Activation, data: &Dataset) -> Result<f64> {
    check_shapes(params, data)?;
    let traj = crate::model::forward_batch(params, act, data.x())?;
    let out = params.b().matmul(traj.last())?;
    let value = batch_loss(&out, data.y());
    if !value.is_finite() {
        return Err(non_finite());
    }
    Ok(value)
}

fn batch_loss(out: &Matrix, y: &Matrix) -> f64 {
    let (rows, n) = out.shape();
    let per_sample: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for r in 0..rows {
                let d = out.get(r, i) - y.get(r, i);
                acc += d * d;
            }
            acc
        })
        .collect();
    pairwise_sum(&per_sample) / n as f64
}

/// Loss and all gradients.
pub fn backward(params: &ResNetParams, act: Activation, data: &Dataset) -> Result<GradientSet> {
    check_shapes(params, data)?;
    let mut ws = Workspace::new(params, data.len());
    let mut grads = GradientSet::zeros_like(params);
    backward_into(&mut ws, params, act, data, &mut grads)?;
    Ok(grads)
}

/// Costates `p_0..p_L` of every sample (columns), as used by [`backward`].
pub fn costates(params: &ResNetParams, act: Activation, data: &Dataset) -> Result<BackwardTrajectory> {
    check_shapes(params, data)?;
    let mut ws = Workspace::new(params, data.len());
    ws.keep_costates = true;
    let mut grads = GradientSet::zeros_like(params);
    backward_into(&mut ws, params, act, data, &mut grads)?;
    let mut costates = core::mem::take(&mut ws.costates);
    costates.reverse();
    Ok(BackwardTrajectory { costates })
}

pub(crate) fn backward_into(
    ws: &mut Workspace,
    params: &ResNetParams,
    act: Activation,
    data: &Dataset,
    grads: &mut GradientSet,
) -> Result<()> {
    let dims = params.dims();
    let n = data.len();
    let depth = dims.depth;
    let (inner, outer) = layer_scales(depth, dims.hidden, dims.width);
    let inv_sqrt_mq = 1.0 / libm::sqrt((dims.width * dims.hidden) as f64);

    // forward, keeping s_k and sigma'(u_k)
    params.a().matmul_into(data.x(), &mut ws.h[0]);
    for k in 0..depth {
        params.w(k).matmul_into(&ws.h[k], &mut ws.u);
        for ((u, s), d) in ws
            .u
            .as_slice()
            .iter()
            .zip(ws.s[k].as_mut_slice())
            .zip(ws.ds[k].as_mut_slice())
        {
            let (value, deriv) = act.value_and_derivative(u * inner);
            *s = value;
            *d = deriv;
        }
        params.v(k).matmul_into(&ws.s[k], &mut ws.vs);
        let (done, rest) = ws.h.split_at_mut(k + 1);
        let next = &mut rest[0];
        for ((hn, hp), d) in next
            .as_mut_slice()
            .iter_mut()
            .zip(done[k].as_slice())
            .zip(ws.vs.as_slice())
        {
            *hn = hp + outer * d;
        }
    }
    let h_last = &ws.h[depth];
    if !h_last.is_finite() {
        return Err(non_finite());
    }
    params.b().matmul_into(h_last, &mut ws.residual);
    grads.loss = batch_loss(&ws.residual, data.y());
    if !grads.loss.is_finite() {
        return Err(non_finite());
    }
    for (r, y) in ws.residual.as_mut_slice().iter_mut().zip(data.y().as_slice()) {
        *r -= y;
    }

    // p_L = 2 B^T (F - y)
    params.b().matmul_tn_into(&ws.residual, &mut ws.p);
    ws.p.scale(2.0);
    ws.costates.clear();
    if ws.keep_costates {
        ws.costates.push(ws.p.clone());
    }

    let inv_n = 1.0 / n as f64;
    let dv_scale = outer * inv_n;
    let dw_scale = inv_sqrt_mq * inv_n / depth as f64;
    let back_scale = inv_sqrt_mq / depth as f64;
    for k in (0..depth).rev() {
        params.v(k).matmul_tn_into(&ws.p, &mut ws.g);
        for (g, d) in ws.g.as_mut_slice().iter_mut().zip(ws.ds[k].as_slice()) {
            *g *= d;
        }
        ws.p.matmul_nt_into(&ws.s[k], &mut grads.dv[k]);
        grads.dv[k].scale(dv_scale);
        ws.g.matmul_nt_into(&ws.h[k], &mut grads.dw[k]);
        grads.dw[k].scale(dw_scale);
        params.w(k).matmul_tn_into(&ws.g, &mut ws.wt);
        ws.p.axpy(back_scale, &ws.wt);
        if ws.keep_costates {
            ws.costates.push(ws.p.clone());
        }
    }
    ws.p.matmul_nt_into(data.x(), &mut grads.da);
    grads.da.scale(inv_n);
    ws.residual.matmul_nt_into(&ws.h[depth], &mut grads.db);
    grads.db.scale(2.0 * inv_n);
    if !grads.is_finite() {
        return Err(non_finite());
    }
    Ok(())
}

/// Central differences `(l(theta + h e_j) - l(theta - h e_j)) / 2h` for every
/// scalar parameter. Costs two forward passes per parameter.
pub fn finite_difference_gradient(
    params: &ResNetParams,
    act: Activation,
    data: &Dataset,
    step: f64,
) -> Result<GradientSet> {
    if !(1e-8..=1e-2).contains(&step) {
        return Err(Error::InvalidArgument("finite-difference step must lie in [1e-8, 1e-2]"));
    }
    let dims = params.dims();
    let count = dims.param_count();
    if count > FD_PARAM_CAP {
        return Err(Error::InstanceTooLarge { params: count, cap: FD_PARAM_CAP });
    }
    let base = params.to_flat();
    let mut flat_grad = Vec::with_capacity(count);
    let mut probe = base.clone();
    for j in 0..count {
        probe[j] = base[j] + step;
        let plus = loss(&ResNetParams::from_flat(dims, &probe)?, act, data)?;
        probe[j] = base[j] - step;
        let minus = loss(&ResNetParams::from_flat(dims, &probe)?, act, data)?;
        probe[j] = base[j];
        flat_grad.push((plus - minus) / (2.0 * step));
    }
    let as_params = ResNetParams::from_flat(dims, &flat_grad)?;
    let (da, dv, dw, db) = as_params.into_parts();
    Ok(GradientSet { da, dv, dw, db, loss: loss(params, act, data)? })
}

/// Largest entrywise relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &GradientSet, b: &GradientSet, floor: f64) -> f64 {
    a.to_flat()
        .iter()
        .zip(b.to_flat())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
