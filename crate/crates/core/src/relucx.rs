//! Scalar ReLU network of depth `2L` whose trained weights lose depth
//! smoothness.
//!
//! `h_0 = x > 0`, `h_{k+1} = h_k + relu(w_{k+1} h_k) / (2L)`, loss
//! `(h_{2L} - C x)^2`, initialization `w_k = (-1)^k / (2L)`. Since every `h_k`
//! stays positive, `h_{2L} = x prod_k (1 + relu(w_k) / (2L))`: odd layers
//! never activate and the even layers move together to the root `w*` of
//! `(1 + w* / (2L))^L = C`.
//!
//! Training is gradient descent on the depth-scaled flow
//! `w_k <- w_k - eta * 2L * dl/dw_k`.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReluCxConfig {
    /// Half-depth `L`; the network has `2L` layers.
    pub half_depth: usize,
    /// Target multiplier `C > 1`.
    pub c: f64,
    /// Input `x > 0`.
    pub x: f64,
    pub eta: f64,
    pub steps: usize,
}

impl ReluCxConfig {
    /// `x = 1`, `eta = 1e-2`, 4000 steps: horizon `t = 40`, long enough for
    /// `|w - w*| < 1e-10` on `L <= 128`, `C in [1.5, e]`.
    pub fn new(half_depth: usize, c: f64) -> Self {
        ReluCxConfig { half_depth, c, x: 1.0, eta: 1e-2, steps: 4000 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_depth == 0 {
            return Err(Error::InvalidArgument("half depth must be at least 1"));
        }
        if !(self.c > 1.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument("target multiplier must exceed 1"));
        }
        if !(self.x > 0.0 && self.x.is_finite()) {
            return Err(Error::InvalidArgument("input must be positive"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be positive and finite"));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1"));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        2 * self.half_depth
    }
}

/// `w_k(0) = (-1)^k / (2L)` for `k = 1..2L`.
pub fn initial_weights(half_depth: usize) -> Vec<f64> {
    let scale = 1.0 / (2 * half_depth) as f64;
    (1..=2 * half_depth).map(|k| if k % 2 == 0 { scale } else { -scale }).collect()
}

/// `2L (C^{1/L} - 1)`.
pub fn w_star(half_depth: usize, c: f64) -> f64 {
    let l = half_depth as f64;
    2.0 * l * libm::expm1(libm::log(c) / l)
}

/// Root of `L log(1 + w / (2L)) = log C` on `[0, 2L (C - 1)]` by bisection.
pub fn w_star_bisection(half_depth: usize, c: f64) -> f64 {
    let l = half_depth as f64;
    let target = libm::log(c);
    let residual = |w: f64| l * libm::log1p(w / (2.0 * l)) - target;
    let (mut lo, mut hi) = (0.0f64, 2.0 * l * (c - 1.0));
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// `1 + relu(w_k) / (2L)` per layer.
fn factors(weights: &[f64]) -> Vec<f64> {
    let inv = 1.0 / weights.len() as f64;
    weights.iter().map(|&w| 1.0 + w.max(0.0) * inv).collect()
}

/// Output `x prod_k (1 + relu(w_k) / (2L))`, multiplied in ascending factor order.
pub fn output(weights: &[f64], x: f64) -> f64 {
    let mut f = factors(weights);
    f.sort_by(f64::total_cmp);
    x * f.iter().product::<f64>()
}

/// Loss and gradient. Each leave-one-out product removes the first sorted
/// occurrence of the layer's factor, so layers with equal weights receive
/// bit-identical gradients.
pub fn loss_and_gradient(weights: &[f64], x: f64, c: f64) -> (f64, Vec<f64>) {
    let n = weights.len();
    let f = factors(weights);
    let mut sorted = f.clone();
    sorted.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(1.0);
    for &v in &sorted {
        prefix.push(prefix.last().unwrap() * v);
    }
    let mut suffix = alloc::vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = sorted[i] * suffix[i + 1];
    }
    let out = x * prefix[n];
    let residual = out - c * x;
    let inv = 1.0 / n as f64;
    let grad = weights
        .iter()
        .zip(&f)
        .map(|(&w, fk)| {
            if w <= 0.0 {
                // relu'(w h) = 0, including the w = 0 convention
                return 0.0;
            }
            let first = sorted.partition_point(|v| v.total_cmp(fk).is_lt());
            2.0 * residual * x * prefix[first] * suffix[first + 1] * inv
        })
        .collect();
    (residual * residual, grad)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReluCxRecord {
    pub config: ReluCxConfig,
    /// `(iteration, common even-layer weight, loss)` for iterations `0..=steps`.
    pub trace: Vec<(usize, f64, f64)>,
    pub initial: Vec<f64>,
    pub final_weights: Vec<f64>,
    /// Odd-layer weights equal their initial value bitwise at every iteration.
    pub odd_frozen: bool,
    /// Even-layer weights equal each other bitwise at every iteration.
    pub even_symmetric: bool,
}

impl ReluCxRecord {
    pub fn w_final(&self) -> f64 {
        self.final_weights[1]
    }

    pub fn abs_err(&self) -> f64 {
        (self.w_final() - w_star(self.config.half_depth, self.config.c)).abs()
    }

    /// `max_k |w_{k+1} - w_k|` of the final weights.
    pub fn final_max_gap(&self) -> f64 {
        self.final_weights.windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max)
    }
}

pub fn run_relu_cx(cfg: &ReluCxConfig) -> Result<ReluCxRecord> {
    cfg.validate()?;
    let initial = initial_weights(cfg.half_depth);
    let mut w = initial.clone();
    let scale = cfg.eta * cfg.depth() as f64;
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut odd_frozen = true;
    let mut even_symmetric = true;
    for i in 0..=cfg.steps {
        odd_frozen &= w.iter().zip(&initial).step_by(2).all(|(a, b)| a.to_bits() == b.to_bits());
        even_symmetric &= w.iter().skip(1).step_by(2).all(|a| a.to_bits() == w[1].to_bits());
        let (loss, grad) = loss_and_gradient(&w, cfg.x, cfg.c);
        if !loss.is_finite() {
            return Err(Error::NonFiniteState { iteration: Some(i) });
        }
        trace.push((i, w[1], loss));
        if i == cfg.steps {
            break;
        }
        for (wk, g) in w.iter_mut().zip(&grad) {
            *wk -= scale * g;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { iteration: Some(i + 1) });
        }
    }
    Ok(ReluCxRecord { config: *cfg, trace, initial, final_weights: w, odd_frozen, even_symmetric })
}
