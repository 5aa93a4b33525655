//! Continuous-depth view of a residual network: the piecewise-constant
//! weight interpolant `s -> Z_{floor((L-1)s)+1}` and explicit Euler solves of
//! `dH/ds = V(s) sigma(W(s) H / sqrt(q)) / sqrt(m)`, `H(0) = A x`.
//!
//! Euler step `k` of `N` reads the weights at `s = k / (N-1)`; at `N = L`
//! this is layer `k+1` and the solve is the network's forward pass.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::model::{forward, layer_scales, perceptron_increment, Activation, ResNetParams};
use crate::numcore::Matrix;
use crate::{Error, Result};

/// Piecewise-constant weights over `s in [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightInterpolant {
    v: Vec<Matrix>,
    w: Vec<Matrix>,
}

impl WeightInterpolant {
    pub fn new(v: Vec<Matrix>, w: Vec<Matrix>) -> Result<Self> {
        if v.is_empty() || v.len() != w.len() {
            return Err(Error::Dimension("interpolant needs L >= 1 matching V and W blocks"));
        }
        let (q, m) = v[0].shape();
        if v.iter().any(|x| x.shape() != (q, m)) || w.iter().any(|x| x.shape() != (m, q)) {
            return Err(Error::Dimension("interpolant blocks must share (q, m)"));
        }
        Ok(WeightInterpolant { v, w })
    }

    pub fn from_params(params: &ResNetParams) -> Self {
        WeightInterpolant { v: params.vs().to_vec(), w: params.ws().to_vec() }
    }

    pub fn depth(&self) -> usize {
        self.v.len()
    }

    /// `(q, m)`.
    pub fn widths(&self) -> (usize, usize) {
        self.v[0].shape()
    }

    /// 0-based block index `floor((L-1) s)` at `s = num / den`, exact.
    pub fn index_at_ratio(&self, num: u64, den: u64) -> usize {
        debug_assert!(den > 0 && num <= den);
        let idx = (self.depth() as u128 - 1) * num as u128 / den as u128;
        (idx as usize).min(self.depth() - 1)
    }

    /// 0-based block index at `s`, clamped to `[0, L-1]`.
    pub fn index_at(&self, s: f64) -> usize {
        let raw = libm::floor((self.depth() - 1) as f64 * s.clamp(0.0, 1.0));
        (raw as usize).min(self.depth() - 1)
    }

    /// `(V(s), W(s))`.
    pub fn eval(&self, s: f64) -> (&Matrix, &Matrix) {
        let k = self.index_at(s);
        (&self.v[k], &self.w[k])
    }

    fn block(&self, k: usize) -> (&Matrix, &Matrix) {
        (&self.v[k], &self.w[k])
    }

    /// Block read by Euler step `k` of `steps`.
    fn euler_index(&self, k: usize, steps: usize) -> usize {
        if steps == 1 {
            0
        } else {
            self.index_at_ratio(k as u64, (steps - 1) as u64)
        }
    }
}

/// Euler solution on the grid `s_k = k / N`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSolution {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: usize,
}

impl OdeSolution {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("a solution holds N + 1 states")
    }
}

fn check_embedding(interp: &WeightInterpolant, a: &Matrix, steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidArgument("Euler needs at least one step"));
    }
    if a.rows() != interp.widths().0 {
        return Err(Error::Dimension("embedding rows must equal q"));
    }
    Ok(())
}

/// Explicit Euler with `steps` uniform steps, keeping every state.
pub fn solve_euler(
    interp: &WeightInterpolant,
    act: Activation,
    a: &Matrix,
    x: &[f64],
    steps: usize,
) -> Result<OdeSolution> {
    let mut states = Vec::with_capacity(steps + 1);
    euler_path(interp, act, a, x, steps, |h| states.push(h.to_vec()))?;
    let grid = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    Ok(OdeSolution { grid, states, steps })
}

/// `H_N(1)` only.
pub fn solve_euler_final(
    interp: &WeightInterpolant,
    act: Activation,
    a: &Matrix,
    x: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    euler_path(interp, act, a, x, steps, |_| {})
}

fn euler_path(
    interp: &WeightInterpolant,
    act: Activation,
    a: &Matrix,
    x: &[f64],
    steps: usize,
    mut visit: impl FnMut(&[f64]),
) -> Result<Vec<f64>> {
    check_embedding(interp, a, steps)?;
    let (q, m) = interp.widths();
    let (inner, outer) = layer_scales(steps, q, m);
    let mut h = a.matvec(x)?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { iteration: None });
    }
    visit(&h);
    for k in 0..steps {
        let (v, w) = interp.block(interp.euler_index(k, steps));
        h = perceptron_increment(v, w, act, &h, inner, outer)?;
        visit(&h);
    }
    Ok(h)
}

/// `||B H_ref(1) - B h_L||` where `H_ref` is the Euler solve at `ref_steps`
/// driven by the network's own interpolant.
pub fn discretization_gap(params: &ResNetParams, act: Activation, x: &[f64], ref_steps: usize) -> Result<f64> {
    if ref_steps < 16 * params.depth() {
        return Err(Error::InvalidArgument("reference steps must be at least 16 L"));
    }
    let interp = WeightInterpolant::from_params(params);
    let fine = solve_euler_final(&interp, act, params.a(), x, ref_steps)?;
    let coarse = forward(params, act, x)?;
    let diff: Vec<f64> = fine.iter().zip(coarse.last()).map(|(f, c)| f - c).collect();
    let out = params.b().matvec(&diff)?;
    Ok(libm::sqrt(out.iter().map(|v| v * v).sum()))
}

/// Sup and L2 distances between two interpolants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupDistance {
    /// `max_s ||V_a(s) - V_b(s)||_F + ||W_a(s) - W_b(s)||_F`.
    pub sup: f64,
    /// `(int_0^1 ||V_a - V_b||_F^2 + ||W_a - W_b||_F^2 ds)^(1/2)`.
    pub l2: f64,
}

#[derive(Clone, Copy, Debug)]
struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    fn cmp(self, other: Ratio) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn breakpoints(depth: usize) -> impl Iterator<Item = Ratio> {
    let den = (depth.max(2) - 1) as u64;
    (0..=den).map(move |num| Ratio { num, den })
}

fn block_distance(a: &WeightInterpolant, ka: usize, b: &WeightInterpolant, kb: usize) -> (f64, f64) {
    let dv = a.v[ka].frobenius_distance(&b.v[kb]).expect("shapes checked");
    let dw = a.w[ka].frobenius_distance(&b.w[kb]).expect("shapes checked");
    (dv, dw)
}

/// Distances evaluated over every breakpoint of both interpolants together
/// with a uniform grid of `grid` points, so the supremum is exact. The L2
/// part integrates the piecewise-constant difference exactly.
pub fn interpolant_sup_distance(a: &WeightInterpolant, b: &WeightInterpolant, grid: usize) -> Result<SupDistance> {
    if a.widths() != b.widths() {
        return Err(Error::Dimension("interpolants must share (q, m)"));
    }
    if grid < a.depth().max(b.depth()) || grid < 2 {
        return Err(Error::InvalidArgument("grid must be at least max(L_a, L_b) and at least 2"));
    }
    let uniform = (0..grid as u64).map(|num| Ratio { num, den: grid as u64 - 1 });
    let mut points: Vec<Ratio> = breakpoints(a.depth()).chain(breakpoints(b.depth())).chain(uniform).collect();
    points.sort_by(|x, y| x.cmp(*y));
    points.dedup_by(|x, y| x.cmp(*y) == Ordering::Equal);

    let mut sup = 0.0f64;
    let mut integral = Vec::with_capacity(points.len());
    for pair in points.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let ka = a.index_at_ratio(lo.num, lo.den);
        let kb = b.index_at_ratio(lo.num, lo.den);
        let (dv, dw) = block_distance(a, ka, b, kb);
        sup = sup.max(dv + dw);
        integral.push((hi.value() - lo.value()) * (dv * dv + dw * dw));
    }
    let (dv, dw) = block_distance(a, a.depth() - 1, b, b.depth() - 1);
    sup = sup.max(dv + dw);
    let l2 = libm::sqrt(crate::numcore::pairwise_sum(&integral));
    Ok(SupDistance { sup, l2 })
}
