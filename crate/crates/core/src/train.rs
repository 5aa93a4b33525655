//! Gradient descent on the depth-scaled gradient flow.
//!
//! One iteration with time step `eta` performs
//! `A -= eta pi(dA)`, `Z_k -= eta pi(L dZ_k)`, `B -= eta pi(dB)`,
//! so iteration `i` sits at time `t = i eta`.

use alloc::vec::Vec;

use crate::grad::{backward_into, GradientSet, Workspace};
use crate::model::{Activation, Dataset, Dims, Embedding, InitScheme, ResNetParams};
use crate::numcore::{Matrix, Rng};
use crate::{Error, Result};

/// Gradient post-processing `pi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClipOperator {
    None,
    /// Clamp every coordinate to `[-C, C]`.
    Coordinate(f64),
}

impl ClipOperator {
    pub fn apply(self, g: f64) -> f64 {
        match self {
            ClipOperator::None => g,
            ClipOperator::Coordinate(c) => g.clamp(-c, c),
        }
    }

    /// Bound `M_pi` on the Frobenius norm of a clipped block of `len`
    /// coordinates, infinite when unclipped.
    pub fn block_bound(self, len: usize) -> f64 {
        match self {
            ClipOperator::None => f64::INFINITY,
            ClipOperator::Coordinate(c) => c * libm::sqrt(len as f64),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            ClipOperator::Coordinate(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidArgument("clip bound must be positive and finite"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Time step; residual blocks move by `eta * L * gradient`.
    pub eta: f64,
    pub steps: usize,
    pub clip: ClipOperator,
    /// Snapshot cadence in iterations; `None` means every 5% of `steps`.
    pub snapshot_every: Option<usize>,
    pub seed: u64,
    pub train_a: bool,
    pub train_b: bool,
}

impl TrainConfig {
    pub fn new(eta: f64, steps: usize) -> Self {
        TrainConfig {
            eta,
            steps,
            clip: ClipOperator::None,
            snapshot_every: None,
            seed: 0,
            train_a: true,
            train_b: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument("eta must be positive and finite"));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1"));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidArgument("snapshot cadence must be at least 1"));
        }
        self.clip.validate()
    }

    pub fn cadence(&self) -> usize {
        self.snapshot_every.unwrap_or((self.steps / 20).max(1))
    }

    /// Whether iteration `i` (0..=steps) is snapshotted.
    pub fn is_snapshot(&self, i: usize) -> bool {
        i == 0 || i == self.steps || i % self.cadence() == 0
    }

    /// Time horizon `steps * eta`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.eta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub t: f64,
    pub params: ResNetParams,
}

/// Per-iteration loss and PL numerator for iterations `0..=steps`, plus
/// parameter snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub depth: usize,
    pub times: Vec<f64>,
    pub losses: Vec<f64>,
    pub grad_norm_sq: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl RunRecord {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("a record holds at least one iteration")
    }

    pub fn final_params(&self) -> &ResNetParams {
        &self.snapshots.last().expect("a record holds at least one snapshot").params
    }

    /// Snapshot taken at `iteration`, if any.
    pub fn snapshot_at(&self, iteration: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.iteration == iteration)
    }
}

fn clipped_descent(target: &mut Matrix, grad: &Matrix, eta: f64, scale: f64, clip: ClipOperator) {
    for (z, g) in target.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *z -= eta * clip.apply(scale * g);
    }
}

fn apply_update(params: &mut ResNetParams, grads: &GradientSet, cfg: &TrainConfig) {
    let depth = params.depth() as f64;
    let (a, v, w, b) = params.parts_mut();
    if cfg.train_a {
        clipped_descent(a, &grads.da, cfg.eta, 1.0, cfg.clip);
    }
    for (z, g) in v.iter_mut().zip(&grads.dv) {
        clipped_descent(z, g, cfg.eta, depth, cfg.clip);
    }
    for (z, g) in w.iter_mut().zip(&grads.dw) {
        clipped_descent(z, g, cfg.eta, depth, cfg.clip);
    }
    if cfg.train_b {
        clipped_descent(b, &grads.db, cfg.eta, 1.0, cfg.clip);
    }
}

/// One descent step. Returns the updated parameters and the gradient taken
/// at the input parameters.
pub fn step(
    params: &ResNetParams,
    act: Activation,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ResNetParams, GradientSet)> {
    cfg.validate()?;
    let grads = crate::grad::backward(params, act, data)?;
    let mut next = params.clone();
    apply_update(&mut next, &grads, cfg);
    if !next.is_finite() {
        return Err(Error::NonFiniteState { iteration: Some(0) });
    }
    Ok((next, grads))
}

/// `cfg.steps` descent steps. The gradient is also evaluated after the last
/// step so every recorded iteration carries a loss and a PL numerator.
pub fn run(params: &ResNetParams, act: Activation, data: &Dataset, cfg: &TrainConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let dims = params.dims();
    data.check_dims(dims.input, dims.output)?;
    let mut ws = Workspace::new(params, data.len());
    let mut grads = GradientSet::zeros_like(params);
    let mut current = params.clone();
    let capacity = cfg.steps + 1;
    let mut record = RunRecord {
        depth: dims.depth,
        times: Vec::with_capacity(capacity),
        losses: Vec::with_capacity(capacity),
        grad_norm_sq: Vec::with_capacity(capacity),
        snapshots: Vec::new(),
    };
    for i in 0..=cfg.steps {
        let fail = |e: Error| match e {
            Error::NonFiniteState { .. } => Error::NonFiniteState { iteration: Some(i) },
            other => other,
        };
        backward_into(&mut ws, &current, act, data, &mut grads).map_err(fail)?;
        let t = i as f64 * cfg.eta;
        record.times.push(t);
        record.losses.push(grads.loss);
        record.grad_norm_sq.push(grads.pl_numerator());
        if cfg.is_snapshot(i) {
            record.snapshots.push(Snapshot { iteration: i, t, params: current.clone() });
        }
        if i < cfg.steps {
            apply_update(&mut current, &grads, cfg);
            if !current.is_finite() {
                return Err(Error::NonFiniteState { iteration: Some(i + 1) });
            }
        }
    }
    Ok(record)
}

/// Everything about an experiment except its depth and optimizer settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    /// Layer sizes; `depth` is overridden per run.
    pub dims: Dims,
    pub act: Activation,
    pub scheme: InitScheme,
    pub embedding: Embedding,
    pub data: Dataset,
}

/// Initializes at `depth` from `seed` and trains.
pub fn run_at_depth(problem: &Problem, depth: usize, cfg: &TrainConfig) -> Result<RunRecord> {
    let dims = problem.dims.with_depth(depth);
    let params = ResNetParams::init(&Rng::new(cfg.seed), dims, problem.scheme, problem.embedding)?;
    run(&params, problem.act, &problem.data, cfg)
}

/// One run per depth, all initialized from `shared_seed`. Weight-tied and
/// Gaussian-process draws do not depend on the depth stream layout, so the
/// limiting initial weight function is shared across depths.
pub fn sweep_depths(
    problem: &Problem,
    cfg: &TrainConfig,
    depths: &[usize],
    shared_seed: u64,
) -> Result<Vec<(usize, Result<RunRecord>)>> {
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("depths must be strictly increasing"));
    }
    cfg.validate()?;
    let cfg = TrainConfig { seed: shared_seed, ..*cfg };
    Ok(depths.iter().map(|&l| (l, run_at_depth(problem, l, &cfg))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::backward;
    use crate::model::init_standard;

    fn small_problem(act: Activation, embedding: Embedding) -> Problem {
        let (q, d) = match embedding {
            Embedding::Identity => (4, 4),
            Embedding::Projection => (6, 3),
        };
        Problem {
            dims: Dims::new(4, q, 5, d, d),
            act,
            scheme: InitScheme::WeightTied,
            embedding,
            data: Dataset::gaussian(&Rng::new(3), d, d, 6).unwrap(),
        }
    }

    #[test]
    fn clip_is_bounded_and_idempotent() {
        let c = ClipOperator::Coordinate(0.5);
        for g in [-3.0, -0.5, -0.1, 0.0, 0.2, 0.5, 7.0] {
            let once = c.apply(g);
            assert!(once.abs() <= 0.5);
            assert_eq!(c.apply(once), once);
            if g.abs() <= 0.5 {
                assert_eq!(once, g);
            }
        }
        assert_eq!(c.block_bound(4), 1.0);
        assert!(ClipOperator::Coordinate(0.0).validate().is_err());
    }

    #[test]
    fn loss_is_non_increasing_on_standard_configs() {
        // backtracking lives here, not in the trainer
        for act in [Activation::Gelu, Activation::Tanh] {
            let problem = Problem {
                dims: Dims::new(16, 8, 16, 8, 8),
                act,
                scheme: InitScheme::WeightTied,
                embedding: Embedding::Identity,
                data: Dataset::gaussian(&Rng::new(1), 8, 8, 20).unwrap(),
            };
            let mut eta = 1e-2;
            let monotone = (0..6).any(|_| {
                let cfg = TrainConfig { train_a: false, train_b: false, seed: 1, ..TrainConfig::new(eta, 300) };
                let rec = run_at_depth(&problem, 16, &cfg).unwrap();
                eta *= 0.5;
                rec.losses.windows(2).all(|w| w[1] <= w[0])
            });
            assert!(monotone, "{act}");
        }
    }

    #[test]
    fn config_preconditions() {
        assert!(TrainConfig::new(0.0, 1).validate().is_err());
        assert!(TrainConfig::new(1e-2, 0).validate().is_err());
        assert!(TrainConfig { snapshot_every: Some(0), ..TrainConfig::new(1e-2, 3) }.validate().is_err());
        let cfg = TrainConfig::new(1e-2, 100);
        assert_eq!(cfg.cadence(), 5);
        assert!(cfg.is_snapshot(0) && cfg.is_snapshot(95) && cfg.is_snapshot(100) && !cfg.is_snapshot(3));
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let p = init_standard(&Rng::new(1), Dims::new(3, 4, 3, 2, 2)).unwrap();
        let x = Matrix::from_rows(&[&[1.0, -1.0], &[0.5, 2.0]]).unwrap();
        // targets equal to the zero output at init
        let data = Dataset::new(x, Matrix::zeros(2, 2)).unwrap();
        let (next, g) = step(&p, Activation::Gelu, &data, &TrainConfig::new(0.1, 1)).unwrap();
        assert_eq!(g.loss, 0.0);
        assert_eq!(next, p);
    }

    #[test]
    fn scalar_step_by_hand() {
        // L = 1, q = m = d = d' = 1, A = B = 1, V = 0, W = 1, identity:
        // F(x) = x + V W x, so with x = 1, y = 3: r = -2, p_1 = -4,
        // dV = p s = -4, dW = 0, dA = p_0 x = -4, dB = 2 r h_1 = -4.
        let one = |v: f64| Matrix::new(1, 1, alloc::vec![v]).unwrap();
        let p = ResNetParams::from_parts(one(1.0), alloc::vec![one(0.0)], alloc::vec![one(1.0)], one(1.0))
            .unwrap();
        let data = Dataset::new(one(1.0), one(3.0)).unwrap();
        let (next, g) = step(&p, Activation::Identity, &data, &TrainConfig::new(0.25, 1)).unwrap();
        assert_eq!(g.loss, 4.0);
        assert_eq!(next.v(0).get(0, 0), 1.0);
        assert_eq!(next.w(0).get(0, 0), 1.0);
        assert_eq!(next.a().get(0, 0), 2.0);
        assert_eq!(next.b().get(0, 0), 2.0);
        let frozen = TrainConfig { train_a: false, train_b: false, ..TrainConfig::new(0.25, 1) };
        let (next, _) = step(&p, Activation::Identity, &data, &frozen).unwrap();
        assert_eq!((next.a().get(0, 0), next.b().get(0, 0)), (1.0, 1.0));
    }

    #[test]
    fn clipped_updates_are_bounded() {
        let problem = small_problem(Activation::Tanh, Embedding::Identity);
        let p = ResNetParams::init(&Rng::new(2), problem.dims, InitScheme::GpSmooth { lengthscale: 0.3 }, Embedding::Identity)
            .unwrap();
        let cfg = TrainConfig { clip: ClipOperator::Coordinate(1e-3), ..TrainConfig::new(0.5, 1) };
        let (next, _) = step(&p, problem.act, &problem.data, &cfg).unwrap();
        for k in 0..4 {
            let dv = next.v(k).sub(p.v(k)).unwrap().max_abs();
            let dw = next.w(k).sub(p.w(k)).unwrap().max_abs();
            // recovering the update by subtraction costs one ulp of the weight
            assert!(dv <= 0.5 * 1e-3 + 1e-15 && dw <= 0.5 * 1e-3 + 1e-15);
        }
    }

    #[test]
    fn run_matches_repeated_step() {
        let problem = small_problem(Activation::Gelu, Embedding::Projection);
        let p = init_standard(&Rng::new(4), problem.dims).unwrap();
        let cfg = TrainConfig::new(0.05, 3);
        let record = run(&p, problem.act, &problem.data, &cfg).unwrap();
        let mut q = p.clone();
        for i in 0..3 {
            let (next, g) = step(&q, problem.act, &problem.data, &cfg).unwrap();
            assert_eq!(record.losses[i], g.loss);
            q = next;
        }
        assert_eq!(record.final_params(), &q);
        assert_eq!(record.times, alloc::vec![0.0, 0.05, 0.1, 0.15000000000000002]);
        assert_eq!(record.snapshots.len(), 4);
    }

    #[test]
    fn single_step_run() {
        let problem = small_problem(Activation::Tanh, Embedding::Identity);
        let record = run_at_depth(&problem, 2, &TrainConfig::new(0.1, 1)).unwrap();
        assert_eq!(record.losses.len(), 2);
        assert_eq!(record.snapshots.iter().map(|s| s.iteration).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn recorded_pl_numerator_matches_snapshot_gradient() {
        let problem = small_problem(Activation::Gelu, Embedding::Identity);
        let cfg = TrainConfig { snapshot_every: Some(4), ..TrainConfig::new(0.05, 12) };
        let record = run_at_depth(&problem, 4, &cfg).unwrap();
        for snap in &record.snapshots {
            let g = backward(&snap.params, problem.act, &problem.data).unwrap();
            let recorded = record.grad_norm_sq[snap.iteration];
            assert!((g.pl_numerator() - recorded).abs() <= 1e-12 * recorded);
            assert_eq!(g.loss, record.losses[snap.iteration]);
        }
    }

    #[test]
    fn divergence_reports_iteration() {
        let mut problem = small_problem(Activation::Identity, Embedding::Identity);
        problem.data = Dataset::new(problem.data.x().scaled(1e3), problem.data.y().scaled(1e3)).unwrap();
        let err = run_at_depth(&problem, 2, &TrainConfig::new(1e3, 50)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { iteration: Some(i) } if i > 0));
    }

    #[test]
    fn sweep_is_deterministic_and_shares_init() {
        let problem = small_problem(Activation::Tanh, Embedding::Identity);
        let cfg = TrainConfig::new(0.05, 2);
        let a = sweep_depths(&problem, &cfg, &[2, 4], 9).unwrap();
        let b = sweep_depths(&problem, &cfg, &[2, 4], 9).unwrap();
        assert_eq!(a, b);
        let w2 = a[0].1.as_ref().unwrap().snapshots[0].params.w(0).clone();
        let w4 = a[1].1.as_ref().unwrap().snapshots[0].params.w(3).clone();
        assert_eq!(w2, w4);
        assert!(sweep_depths(&problem, &cfg, &[4, 2], 9).is_err());
    }

    #[test]
    fn sweep_collects_per_run_errors() {
        let mut problem = small_problem(Activation::Identity, Embedding::Identity);
        problem.data = Dataset::new(problem.data.x().scaled(1e3), problem.data.y().scaled(1e3)).unwrap();
        let out = sweep_depths(&problem, &TrainConfig::new(1e3, 50), &[1, 2], 0).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|(_, r)| r.is_err()));
    }
}
