//! Experiment configuration: one JSON document, deep-merged over the
//! defaults of the chosen experiment, then validated against the
//! preconditions of the core modules.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use odeflow_core::analysis::{ProfileEntry, WeightBlock};
use odeflow_core::relucx::ReluCxConfig;
use odeflow_core::train::{ClipOperator, TrainConfig};
use odeflow_core::{Activation, Dims, Embedding, InitScheme};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, RunError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LargeDepthSweep,
    LongTime,
    OdeCompare,
    ReluCx,
    PlCheck,
    Hermite,
    SminProbe,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::LargeDepthSweep,
        ExperimentKind::LongTime,
        ExperimentKind::OdeCompare,
        ExperimentKind::ReluCx,
        ExperimentKind::PlCheck,
        ExperimentKind::Hermite,
        ExperimentKind::SminProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LargeDepthSweep => "large-depth-sweep",
            ExperimentKind::LongTime => "long-time",
            ExperimentKind::OdeCompare => "ode-compare",
            ExperimentKind::ReluCx => "relu-cx",
            ExperimentKind::PlCheck => "pl-check",
            ExperimentKind::Hermite => "hermite",
            ExperimentKind::SminProbe => "smin-probe",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

mod activation_name {
    use super::*;

    pub fn serialize<S: serde::Serializer>(act: &Activation, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(act.name())
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Activation, D::Error> {
        let name = String::deserialize(d)?;
        Activation::from_str(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    WeightTied,
    Iid,
    GpSmooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    /// `A = B = I`; needs `q = d = d'`.
    Identity,
    /// `A = (I; 0)`, `B = (0, I)`; needs `q >= d + d'`.
    Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// Depth of single-depth experiments.
    pub depth: usize,
    /// Depths of sweeps, strictly increasing.
    pub depths: Vec<usize>,
    pub hidden: usize,
    pub width: usize,
    pub input: usize,
    pub output: usize,
    #[serde(with = "activation_name")]
    pub activation: Activation,
    pub init: InitKind,
    /// Used by `gp-smooth` only.
    pub lengthscale: f64,
    pub embedding: EmbeddingKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub n: usize,
    pub seed: u64,
    /// Rescale every input to this norm.
    pub normalize: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    /// Base learning rate; residual blocks move by `L * lr * gradient`.
    pub lr: f64,
    pub steps: usize,
    /// Coordinate clipping bound, none when absent.
    pub clip: Option<f64>,
    pub train_a: bool,
    pub train_b: bool,
    pub snapshot_every: usize,
    /// Write every snapshot as `snap_{t}.bin`.
    pub write_snapshots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Depth of the reference run for sup distances, none to skip them.
    pub reference_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeBlock {
    pub ref_steps: usize,
    /// Number of leading data inputs probed, all when absent.
    pub inputs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReluBlock {
    pub half_depths: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub x: f64,
    pub eta: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteBlock {
    #[serde(with = "activation_name")]
    pub activation: Activation,
    pub rmax: usize,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SminBlock {
    #[serde(with = "activation_name")]
    pub activation: Activation,
    pub m: usize,
    pub d: usize,
    pub n: usize,
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockName {
    V,
    W,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBlock {
    pub block: BlockName,
    pub row: usize,
    pub col: usize,
    /// Number of geometric checkpoints `T, T/2, T/4, ...` besides `t = 0`.
    pub checkpoints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Seed of the weight initialization.
    pub seed: u64,
    /// Output directory, overridden by `--out`.
    pub output: Option<PathBuf>,
    pub model: ModelBlock,
    pub data: DataBlock,
    pub train: TrainBlock,
    pub sweep: SweepBlock,
    pub ode: OdeBlock,
    pub relu: ReluBlock,
    pub hermite: HermiteBlock,
    pub smin: SminBlock,
    pub profile: ProfileBlock,
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

impl ExperimentConfig {
    /// Defaults of `kind`. The synthetic experiments use `q = d = d' = 16`,
    /// identity embedding, frozen `A` and `B`, GELU and weight-tied init.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig {
            experiment: kind,
            seed: 1,
            output: None,
            model: ModelBlock {
                depth: 64,
                depths: powers_of_two(4, 10),
                hidden: 16,
                width: 32,
                input: 16,
                output: 16,
                activation: Activation::Gelu,
                init: InitKind::WeightTied,
                lengthscale: 0.3,
                embedding: EmbeddingKind::Identity,
            },
            data: DataBlock { n: 100, seed: 1, normalize: None },
            train: TrainBlock {
                lr: 1e-2,
                steps: 500,
                clip: None,
                train_a: false,
                train_b: false,
                snapshot_every: 125,
                write_snapshots: false,
            },
            sweep: SweepBlock { reference_depth: Some(1 << 12) },
            ode: OdeBlock { ref_steps: 1 << 14, inputs: None },
            relu: ReluBlock {
                half_depths: vec![8, 32, 128],
                multipliers: vec![1.5, 2.0, std::f64::consts::E],
                x: 1.0,
                eta: 1e-2,
                steps: 4000,
            },
            hermite: HermiteBlock { activation: Activation::Gelu, rmax: 40, order: 80 },
            smin: SminBlock { activation: Activation::Gelu, m: 4096, d: 64, n: 8, trials: 50 },
            profile: ProfileBlock { block: BlockName::V, row: 0, col: 0, checkpoints: 5 },
        };
        match kind {
            ExperimentKind::LongTime | ExperimentKind::PlCheck => {
                cfg.model.width = 64;
                cfg.data.n = 50;
                cfg.train.lr = 5e-3;
                cfg.train.steps = 80_000;
                cfg.train.snapshot_every = 1000;
                cfg.train.write_snapshots = kind == ExperimentKind::LongTime;
                if kind == ExperimentKind::PlCheck {
                    cfg.train.steps = 4000;
                    cfg.train.snapshot_every = 200;
                }
            }
            ExperimentKind::OdeCompare => cfg.model.depths = powers_of_two(5, 9),
            _ => {}
        }
        cfg
    }

    /// Defaults of `kind` overlaid with `user`. A mismatching `experiment`
    /// field is rejected.
    pub fn from_json(kind: ExperimentKind, user: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(user).map_err(|e| RunError::config("<document>", e.to_string()))?;
        if !user.is_object() {
            return Err(RunError::config("<document>", "config must be a JSON object"));
        }
        let mut merged = serde_json::to_value(ExperimentConfig::defaults(kind)).expect("defaults serialize");
        merge(&mut merged, user);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            RunError::config(path, e.into_inner().to_string())
        })?;
        if cfg.experiment != kind {
            return Err(RunError::config(
                "experiment",
                format!("config is for `{}` but `{}` was requested", cfg.experiment, kind),
            ));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn dims(&self, depth: usize) -> Dims {
        let m = &self.model;
        Dims::new(depth, m.hidden, m.width, m.input, m.output)
    }

    pub fn init_scheme(&self) -> InitScheme {
        match self.model.init {
            InitKind::WeightTied => InitScheme::WeightTied,
            InitKind::Iid => InitScheme::Iid,
            InitKind::GpSmooth => InitScheme::GpSmooth { lengthscale: self.model.lengthscale },
        }
    }

    pub fn embedding(&self) -> Embedding {
        match self.model.embedding {
            EmbeddingKind::Identity => Embedding::Identity,
            EmbeddingKind::Projection => Embedding::Projection,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            eta: t.lr,
            steps: t.steps,
            clip: t.clip.map_or(ClipOperator::None, ClipOperator::Coordinate),
            snapshot_every: Some(t.snapshot_every),
            seed: self.seed,
            train_a: t.train_a,
            train_b: t.train_b,
        }
    }

    pub fn relu_configs(&self) -> Vec<ReluCxConfig> {
        let r = &self.relu;
        r.half_depths
            .iter()
            .flat_map(|&l| {
                r.multipliers
                    .iter()
                    .map(move |&c| ReluCxConfig { half_depth: l, c, x: r.x, eta: r.eta, steps: r.steps })
            })
            .collect()
    }

    pub fn profile_entry(&self) -> ProfileEntry {
        let p = &self.profile;
        let block = match p.block {
            BlockName::V => WeightBlock::V,
            BlockName::W => WeightBlock::W,
        };
        ProfileEntry { block, row: p.row, col: p.col }
    }

    /// Checks every precondition the chosen experiment relies on.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        match self.experiment {
            LargeDepthSweep | OdeCompare => {
                self.validate_depths()?;
                for &l in &self.model.depths {
                    self.validate_model(l)?;
                }
                self.validate_data()?;
                self.validate_train()?;
                if self.experiment == LargeDepthSweep {
                    if let Some(r) = self.sweep.reference_depth {
                        self.validate_model(r).map_err(|e| retag(e, "sweep.reference_depth"))?;
                    }
                } else {
                    let deepest = *self.model.depths.last().unwrap();
                    if self.ode.ref_steps < 16 * deepest {
                        return Err(RunError::config("ode.ref_steps", "odesim: reference steps must be at least 16 L"));
                    }
                    if self.ode.inputs == Some(0) || self.ode.inputs.is_some_and(|i| i > self.data.n) {
                        return Err(RunError::config("ode.inputs", "odesim: probed inputs must lie in 1..=n"));
                    }
                }
            }
            LongTime | PlCheck => {
                self.validate_model(self.model.depth)?;
                self.validate_data()?;
                self.validate_train()?;
                let (rows, cols) = match self.profile.block {
                    BlockName::V => (self.model.hidden, self.model.width),
                    BlockName::W => (self.model.width, self.model.hidden),
                };
                if self.profile.row >= rows || self.profile.col >= cols {
                    return Err(RunError::config("profile", "analysis: profile entry outside the weight block"));
                }
            }
            ReluCx => {
                if self.relu.half_depths.is_empty() || self.relu.multipliers.is_empty() {
                    return Err(RunError::config("relu", "relucx: the (L, C) grid is empty"));
                }
                for c in self.relu_configs() {
                    c.validate().map_err(|e| RunError::config("relu", format!("relucx: {e}")))?;
                }
            }
            Hermite => {
                let h = &self.hermite;
                if h.order < h.rmax + 10 || h.order > odeflow_core::numcore::MAX_ORDER {
                    return Err(RunError::config(
                        "hermite.order",
                        format!("analysis: order must lie in [rmax + 10, {}]", odeflow_core::numcore::MAX_ORDER),
                    ));
                }
            }
            SminProbe => {
                let s = &self.smin;
                if s.m == 0 || s.n == 0 || s.trials == 0 {
                    return Err(RunError::config("smin", "analysis: m, n and trials must be at least 1"));
                }
                if s.n > s.d {
                    return Err(RunError::config("smin.n", "analysis: probe needs n <= d"));
                }
            }
        }
        Ok(())
    }

    fn validate_depths(&self) -> Result<()> {
        let depths = &self.model.depths;
        if depths.is_empty() {
            return Err(RunError::config("model.depths", "train: depth list is empty"));
        }
        if depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RunError::config("model.depths", "train: depths must be strictly increasing"));
        }
        Ok(())
    }

    fn validate_model(&self, depth: usize) -> Result<()> {
        let dims = self.dims(depth);
        dims.validate().map_err(|e| RunError::config("model", format!("model: {e}")))?;
        match self.model.embedding {
            EmbeddingKind::Identity if !(dims.hidden == dims.input && dims.input == dims.output) => {
                return Err(RunError::config("model.embedding", "model: identity embedding needs q = d = d'"));
            }
            EmbeddingKind::Projection if dims.hidden < dims.input + dims.output => {
                return Err(RunError::config("model.embedding", "model: projection embedding needs q >= d + d'"));
            }
            _ => {}
        }
        if self.model.init == InitKind::GpSmooth && !(self.model.lengthscale > 0.0 && self.model.lengthscale.is_finite()) {
            return Err(RunError::config("model.lengthscale", "model: lengthscale must be positive"));
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        if self.data.n == 0 {
            return Err(RunError::config("data.n", "model: dataset needs at least one sample"));
        }
        if let Some(r) = self.data.normalize {
            if !(r > 0.0 && r.is_finite()) {
                return Err(RunError::config("data.normalize", "model: normalization radius must be positive"));
            }
        }
        Ok(())
    }

    fn validate_train(&self) -> Result<()> {
        self.train_config()
            .validate()
            .map_err(|e| RunError::config("train", format!("train: {e}")))
    }
}

fn retag(err: RunError, path: &str) -> RunError {
    match err {
        RunError::Config { message, .. } => RunError::config(path, message),
        other => other,
    }
}

/// Objects merge key by key; any other value replaces.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
