use alloc::vec::Vec;

use crate::numcore::{cholesky, gaussian_matrix, Matrix, Rng};
use crate::{Error, Result};

/// Layer sizes of a residual network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    /// Number of residual blocks `L`.
    pub depth: usize,
    /// Hidden state dimension `q`.
    pub hidden: usize,
    /// Perceptron width `m`.
    pub width: usize,
    /// Input dimension `d`.
    pub input: usize,
    /// Output dimension `d'`.
    pub output: usize,
}

impl Dims {
    pub fn new(depth: usize, hidden: usize, width: usize, input: usize, output: usize) -> Self {
        Dims { depth, hidden, width, input, output }
    }

    pub fn with_depth(self, depth: usize) -> Self {
        Dims { depth, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Dimension("depth must be at least 1"));
        }
        if self.hidden == 0 || self.width == 0 || self.input == 0 || self.output == 0 {
            return Err(Error::Dimension("all widths must be at least 1"));
        }
        if self.hidden < self.input.max(self.output) {
            return Err(Error::Dimension("hidden width must be >= max(input, output)"));
        }
        Ok(())
    }

    /// Total number of scalar parameters, `A`, all `(V_k, W_k)` and `B`.
    pub fn param_count(&self) -> usize {
        self.hidden * self.input
            + 2 * self.depth * self.hidden * self.width
            + self.output * self.hidden
    }
}

/// How the residual weights `(V_k, W_k)` are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// `V_k = 0`, all `W_k` equal to one Gaussian draw.
    WeightTied,
    /// `V_k = 0`, `W_k` independent Gaussian draws.
    Iid,
    /// Every entry of `V` and `W` is a squared-exponential Gaussian process
    /// in the depth variable, sampled at `s = k / L`.
    GpSmooth { lengthscale: f64 },
}

/// How the input and output maps `A`, `B` are set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Embedding {
    /// `A = (I; 0)` reads the input into the first `d` coordinates and
    /// `B = (0, I)` reads the last `d'` ones. Needs `q >= d + d'`, which makes
    /// the network output exactly zero while `V = 0`.
    Projection,
    /// `A = I`, `B = I`; needs `q = d = d'`.
    Identity,
}

/// Sub-stream carrying the Gaussian-process draws.
const GP_STREAM: u64 = 1 << 40;

/// First jitter added to the GP kernel diagonal when Cholesky fails.
pub const GP_JITTER_START: f64 = 1e-10;
/// Number of tenfold jitter increases tried before giving up (last: 1e-3).
pub const GP_JITTER_STEPS: usize = 8;

/// Parameters `(A, {V_k, W_k}, B)` of one depth-`L` network.
#[derive(Clone, Debug, PartialEq)]
pub struct ResNetParams {
    dims: Dims,
    a: Matrix,
    v: Vec<Matrix>,
    w: Vec<Matrix>,
    b: Matrix,
}

impl ResNetParams {
    /// Assembles parameters, inferring and validating the dimensions.
    pub fn from_parts(a: Matrix, v: Vec<Matrix>, w: Vec<Matrix>, b: Matrix) -> Result<Self> {
        if v.len() != w.len() {
            return Err(Error::Dimension("V and W must have one matrix per layer"));
        }
        let (hidden, input) = a.shape();
        let output = b.rows();
        let width = v.first().map_or(0, Matrix::cols);
        let dims = Dims { depth: v.len(), hidden, width, input, output };
        dims.validate()?;
        if b.cols() != hidden {
            return Err(Error::Dimension("B must have q columns"));
        }
        if v.iter().any(|m| m.shape() != (hidden, width))
            || w.iter().any(|m| m.shape() != (width, hidden))
        {
            return Err(Error::Dimension("V_k must be q x m and W_k m x q"));
        }
        let finite = a.is_finite()
            && b.is_finite()
            && v.iter().all(Matrix::is_finite)
            && w.iter().all(Matrix::is_finite);
        if !finite {
            return Err(Error::NonFiniteState { iteration: None });
        }
        Ok(ResNetParams { dims, a, v, w, b })
    }

    /// General initializer; see [`InitScheme`] and [`Embedding`].
    ///
    /// Randomness comes from sub-streams of `rng`: layer `k` (1-based) of an
    /// i.i.d. draw uses sub-stream `k`, the weight-tied draw reuses
    /// sub-stream 1 for every layer. Consequently the tied `W` does not depend
    /// on `L`, and equals `W_1` of the i.i.d. scheme for the same seed.
    pub fn init(rng: &Rng, dims: Dims, scheme: InitScheme, embedding: Embedding) -> Result<Self> {
        dims.validate()?;
        let Dims { depth, hidden, width, input, output } = dims;
        let (a, b) = match embedding {
            Embedding::Projection => {
                if hidden < input + output {
                    return Err(Error::Dimension("projection embedding needs q >= d + d'"));
                }
                let a = Matrix::from_fn(hidden, input, |i, j| if i == j { 1.0 } else { 0.0 });
                let offset = hidden - output;
                let b = Matrix::from_fn(output, hidden, |i, j| if j == offset + i { 1.0 } else { 0.0 });
                (a, b)
            }
            Embedding::Identity => {
                if hidden != input || hidden != output {
                    return Err(Error::Dimension("identity embedding needs q = d = d'"));
                }
                (Matrix::identity(hidden), Matrix::identity(hidden))
            }
        };
        let (v, w) = match scheme {
            InitScheme::WeightTied => {
                let tied = gaussian_matrix(&mut rng.substream(1), width, hidden);
                ((0..depth).map(|_| Matrix::zeros(hidden, width)).collect(), alloc::vec![tied; depth])
            }
            InitScheme::Iid => (
                (0..depth).map(|_| Matrix::zeros(hidden, width)).collect(),
                (1..=depth as u64)
                    .map(|k| gaussian_matrix(&mut rng.substream(k), width, hidden))
                    .collect(),
            ),
            InitScheme::GpSmooth { lengthscale } => {
                gp_layers(&mut rng.substream(GP_STREAM), dims, lengthscale)?
            }
        };
        Ok(ResNetParams { dims, a, v, w, b })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.dims.depth
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// `V_{k+1}` for 0-based `k`.
    pub fn v(&self, k: usize) -> &Matrix {
        &self.v[k]
    }

    /// `W_{k+1}` for 0-based `k`.
    pub fn w(&self, k: usize) -> &Matrix {
        &self.w[k]
    }

    pub fn vs(&self) -> &[Matrix] {
        &self.v
    }

    pub fn ws(&self) -> &[Matrix] {
        &self.w
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Matrix, &mut [Matrix], &mut [Matrix], &mut Matrix) {
        (&mut self.a, &mut self.v, &mut self.w, &mut self.b)
    }

    pub fn into_parts(self) -> (Matrix, Vec<Matrix>, Vec<Matrix>, Matrix) {
        (self.a, self.v, self.w, self.b)
    }

    /// `||Z_k||`, the sum `||V_k||_F + ||W_k||_F`, for 0-based `k`.
    pub fn block_norm(&self, k: usize) -> f64 {
        self.v[k].frobenius_norm() + self.w[k].frobenius_norm()
    }

    /// `(||V_{k+1} - V_k||_F, ||W_{k+1} - W_k||_F)` for `k = 1..L-1`.
    pub fn successive_gaps(&self) -> Vec<(f64, f64)> {
        (1..self.depth())
            .map(|k| {
                let dv = self.v[k].frobenius_distance(&self.v[k - 1]).unwrap_or(f64::NAN);
                let dw = self.w[k].frobenius_distance(&self.w[k - 1]).unwrap_or(f64::NAN);
                (dv, dw)
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite()
            && self.b.is_finite()
            && self.v.iter().all(Matrix::is_finite)
            && self.w.iter().all(Matrix::is_finite)
    }

    /// All parameters in the order `A, V_1..V_L, W_1..W_L, B`, row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dims.param_count());
        out.extend_from_slice(self.a.as_slice());
        self.v.iter().for_each(|m| out.extend_from_slice(m.as_slice()));
        self.w.iter().for_each(|m| out.extend_from_slice(m.as_slice()));
        out.extend_from_slice(self.b.as_slice());
        out
    }

    /// Inverse of [`ResNetParams::to_flat`].
    pub fn from_flat(dims: Dims, flat: &[f64]) -> Result<Self> {
        dims.validate()?;
        if flat.len() != dims.param_count() {
            return Err(Error::DataLength { expected: dims.param_count(), got: flat.len() });
        }
        let Dims { depth, hidden, width, input, output } = dims;
        let mut rest = flat;
        let mut take = |rows: usize, cols: usize| -> Result<Matrix> {
            let (head, tail) = rest.split_at(rows * cols);
            rest = tail;
            Matrix::new(rows, cols, head.to_vec())
        };
        let a = take(hidden, input)?;
        let v = (0..depth).map(|_| take(hidden, width)).collect::<Result<Vec<_>>>()?;
        let w = (0..depth).map(|_| take(width, hidden)).collect::<Result<Vec<_>>>()?;
        let b = take(output, hidden)?;
        ResNetParams::from_parts(a, v, w, b)
    }
}

/// `A = (I; 0)`, `B = (0, I)`, `V_k = 0`, weight-tied Gaussian `W`.
pub fn init_standard(rng: &Rng, dims: Dims) -> Result<ResNetParams> {
    ResNetParams::init(rng, dims, InitScheme::WeightTied, Embedding::Projection)
}

/// Like [`init_standard`] but with independent `W_k`.
pub fn init_iid(rng: &Rng, dims: Dims) -> Result<ResNetParams> {
    ResNetParams::init(rng, dims, InitScheme::Iid, Embedding::Projection)
}

/// Smooth initialization from squared-exponential Gaussian processes.
pub fn init_gp_smooth(rng: &Rng, dims: Dims, lengthscale: f64) -> Result<ResNetParams> {
    ResNetParams::init(rng, dims, InitScheme::GpSmooth { lengthscale }, Embedding::Projection)
}

/// Cholesky factor of `K(s_i, s_j) = exp(-(s_i - s_j)^2 / (2 l^2))` on
/// `s_k = k / L`, with jitter escalated until the factorization succeeds.
fn se_kernel_factor(depth: usize, lengthscale: f64) -> Result<Matrix> {
    let s = |k: usize| (k + 1) as f64 / depth as f64;
    let kernel = Matrix::from_fn(depth, depth, |i, j| {
        let d = s(i) - s(j);
        libm::exp(-d * d / (2.0 * lengthscale * lengthscale))
    });
    if let Ok(l) = cholesky(&kernel) {
        return Ok(l);
    }
    let mut jitter = GP_JITTER_START;
    for _ in 0..GP_JITTER_STEPS {
        let mut k = kernel.clone();
        for i in 0..depth {
            k.set(i, i, k.get(i, i) + jitter);
        }
        if let Ok(l) = cholesky(&k) {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    Err(Error::CholeskyFailure)
}

fn gp_layers(rng: &mut Rng, dims: Dims, lengthscale: f64) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
    if !(lengthscale > 0.0) || !lengthscale.is_finite() {
        return Err(Error::InvalidArgument("lengthscale must be positive and finite"));
    }
    let Dims { depth, hidden, width, .. } = dims;
    let factor = se_kernel_factor(depth, lengthscale)?;
    let mut v: Vec<Matrix> = (0..depth).map(|_| Matrix::zeros(hidden, width)).collect();
    let mut w: Vec<Matrix> = (0..depth).map(|_| Matrix::zeros(width, hidden)).collect();
    let mut z = alloc::vec![0.0; depth];
    let mut sample_into = |layers: &mut [Matrix], idx: usize, rng: &mut Rng| {
        z.iter_mut().for_each(|zi| *zi = rng.gaussian());
        for (k, layer) in layers.iter_mut().enumerate() {
            let value: f64 = factor.row(k)[..=k].iter().zip(&z).map(|(l, zi)| l * zi).sum();
            layer.as_mut_slice()[idx] = value;
        }
    };
    for idx in 0..hidden * width {
        sample_into(&mut v, idx, rng);
    }
    for idx in 0..width * hidden {
        sample_into(&mut w, idx, rng);
    }
    Ok((v, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(depth: usize) -> Dims {
        Dims::new(depth, 6, 5, 2, 3)
    }

    #[test]
    fn standard_init_structure() {
        let p = init_standard(&Rng::new(1), dims(4)).unwrap();
        assert!(p.vs().iter().all(|v| v.max_abs() == 0.0));
        assert_eq!(p.w(0), p.w(3));
        assert_eq!(p.a().get(1, 1), 1.0);
        assert_eq!(p.a().get(4, 1), 0.0);
        // B reads the last three coordinates
        assert_eq!(p.b().get(0, 3), 1.0);
        assert_eq!(p.b().get(2, 5), 1.0);
        assert_eq!(p.b().get(0, 0), 0.0);
    }

    #[test]
    fn dimension_errors() {
        let bad = Dims::new(4, 4, 5, 2, 3);
        assert!(matches!(init_standard(&Rng::new(1), bad), Err(Error::Dimension(_))));
        assert!(init_iid(&Rng::new(1), bad).is_err());
        assert!(init_standard(&Rng::new(1), Dims::new(0, 6, 5, 2, 3)).is_err());
        assert!(ResNetParams::init(
            &Rng::new(1),
            Dims::new(3, 4, 5, 4, 4),
            InitScheme::WeightTied,
            Embedding::Identity
        )
        .is_ok());
        assert!(ResNetParams::init(
            &Rng::new(1),
            Dims::new(3, 5, 5, 4, 4),
            InitScheme::WeightTied,
            Embedding::Identity
        )
        .is_err());
    }

    #[test]
    fn tied_norm_within_high_probability_bound() {
        // q m = 512: ||W||_F <= 2 sqrt(qm) fails with probability < exp(-3qm/16)
        for seed in 0..20 {
            let p = init_standard(&Rng::new(seed), Dims::new(2, 16, 32, 4, 4)).unwrap();
            assert!(p.w(0).frobenius_norm() <= 2.0 * libm::sqrt(512.0));
        }
    }

    #[test]
    fn iid_layers_differ_and_share_first_stream() {
        let rng = Rng::new(9);
        let tied = init_standard(&rng, dims(3)).unwrap();
        let iid = init_iid(&rng, dims(3)).unwrap();
        assert_ne!(iid.w(0), iid.w(1));
        assert_eq!(iid.w(0), tied.w(0));
        assert_eq!(iid, init_iid(&Rng::new(9), dims(3)).unwrap());
    }

    #[test]
    fn iid_successive_gap_matches_monte_carlo() {
        // ||W_{k+1} - W_k||_F with independent N(0,1) entries is sqrt(2) times
        // the norm of a q x m Gaussian; E||G||_F ~ sqrt(qm) for qm = 256.
        let d = Dims::new(101, 16, 16, 4, 4);
        let p = init_iid(&Rng::new(3), d).unwrap();
        let gaps: Vec<f64> = p.successive_gaps().iter().map(|g| g.1).collect();
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let mut mc = Rng::new(77);
        let trials = 2000;
        let mc_mean = (0..trials)
            .map(|_| libm::sqrt(2.0) * gaussian_matrix(&mut mc, 16, 16).frobenius_norm())
            .sum::<f64>()
            / trials as f64;
        assert!((mean_gap - mc_mean).abs() <= 0.1 * mc_mean, "{mean_gap} vs {mc_mean}");
    }

    #[test]
    fn gp_large_lengthscale_is_nearly_constant() {
        // Increments of the process have sd |s - s'| / l, so at l = 1e3 the
        // layers agree to O(1e-3) and the spread shrinks like 1/l.
        let spread = |l: f64| {
            let p = init_gp_smooth(&Rng::new(4), Dims::new(32, 4, 3, 1, 1), l).unwrap();
            let mut worst: f64 = 0.0;
            for k in 1..32 {
                worst = worst.max(p.v(k).sub(p.v(0)).unwrap().max_abs());
                worst = worst.max(p.w(k).sub(p.w(0)).unwrap().max_abs());
            }
            worst
        };
        let s3 = spread(1e3);
        let s2 = spread(1e2);
        assert!(s3 < 1e-2, "{s3}");
        assert!(s2 / s3 > 5.0 && s2 / s3 < 20.0, "{s2} / {s3}");
    }

    #[test]
    fn gp_mean_gap_halves_when_depth_doubles() {
        let mean_gap = |depth: usize| {
            let mut total = 0.0;
            let mut count = 0.0;
            for seed in 0..20 {
                let p = init_gp_smooth(&Rng::new(seed), Dims::new(depth, 3, 2, 1, 1), 0.3).unwrap();
                for k in 1..depth {
                    let d = p.v(k).sub(p.v(k - 1)).unwrap();
                    total += d.as_slice().iter().map(|x| x.abs()).sum::<f64>();
                    count += d.as_slice().len() as f64;
                }
            }
            total / count
        };
        let ratio = mean_gap(32) / mean_gap(64);
        assert!((ratio - 2.0).abs() <= 0.25 * 2.0, "ratio {ratio}");
    }

    #[test]
    fn gp_marginal_variance_is_one() {
        let p = init_gp_smooth(&Rng::new(5), Dims::new(8, 50, 50, 1, 1), 0.2).unwrap();
        let all: Vec<f64> = p
            .vs()
            .iter()
            .chain(p.ws())
            .flat_map(|m| m.as_slice().iter().copied())
            .collect();
        let n = all.len() as f64;
        assert!(n >= 1e4);
        let var = all.iter().map(|x| x * x).sum::<f64>() / n;
        assert!((var - 1.0).abs() <= 0.05, "var {var}");
    }

    #[test]
    fn gp_rejects_bad_lengthscale() {
        assert!(init_gp_smooth(&Rng::new(1), dims(3), 0.0).is_err());
        assert!(init_gp_smooth(&Rng::new(1), dims(3), -1.0).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let p = init_iid(&Rng::new(2), dims(3)).unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.dims().param_count());
        assert_eq!(ResNetParams::from_flat(p.dims(), &flat).unwrap(), p);
    }
}
