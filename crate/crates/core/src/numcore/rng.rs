use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal, StandardUniform};

use super::Matrix;

/// Seeded random generator: ChaCha8 (the `rand_chacha` stream cipher with
/// 8 rounds), Gaussian samples through the `rand_distr` ziggurat.
///
/// ChaCha8 output is specified bit-for-bit, so a seed produces the same
/// stream on every platform. Independent sub-streams are addressed by the
/// cipher's 64-bit stream id: [`Rng::substream`] never consumes from the
/// parent, so `substream(k)` is the same generator no matter how much the
/// parent has been used.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh generator on sub-stream `id` of this seed.
    pub fn substream(&self, id: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(id.wrapping_add(1));
        Rng { seed: self.seed, inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        StandardUniform.sample(&mut self.inner)
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Point uniform on the unit sphere of dimension `dim`.
    pub fn unit_sphere(&mut self, dim: usize) -> alloc::vec::Vec<f64> {
        loop {
            let v: alloc::vec::Vec<f64> = (0..dim).map(|_| self.gaussian()).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm > 0.0 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

/// Matrix of i.i.d. standard normal entries, filled in row-major order.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gaussian())
}
