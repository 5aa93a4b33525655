use alloc::vec::Vec;

use crate::numcore::{gaussian_matrix, Matrix, Rng};
use crate::{Error, Result};

/// Sub-stream conventionally used for drawing training data from a run seed.
pub const DATA_STREAM: u64 = u64::MAX - 1;

/// `n` input/target pairs stored column-wise: `x` is `d x n`, `y` is `d' x n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.cols() != y.cols() {
            return Err(Error::Dimension("X and Y must have the same number of columns"));
        }
        if x.cols() == 0 {
            return Err(Error::Dimension("dataset must contain at least one sample"));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFiniteState { iteration: None });
        }
        Ok(Dataset { x, y })
    }

    /// Independent standard Gaussian inputs and targets, drawn from
    /// sub-stream [`DATA_STREAM`] of `rng`.
    pub fn gaussian(rng: &Rng, input: usize, output: usize, n: usize) -> Result<Self> {
        let mut stream = rng.substream(DATA_STREAM);
        let x = gaussian_matrix(&mut stream, input, n);
        let y = gaussian_matrix(&mut stream, output, n);
        Dataset::new(x, y)
    }

    /// Rescales every input column to Euclidean norm `radius`.
    pub fn normalized(mut self, radius: f64) -> Result<Self> {
        let (d, n) = self.x.shape();
        for j in 0..n {
            let norm = libm::sqrt((0..d).map(|i| { let v = self.x.get(i, j); v * v }).sum::<f64>());
            if norm == 0.0 {
                return Err(Error::InvalidArgument("cannot normalize a zero input"));
            }
            for i in 0..d {
                let v = self.x.get(i, j) * radius / norm;
                self.x.set(i, j, v);
            }
        }
        Ok(self)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.cols() == 0
    }

    pub fn input(&self, i: usize) -> Vec<f64> {
        self.x.column(i)
    }

    pub fn target(&self, i: usize) -> Vec<f64> {
        self.y.column(i)
    }

    pub(crate) fn check_dims(&self, input: usize, output: usize) -> Result<()> {
        if self.x.rows() != input || self.y.rows() != output {
            return Err(Error::Dimension("dataset dimensions do not match the network"));
        }
        Ok(())
    }
}
