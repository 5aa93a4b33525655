use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use core::fmt;
use core::str::FromStr;

use crate::Error;

/// Element-wise activation with its derivative. Every kind has `sigma(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    /// `x * Phi(x)` with `Phi` the standard normal CDF (exact erf form).
    Gelu,
    /// `max(x, 0)`, derivative taken as 0 at the origin.
    Relu,
    Identity,
    Tanh,
}

fn std_normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

impl Activation {
    pub const ALL: [Activation; 4] =
        [Activation::Gelu, Activation::Relu, Activation::Identity, Activation::Tanh];

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => x * std_normal_cdf(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Tanh => libm::tanh(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        self.value_and_derivative(x).1
    }

    /// `(sigma(x), sigma'(x))`, sharing the transcendental evaluations.
    #[inline]
    pub fn value_and_derivative(self, x: f64) -> (f64, f64) {
        match self {
            Activation::Gelu => {
                let cdf = std_normal_cdf(x);
                (x * cdf, cdf + x * std_normal_pdf(x))
            }
            Activation::Relu => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Identity => (x, 1.0),
            Activation::Tanh => {
                let t = libm::tanh(x);
                (t, 1.0 - t * t)
            }
        }
    }

    /// Lipschitz constant `K_sigma = sup |sigma'|`.
    ///
    /// For GELU the supremum of `Phi(x) + x phi(x)` is attained at `x = sqrt(2)`.
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Gelu => std_normal_cdf(SQRT_2) + SQRT_2 * std_normal_pdf(SQRT_2),
            Activation::Relu | Activation::Identity | Activation::Tanh => 1.0,
        }
    }

    /// Whether runs with this activation fall under the smooth theory
    /// (twice differentiable, Lipschitz). ReLU has a kink and the identity is
    /// unbounded; both are kept as experimental instruments and flagged.
    pub fn within_smooth_theory(self) -> bool {
        matches!(self, Activation::Gelu | Activation::Tanh)
    }

    /// Non-differentiable at the origin; quadrature splits the real line there.
    pub fn has_kink_at_zero(self) -> bool {
        matches!(self, Activation::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Gelu => "gelu",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or(Error::InvalidArgument("unknown activation"))
    }
}
