use alloc::vec::Vec;

use super::hermite::hermite_coefficients;
use crate::model::Activation;
use crate::numcore::{gaussian_matrix, smallest_singular_value, Matrix, Rng};
use crate::{Error, Result};

/// Degree up to which the probe reports thresholds.
const PROBE_RMAX: usize = 20;
const PROBE_ORDER: usize = 64;
/// Threshold on `|eta_r|` for the chosen degree.
const SIGNIFICANT: f64 = 0.01;

/// `s_min(f(W X))` with `f` applied entrywise.
pub fn sigma_wx_smin(f: impl Fn(f64) -> f64, w: &Matrix, x: &Matrix) -> Result<f64> {
    let features = w.matmul(x)?.map(f);
    smallest_singular_value(&features)
}

/// Exceedance of `s_min` over `sqrt(m) |eta_r| / 4` for one degree `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SminLevel {
    pub r: usize,
    pub eta_r: f64,
    pub threshold: f64,
    pub exceedance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SminProbe {
    /// `s_min(sigma(W X))` per trial.
    pub samples: Vec<f64>,
    /// Every `r <= 20` with `eta_r != 0` (above rounding).
    pub levels: Vec<SminLevel>,
    /// First `r >= 2` with `|eta_r| > 0.01`.
    pub chosen_r: Option<usize>,
}

impl SminProbe {
    pub fn chosen(&self) -> Option<&SminLevel> {
        self.chosen_r.and_then(|r| self.levels.iter().find(|l| l.r == r))
    }
}

/// Monte-Carlo distribution of `s_min(sigma(W X))` with `W` an `m x d`
/// Gaussian matrix and the `n` columns of `X` uniform on the unit sphere.
/// Trial `i` draws from sub-stream `i` of `rng`.
pub fn sigma_wx_smin_probe(rng: &Rng, act: Activation, m: usize, d: usize, n: usize, trials: usize) -> Result<SminProbe> {
    if n == 0 || m == 0 || trials == 0 {
        return Err(Error::Dimension("m, n and trials must be at least 1"));
    }
    if n > d {
        return Err(Error::Dimension("probe needs n <= d"));
    }
    let mut samples = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut r = rng.substream(trial as u64);
        let w = gaussian_matrix(&mut r, m, d);
        let columns: Vec<Vec<f64>> = (0..n).map(|_| r.unit_sphere(d)).collect();
        let x = Matrix::from_columns(&columns)?;
        samples.push(sigma_wx_smin(|u| act.value(u), &w, &x)?);
    }
    let spectrum = hermite_coefficients(act, PROBE_RMAX, PROBE_ORDER)?;
    let scale = libm::sqrt(m as f64) / 4.0;
    let levels = spectrum
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, e)| e.abs() > 1e-12)
        .map(|(r, &eta_r)| {
            let threshold = scale * eta_r.abs();
            let hits = samples.iter().filter(|&&s| s > threshold).count();
            SminLevel { r, eta_r, threshold, exceedance: hits as f64 / trials as f64 }
        })
        .collect();
    Ok(SminProbe { samples, levels, chosen_r: spectrum.first_significant(2, SIGNIFICANT) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_feature_column() {
        let mut r = Rng::new(1);
        let w = gaussian_matrix(&mut r, 9, 3);
        let x = Matrix::from_columns(&[r.unit_sphere(3)]).unwrap();
        let s = sigma_wx_smin(|_| 1.0, &w, &x).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_more_points_than_dimensions() {
        assert!(matches!(
            sigma_wx_smin_probe(&Rng::new(1), Activation::Gelu, 16, 4, 5, 2),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn small_probe_is_deterministic() {
        let a = sigma_wx_smin_probe(&Rng::new(2), Activation::Tanh, 256, 16, 4, 5).unwrap();
        let b = sigma_wx_smin_probe(&Rng::new(2), Activation::Tanh, 256, 16, 4, 5).unwrap();
        assert_eq!(a, b);
        // tanh is odd: eta_2 = 0, so the chosen degree is 3
        assert_eq!(a.chosen_r, Some(3));
        assert!(a.levels.iter().all(|l| l.r % 2 == 1));
        assert_eq!(a.samples.len(), 5);
    }
}
