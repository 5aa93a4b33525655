//! Hermite spectra of activations and the random-feature `s_min` probe.

use odeflow_core::analysis::{hermite_coefficients, sigma_wx_smin_probe, HermiteSpectrum, SminProbe};
use odeflow_core::Rng;

use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::formats::{fmt_float, Csv};
use crate::manifest::OutputFile;

#[derive(Clone, Debug)]
pub struct HermiteOutcome {
    pub spectrum: HermiteSpectrum,
}

pub fn run_hermite(cfg: &ExperimentConfig) -> Result<HermiteOutcome> {
    let h = &cfg.hermite;
    let spectrum = hermite_coefficients(h.activation, h.rmax, h.order).map_err(RunError::numerical("hermite coefficients"))?;
    Ok(HermiteOutcome { spectrum })
}

impl HermiteOutcome {
    pub fn render(&self) -> Vec<OutputFile> {
        let mut csv = Csv::new(&["r", "eta_r"]);
        for (r, &eta) in self.spectrum.coefficients.iter().enumerate() {
            csv.row(&[r.into(), eta.into()]);
        }
        let s = &self.spectrum;
        let text = format!(
            "activation {}\norder {}\nsecond moment {}\nparseval defect {}\n",
            s.activation,
            s.order,
            fmt_float(s.second_moment),
            fmt_float(s.parseval_defect())
        );
        vec![OutputFile::new("hermite.csv", csv.into_bytes()), OutputFile::new("summary.txt", text)]
    }
}

#[derive(Clone, Debug)]
pub struct SminOutcome {
    pub probe: SminProbe,
}

pub fn run_smin(cfg: &ExperimentConfig) -> Result<SminOutcome> {
    let s = &cfg.smin;
    let probe = sigma_wx_smin_probe(&Rng::new(cfg.seed), s.activation, s.m, s.d, s.n, s.trials)
        .map_err(RunError::numerical("s_min probe"))?;
    Ok(SminOutcome { probe })
}

impl SminOutcome {
    pub fn render(&self) -> Vec<OutputFile> {
        let mut samples = Csv::new(&["trial", "s_min"]);
        for (i, &v) in self.probe.samples.iter().enumerate() {
            samples.row(&[i.into(), v.into()]);
        }
        let mut levels = Csv::new(&["r", "eta_r", "threshold", "exceedance", "chosen"]);
        for l in &self.probe.levels {
            levels.row(&[l.r.into(), l.eta_r.into(), l.threshold.into(), l.exceedance.into(), (self.probe.chosen_r == Some(l.r)).into()]);
        }
        vec![
            OutputFile::new("smin.csv", samples.into_bytes()),
            OutputFile::new("levels.csv", levels.into_bytes()),
        ]
    }
}
