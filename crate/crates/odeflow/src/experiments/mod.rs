//! One module per subcommand. Each experiment returns a typed outcome; the
//! outcome renders to the files written to the output directory.

pub mod depth_sweep;
pub mod long_time;
pub mod ode_compare;
pub mod relu_cx;
pub mod spectral;

use std::path::Path;

use odeflow_core::train::Problem;
use odeflow_core::{Dataset, Rng};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Result, RunError};
use crate::manifest::{Manifest, OutputFile};

/// Name of the manifest, always the last file written.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Training problem of the model and data blocks; the depth is set per run.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let m = &cfg.model;
    let mut data = Dataset::gaussian(&Rng::new(cfg.data.seed), m.input, m.output, cfg.data.n)
        .map_err(RunError::numerical("dataset"))?;
    if let Some(radius) = cfg.data.normalize {
        data = data.normalized(radius).map_err(RunError::numerical("dataset"))?;
    }
    Ok(Problem {
        dims: cfg.dims(m.depth),
        act: m.activation,
        scheme: cfg.init_scheme(),
        embedding: cfg.embedding(),
        data,
    })
}

/// Validates `cfg`, runs its experiment and renders the output files.
pub fn execute(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentKind::LargeDepthSweep => depth_sweep::run(cfg, threads)?.render(),
        ExperimentKind::LongTime | ExperimentKind::PlCheck => long_time::run(cfg)?.render(cfg),
        ExperimentKind::OdeCompare => ode_compare::run(cfg, threads)?.render(),
        ExperimentKind::ReluCx => relu_cx::run(cfg, threads)?.render(),
        ExperimentKind::Hermite => spectral::run_hermite(cfg)?.render(),
        ExperimentKind::SminProbe => spectral::run_smin(cfg)?.render(),
    })
}

/// Writes `files` into `dir`, then the manifest over them. The echoed
/// config omits the output directory, so the manifest is a function of the
/// experiment alone.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, files: &[OutputFile]) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(RunError::io(dir))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(RunError::io(path))?;
    }
    let echo = ExperimentConfig { output: None, ..cfg.clone() };
    let manifest = Manifest::build(cfg.experiment.name(), cfg.seed, echo.to_json(), files);
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_json()).map_err(RunError::io(path))?;
    Ok(manifest)
}

/// Median of a non-empty slice; NaN is not expected.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
