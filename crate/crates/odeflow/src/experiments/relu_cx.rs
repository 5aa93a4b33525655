//! Gradient flow on the scalar ReLU network fitting `C x` over an (L, C) grid.

use odeflow_core::relucx::{run_relu_cx, w_star, ReluCxRecord};

use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::formats::Csv;
use crate::manifest::OutputFile;
use crate::parallel;

#[derive(Clone, Debug)]
pub struct ReluOutcome {
    /// Grid order: half depths outer, multipliers inner.
    pub records: Vec<ReluCxRecord>,
}

pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<ReluOutcome> {
    let grid = cfg.relu_configs();
    let records = parallel::map(&grid, threads, |c| {
        run_relu_cx(c).map_err(RunError::numerical(format!("relu-cx at L = {}, C = {}", c.half_depth, c.c)))
    });
    Ok(ReluOutcome { records: records.into_iter().collect::<Result<_>>()? })
}

impl ReluOutcome {
    pub fn render(&self) -> Vec<OutputFile> {
        let mut trace = Csv::new(&["L", "C", "iter", "w", "loss"]);
        let mut summary = Csv::new(&[
            "L",
            "C",
            "w_final",
            "w_star",
            "abs_err",
            "final_max_gap",
            "two_log_c",
            "odd_frozen",
            "even_symmetric",
        ]);
        for r in &self.records {
            let (l, c) = (r.config.half_depth, r.config.c);
            for &(i, w, loss) in &r.trace {
                trace.row(&[l.into(), c.into(), i.into(), w.into(), loss.into()]);
            }
            summary.row(&[
                l.into(),
                c.into(),
                r.w_final().into(),
                w_star(l, c).into(),
                r.abs_err().into(),
                r.final_max_gap().into(),
                (2.0 * c.ln()).into(),
                r.odd_frozen.into(),
                r.even_symmetric.into(),
            ]);
        }
        vec![
            OutputFile::new("trace.csv", trace.into_bytes()),
            OutputFile::new("summary.csv", summary.into_bytes()),
        ]
    }
}
