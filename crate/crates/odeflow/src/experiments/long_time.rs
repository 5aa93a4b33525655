//! A single long training run: loss decay, PL ratios and weight profiles.

use odeflow_core::analysis::{fit_decay_default, gap_stats, pl_trace, weight_profile, DecayFit, GapStats, PlTrace, WeightProfile};
use odeflow_core::train::{run_at_depth, RunRecord};

use super::build_problem;
use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::formats::{encode_params, fmt_float, snapshot_name, Csv};
use crate::manifest::OutputFile;

#[derive(Clone, Debug)]
pub struct LongTimeOutcome {
    pub record: RunRecord,
    pub fit: Option<DecayFit>,
    /// Why the decay fit is missing.
    pub fit_notice: Option<String>,
    pub pl: PlTrace,
    pub gaps: GapStats,
    pub profile: WeightProfile,
    /// Snapshot iterations of the profile checkpoints, `0` first.
    pub checkpoints: Vec<usize>,
}

/// Snapshot iterations closest to `0, T / 2^(count-1), ..., T / 2, T`.
pub fn geometric_checkpoints(record: &RunRecord, count: usize) -> Vec<usize> {
    let steps = record.times.len() - 1;
    let iterations: Vec<usize> = record.snapshots.iter().map(|s| s.iteration).collect();
    let mut chosen = vec![0];
    for j in (0..count).rev() {
        let target = steps >> j;
        let nearest = iterations
            .iter()
            .copied()
            .min_by_key(|&i| i.abs_diff(target))
            .expect("snapshot at iteration 0");
        if !chosen.contains(&nearest) {
            chosen.push(nearest);
        }
    }
    chosen.sort_unstable();
    chosen
}

pub fn run(cfg: &ExperimentConfig) -> Result<LongTimeOutcome> {
    let problem = build_problem(cfg)?;
    let depth = cfg.model.depth;
    let record = run_at_depth(&problem, depth, &cfg.train_config())
        .map_err(RunError::numerical(format!("training at depth {depth}")))?;
    let (fit, fit_notice) = match fit_decay_default(&record) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(format!("no decay fit: {e}"))),
    };
    let profile = weight_profile(&record, cfg.profile_entry()).map_err(RunError::numerical("weight profile"))?;
    Ok(LongTimeOutcome {
        pl: pl_trace(&record),
        gaps: gap_stats(&record),
        checkpoints: geometric_checkpoints(&record, cfg.profile.checkpoints),
        record,
        fit,
        fit_notice,
        profile,
    })
}

impl LongTimeOutcome {
    /// PL ratios at snapshot iterations; `None` where the loss is below the floor.
    pub fn snapshot_ratios(&self) -> Vec<(usize, Option<f64>)> {
        self.record
            .snapshots
            .iter()
            .map(|s| (s.iteration, self.pl.entries[s.iteration].ratio))
            .collect()
    }

    pub fn render(&self, cfg: &ExperimentConfig) -> Vec<OutputFile> {
        let r = &self.record;
        let mut loss = Csv::new(&["t", "loss", "grad_norm_sq"]);
        for ((&t, &v), &g) in r.times.iter().zip(&r.losses).zip(&r.grad_norm_sq) {
            loss.row(&[t.into(), v.into(), g.into()]);
        }
        let mut pl = Csv::new(&["t", "loss", "ratio"]);
        for e in &self.pl.entries {
            let ratio = e.ratio.map_or(String::new(), fmt_float);
            pl.row(&[e.t.into(), e.loss.into(), ratio.as_str().into()]);
        }
        let mut profiles = Csv::new(&["t", "s", "entry_value"]);
        let mut variation = Csv::new(&["t", "total_variation"]);
        let mut snapshots = Vec::new();
        for &it in &self.checkpoints {
            let snap = r.snapshot_at(it).expect("checkpoint is a snapshot");
            let curve = self
                .profile
                .curves
                .iter()
                .find(|c| c.t == snap.t)
                .expect("one curve per snapshot");
            for &(s, v) in &curve.points {
                profiles.row(&[curve.t.into(), s.into(), v.into()]);
            }
            variation.row(&[curve.t.into(), curve.total_variation.into()]);
            if cfg.train.write_snapshots {
                snapshots.push(OutputFile::new(snapshot_name(snap.t), encode_params(&snap.params)));
            }
        }
        let mut gaps = Csv::new(&["t", "max_gap"]);
        for &(t, g) in &self.gaps.per_t_max {
            gaps.row(&[t.into(), g.into()]);
        }

        let mut text = format!("depth {}\nfinal loss {}\n", r.depth, fmt_float(r.final_loss()));
        match (&self.fit, &self.fit_notice) {
            (Some(fit), _) => text.push_str(&format!(
                "log-loss fit on [{}, {}]: slope {} r2 {}\n",
                fmt_float(fit.window.0),
                fmt_float(fit.window.1),
                fmt_float(fit.slope),
                fmt_float(fit.r_squared)
            )),
            (None, notice) => text.push_str(&format!("{}\n", notice.as_deref().unwrap_or("no decay fit"))),
        }
        match self.pl.mu_hat() {
            Some(mu) => text.push_str(&format!("mu_hat {}\n", fmt_float(mu))),
            None => text.push_str("mu_hat undefined: every loss below the floor\n"),
        }
        text.push_str(&format!("max gap {}\n", fmt_float(self.gaps.max_gap)));
        if !cfg.model.activation.within_smooth_theory() {
            text.push_str(&format!("activation {} is outside the smooth theory\n", cfg.model.activation));
        }

        let mut files = vec![
            OutputFile::new("loss.csv", loss.into_bytes()),
            OutputFile::new("pl.csv", pl.into_bytes()),
            OutputFile::new("profiles.csv", profiles.into_bytes()),
            OutputFile::new("profile_variation.csv", variation.into_bytes()),
            OutputFile::new("gaps.csv", gaps.into_bytes()),
            OutputFile::new("summary.txt", text),
        ];
        files.extend(snapshots);
        files
    }
}
