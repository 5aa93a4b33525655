//! Training at increasing depths: successive-weight gaps and distances of
//! the weight interpolants to a deeper reference run.

use odeflow_core::analysis::{gap_stats, loglog_slope, GapStats, LineFit};
use odeflow_core::odesim::{interpolant_sup_distance, SupDistance, WeightInterpolant};
use odeflow_core::train::{run_at_depth, Problem, RunRecord, TrainConfig};

use super::build_problem;
use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::formats::{fmt_float, Csv};
use crate::manifest::OutputFile;
use crate::parallel;

/// One trained depth of the sweep.
#[derive(Clone, Debug)]
pub struct DepthRun {
    pub record: RunRecord,
    pub gaps: GapStats,
}

impl DepthRun {
    pub fn depth(&self) -> usize {
        self.record.depth
    }

    /// `max_k` successive gap at the last snapshot.
    pub fn final_gap(&self) -> f64 {
        self.gaps.per_t_max.last().map_or(0.0, |&(_, g)| g)
    }
}

/// Distance of one depth's interpolant to the reference at one snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupRow {
    pub depth: usize,
    pub t: f64,
    pub distance: SupDistance,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub runs: Vec<DepthRun>,
    pub reference_depth: Option<usize>,
    /// Rows for every depth below the reference, in depth then time order.
    pub supdist: Vec<SupRow>,
    /// Log-log fit of the final gap against `L`.
    pub slope: Option<LineFit>,
    /// Why no slope was fitted.
    pub notice: Option<String>,
}

/// Trains every depth of `depths` from the same seed, in parallel.
pub fn train_depths(problem: &Problem, train: &TrainConfig, depths: &[usize], threads: usize) -> Result<Vec<RunRecord>> {
    parallel::map(depths, threads, |&l| {
        run_at_depth(problem, l, train).map_err(RunError::numerical(format!("training at depth {l}")))
    })
    .into_iter()
    .collect()
}

pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<SweepOutcome> {
    let problem = build_problem(cfg)?;
    let train = cfg.train_config();
    let mut depths = cfg.model.depths.clone();
    let reference_depth = cfg.sweep.reference_depth;
    if let Some(r) = reference_depth {
        if !depths.contains(&r) {
            depths.push(r);
        }
    }
    let mut records = train_depths(&problem, &train, &depths, threads)?;
    let reference = reference_depth.map(|r| {
        let i = depths.iter().position(|&l| l == r).expect("reference depth was trained");
        if cfg.model.depths.contains(&r) {
            records[i].clone()
        } else {
            records.remove(i)
        }
    });

    let mut supdist = Vec::new();
    if let Some(reference) = &reference {
        let ref_depth = reference.depth;
        let pairs: Vec<(usize, usize)> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.depth < ref_depth)
            .flat_map(|(i, r)| (0..r.snapshots.len()).map(move |j| (i, j)))
            .collect();
        let rows = parallel::map(&pairs, threads, |&(i, j)| {
            let snap = &records[i].snapshots[j];
            let ref_snap = reference
                .snapshot_at(snap.iteration)
                .expect("every depth shares the snapshot cadence");
            let a = WeightInterpolant::from_params(&snap.params);
            let b = WeightInterpolant::from_params(&ref_snap.params);
            interpolant_sup_distance(&a, &b, ref_depth)
                .map(|distance| SupRow { depth: records[i].depth, t: snap.t, distance })
                .map_err(RunError::numerical("sup distance"))
        });
        supdist = rows.into_iter().collect::<Result<_>>()?;
    }
    drop(reference);

    let runs: Vec<DepthRun> = records
        .into_iter()
        .map(|record| DepthRun { gaps: gap_stats(&record), record })
        .collect();
    let (slope, notice) = fit_slope(&runs);
    Ok(SweepOutcome { runs, reference_depth, supdist, slope, notice })
}

fn fit_slope(runs: &[DepthRun]) -> (Option<LineFit>, Option<String>) {
    if runs.len() < 2 {
        return (None, Some("single depth: no slope fitted".to_string()));
    }
    let l: Vec<f64> = runs.iter().map(|r| r.depth() as f64).collect();
    let g: Vec<f64> = runs.iter().map(DepthRun::final_gap).collect();
    match loglog_slope(&l, &g) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(format!("no slope fitted: {e}"))),
    }
}

impl SweepOutcome {
    pub fn run_at(&self, depth: usize) -> Option<&DepthRun> {
        self.runs.iter().find(|r| r.depth() == depth)
    }

    pub fn render(&self) -> Vec<OutputFile> {
        let mut gaps = Csv::new(&["L", "t", "max_gap"]);
        let mut summary = Csv::new(&["L", "max_gap", "max_gap_v", "max_gap_w", "final_gap", "final_loss"]);
        let mut loss = Csv::new(&["L", "t", "loss", "grad_norm_sq"]);
        for run in &self.runs {
            let l = run.depth();
            for &(t, g) in &run.gaps.per_t_max {
                gaps.row(&[l.into(), t.into(), g.into()]);
            }
            summary.row(&[
                l.into(),
                run.gaps.max_gap.into(),
                run.gaps.max_gap_v.into(),
                run.gaps.max_gap_w.into(),
                run.final_gap().into(),
                run.record.final_loss().into(),
            ]);
            let r = &run.record;
            for ((&t, &v), &g) in r.times.iter().zip(&r.losses).zip(&r.grad_norm_sq) {
                loss.row(&[l.into(), t.into(), v.into(), g.into()]);
            }
        }
        let mut files = vec![
            OutputFile::new("gaps.csv", gaps.into_bytes()),
            OutputFile::new("gap_summary.csv", summary.into_bytes()),
            OutputFile::new("loss.csv", loss.into_bytes()),
        ];
        if let Some(ref_depth) = self.reference_depth {
            let mut sup = Csv::new(&["L", "L_ref", "t", "sup", "l2"]);
            for row in &self.supdist {
                sup.row(&[row.depth.into(), ref_depth.into(), row.t.into(), row.distance.sup.into(), row.distance.l2.into()]);
            }
            files.push(OutputFile::new("supdist.csv", sup.into_bytes()));
        }
        let text = match (&self.slope, &self.notice) {
            (Some(fit), _) => format!(
                "final max gap vs L: slope {} intercept {} r2 {}\n",
                fmt_float(fit.slope),
                fmt_float(fit.intercept),
                fmt_float(fit.r_squared)
            ),
            (None, Some(notice)) => format!("{notice}\n"),
            (None, None) => "no slope fitted\n".to_string(),
        };
        files.push(OutputFile::new("summary.txt", text));
        files
    }
}
