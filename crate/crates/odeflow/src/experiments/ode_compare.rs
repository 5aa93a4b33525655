//! Discretization gaps of trained networks against fine Euler solves of
//! their own weight interpolants.

use odeflow_core::odesim::{discretization_gap, solve_euler, OdeSolution, WeightInterpolant};
use odeflow_core::{Activation, Dataset, ResNetParams};

use super::{build_problem, depth_sweep::train_depths, median};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::formats::Csv;
use crate::manifest::OutputFile;
use crate::parallel;

/// Gaps of one depth, indexed by input.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGaps {
    pub depth: usize,
    pub gaps: Vec<f64>,
}

/// Median over inputs of `gap(L) / gap(L_next)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRatio {
    pub depth: usize,
    pub next_depth: usize,
    pub median_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct OdeOutcome {
    pub gaps: Vec<DepthGaps>,
    pub ratios: Vec<GapRatio>,
    /// Fine solve of the first input on the deepest network, thinned.
    pub solution: OdeSolution,
}

/// Gap of every network on the first `inputs` data columns.
pub fn gap_table(
    nets: &[&ResNetParams],
    act: Activation,
    data: &Dataset,
    inputs: usize,
    ref_steps: usize,
    threads: usize,
) -> Result<Vec<DepthGaps>> {
    let jobs: Vec<(usize, usize)> = (0..nets.len()).flat_map(|i| (0..inputs).map(move |j| (i, j))).collect();
    let values = parallel::map(&jobs, threads, |&(i, j)| {
        discretization_gap(nets[i], act, &data.input(j), ref_steps)
            .map_err(RunError::numerical(format!("discretization gap at depth {}", nets[i].depth())))
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(nets
        .iter()
        .zip(values.chunks(inputs.max(1)))
        .map(|(p, g)| DepthGaps { depth: p.depth(), gaps: g.to_vec() })
        .collect())
}

/// Ratios between consecutive depths of the table.
pub fn gap_ratios(table: &[DepthGaps]) -> Vec<GapRatio> {
    table
        .windows(2)
        .map(|w| {
            let per_input: Vec<f64> = w[0].gaps.iter().zip(&w[1].gaps).map(|(a, b)| a / b).collect();
            GapRatio { depth: w[0].depth, next_depth: w[1].depth, median_ratio: median(&per_input) }
        })
        .collect()
}

/// Rows kept in the exported fine solution.
const SOLUTION_ROWS: usize = 256;

pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<OdeOutcome> {
    let problem = build_problem(cfg)?;
    let records = train_depths(&problem, &cfg.train_config(), &cfg.model.depths, threads)?;
    let nets: Vec<&ResNetParams> = records.iter().map(|r| r.final_params()).collect();
    let inputs = cfg.ode.inputs.unwrap_or(cfg.data.n);
    let act = cfg.model.activation;
    let gaps = gap_table(&nets, act, &problem.data, inputs, cfg.ode.ref_steps, threads)?;
    let ratios = gap_ratios(&gaps);

    let deepest = nets.last().expect("depth list is non-empty");
    let interp = WeightInterpolant::from_params(deepest);
    let full = solve_euler(&interp, act, deepest.a(), &problem.data.input(0), cfg.ode.ref_steps)
        .map_err(RunError::numerical("fine Euler solve"))?;
    let stride = (full.steps / SOLUTION_ROWS).max(1);
    let keep: Vec<usize> = (0..=full.steps).step_by(stride).collect();
    let solution = OdeSolution {
        grid: keep.iter().map(|&k| full.grid[k]).collect(),
        states: keep.iter().map(|&k| full.states[k].clone()).collect(),
        steps: full.steps,
    };
    Ok(OdeOutcome { gaps, ratios, solution })
}

impl OdeOutcome {
    pub fn render(&self) -> Vec<OutputFile> {
        let mut gaps = Csv::new(&["L", "input", "gap"]);
        for row in &self.gaps {
            for (i, &g) in row.gaps.iter().enumerate() {
                gaps.row(&[row.depth.into(), i.into(), g.into()]);
            }
        }
        let mut ratios = Csv::new(&["L", "L_next", "median_gap_ratio"]);
        for r in &self.ratios {
            ratios.row(&[r.depth.into(), r.next_depth.into(), r.median_ratio.into()]);
        }
        let q = self.solution.states.first().map_or(0, Vec::len);
        let names: Vec<String> = std::iter::once("s".to_string()).chain((1..=q).map(|i| format!("H_{i}"))).collect();
        let header: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut sol = Csv::new(&header);
        for (s, h) in self.solution.grid.iter().zip(&self.solution.states) {
            let cells: Vec<_> = std::iter::once((*s).into()).chain(h.iter().map(|&v| v.into())).collect();
            sol.row(&cells);
        }
        vec![
            OutputFile::new("gaps.csv", gaps.into_bytes()),
            OutputFile::new("ratios.csv", ratios.into_bytes()),
            OutputFile::new("ode_solution.csv", sol.into_bytes()),
        ]
    }
}
