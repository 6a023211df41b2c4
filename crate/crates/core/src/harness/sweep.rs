use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::config::ScenarioConfig;
use super::record::ScenarioReport;
use super::scenario::run_scenario;

/// Two-parameter grid over the adaptation settings.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid<T> {
    EtaBeta { etas: Vec<T>, betas: Vec<T> },
    LambdaSteps { lambdas: Vec<T>, steps: Vec<usize> },
}

impl<T: Real> SweepGrid<T> {
    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self {
            SweepGrid::EtaBeta { .. } => ("eta", "beta"),
            SweepGrid::LambdaSteps { .. } => ("lambda", "steps"),
        }
    }

    fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            SweepGrid::EtaBeta { etas, betas } => (
                etas.iter().map(|v| v.as_f64()).collect(),
                betas.iter().map(|v| v.as_f64()).collect(),
            ),
            SweepGrid::LambdaSteps { lambdas, steps } => (
                lambdas.iter().map(|v| v.as_f64()).collect(),
                steps.iter().map(|&v| v as f64).collect(),
            ),
        }
    }

    fn configure(&self, base: &ScenarioConfig<T>, row: usize, col: usize) -> ScenarioConfig<T> {
        let mut cfg = base.clone();
        match self {
            SweepGrid::EtaBeta { etas, betas } => {
                cfg.adaptation.eta = etas[row];
                cfg.adaptation.beta = betas[col];
            }
            SweepGrid::LambdaSteps { lambdas, steps } => {
                cfg.adaptation.lambda = lambdas[row];
                cfg.adaptation.steps = steps[col];
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub row_name: &'static str,
    pub col_name: &'static str,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    /// Row-major, `rows.len() * cols.len()` reports.
    pub cells: Vec<ScenarioReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Overall,
    New,
    Old,
}

impl SweepResult {
    pub fn cell(&self, row: usize, col: usize) -> &ScenarioReport {
        &self.cells[row * self.cols.len() + col]
    }

    /// Final mean accuracy of every grid point.
    pub fn matrix(&self, metric: Metric) -> Vec<Vec<Option<f64>>> {
        (0..self.rows.len())
            .map(|r| {
                (0..self.cols.len())
                    .map(|c| {
                        let p = self.cell(r, c).mean.final_point()?;
                        match metric {
                            Metric::Overall => Some(p.acc_overall),
                            Metric::New => p.acc_new,
                            Metric::Old => p.acc_old,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// One row per grid point with its parameter values and final mean
    /// accuracies.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Output(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario",
            "method",
            self.row_name,
            self.col_name,
            "acc_overall",
            "acc_new",
            "acc_old",
        ])
        .map_err(err)?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for (r, row) in self.rows.iter().enumerate() {
            for (c, col) in self.cols.iter().enumerate() {
                let report = self.cell(r, c);
                let p = report.mean.final_point();
                w.write_record([
                    report.scenario().to_string(),
                    report.method().to_string(),
                    row.to_string(),
                    col.to_string(),
                    fmt(p.map(|p| p.acc_overall)),
                    fmt(p.and_then(|p| p.acc_new)),
                    fmt(p.and_then(|p| p.acc_old)),
                ])
                .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::Output(e.to_string()))?;
        Ok(())
    }
}

fn prepare<T: Real>(
    base: &ScenarioConfig<T>,
    grid: &SweepGrid<T>,
) -> Result<Vec<ScenarioConfig<T>>> {
    let (rows, cols) = grid.axes();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Config("sweep grid axes must not be empty".into()));
    }
    let configs: Vec<ScenarioConfig<T>> = (0..rows.len())
        .flat_map(|r| (0..cols.len()).map(move |c| (r, c)))
        .map(|(r, c)| grid.configure(base, r, c))
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    Ok(configs)
}

fn assemble<T: Real>(grid: &SweepGrid<T>, cells: Vec<ScenarioReport>) -> SweepResult {
    let (rows, cols) = grid.axes();
    let (row_name, col_name) = grid.axis_names();
    SweepResult {
        row_name,
        col_name,
        rows,
        cols,
        cells,
    }
}

/// Runs one scenario per grid point, grid points in parallel.
pub fn sweep<T: Real>(base: &ScenarioConfig<T>, grid: &SweepGrid<T>) -> Result<SweepResult> {
    let cells = prepare(base, grid)?
        .par_iter()
        .map(run_scenario)
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(grid, cells))
}

/// Same as [`sweep`] with grid points run one after another.
pub fn sweep_serial<T: Real>(base: &ScenarioConfig<T>, grid: &SweepGrid<T>) -> Result<SweepResult> {
    let cells = prepare(base, grid)?
        .iter()
        .map(run_scenario)
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(grid, cells))
}
