use std::io::Write;

use crate::error::{Error, Result};

/// Accuracy snapshot at one evaluation point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    /// Task index (continual), incremental epoch, or samples streamed (online).
    pub position: usize,
    pub acc_overall: f64,
    /// Absent when no evaluated sample belongs to a new class.
    pub acc_new: Option<f64>,
    /// Absent when no evaluated sample belongs to a pre-training class.
    pub acc_old: Option<f64>,
    pub n_new: usize,
    pub n_old: usize,
    /// Accuracy on each task seen so far (continual only).
    pub task_accs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub method: String,
    /// `None` for the across-seed mean.
    pub seed: Option<u64>,
    pub points: Vec<EvalPoint>,
}

impl RunRecord {
    pub fn final_point(&self) -> Option<&EvalPoint> {
        self.points.last()
    }
}

/// Correct/total counts split by new and old classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub new_correct: usize,
    pub new_total: usize,
    pub old_correct: usize,
    pub old_total: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Tally {
    pub fn record(&mut self, is_new: bool, correct: bool) {
        if is_new {
            self.new_total += 1;
            self.new_correct += usize::from(correct);
        } else {
            self.old_total += 1;
            self.old_correct += usize::from(correct);
        }
    }

    pub fn total(&self) -> usize {
        self.new_total + self.old_total
    }

    pub fn overall(&self) -> Option<f64> {
        ratio(self.new_correct + self.old_correct, self.total())
    }

    pub fn point(&self, position: usize) -> EvalPoint {
        EvalPoint {
            position,
            acc_overall: self.overall().unwrap_or(0.0),
            acc_new: ratio(self.new_correct, self.new_total),
            acc_old: ratio(self.old_correct, self.old_total),
            n_new: self.new_total,
            n_old: self.old_total,
            task_accs: Vec::new(),
        }
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Point-wise mean over records that share their evaluation positions.
pub fn mean_record(records: &[RunRecord]) -> Result<RunRecord> {
    let first = records.first().ok_or(Error::EmptyData)?;
    for r in records {
        let same = r.points.len() == first.points.len()
            && r.points
                .iter()
                .zip(&first.points)
                .all(|(a, b)| a.position == b.position);
        if !same {
            return Err(Error::Config(
                "records have different evaluation positions".into(),
            ));
        }
    }
    let n = records.len() as f64;
    let points = (0..first.points.len())
        .map(|i| {
            fn point_at(r: &RunRecord, i: usize) -> &EvalPoint {
                &r.points[i]
            }
            let at = |r| point_at(r, i);
            let n_tasks = at(first).task_accs.len();
            EvalPoint {
                position: at(first).position,
                acc_overall: records.iter().map(|r| at(r).acc_overall).sum::<f64>() / n,
                acc_new: mean_of(records.iter().map(|r| at(r).acc_new)),
                acc_old: mean_of(records.iter().map(|r| at(r).acc_old)),
                n_new: at(first).n_new,
                n_old: at(first).n_old,
                task_accs: (0..n_tasks)
                    .map(|t| records.iter().map(|r| at(r).task_accs[t]).sum::<f64>() / n)
                    .collect(),
            }
        })
        .collect();
    Ok(RunRecord {
        scenario: first.scenario.clone(),
        method: first.method.clone(),
        seed: None,
        points,
    })
}

/// Per-seed records of one scenario and method plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub records: Vec<RunRecord>,
    pub mean: RunRecord,
}

impl ScenarioReport {
    pub fn from_records(records: Vec<RunRecord>) -> Result<Self> {
        let mean = mean_record(&records)?;
        Ok(ScenarioReport { records, mean })
    }

    pub fn method(&self) -> &str {
        &self.mean.method
    }

    pub fn scenario(&self) -> &str {
        &self.mean.scenario
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn seed_label(seed: Option<u64>) -> String {
    seed.map_or_else(|| "mean".to_string(), |s| s.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

/// One row per evaluation point: every per-seed record in order, then the
/// mean record, for each report in order. Empty cells mean "absent".
pub fn write_csv<W: Write>(reports: &[ScenarioReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "method",
        "seed",
        "position",
        "acc_overall",
        "acc_new",
        "acc_old",
    ])
    .map_err(csv_err)?;
    for report in reports {
        for record in report.records.iter().chain(std::iter::once(&report.mean)) {
            for p in &record.points {
                w.write_record([
                    record.scenario.clone(),
                    record.method.clone(),
                    seed_label(record.seed),
                    p.position.to_string(),
                    format!("{:.6}", p.acc_overall),
                    opt(p.acc_new),
                    opt(p.acc_old),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}

/// Per-task accuracies of continual runs, one row per (point, task).
pub fn write_task_csv<W: Write>(reports: &[ScenarioReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "method", "seed", "position", "task", "acc"])
        .map_err(csv_err)?;
    for report in reports {
        for record in report.records.iter().chain(std::iter::once(&report.mean)) {
            for p in &record.points {
                for (task, acc) in p.task_accs.iter().enumerate() {
                    w.write_record([
                        record.scenario.clone(),
                        record.method.clone(),
                        seed_label(record.seed),
                        p.position.to_string(),
                        (task + 1).to_string(),
                        format!("{acc:.6}"),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}
