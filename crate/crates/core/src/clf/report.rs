use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ink::MovementMode;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report has no rows")]
    EmptyReport,
    #[error("row {task}/{mode}/{budget} has no repetitions")]
    EmptyRow { task: u8, mode: MovementMode, budget: usize },
    #[error("rows have differing repetition counts")]
    Ragged,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Accuracy of one (task, mode, budget) cell over all repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: u8,
    pub mode: MovementMode,
    pub budget: usize,
    /// Percentages, one per repetition.
    pub accuracies: Vec<f64>,
    /// Arithmetic mean of `accuracies` at full precision.
    pub mean: f64,
}

impl ReportRow {
    pub fn new(task: u8, mode: MovementMode, budget: usize, accuracies: Vec<f64>) -> Result<Self, ReportError> {
        if accuracies.is_empty() {
            return Err(ReportError::EmptyRow { task, mode, budget });
        }
        let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
        Ok(Self { task, mode, budget, accuracies, mean })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub corpus_digest: String,
    pub n_repetitions: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

/// Two-decimal percentage, truncated toward zero: 57.126 shows as `57.12` and
/// 9/14 as `64.28`. A 1e-7 guard absorbs binary representation error so that
/// values already at two decimals (57.14 stored as 57.13999…) survive intact.
pub fn format_pct(value: f64) -> String {
    let truncated = (value * 100.0 + 1e-7).floor() / 100.0;
    format!("{truncated:.2}")
}

impl AccuracyReport {
    fn check(&self) -> Result<usize, ReportError> {
        let reps = self.rows.first().ok_or(ReportError::EmptyReport)?.accuracies.len();
        if self.rows.iter().any(|r| r.accuracies.len() != reps) {
            return Err(ReportError::Ragged);
        }
        Ok(reps)
    }

    /// `task,mode,budget,rep1..repN,mean`.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let reps = self.check()?;
        let mut out = String::from("task,mode,budget");
        for r in 1..=reps {
            let _ = write!(out, ",rep{r}");
        }
        out.push_str(",mean\n");
        for row in &self.rows {
            let _ = write!(out, "{},{},{}", row.task, row.mode, row.budget);
            for a in &row.accuracies {
                let _ = write!(out, ",{}", format_pct(*a));
            }
            let _ = writeln!(out, ",{}", format_pct(row.mean));
        }
        Ok(out)
    }

    /// Aligned tables: one line per cell with every repetition, then a mode-by-task
    /// grid of means for each budget.
    pub fn to_text(&self) -> Result<String, ReportError> {
        let reps = self.check()?;
        let mut header: Vec<String> = ["task", "mode", "budget"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=reps).map(|r| format!("rep{r}")));
        header.push("mean".into());
        let mut lines = vec![header];
        for row in &self.rows {
            let mut cells = vec![row.task.to_string(), row.mode.to_string(), row.budget.to_string()];
            cells.extend(row.accuracies.iter().map(|a| format_pct(*a)));
            cells.push(format_pct(row.mean));
            lines.push(cells);
        }
        let mut out = String::from("Accuracy per repetition (%)\n");
        out.push_str(&align(&lines));

        let mut budgets: Vec<usize> = self.rows.iter().map(|r| r.budget).collect();
        budgets.dedup();
        budgets.sort_unstable();
        budgets.dedup();
        let mut tasks: Vec<u8> = self.rows.iter().map(|r| r.task).collect();
        tasks.sort_unstable();
        tasks.dedup();
        for budget in budgets {
            let _ = write!(out, "\nMean accuracy (%), {budget} synthetic samples per class\n");
            let mut grid = vec![std::iter::once("mode".to_string()).chain(tasks.iter().map(|t| format!("task {t}"))).collect()];
            for mode in MovementMode::ALL {
                if !self.rows.iter().any(|r| r.budget == budget && r.mode == mode) {
                    continue;
                }
                let mut cells = vec![mode.to_string()];
                for &task in &tasks {
                    let cell = self.rows.iter().find(|r| r.budget == budget && r.mode == mode && r.task == task);
                    cells.push(cell.map_or_else(|| "-".to_string(), |r| format_pct(r.mean)));
                }
                grid.push(cells);
            }
            out.push_str(&align(&grid));
        }
        Ok(out)
    }
}

fn align(lines: &[Vec<String>]) -> String {
    let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| lines.iter().filter_map(|l| l.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in lines {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Writes `report.csv`, `report.txt` and `report.json` into `dir`.
pub fn emit_report(report: &AccuracyReport, dir: &Path) -> Result<(), ReportError> {
    let csv = report.to_csv()?;
    let text = report.to_text()?;
    let json = serde_json::to_string_pretty(report)?;
    let io = |path: PathBuf, e: std::io::Error| ReportError::Io { path, source: e };
    fs::create_dir_all(dir).map_err(|e| io(dir.to_path_buf(), e))?;
    for (name, body) in [("report.csv", csv), ("report.txt", text), ("report.json", json + "\n")] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(path.clone(), e))?;
    }
    Ok(())
}
