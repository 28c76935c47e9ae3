//! Pipeline stages. Every stage reads and writes files under the output
//! directory only, so a pipeline can be resumed from any completed stage:
//!
//! ```text
//! corpus/                                   ingest, fixture
//! run_manifest.json                         every stage
//! cells/t<task>_<mode>/rep<r>/
//!     generators/{ad,healthy}.ckpt          train-gen
//!     b<budget>/generated/                  generate (unscreened, inspection only)
//!     ensemble/member<i>.ckpt               screen
//!     b<budget>/synthetic/                  screen (accepted samples + screening_log.csv)
//!     b<budget>/classifier.ckpt             train-clf
//!     b<budget>/result.json                 train-clf, evaluate
//! report.{csv,txt,json}                     report, evaluate
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use synthwrite::clf::{emit_report, images_of, run_matrix, seeds, AccuracyReport, ReportMetadata, ReportRow, RepetitionData};
use synthwrite::corpus::{load_corpus, write_corpus, Corpus, FixtureParams, MANIFEST_FILE};
use synthwrite::generator::{sample_sequence, GeneratorModel};
use synthwrite::judge::{read_screened, write_screened, write_series, Ensemble, ENSEMBLE_SIZE, SCREENING_LOG};
use synthwrite::neural::rng::derive_seed;
use synthwrite::{par, AccelSeries, Class, MovementMode, Provenance};

use crate::config::RunConfig;
use crate::error::{CliError, StageError};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const RESULT_FILE: &str = "result.json";

/// One (task, mode, repetition) unit of work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub task: u8,
    pub mode: MovementMode,
    pub rep: usize,
}

impl Cell {
    /// Cells in report order: task, then mode, then repetition.
    pub fn all(cfg: &RunConfig) -> Vec<Cell> {
        let mut out = Vec::new();
        for &task in &cfg.tasks {
            for &mode in &cfg.modes {
                out.extend((0..cfg.clf.n_folds).map(|rep| Cell { task, mode, rep }));
            }
        }
        out
    }

    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join("cells").join(format!("t{}_{}", self.task, self.mode)).join(format!("rep{}", self.rep))
    }

    fn generator_path(&self, out: &Path, class: Class) -> PathBuf {
        self.dir(out).join("generators").join(format!("{class}.ckpt"))
    }

    fn ensemble_dir(&self, out: &Path) -> PathBuf {
        self.dir(out).join("ensemble")
    }

    fn budget_dir(&self, out: &Path, budget: usize) -> PathBuf {
        self.dir(out).join(format!("b{budget}"))
    }
}

/// Outcome of one classifier fit, as stored next to its checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub task: u8,
    pub mode: MovementMode,
    pub rep: usize,
    pub budget: usize,
    /// Test accuracy in percent.
    pub accuracy: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io { path: path.to_path_buf(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| StageError::Json { path: path.into(), source: e })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn require(path: PathBuf, producer: &'static str) -> Result<PathBuf, StageError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(StageError::Missing { path, producer })
    }
}

fn corpus_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("corpus")
}

/// Loads the corpus written by `ingest` or `fixture`.
pub fn load_run_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let dir = corpus_dir(cfg);
    require(dir.join(MANIFEST_FILE), "ingest` or `fixture")?;
    Ok(load_corpus(&dir)?)
}

fn positive_budgets(cfg: &RunConfig) -> Vec<usize> {
    cfg.budgets.iter().copied().filter(|&b| b > 0).collect()
}

/// Writes the resolved configuration, the seed tree and the corpus digest.
pub fn write_manifest(cfg: &RunConfig, command: &str, corpus: Option<&Corpus>) -> Result<(), CliError> {
    let cells: Vec<serde_json::Value> = Cell::all(cfg)
        .into_iter()
        .map(|c| {
            let rep_seed = seeds::repetition(cfg.seed, c.task, c.mode, c.rep);
            serde_json::json!({
                "task": c.task,
                "mode": c.mode,
                "rep": c.rep,
                "split_seed": seeds::split(cfg.seed, c.rep),
                "rep_seed": rep_seed,
                "generator_seeds": Class::ALL.map(|k| seeds::generator(rep_seed, k)),
                "ensemble_seed": seeds::ensemble(rep_seed),
                "screening_seeds": cfg.budgets.iter().map(|&b| seeds::screening(rep_seed, b)).collect::<Vec<_>>(),
                "classifier_seeds": cfg.budgets.iter().map(|&b| seeds::classifier(rep_seed, b)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "parallel": par::is_parallel(),
        "config": cfg,
        "config_hash": cfg.hash(),
        "corpus_digest": corpus.map(Corpus::digest),
        "cells": cells,
    });
    Ok(write_json(&cfg.output_dir.join(RUN_MANIFEST), &manifest)?)
}

fn store_corpus(cfg: &RunConfig, corpus: &Corpus, command: &str) -> Result<(), CliError> {
    let dir = corpus_dir(cfg);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    write_corpus(corpus, &dir)?;
    write_manifest(cfg, command, Some(corpus))
}

/// Copies a corpus from `run.corpus_root` into the output directory.
pub fn ingest(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let corpus = load_corpus(cfg.corpus_root()?)?;
    store_corpus(cfg, &corpus, "ingest")?;
    Ok(corpus)
}

/// Writes a synthetic two-class corpus with a recording for every configured task.
pub fn fixture(cfg: &RunConfig, n_per_class: usize, separation: f64) -> Result<Corpus, CliError> {
    let recordings = cfg
        .tasks
        .iter()
        .flat_map(|&t| FixtureParams::new(n_per_class, t, separation).build(cfg.seed).recordings().to_vec())
        .collect();
    let corpus = Corpus::new(recordings)?;
    store_corpus(cfg, &corpus, "fixture")?;
    Ok(corpus)
}

fn for_cells<T: Send>(cfg: &RunConfig, f: impl Fn(Cell) -> Result<T, CliError> + Sync + Send) -> Result<Vec<T>, CliError> {
    par::map(&Cell::all(cfg), |&c| f(c)).into_iter().collect()
}

/// Trains the per-class generators of every cell. Nothing is trained when every budget is 0.
pub fn train_gen(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_run_corpus(cfg)?;
    write_manifest(cfg, "train-gen", Some(&corpus))?;
    if positive_budgets(cfg).is_empty() {
        return Ok(());
    }
    for_cells(cfg, |cell| {
        let data = RepetitionData::prepare(&corpus, cell.task, cell.mode, cfg.seed, cell.rep)?;
        for model in data.train_generators(&cfg.generator)? {
            let path = cell.generator_path(&cfg.output_dir, model.label);
            fs::create_dir_all(path.parent().expect("checkpoint has a parent")).map_err(io_err(&path))?;
            model.save(&path)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn load_generators(cfg: &RunConfig, cell: Cell) -> Result<Vec<GeneratorModel>, CliError> {
    Class::ALL
        .iter()
        .map(|&class| {
            let path = require(cell.generator_path(&cfg.output_dir, class), "train-gen")?;
            Ok(GeneratorModel::load(&path)?)
        })
        .collect()
}

/// Draws `budget` unscreened samples per class from the trained generators.
pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    write_manifest(cfg, "generate", None)?;
    for_cells(cfg, |cell| {
        let generators = load_generators(cfg, cell)?;
        let rep_seed = seeds::repetition(cfg.seed, cell.task, cell.mode, cell.rep);
        for budget in positive_budgets(cfg) {
            let seed = derive_seed(rep_seed, &format!("generate/b{budget}"));
            let samples: Vec<AccelSeries> = generators
                .iter()
                .flat_map(|g| (0..budget).map(move |k| (g, k)))
                .map(|(g, k)| {
                    let s = sample_sequence(g, derive_seed(seed, &format!("{}/{k}", g.label)));
                    AccelSeries { source: Provenance { subject_id: format!("syn_{}_{k}", g.label), task_id: cell.task }, ..s }
                })
                .collect();
            let dir = cell.budget_dir(&cfg.output_dir, budget).join("generated");
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
            }
            write_series(&samples, &dir)?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Trains each cell's screening ensemble (reusing a stored one) and writes the
/// accepted synthetic samples of every positive budget.
pub fn screen(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_run_corpus(cfg)?;
    write_manifest(cfg, "screen", Some(&corpus))?;
    let budgets = positive_budgets(cfg);
    if budgets.is_empty() {
        return Ok(());
    }
    for_cells(cfg, |cell| {
        let generators = load_generators(cfg, cell)?;
        let data = RepetitionData::prepare(&corpus, cell.task, cell.mode, cfg.seed, cell.rep)?;
        let ens_dir = cell.ensemble_dir(&cfg.output_dir);
        let ensemble = if ens_dir.join(format!("member{}.ckpt", ENSEMBLE_SIZE - 1)).exists() {
            Ensemble::load(&ens_dir)?
        } else {
            let e = data.train_ensemble(&cfg.clf)?;
            e.save(&ens_dir)?;
            e
        };
        for &budget in &budgets {
            let set = data.screen(&generators, &ensemble, budget)?;
            let dir = cell.budget_dir(&cfg.output_dir, budget).join("synthetic");
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
            }
            write_screened(&set, &dir)?;
        }
        Ok(())
    })?;
    Ok(())
}

/// Trains the final classifier of every cell and budget and records its test accuracy.
pub fn train_clf(cfg: &RunConfig) -> Result<Vec<CellResult>, CliError> {
    let corpus = load_run_corpus(cfg)?;
    write_manifest(cfg, "train-clf", Some(&corpus))?;
    let nested = for_cells(cfg, |cell| {
        let data = RepetitionData::prepare(&corpus, cell.task, cell.mode, cfg.seed, cell.rep)?;
        cfg.budgets
            .iter()
            .map(|&budget| {
                let bdir = cell.budget_dir(&cfg.output_dir, budget);
                let synthetic = if budget > 0 {
                    let dir = require(bdir.join("synthetic").join(SCREENING_LOG), "screen")?;
                    images_of(&read_screened(dir.parent().expect("log has a parent"))?)
                } else {
                    Vec::new()
                };
                let fit = data.fit_classifier(&synthetic, &cfg.clf, budget)?;
                fs::create_dir_all(&bdir).map_err(io_err(&bdir))?;
                fit.model.save(&bdir.join("classifier.ckpt"))?;
                let result = CellResult {
                    task: cell.task,
                    mode: cell.mode,
                    rep: cell.rep,
                    budget,
                    accuracy: data.test_accuracy(&fit.model)?,
                };
                write_json(&bdir.join(RESULT_FILE), &result)?;
                Ok(result)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    Ok(nested.into_iter().flatten().collect())
}

fn assemble(cfg: &RunConfig, corpus: &Corpus, results: &[CellResult]) -> Result<AccuracyReport, CliError> {
    let mut rows = Vec::new();
    for &task in &cfg.tasks {
        for &mode in &cfg.modes {
            for &budget in &cfg.budgets {
                let accs = (0..cfg.clf.n_folds)
                    .map(|rep| {
                        results
                            .iter()
                            .find(|r| (r.task, r.mode, r.rep, r.budget) == (task, mode, rep, budget))
                            .map(|r| r.accuracy)
                            .expect("one result per cell and budget")
                    })
                    .collect();
                rows.push(ReportRow::new(task, mode, budget, accs)?);
            }
        }
    }
    Ok(AccuracyReport {
        rows,
        metadata: ReportMetadata { seed: cfg.seed, corpus_digest: corpus.digest(), n_repetitions: cfg.clf.n_folds },
    })
}

/// Aggregates stored per-cell results into `report.{csv,txt,json}`.
pub fn report(cfg: &RunConfig) -> Result<AccuracyReport, CliError> {
    let corpus = load_run_corpus(cfg)?;
    let mut results = Vec::new();
    for cell in Cell::all(cfg) {
        for &budget in &cfg.budgets {
            let path = require(cell.budget_dir(&cfg.output_dir, budget).join(RESULT_FILE), "train-clf` or `evaluate")?;
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let r: CellResult = serde_json::from_str(&text).map_err(|e| StageError::Json { path: path.clone(), source: e })?;
            results.push(r);
        }
    }
    let report = assemble(cfg, &corpus, &results)?;
    emit_report(&report, &cfg.output_dir)?;
    write_manifest(cfg, "report", Some(&corpus))?;
    Ok(report)
}

/// Whole pipeline in memory; stores per-cell results and the report.
pub fn evaluate(cfg: &RunConfig) -> Result<AccuracyReport, CliError> {
    let corpus = load_run_corpus(cfg)?;
    write_manifest(cfg, "evaluate", Some(&corpus))?;
    let report = run_matrix(&corpus, &cfg.tasks, &cfg.modes, &cfg.budgets, &cfg.eval(), cfg.seed)?;
    for row in &report.rows {
        for (rep, &accuracy) in row.accuracies.iter().enumerate() {
            let cell = Cell { task: row.task, mode: row.mode, rep };
            let result = CellResult { task: row.task, mode: row.mode, rep, budget: row.budget, accuracy };
            write_json(&cell.budget_dir(&cfg.output_dir, row.budget).join(RESULT_FILE), &result)?;
        }
    }
    emit_report(&report, &cfg.output_dir)?;
    Ok(report)
}
