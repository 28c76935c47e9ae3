use serde::{Deserialize, Serialize};

use super::report::{AccuracyReport, ReportError, ReportMetadata, ReportRow};
use super::{accuracy, train_classifier, ClfConfig, ClfError, ClfFit, Cnn};
use crate::corpus::{subject_split, Corpus, CorpusError};
use crate::generator::{train_generator, GeneratorConfig, GeneratorError, GeneratorModel};
use crate::imaging::{series_to_image, GrayImage};
use crate::ink::{recording_series, AccelSeries, Class, MovementMode};
use crate::judge::{generate_screened, train_ensemble, Ensemble, JudgeError, ScreenedSet};
use crate::par;

/// Tasks covered by the reproduction harness.
pub const STUDIED_TASKS: [u8; 2] = [13, 16];
/// Synthetic samples per class in the studied configurations.
pub const DEFAULT_BUDGETS: [usize; 3] = [0, 500, 1000];
/// Share of subjects held out for testing in every repetition.
pub const TEST_FRACTION: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("no usable {mode} recordings for task {task} among the {part} subjects")]
    NoImages { task: u8, mode: MovementMode, part: &'static str },
}

/// One evaluated cell: task, movement mode and synthetic samples per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub task_id: u8,
    pub mode: MovementMode,
    pub budget: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub generator: GeneratorConfig,
    /// Shared by the ensemble members and the final classifier; `n_folds` sets the
    /// number of repetitions.
    pub clf: ClfConfig,
}

/// Seed derivation for every randomized stage of an evaluation.
pub mod seeds {
    use crate::ink::{Class, MovementMode};
    use crate::neural::rng::derive_seed;

    /// Subject split of repetition `rep`, shared by every cell.
    pub fn split(seed: u64, rep: usize) -> u64 {
        derive_seed(seed, &format!("split/rep{rep}"))
    }

    /// Root of one (task, mode, repetition) cell.
    pub fn repetition(seed: u64, task: u8, mode: MovementMode, rep: usize) -> u64 {
        derive_seed(seed, &format!("t{task}/{mode}/rep{rep}"))
    }

    pub fn generator(rep_seed: u64, class: Class) -> u64 {
        derive_seed(rep_seed, &format!("generator/{class}"))
    }

    pub fn ensemble(rep_seed: u64) -> u64 {
        derive_seed(rep_seed, "ensemble")
    }

    pub fn screening(rep_seed: u64, budget: usize) -> u64 {
        derive_seed(rep_seed, &format!("screen/b{budget}"))
    }

    pub fn classifier(rep_seed: u64, budget: usize) -> u64 {
        derive_seed(rep_seed, &format!("clf/b{budget}"))
    }
}

/// Acceleration series of every recording of `task`; recordings whose `mode`
/// segment is empty or too short to differentiate are skipped.
pub fn task_series(corpus: &Corpus, task: u8, mode: MovementMode) -> Vec<AccelSeries> {
    corpus.task(task).filter_map(|rec| recording_series(rec, mode).ok()).collect()
}

pub fn images_of(series: &[AccelSeries]) -> Vec<GrayImage> {
    par::map(series, series_to_image)
}

/// Train and test subjects of repetition `rep`.
pub fn split_repetition(real: &Corpus, rep: usize, seed: u64) -> Result<(Corpus, Corpus), ScenarioError> {
    Ok(subject_split(real, TEST_FRACTION, seeds::split(seed, rep))?)
}

/// One generator per class, trained on that class's series.
pub fn train_class_generators(
    series: &[AccelSeries],
    cfg: &GeneratorConfig,
    rep_seed: u64,
) -> Result<Vec<GeneratorModel>, ScenarioError> {
    let fits = par::map(&Class::ALL, |&class| {
        let own: Vec<AccelSeries> = series.iter().filter(|s| s.label == class).cloned().collect();
        let cfg = GeneratorConfig { seed: seeds::generator(rep_seed, class), ..cfg.clone() };
        train_generator(&own, &cfg).map(|f| f.model)
    });
    Ok(fits.into_iter().collect::<Result<Vec<_>, _>>()?)
}

/// Real images of one (task, mode, repetition) cell, split by subject.
#[derive(Clone, Debug)]
pub struct RepetitionData {
    pub rep_seed: u64,
    pub train_series: Vec<AccelSeries>,
    pub train_images: Vec<GrayImage>,
    pub test_images: Vec<GrayImage>,
}

impl RepetitionData {
    pub fn prepare(real: &Corpus, task: u8, mode: MovementMode, seed: u64, rep: usize) -> Result<Self, ScenarioError> {
        let (train, test) = split_repetition(real, rep, seed)?;
        let train_series = task_series(&train, task, mode);
        let train_images = images_of(&train_series);
        let test_images = images_of(&task_series(&test, task, mode));
        if train_images.is_empty() {
            return Err(ScenarioError::NoImages { task, mode, part: "training" });
        }
        if test_images.is_empty() {
            return Err(ScenarioError::NoImages { task, mode, part: "test" });
        }
        Ok(Self { rep_seed: seeds::repetition(seed, task, mode, rep), train_series, train_images, test_images })
    }

    pub fn train_ensemble(&self, cfg: &ClfConfig) -> Result<Ensemble, ScenarioError> {
        Ok(train_ensemble(&self.train_images, cfg, seeds::ensemble(self.rep_seed))?)
    }

    pub fn train_generators(&self, cfg: &GeneratorConfig) -> Result<Vec<GeneratorModel>, ScenarioError> {
        train_class_generators(&self.train_series, cfg, self.rep_seed)
    }

    /// Screened synthetic samples for a positive `budget`.
    pub fn screen(
        &self,
        generators: &[GeneratorModel],
        ensemble: &Ensemble,
        budget: usize,
    ) -> Result<ScreenedSet, ScenarioError> {
        let sources: Vec<&GeneratorModel> = generators.iter().collect();
        Ok(generate_screened(&sources, ensemble, budget, seeds::screening(self.rep_seed, budget))?)
    }

    /// Trains the final classifier on the real training images plus `synthetic`.
    pub fn fit_classifier(&self, synthetic: &[GrayImage], cfg: &ClfConfig, budget: usize) -> Result<ClfFit, ScenarioError> {
        let real: Vec<&GrayImage> = self.train_images.iter().collect();
        let syn: Vec<&GrayImage> = synthetic.iter().collect();
        Ok(train_classifier(&real, &syn, cfg, seeds::classifier(self.rep_seed, budget))?)
    }

    pub fn test_accuracy(&self, model: &Cnn) -> Result<f64, ScenarioError> {
        let test: Vec<&GrayImage> = self.test_images.iter().collect();
        Ok(accuracy(model, &test)?)
    }
}

/// Test accuracy of one repetition for each of `budgets`. Generators and the
/// ensemble are trained once, on the training subjects only, and shared by
/// every positive budget.
pub fn run_repetition(
    real: &Corpus,
    task: u8,
    mode: MovementMode,
    budgets: &[usize],
    cfg: &EvalConfig,
    seed: u64,
    rep: usize,
) -> Result<Vec<f64>, ScenarioError> {
    let data = RepetitionData::prepare(real, task, mode, seed, rep)?;
    let screening = if budgets.iter().any(|&b| b > 0) {
        Some((data.train_generators(&cfg.generator)?, data.train_ensemble(&cfg.clf)?))
    } else {
        None
    };
    budgets
        .iter()
        .map(|&budget| {
            let synthetic = match &screening {
                Some((generators, ensemble)) if budget > 0 => images_of(&data.screen(generators, ensemble, budget)?.samples),
                _ => Vec::new(),
            };
            let fit = data.fit_classifier(&synthetic, &cfg.clf, budget)?;
            data.test_accuracy(&fit.model)
        })
        .collect()
}

/// All repetitions of one cell.
pub fn evaluate_scenario(real: &Corpus, scenario: Scenario, cfg: &EvalConfig, seed: u64) -> Result<ReportRow, ScenarioError> {
    let accs = par::map_range(cfg.clf.n_folds, |rep| {
        run_repetition(real, scenario.task_id, scenario.mode, &[scenario.budget], cfg, seed, rep).map(|a| a[0])
    });
    let accs = accs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ReportRow::new(scenario.task_id, scenario.mode, scenario.budget, accs)?)
}

/// Evaluates every (task, mode, budget) combination. Rows are ordered by task,
/// then mode, then budget in the order given.
pub fn run_matrix(
    real: &Corpus,
    tasks: &[u8],
    modes: &[MovementMode],
    budgets: &[usize],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<AccuracyReport, ScenarioError> {
    let reps = cfg.clf.n_folds;
    let jobs: Vec<(u8, MovementMode, usize)> = tasks
        .iter()
        .flat_map(|&t| modes.iter().flat_map(move |&m| (0..reps).map(move |r| (t, m, r))))
        .collect();
    let results = par::map(&jobs, |&(t, m, r)| run_repetition(real, t, m, budgets, cfg, seed, r));
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (cell, chunk) in results.chunks(reps).enumerate() {
        let (task, mode, _) = jobs[cell * reps];
        for (b, &budget) in budgets.iter().enumerate() {
            rows.push(ReportRow::new(task, mode, budget, chunk.iter().map(|accs| accs[b]).collect())?);
        }
    }
    Ok(AccuracyReport {
        rows,
        metadata: ReportMetadata { seed, corpus_digest: real.digest(), n_repetitions: reps },
    })
}
