use rand::seq::SliceRandom;

use super::{Corpus, CorpusError};
use crate::ink::Class;
use crate::neural::rng::component_rng;

/// Subject-level splitting parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, n_folds: usize, seed: u64) -> Result<Self, CorpusError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CorpusError::InvalidArgument(format!("test fraction {test_fraction} not in (0, 1)")));
        }
        if n_folds < 2 {
            return Err(CorpusError::InvalidArgument(format!("{n_folds} folds; need at least 2")));
        }
        Ok(Self { test_fraction, n_folds, seed })
    }
}

/// Per-class subject lists, each shuffled with its own stream.
fn shuffled_by_class<'a>(corpus: &'a Corpus, seed: u64, purpose: &str) -> Result<[Vec<&'a str>; 2], CorpusError> {
    let mut out: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for class in Class::ALL {
        let mut ids = corpus.subjects_of(class);
        if ids.is_empty() {
            return Err(CorpusError::DegenerateSplit(format!("no {class} subjects")));
        }
        ids.shuffle(&mut component_rng(seed, &format!("{purpose}/{class}")));
        out[class.index()] = ids;
    }
    Ok(out)
}

/// Stratified subject-disjoint split. The test side gets `floor(test_fraction * n)`
/// subjects, apportioned to the classes by largest remainder so each class is
/// within one subject of its proportional share.
pub fn subject_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    if corpus.n_subjects() < 2 {
        return Err(CorpusError::DegenerateSplit(format!("{} subject(s)", corpus.n_subjects())));
    }
    let by_class = shuffled_by_class(corpus, seed, "split")?;
    let total = (test_fraction * corpus.n_subjects() as f64 + 1e-9).floor() as usize;
    let ideal: Vec<f64> = by_class.iter().map(|ids| test_fraction * ids.len() as f64).collect();
    let mut take: Vec<usize> = ideal.iter().map(|v| (v + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..2).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (ideal[a] - take[a] as f64, ideal[b] - take[b] as f64);
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut missing = total.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(4) {
        if missing == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            missing -= 1;
        }
    }
    let mut test = Vec::new();
    let mut train = Vec::new();
    for (ids, &k) in by_class.iter().zip(&take) {
        test.extend_from_slice(&ids[..k]);
        train.extend_from_slice(&ids[k..]);
    }
    Ok((corpus.with_subjects(&train), corpus.with_subjects(&test)))
}

/// Stratified k-fold partition of subjects into `(train, validation)` pairs.
/// Subjects are dealt round-robin, class by class, so fold sizes differ by at most one.
pub fn k_folds(corpus: &Corpus, n_folds: usize, seed: u64) -> Result<Vec<(Corpus, Corpus)>, CorpusError> {
    if n_folds < 2 {
        return Err(CorpusError::InvalidArgument(format!("{n_folds} folds; need at least 2")));
    }
    if corpus.n_subjects() < n_folds {
        return Err(CorpusError::InsufficientSubjects { subjects: corpus.n_subjects(), folds: n_folds });
    }
    let by_class = shuffled_by_class(corpus, seed, "folds")?;
    let mut folds: Vec<Vec<&str>> = vec![Vec::new(); n_folds];
    for (i, id) in by_class.iter().flatten().enumerate() {
        folds[i % n_folds].push(id);
    }
    Ok((0..n_folds)
        .map(|k| {
            let train: Vec<&str> = folds.iter().enumerate().filter(|(j, _)| *j != k).flat_map(|(_, f)| f.iter().copied()).collect();
            (corpus.with_subjects(&train), corpus.with_subjects(&folds[k]))
        })
        .collect())
}
