//! Screening of synthetic samples by a five-CNN majority vote.
//!
//! Each member is trained on its own shuffle of the real images (35% for
//! training, the next 15% for early stopping). A synthetic series is kept only
//! when at least three members agree with the class of the generator that
//! produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::clf::{fit, ClfConfig, ClfError, Cnn};
use crate::corpus::{load_corpus, write_corpus, Corpus, CorpusError};
use crate::generator::SequenceSource;
use crate::imaging::{series_to_image, GrayImage};
use crate::ink::{AccelSeries, Class, PointSample, Provenance, Recording};
use crate::neural::rng::{component_rng, derive_seed};
use crate::par;

pub const ENSEMBLE_SIZE: usize = 5;
/// Fraction of the real images each member trains on.
pub const MEMBER_TRAIN_FRACTION: f64 = 0.35;
/// Fraction of the real images each member uses for early stopping.
pub const MEMBER_VALIDATION_FRACTION: f64 = 0.15;
/// Attempts allowed per accepted sample before screening gives up.
pub const ATTEMPT_CAP_FACTOR: usize = 100;
pub const SCREENING_LOG: &str = "screening_log.csv";

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("ensemble needs exactly {ENSEMBLE_SIZE} members, got {0}")]
    Size(usize),
    #[error("label error: {0}")]
    Label(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("screening starved: acceptance rate ad {ad_rate:.4} ({ad_accepted}/{ad_attempts}), healthy {healthy_rate:.4} ({healthy_accepted}/{healthy_attempts})")]
    ScreeningStarvation {
        ad_rate: f64,
        ad_accepted: usize,
        ad_attempts: usize,
        healthy_rate: f64,
        healthy_accepted: usize,
        healthy_attempts: usize,
    },
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Anything that can vote in the ensemble.
pub trait Member: Sync {
    /// `P(AD)` for one image.
    fn probability_ad(&self, image: &GrayImage) -> f64;
}

impl Member for Cnn {
    fn probability_ad(&self, image: &GrayImage) -> f64 {
        self.predict_proba(&[image]).expect("images have the fixed input size")[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<M = Cnn> {
    members: Vec<M>,
    member_seeds: Vec<u64>,
}

impl<M: Member> Ensemble<M> {
    pub fn new(members: Vec<M>, member_seeds: Vec<u64>) -> Result<Self, JudgeError> {
        if members.len() != ENSEMBLE_SIZE || member_seeds.len() != ENSEMBLE_SIZE {
            return Err(JudgeError::Size(members.len()));
        }
        Ok(Self { members, member_seeds })
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn member_seeds(&self) -> &[u64] {
        &self.member_seeds
    }
}

impl Ensemble<Cnn> {
    /// Writes `member{i}.ckpt` for every member into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), JudgeError> {
        fs::create_dir_all(dir).map_err(|e| JudgeError::Io { path: dir.to_path_buf(), source: e })?;
        for (i, (m, seed)) in self.members.iter().zip(&self.member_seeds).enumerate() {
            let mut ckpt = m.to_checkpoint();
            ckpt.meta["member_seed"] = serde_json::json!(seed);
            ckpt.save(&dir.join(format!("member{i}.ckpt"))).map_err(ClfError::from)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, JudgeError> {
        let mut members = Vec::new();
        let mut seeds = Vec::new();
        for i in 0..ENSEMBLE_SIZE {
            let ckpt = crate::neural::Checkpoint::load(&dir.join(format!("member{i}.ckpt"))).map_err(ClfError::from)?;
            seeds.push(ckpt.meta.get("member_seed").and_then(|s| s.as_u64()).unwrap_or_default());
            members.push(Cnn::from_checkpoint(&ckpt)?);
        }
        Self::new(members, seeds)
    }
}

/// Outcome of one ensemble vote.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vote {
    pub class: Class,
    pub votes_ad: usize,
    pub votes_healthy: usize,
}

/// Each member votes AD when its probability is at least 0.5; the class with
/// three or more of the five votes wins.
pub fn ensemble_predict<M: Member>(ensemble: &Ensemble<M>, image: &GrayImage) -> Vote {
    let votes_ad = ensemble.members.iter().filter(|m| Class::from_probability(m.probability_ad(image)) == Class::Ad).count();
    let votes_healthy = ensemble.members.len() - votes_ad;
    let class = if votes_ad > votes_healthy { Class::Ad } else { Class::Healthy };
    Vote { class, votes_ad, votes_healthy }
}

/// Votes for every series of `batch` (rendered to images), in batch order.
pub fn screen_batch<M: Member>(ensemble: &Ensemble<M>, batch: &[(AccelSeries, Class)]) -> Vec<Vote> {
    par::map(batch, |(series, _)| ensemble_predict(ensemble, &series_to_image(series)))
}

/// The samples whose ensemble decision equals their generator's class, in batch order.
pub fn filter_synthetic<'a, M: Member>(ensemble: &Ensemble<M>, batch: &'a [(AccelSeries, Class)]) -> Vec<&'a (AccelSeries, Class)> {
    let votes = screen_batch(ensemble, batch);
    batch.iter().zip(votes).filter(|(item, vote)| vote.class == item.1).map(|(item, _)| item).collect()
}

/// Trains the five members on shuffles of `images` (one image per real sample).
/// Each member's training and validation subsets take the same fractions of
/// every class, so both classes are always present.
pub fn train_ensemble(images: &[GrayImage], cfg: &ClfConfig, seed: u64) -> Result<Ensemble<Cnn>, JudgeError> {
    let mut by_class: [Vec<&GrayImage>; 2] = [Vec::new(), Vec::new()];
    for im in images {
        by_class[im.label.index()].push(im);
    }
    for class in Class::ALL {
        let n = by_class[class.index()].len();
        if (MEMBER_TRAIN_FRACTION * n as f64).round() < 1.0 {
            return Err(JudgeError::Label(format!("{n} {class} images leave no member training data")));
        }
    }
    let seeds: Vec<u64> = (0..ENSEMBLE_SIZE).map(|i| derive_seed(seed, &format!("member{i}"))).collect();
    let fits = par::map(&seeds, |&member_seed| {
        let mut rng = component_rng(member_seed, "subset");
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for class_images in &by_class {
            let n = class_images.len();
            let n_train = (MEMBER_TRAIN_FRACTION * n as f64).round() as usize;
            let n_val = ((MEMBER_VALIDATION_FRACTION * n as f64).round() as usize).min(n - n_train);
            let mut order = class_images.clone();
            order.shuffle(&mut rng);
            train.extend_from_slice(&order[..n_train]);
            val.extend_from_slice(&order[n_train..n_train + n_val]);
        }
        train.shuffle(&mut rng);
        fit(&train, &val, cfg, member_seed)
    });
    let members = fits.into_iter().map(|f| f.map(|f| f.model)).collect::<Result<Vec<_>, _>>()?;
    Ensemble::new(members, seeds)
}

/// One screening attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScreeningRecord {
    pub index: usize,
    pub class: Class,
    pub votes_ad: usize,
    pub votes_healthy: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreenedSet {
    /// Accepted series: all AD samples, then all healthy ones, each in acceptance order.
    pub samples: Vec<AccelSeries>,
    pub log: Vec<ScreeningRecord>,
    /// Samples drawn per class, indexed by [`Class::index`].
    pub attempts: [usize; 2],
}

impl ScreenedSet {
    pub fn of_class(&self, class: Class) -> impl Iterator<Item = &AccelSeries> {
        self.samples.iter().filter(move |s| s.label == class)
    }
}

/// Draws from both class generators in alternating batches until each class
/// has `budget` accepted samples. Sample `k` of a class is drawn with the seed
/// derived from `seed`, the class and `k`, so results do not depend on
/// batching or thread count.
pub fn generate_screened<S: SequenceSource, M: Member>(
    sources: &[&S],
    ensemble: &Ensemble<M>,
    budget: usize,
    seed: u64,
) -> Result<ScreenedSet, JudgeError> {
    if budget == 0 {
        return Err(JudgeError::InvalidArgument("budget per class must be at least 1".into()));
    }
    let mut by_class: [Option<&S>; 2] = [None, None];
    for s in sources {
        let slot = &mut by_class[s.label().index()];
        if slot.is_some() {
            return Err(JudgeError::Label(format!("two generators for class {}", s.label())));
        }
        *slot = Some(s);
    }
    let cap = ATTEMPT_CAP_FACTOR * budget;
    let mut accepted: [Vec<AccelSeries>; 2] = [Vec::new(), Vec::new()];
    let mut attempts = [0usize; 2];
    let mut log = Vec::new();

    loop {
        let mut progressed = false;
        for class in Class::ALL {
            let c = class.index();
            let need = budget - accepted[c].len();
            if need == 0 || attempts[c] >= cap {
                continue;
            }
            let source = by_class[c].ok_or_else(|| JudgeError::Label(format!("no generator for class {class}")))?;
            let draw = need.min(cap - attempts[c]);
            let start = attempts[c];
            let batch: Vec<(AccelSeries, Class)> = par::map_range(draw, |k| {
                (source.sample(derive_seed(seed, &format!("{class}/{}", start + k))), class)
            });
            let votes = screen_batch(ensemble, &batch);
            for ((series, _), vote) in batch.into_iter().zip(votes) {
                let ok = vote.class == class;
                log.push(ScreeningRecord {
                    index: log.len(),
                    class,
                    votes_ad: vote.votes_ad,
                    votes_healthy: vote.votes_healthy,
                    accepted: ok,
                });
                if ok {
                    let i = accepted[c].len();
                    let source = Provenance { subject_id: format!("syn_{class}_{i}"), task_id: series.source.task_id };
                    accepted[c].push(AccelSeries { source, ..series });
                }
            }
            attempts[c] += draw;
            progressed = true;
        }
        if accepted.iter().all(|a| a.len() == budget) {
            break;
        }
        if !progressed {
            let rate = |c: usize| accepted[c].len() as f64 / attempts[c].max(1) as f64;
            return Err(JudgeError::ScreeningStarvation {
                ad_rate: rate(0),
                ad_accepted: accepted[0].len(),
                ad_attempts: attempts[0],
                healthy_rate: rate(1),
                healthy_accepted: accepted[1].len(),
                healthy_attempts: attempts[1],
            });
        }
    }
    let [ad, healthy] = accepted;
    Ok(ScreenedSet { samples: ad.into_iter().chain(healthy).collect(), log, attempts })
}

/// Stores a series as a recording: sample `i` has `t = i`, the channels in the
/// `x`/`y` columns and the pen down.
fn series_to_recording(series: &AccelSeries) -> Result<Recording, JudgeError> {
    let samples = (0..series.len())
        .map(|i| PointSample { t: i as f64, x: series.ax[i], y: series.ay[i], pen_down: true, pressure: 1.0 })
        .collect();
    Recording::new(series.source.subject_id.clone(), series.source.task_id, series.label, samples)
        .map_err(|e| JudgeError::InvalidArgument(e.to_string()))
}

/// Writes series in the corpus layout under `dir`; subject ids must be unique.
pub fn write_series(samples: &[AccelSeries], dir: &Path) -> Result<(), JudgeError> {
    let recordings = samples.iter().map(series_to_recording).collect::<Result<Vec<_>, _>>()?;
    Ok(write_corpus(&Corpus::new(recordings)?, dir)?)
}

/// Writes the accepted samples in the corpus layout under `dir` and the
/// screening log next to them.
pub fn write_screened(set: &ScreenedSet, dir: &Path) -> Result<(), JudgeError> {
    write_series(&set.samples, dir)?;
    let mut out = String::from("index,class,votes_ad,votes_healthy,accepted\n");
    for r in &set.log {
        let _ = writeln!(out, "{},{},{},{},{}", r.index, r.class, r.votes_ad, r.votes_healthy, u8::from(r.accepted));
    }
    let path = dir.join(SCREENING_LOG);
    fs::write(&path, out).map_err(|e| JudgeError::Io { path, source: e })
}

/// Reads back the accepted samples written by [`write_screened`], AD first.
pub fn read_screened(dir: &Path) -> Result<Vec<AccelSeries>, JudgeError> {
    let corpus = load_corpus(dir)?;
    let mut out: Vec<AccelSeries> = corpus
        .recordings()
        .iter()
        .map(|r| {
            let ax = r.samples.iter().map(|s| s.x).collect();
            let ay = r.samples.iter().map(|s| s.y).collect();
            let source = Provenance { subject_id: r.subject_id.clone(), task_id: r.task_id };
            AccelSeries::new(ax, ay, r.label, source).map_err(|e| JudgeError::InvalidArgument(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let index_of = |s: &AccelSeries| s.source.subject_id.rsplit('_').next().and_then(|i| i.parse::<usize>().ok());
    out.sort_by_key(|s| (s.label.index(), index_of(s)));
    Ok(out)
}
