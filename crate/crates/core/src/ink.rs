//! Pen recordings, movement-mode segmentation and acceleration channels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InkError {
    #[error("recording has no {0} samples")]
    EmptySegment(MovementMode),
    #[error("need at least 3 points for acceleration, got {0}")]
    TooShort(usize),
    #[error("invalid recording: {0}")]
    Invalid(String),
}

/// Diagnostic class of a subject.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Ad,
    Healthy,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Ad, Class::Healthy];

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Ad => "ad",
            Class::Healthy => "healthy",
        }
    }

    /// Binary target used by the classifiers: AD is the positive class.
    pub fn target(self) -> f64 {
        match self {
            Class::Ad => 1.0,
            Class::Healthy => 0.0,
        }
    }

    /// Thresholds `P(AD)` at 0.5.
    pub fn from_probability(p_ad: f64) -> Self {
        if p_ad >= 0.5 {
            Class::Ad
        } else {
            Class::Healthy
        }
    }

    pub fn index(self) -> usize {
        match self {
            Class::Ad => 0,
            Class::Healthy => 1,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = InkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ad" => Ok(Class::Ad),
            "healthy" | "h" => Ok(Class::Healthy),
            other => Err(InkError::Invalid(format!("unknown class {other:?}"))),
        }
    }
}

/// Which pen movements feed a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementMode {
    InAir,
    OnPaper,
    Both,
}

impl MovementMode {
    pub const ALL: [MovementMode; 3] = [MovementMode::InAir, MovementMode::OnPaper, MovementMode::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            MovementMode::InAir => "in_air",
            MovementMode::OnPaper => "on_paper",
            MovementMode::Both => "both",
        }
    }
}

impl fmt::Display for MovementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MovementMode {
    type Err = InkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "in_air" | "inair" => Ok(MovementMode::InAir),
            "on_paper" | "onpaper" => Ok(MovementMode::OnPaper),
            "both" => Ok(MovementMode::Both),
            other => Err(InkError::Invalid(format!("unknown movement mode {other:?}"))),
        }
    }
}

/// One tablet sample. `t` is in milliseconds, `x`/`y` in tablet units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub pen_down: bool,
    pub pressure: f64,
}

impl PointSample {
    pub fn validate(&self) -> Result<(), InkError> {
        if ![self.t, self.x, self.y, self.pressure].iter().all(|v| v.is_finite()) {
            return Err(InkError::Invalid("non-finite sample field".into()));
        }
        if self.pressure < 0.0 {
            return Err(InkError::Invalid(format!("negative pressure {}", self.pressure)));
        }
        if !self.pen_down && self.pressure != 0.0 {
            return Err(InkError::Invalid(format!("pressure {} while the pen is up", self.pressure)));
        }
        Ok(())
    }
}

/// One subject's trace for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub task_id: u8,
    pub label: Class,
    pub samples: Vec<PointSample>,
}

impl Recording {
    pub fn new(subject_id: impl Into<String>, task_id: u8, label: Class, samples: Vec<PointSample>) -> Result<Self, InkError> {
        let rec = Self { subject_id: subject_id.into(), task_id, label, samples };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), InkError> {
        if !(1..=25).contains(&self.task_id) {
            return Err(InkError::Invalid(format!("task id {} outside 1..=25", self.task_id)));
        }
        if self.samples.is_empty() {
            return Err(InkError::Invalid("no samples".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.validate()?;
            if i > 0 && s.t < self.samples[i - 1].t {
                return Err(InkError::Invalid(format!("timestamp decreases at sample {}", i + 1)));
            }
        }
        Ok(())
    }
}

/// Where a series came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub subject_id: String,
    pub task_id: u8,
}

/// Two-channel acceleration series.
#[derive(Clone, Debug, PartialEq)]
pub struct AccelSeries {
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub label: Class,
    pub source: Provenance,
}

impl AccelSeries {
    pub fn new(ax: Vec<f64>, ay: Vec<f64>, label: Class, source: Provenance) -> Result<Self, InkError> {
        if ax.len() != ay.len() || ax.is_empty() {
            return Err(InkError::Invalid(format!("channel lengths {} and {}", ax.len(), ay.len())));
        }
        Ok(Self { ax, ay, label, source })
    }

    pub fn len(&self) -> usize {
        self.ax.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ax.is_empty()
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.ax[i], self.ay[i])
    }
}

/// Samples of `rec` belonging to `mode`, in recording order.
pub fn segment_points(rec: &Recording, mode: MovementMode) -> Result<Vec<PointSample>, InkError> {
    let out: Vec<PointSample> = rec
        .samples
        .iter()
        .filter(|s| match mode {
            MovementMode::InAir => !s.pen_down,
            MovementMode::OnPaper => s.pen_down,
            MovementMode::Both => true,
        })
        .copied()
        .collect();
    if out.is_empty() {
        return Err(InkError::EmptySegment(mode));
    }
    Ok(out)
}

/// Second difference of the coordinates, assuming uniform sampling; timestamps
/// are ignored. Output is two samples shorter than the input.
pub fn compute_acceleration(points: &[PointSample], label: Class, source: Provenance) -> Result<AccelSeries, InkError> {
    if points.len() < 3 {
        return Err(InkError::TooShort(points.len()));
    }
    let second = |f: fn(&PointSample) -> f64| -> Vec<f64> {
        points.windows(3).map(|w| f(&w[2]) - 2.0 * f(&w[1]) + f(&w[0])).collect()
    };
    AccelSeries::new(second(|p| p.x), second(|p| p.y), label, source)
}

fn standardize(channel: &[f64]) -> Vec<f64> {
    let n = channel.len() as f64;
    let mean = channel.iter().sum::<f64>() / n;
    let var = channel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // Treat as constant when the spread is at rounding level relative to the values.
    let scale = channel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if std <= 1e-12 * scale.max(f64::MIN_POSITIVE) || std == 0.0 {
        return vec![0.0; channel.len()];
    }
    channel.iter().map(|v| (v - mean) / std).collect()
}

/// Per-channel standardization to zero mean and unit (population) standard
/// deviation; a constant channel becomes all zeros.
pub fn z_normalize(series: &AccelSeries) -> AccelSeries {
    AccelSeries {
        ax: standardize(&series.ax),
        ay: standardize(&series.ay),
        label: series.label,
        source: series.source.clone(),
    }
}

/// Segment, differentiate and normalize one recording.
pub fn recording_series(rec: &Recording, mode: MovementMode) -> Result<AccelSeries, InkError> {
    let points = segment_points(rec, mode)?;
    let source = Provenance { subject_id: rec.subject_id.clone(), task_id: rec.task_id };
    Ok(z_normalize(&compute_acceleration(&points, rec.label, source)?))
}
