use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Corpus, CorpusError};
use crate::ink::{Class, PointSample, Recording};
use crate::par;

pub const HEADER: &str = "t,x,y,pen_down,pressure";
pub const MANIFEST_FILE: &str = "manifest.csv";

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, message: message.into() }
}

/// Parses one recording file. Line numbers in errors are 1-based and count the header.
pub fn parse_recording(text: &str, subject_id: &str, task_id: u8, label: Class) -> Result<Recording, CorpusError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Err(parse_err(1, "no samples")),
        Some((_, header)) if header.trim_end_matches('\r').trim() != HEADER => {
            return Err(parse_err(1, format!("expected header `{HEADER}`")));
        }
        Some(_) => {}
    }
    let mut samples = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(parse_err(line_no, format!("missing column: expected 5 fields, found {}", fields.len())));
        }
        if fields.len() > 5 {
            return Err(parse_err(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |idx: usize, name: &str| -> Result<f64, CorpusError> {
            fields[idx]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line_no, format!("non-numeric {name} `{}`", fields[idx])))
        };
        let pen_down = match fields[3] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line_no, format!("pen_down must be 0 or 1, found `{other}`"))),
        };
        let sample = PointSample { t: num(0, "t")?, x: num(1, "x")?, y: num(2, "y")?, pen_down, pressure: num(4, "pressure")? };
        sample.validate().map_err(|e| parse_err(line_no, e.to_string()))?;
        if let Some(prev) = samples.last() {
            let prev: &PointSample = prev;
            if sample.t < prev.t {
                return Err(parse_err(line_no, format!("timestamp {} decreases after {}", sample.t, prev.t)));
            }
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(parse_err(1, "no samples"));
    }
    Ok(Recording::new(subject_id, task_id, label, samples)?)
}

/// Inverse of [`parse_recording`]; values use the shortest round-tripping form.
pub fn serialize_recording(rec: &Recording) -> String {
    let mut out = String::with_capacity(32 * (rec.samples.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for s in &rec.samples {
        let _ = writeln!(out, "{},{},{},{},{}", s.t, s.x, s.y, u8::from(s.pen_down), s.pressure);
    }
    out
}

/// Relative location of a recording: `<label>/<subject_id>/task_<NN>.csv`.
pub fn recording_path(rec: &Recording) -> PathBuf {
    Path::new(rec.label.as_str()).join(&rec.subject_id).join(format!("task_{:02}.csv", rec.task_id))
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.to_path_buf(), source }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        out.push(entry.map_err(|e| io_err(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn task_from_name(name: &str) -> Option<u8> {
    let digits = name.strip_prefix("task_")?.strip_suffix(".csv")?;
    if digits.len() != 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Loads `<root>/<label>/<subject_id>/task_<NN>.csv` files. Top-level entries other
/// than the `ad` and `healthy` directories are ignored. Every unparseable file is
/// reported in a single [`CorpusError::ParseReport`].
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let mut jobs: Vec<(PathBuf, String, u8, Class)> = Vec::new();
    let mut failures = Vec::new();
    for class in Class::ALL {
        let class_dir = root.join(class.as_str());
        if !class_dir.is_dir() {
            continue;
        }
        for subject_dir in sorted_entries(&class_dir)? {
            if !subject_dir.is_dir() {
                failures.push((subject_dir, "expected a subject directory".to_string()));
                continue;
            }
            let subject = subject_dir.file_name().unwrap().to_string_lossy().into_owned();
            for file in sorted_entries(&subject_dir)? {
                let name = file.file_name().unwrap().to_string_lossy().into_owned();
                match task_from_name(&name) {
                    Some(task) => jobs.push((file, subject.clone(), task, class)),
                    None => failures.push((file, "file name is not task_<NN>.csv".to_string())),
                }
            }
        }
    }
    if jobs.is_empty() && failures.is_empty() && !root.is_dir() {
        return Err(io_err(root, std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root not found")));
    }
    let parsed = par::map(&jobs, |(path, subject, task, class)| {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        parse_recording(&text, subject, *task, *class).map_err(|e| e.to_string())
    });
    let mut recordings = Vec::with_capacity(parsed.len());
    for ((path, ..), result) in jobs.iter().zip(parsed) {
        match result {
            Ok(rec) => recordings.push(rec),
            Err(msg) => failures.push((path.clone(), msg)),
        }
    }
    if !failures.is_empty() {
        failures.sort();
        return Err(CorpusError::ParseReport(failures));
    }
    recordings.sort_by(|a, b| (&a.subject_id, a.task_id).cmp(&(&b.subject_id, b.task_id)));
    Corpus::new(recordings)
}

/// Writes `manifest.csv` (`subject_id,label,task_id,path`) for `corpus`.
pub fn write_manifest(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let mut out = String::from("subject_id,label,task_id,path\n");
    for rec in corpus.recordings() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            rec.subject_id,
            rec.label,
            rec.task_id,
            recording_path(rec).to_string_lossy().replace('\\', "/")
        );
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes every recording under `root` in the canonical layout plus the manifest.
pub fn write_corpus(corpus: &Corpus, root: &Path) -> Result<(), CorpusError> {
    for rec in corpus.recordings() {
        let path = root.join(recording_path(rec));
        let dir = path.parent().expect("recording path has a parent");
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        fs::write(&path, serialize_recording(rec)).map_err(|e| io_err(&path, e))?;
    }
    write_manifest(corpus, &root.join(MANIFEST_FILE))
}
