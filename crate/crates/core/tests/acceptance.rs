//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any
//! gating criterion fails. Run with `cargo test -p synthwrite --test acceptance`.
//!
//! Criterion 9 runs only when `SYNTHWRITE_DARWIN_ROOT` points at a corpus in the
//! canonical on-disk layout.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use synthwrite::clf::{
    evaluate_scenario, format_pct, run_matrix, AccuracyReport, ClfConfig, Cnn, CnnArch, EvalConfig, ReportMetadata,
    ReportRow, Scenario,
};
use synthwrite::corpus::{load_corpus, make_fixture_corpus};
use synthwrite::generator::mdn::nll_rows;
use synthwrite::generator::{mdn_params, sample_sequence, train_generator, GeneratorConfig, GeneratorModel, SequenceSource};
use synthwrite::imaging::{lanczos_resize, series_to_image, series_to_matrix, GrayImage, IMAGE_SIDE};
use synthwrite::judge::{filter_synthetic, generate_screened, Ensemble, Member};
use synthwrite::neural::rng::{derive_seed, rng_from_seed, ComponentRng};
use synthwrite::neural::{grad_check_many, NeuralError, Tape, Tensor, Var};
use synthwrite::{AccelSeries, Class, MovementMode, Provenance};

// Tolerances and budgets, pinned.
const GRAD_REL_ERR: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-6;
const GRAD_TIME: Duration = Duration::from_secs(120);
const DETERMINISM_TIME: Duration = Duration::from_secs(15 * 60);
const SEPARABLE_MIN_ACC: f64 = 85.0;
const SEPARABLE_TIME: Duration = Duration::from_secs(30 * 60);
const VARIANCE_REL_TOL: f64 = 0.25;
const LAG1_ABS_TOL: f64 = 0.15;
const IMAGE_EXACT_TOL: f64 = 1e-12;
const AFFINE_TOL: f64 = 1e-9;
/// 0.99 quantile of chi-square with 19 degrees of freedom (scipy.stats.chi2.ppf(0.99, 19)).
const CHI2_19_P99: f64 = 36.191;
const DARWIN_ACC_TOL: f64 = 10.0;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: String) -> Self {
        Self { pass: Some(pass), detail }
    }

    fn skip(detail: &str) -> Self {
        Self { pass: None, detail: detail.into() }
    }
}

type Criterion = (u8, &'static str, fn() -> Outcome);

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored.
    // SYNTHWRITE_CRITERIA=3,4 runs a subset.
    let only: Option<Vec<u8>> = std::env::var("SYNTHWRITE_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let criteria: [Criterion; 9] = [
        (1, "gradient suite", gradient_suite),
        (2, "reference table arithmetic", table_arithmetic),
        (3, "end-to-end determinism", determinism),
        (4, "separable fixture accuracy", separable_fixture),
        (5, "generator fidelity", generator_fidelity),
        (6, "screening logic", screening_logic),
        (7, "imaging invariants", imaging_invariants),
        (8, "mixture component sampling", mixture_sampling),
        (9, "real-corpus baseline", real_corpus),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::check(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = match out.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("[{tag}] criterion {id} {name}: {} ({:.1}s)", out.detail, start.elapsed().as_secs_f64());
        if out.pass == Some(false) {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

// 1 -------------------------------------------------------------------------

fn random(shape: &[usize], rng: &mut ComponentRng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero, so ReLU never sits on its kink.
fn off_zero(shape: &[usize], rng: &mut ComponentRng) -> Tensor {
    random(shape, rng).map(|v| if v.abs() < 0.1 { v + 0.2f64.copysign(v) } else { v })
}

type Probe = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, NeuralError>>;

fn weighted_sum(tape: &mut Tape, v: Var, w: &Tensor) -> Result<Var, NeuralError> {
    let m = tape.mul_const(v, w.clone())?;
    Ok(tape.sum(m))
}

fn kernel_probes(rng: &mut ComponentRng) -> Vec<(&'static str, Vec<Tensor>, Probe)> {
    let w23 = random(&[2, 3], rng);
    let w3 = random(&[2, 4], rng);
    let w_conv = random(&[2, 3, 4, 4], rng);
    let w_pool = random(&[1, 2, 2, 3], rng);
    let w_cat = random(&[3, 3], rng);
    let w_sl = random(&[2, 2], rng);
    let w_rs = random(&[3, 2], rng);
    let targets = Tensor::new(vec![4], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
    let mut out: Vec<(&'static str, Vec<Tensor>, Probe)> = Vec::new();
    {
        let w = w3.clone();
        out.push(("matmul", vec![random(&[2, 3], rng), random(&[3, 4], rng)], Box::new(move |t, v| {
            let y = t.matmul(v[0], v[1])?;
            weighted_sum(t, y, &w)
        })));
    }
    for name in ["add", "mul"] {
        let w = w23.clone();
        out.push((name, vec![random(&[2, 3], rng), random(&[2, 3], rng)], Box::new(move |t, v| {
            let y = if name == "add" { t.add(v[0], v[1])? } else { t.mul(v[0], v[1])? };
            weighted_sum(t, y, &w)
        })));
    }
    {
        let w = w23.clone();
        out.push(("scale", vec![random(&[2, 3], rng)], Box::new(move |t, v| {
            let y = t.scale(v[0], -1.7);
            weighted_sum(t, y, &w)
        })));
        let w = w23.clone();
        out.push(("add_row_bias", vec![random(&[2, 3], rng), random(&[3], rng)], Box::new(move |t, v| {
            let y = t.add_row_bias(v[0], v[1])?;
            weighted_sum(t, y, &w)
        })));
    }
    for name in ["sigmoid", "tanh", "relu", "exp"] {
        let w = w23.clone();
        out.push((name, vec![off_zero(&[2, 3], rng)], Box::new(move |t, v| {
            let y = match name {
                "sigmoid" => t.sigmoid(v[0]),
                "tanh" => t.tanh(v[0]),
                "relu" => t.relu(v[0]),
                _ => t.exp(v[0]),
            };
            weighted_sum(t, y, &w)
        })));
    }
    out.push(("slice_cols", vec![random(&[2, 5], rng)], Box::new(move |t, v| {
        let y = t.slice_cols(v[0], 1, 2)?;
        weighted_sum(t, y, &w_sl)
    })));
    out.push(("concat_rows", vec![random(&[1, 3], rng), random(&[2, 3], rng)], Box::new(move |t, v| {
        let y = t.concat_rows(&[v[0], v[1]])?;
        weighted_sum(t, y, &w_cat)
    })));
    out.push(("reshape", vec![random(&[2, 3], rng)], Box::new(move |t, v| {
        let y = t.reshape(v[0], &[3, 2])?;
        weighted_sum(t, y, &w_rs)
    })));
    out.push((
        "conv2d",
        vec![random(&[2, 2, 4, 4], rng), random(&[3, 2, 3, 3], rng), random(&[3], rng)],
        Box::new(move |t, v| {
            let y = t.conv2d(v[0], v[1], v[2], 1)?;
            let y = t.reshape(y, &[2, 3, 4, 4])?;
            weighted_sum(t, y, &w_conv)
        }),
    ));
    // Distinct values keep every pooling window free of ties.
    let mut pool_in = random(&[1, 2, 4, 6], rng);
    pool_in.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v += 0.05 * i as f64);
    out.push(("max_pool2", vec![pool_in], Box::new(move |t, v| {
        let y = t.max_pool2(v[0])?;
        weighted_sum(t, y, &w_pool)
    })));
    out.push(("sum_mean", vec![random(&[3, 2], rng)], Box::new(move |t, v| {
        let s = t.sum(v[0]);
        let sq = t.mul(v[0], v[0])?;
        let m = t.mean(sq);
        t.add(s, m)
    })));
    out.push(("bce_scalar_loss", vec![random(&[4], rng)], Box::new(move |t, v| {
        let (value, grad) = synthwrite::clf::bce_with_logits(t.value(v[0]).data(), targets.data());
        t.scalar_loss(v[0], value, Tensor::new(vec![4], grad)?)
    })));
    out
}

fn mdn_group_errors(rng: &mut ComponentRng) -> Vec<(&'static str, f64)> {
    let m = 3;
    let rows = 2;
    let raw = random(&[rows, 6 * m], rng).map(|v| 0.8 * v);
    let targets: Vec<f64> = (0..2 * rows).map(|_| rng.random_range(-1.5..1.5)).collect();
    let groups = ["pi", "mu_x", "mu_y", "sigma_x", "sigma_y", "rho"];
    groups
        .iter()
        .enumerate()
        .map(|(g, &name)| {
            // Perturb one parameter group; the rest of the head row stays fixed.
            let mut idx = Vec::new();
            for r in 0..rows {
                idx.extend((0..m).map(|k| r * 6 * m + g * m + k));
            }
            let point = Tensor::new(vec![idx.len()], idx.iter().map(|&i| raw.data()[i]).collect()).unwrap();
            let (base, idx, targets) = (raw.clone(), idx.clone(), targets.clone());
            let err = grad_check_many(
                move |t, v| {
                    let mut full = base.data().to_vec();
                    for (j, &i) in idx.iter().enumerate() {
                        full[i] = t.value(v[0]).data()[j];
                    }
                    let (value, grad) = nll_rows(&full, &targets, m).map_err(|e| NeuralError::Numerical(e.to_string()))?;
                    let local = Tensor::new(vec![idx.len()], idx.iter().map(|&i| grad[i]).collect())?;
                    t.scalar_loss(v[0], value, local)
                },
                &[point],
                GRAD_EPS,
            )
            .unwrap();
            (name, err)
        })
        .collect()
}

fn lstm_step_error(rng: &mut ComponentRng) -> f64 {
    let (batch, input, hidden) = (2, 3, 4);
    let points = vec![
        random(&[input, 4 * hidden], rng),
        random(&[hidden, 4 * hidden], rng),
        random(&[4 * hidden], rng),
        random(&[batch, input], rng),
        random(&[batch, hidden], rng),
        random(&[batch, hidden], rng),
    ];
    let wh = random(&[batch, hidden], rng);
    let wc = random(&[batch, hidden], rng);
    grad_check_many(
        |t, v| {
            let (h, c) = GeneratorModel::lstm_cell_on_tape(t, [v[0], v[1], v[2]], v[3], v[4], v[5])
                .map_err(|e| NeuralError::Numerical(e.to_string()))?;
            let a = weighted_sum(t, h, &wh)?;
            let b = weighted_sum(t, c, &wc)?;
            t.add(a, b)
        },
        &points,
        GRAD_EPS,
    )
    .unwrap()
}

fn cnn_layer_errors() -> Vec<(String, f64)> {
    let arch = CnnArch { conv_channels: vec![2, 2, 2, 2, 2], pool_after: vec![1, 3], dense_units: 3 };
    let mut cnn = Cnn::init(arch, 5).unwrap();
    // Positive biases keep the check point off ReLU kinks and pooling ties.
    for (name, t) in cnn.params.names().to_vec().iter().zip(cnn.params.tensors_mut()) {
        if name.ends_with(".b") {
            t.data_mut().iter_mut().enumerate().for_each(|(k, v)| *v = 0.3 + 0.013 * (k % 5) as f64);
        }
    }
    let images: Vec<GrayImage> = (0..2)
        .map(|i| {
            let mut rng = rng_from_seed(40 + i);
            let px = (0..IMAGE_SIDE * IMAGE_SIDE).map(|_| rng.random_range(0.0..1.0)).collect();
            let label = if i == 0 { Class::Ad } else { Class::Healthy };
            GrayImage::new(px, label, Provenance { subject_id: format!("g{i}"), task_id: 13 })
        })
        .collect();
    let refs: Vec<&GrayImage> = images.iter().collect();
    let names = cnn.params.names().to_vec();
    let all = cnn.params.tensors().to_vec();
    (0..names.len())
        .map(|i| {
            let err = grad_check_many(
                |t, v| {
                    let vars: Vec<Var> =
                        all.iter().enumerate().map(|(j, p)| if j == i { v[0] } else { t.constant(p.clone()) }).collect();
                    cnn.loss_on_tape(t, &vars, &refs).map_err(|e| NeuralError::Numerical(e.to_string()))
                },
                std::slice::from_ref(&all[i]),
                GRAD_EPS,
            )
            .unwrap();
            (names[i].clone(), err)
        })
        .collect()
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(derive_seed(1, "acceptance/grad"));
    let mut results: Vec<(String, f64)> = Vec::new();
    for (name, points, f) in kernel_probes(&mut rng) {
        results.push((name.into(), grad_check_many(|t, v| f(t, v), &points, GRAD_EPS).unwrap()));
    }
    results.extend(mdn_group_errors(&mut rng).into_iter().map(|(n, e)| (format!("mdn_nll.{n}"), e)));
    results.push(("lstm_step".into(), lstm_step_error(&mut rng)));
    results.extend(cnn_layer_errors().into_iter().map(|(n, e)| (format!("cnn.{n}"), e)));
    let elapsed = start.elapsed();
    let (worst_name, worst) = results.iter().max_by(|a, b| a.1.total_cmp(&b.1)).cloned().unwrap();
    let failing: Vec<&str> = results.iter().filter(|r| !(r.1 < GRAD_REL_ERR)).map(|r| r.0.as_str()).collect();
    Outcome::check(
        failing.is_empty() && elapsed < GRAD_TIME,
        format!(
            "{} checks, worst {worst_name} = {worst:.2e} (< {GRAD_REL_ERR:e}), failing {failing:?}, {:.1}s (< {}s)",
            results.len(),
            elapsed.as_secs_f64(),
            GRAD_TIME.as_secs()
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn table_arithmetic() -> Outcome {
    let rows = vec![
        ReportRow::new(13, MovementMode::InAir, 0, vec![62.50, 57.14, 50.0, 50.0, 64.28]).unwrap(),
        ReportRow::new(16, MovementMode::InAir, 0, vec![50.0, 71.42, 52.94, 68.42, 42.85]).unwrap(),
    ];
    let report =
        AccuracyReport { rows, metadata: ReportMetadata { seed: 0, corpus_digest: String::new(), n_repetitions: 5 } };
    let csv = report.to_csv().unwrap();
    let means: Vec<String> = report.rows.iter().map(|r| format_pct(r.mean)).collect();
    let row13 = "13,in_air,0,62.50,57.14,50.00,50.00,64.28,56.78";
    let ok = means == ["56.78", "57.12"] && csv.lines().nth(1) == Some(row13);
    Outcome::check(ok, format!("means {} / {} (want 56.78 / 57.12)", means[0], means[1]))
}

// 3 -------------------------------------------------------------------------

/// Desk-scale configuration for the end-to-end runs: generator epochs 10 and
/// classifier max epochs 200 as required, everything else shrunk to fit the
/// time budget. Ensemble members see 8 training and 4 validation images, so
/// patience equals the epoch cap; shorter patience stops members on the
/// initial plateau and the ensemble votes one class for everything.
fn determinism_config() -> EvalConfig {
    EvalConfig {
        generator: GeneratorConfig {
            hidden_size: 16,
            n_layers: 2,
            seq_len: 50,
            epochs: 10,
            n_mixtures: 5,
            ..GeneratorConfig::default()
        },
        clf: ClfConfig {
            arch: CnnArch { conv_channels: vec![8, 8, 16, 16, 32], pool_after: vec![0, 1, 2, 3, 4], dense_units: 64 },
            learning_rate: 1e-3,
            max_epochs: 200,
            patience: 200,
            ..ClfConfig::default()
        },
    }
}

fn determinism() -> Outcome {
    let corpus = make_fixture_corpus(3, 20, 13, 2.0);
    let cfg = determinism_config();
    let budgets = [0, 10];
    let start = Instant::now();
    let run = || run_matrix(&corpus, &[13], &[MovementMode::Both], &budgets, &cfg, 77).unwrap().to_csv().unwrap();
    let a = run();
    let b = run();
    let elapsed = start.elapsed();
    Outcome::check(
        a == b && elapsed < DETERMINISM_TIME,
        format!(
            "{} report bytes, identical: {}, {:.0}s (< {}s)",
            a.len(),
            a == b,
            elapsed.as_secs_f64(),
            DETERMINISM_TIME.as_secs()
        ),
    )
}

// 4 -------------------------------------------------------------------------

/// Classifier settings for the budget-0 fixture run. The reference learning
/// rate does not move a freshly initialised network within the time budget on
/// 28 training images, and with only two pools the dense layer memorises
/// positions instead of texture, so this run pools after every convolution.
fn separable_config() -> EvalConfig {
    EvalConfig {
        clf: ClfConfig {
            arch: CnnArch { conv_channels: vec![8, 8, 16, 16, 32], pool_after: vec![0, 1, 2, 3, 4], dense_units: 64 },
            learning_rate: 1e-3,
            patience: 300,
            max_epochs: 1500,
            ..ClfConfig::default()
        },
        ..EvalConfig::default()
    }
}

fn separable_fixture() -> Outcome {
    let corpus = make_fixture_corpus(1, 40, 13, 2.0);
    let start = Instant::now();
    let row = evaluate_scenario(&corpus, Scenario { task_id: 13, mode: MovementMode::Both, budget: 0 }, &separable_config(), 2024)
        .unwrap();
    let elapsed = start.elapsed();
    let reps: Vec<String> = row.accuracies.iter().map(|a| format_pct(*a)).collect();
    Outcome::check(
        row.mean >= SEPARABLE_MIN_ACC && elapsed < SEPARABLE_TIME,
        format!(
            "mean {} (>= {SEPARABLE_MIN_ACC}) over reps [{}], {:.0}s (< {}s)",
            format_pct(row.mean),
            reps.join(", "),
            elapsed.as_secs_f64(),
            SEPARABLE_TIME.as_secs()
        ),
    )
}

// 5 -------------------------------------------------------------------------

fn ar1_series(n: usize, len: usize, phi: f64, seed: u64) -> Vec<AccelSeries> {
    let mut rng = rng_from_seed(seed);
    let mut channel = || {
        let mut x = 0.0;
        (0..len)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = phi * x + (1.0 - phi * phi).sqrt() * e;
                x
            })
            .collect::<Vec<f64>>()
    };
    (0..n)
        .map(|i| {
            let (ax, ay) = (channel(), channel());
            let source = Provenance { subject_id: format!("ar_{i}"), task_id: 13 };
            AccelSeries::new(ax, ay, Class::Healthy, source).unwrap()
        })
        .collect()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

fn lag1(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let den: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / den
}

/// Per-channel (variance, lag-1 autocorrelation), averaged over series.
fn stats(series: &[AccelSeries]) -> [(f64, f64); 2] {
    let n = series.len() as f64;
    let avg = |f: &dyn Fn(&AccelSeries) -> f64| series.iter().map(f).sum::<f64>() / n;
    [
        (avg(&|s| variance(&s.ax)), avg(&|s| lag1(&s.ax))),
        (avg(&|s| variance(&s.ay)), avg(&|s| lag1(&s.ay))),
    ]
}

fn generator_fidelity() -> Outcome {
    let data = ar1_series(24, 300, 0.6, 5);
    let cfg = GeneratorConfig { hidden_size: 32, epochs: 100, n_mixtures: 5, seed: 8, ..GeneratorConfig::default() };
    let fit = train_generator(&data, &cfg).unwrap();
    let samples: Vec<AccelSeries> = (0..200).map(|k| sample_sequence(&fit.model, derive_seed(9, &format!("s{k}")))).collect();
    let real = stats(&data);
    let synth = stats(&samples);
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, name) in ["ax", "ay"].iter().enumerate() {
        let (rv, rl) = real[c];
        let (sv, sl) = synth[c];
        ok &= (sv - rv).abs() <= VARIANCE_REL_TOL * rv && (sl - rl).abs() <= LAG1_ABS_TOL;
        parts.push(format!("{name} var {sv:.3} vs {rv:.3}, lag1 {sl:.3} vs {rl:.3}"));
    }
    Outcome::check(ok, format!("{} (tol ±{VARIANCE_REL_TOL} rel, ±{LAG1_ABS_TOL})", parts.join("; ")))
}

// 6 -------------------------------------------------------------------------

/// Series length whose interleaved form fills a 10×10 matrix without padding.
const STEP_LEN: usize = 50;

/// Emits a step series (high then low) whose high fraction is drawn from a
/// class-dependent range, so some samples of each class look like the other.
struct StepSource(Class);

impl SequenceSource for StepSource {
    fn label(&self) -> Class {
        self.0
    }

    fn sample(&self, seed: u64) -> AccelSeries {
        let mut rng = rng_from_seed(seed);
        let frac: f64 = match self.0 {
            Class::Ad => rng.random_range(0.3..1.0),
            Class::Healthy => rng.random_range(0.0..0.7),
        };
        let cut = (frac * STEP_LEN as f64).round() as usize;
        let ax: Vec<f64> = (0..STEP_LEN).map(|t| if t < cut { 1.0 } else { -1.0 }).collect();
        let source = Provenance { subject_id: format!("step_{seed}"), task_id: 13 };
        AccelSeries::new(ax.clone(), ax, self.0, source).unwrap()
    }
}

/// Votes AD when the bright share of the image exceeds its threshold.
struct Threshold(f64);

impl Member for Threshold {
    fn probability_ad(&self, image: &GrayImage) -> f64 {
        let px = image.pixels();
        let bright = px.iter().filter(|&&p| p > 0.5).count() as f64 / px.len() as f64;
        if bright > self.0 {
            0.9
        } else {
            0.1
        }
    }
}

fn oracle() -> Ensemble<Threshold> {
    Ensemble::new([0.3, 0.4, 0.5, 0.6, 0.7].map(Threshold).into(), vec![0; 5]).unwrap()
}

fn screening_logic() -> Outcome {
    let ens = oracle();
    let (ad, healthy) = (StepSource(Class::Ad), StepSource(Class::Healthy));
    let mut ok = true;
    let mut parts = Vec::new();
    for budget in [500, 1000] {
        let set = generate_screened(&[&ad, &healthy], &ens, budget, 31).unwrap();
        let n_ad = set.of_class(Class::Ad).count();
        let n_h = set.of_class(Class::Healthy).count();
        let votes_agree = set.log.iter().filter(|r| r.accepted).count() == 2 * budget;
        ok &= n_ad == budget && n_h == budget && votes_agree && set.attempts.iter().all(|&a| a > budget);
        parts.push(format!("b{budget}: {n_ad}+{n_h} from {}+{} draws", set.attempts[0], set.attempts[1]));
    }
    // Every subset of a 10-sample pool keeps exactly the members it keeps alone.
    let pool: Vec<(AccelSeries, Class)> = (0..10u64)
        .map(|k| {
            let src = if k % 2 == 0 { &ad } else { &healthy };
            (src.sample(derive_seed(5, &format!("pool{k}"))), src.0)
        })
        .collect();
    let alone: Vec<bool> = pool.iter().map(|s| filter_synthetic(&ens, std::slice::from_ref(s)).len() == 1).collect();
    let mut independent = true;
    for mask in 0u32..1 << pool.len() {
        let idx: Vec<usize> = (0..pool.len()).filter(|i| mask & (1 << i) != 0).collect();
        let batch: Vec<(AccelSeries, Class)> = idx.iter().map(|&i| pool[i].clone()).collect();
        let kept: Vec<String> = filter_synthetic(&ens, &batch).iter().map(|s| s.0.source.subject_id.clone()).collect();
        let expected: Vec<String> =
            idx.iter().filter(|&&i| alone[i]).map(|&i| pool[i].0.source.subject_id.clone()).collect();
        independent &= kept == expected;
    }
    ok &= independent && alone.iter().any(|&a| a) && alone.iter().any(|&a| !a);
    parts.push(format!("1024 subsets batch-independent: {independent}"));
    Outcome::check(ok, parts.join("; "))
}

// 7 -------------------------------------------------------------------------

fn imaging_invariants() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(1, "acceptance/imaging"));
    let (mut constant, mut identity, mut round_trip, mut affine) = (0.0f64, 0.0f64, true, 0.0f64);
    for i in 0..1000 {
        let len = match i % 10 {
            0 => 1,
            _ => rng.random_range(2..400),
        };
        let (ax, ay): (Vec<f64>, Vec<f64>) = if i % 10 == 1 {
            (vec![3.5; len], vec![-2.0; len])
        } else {
            (0..len).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).unzip()
        };
        let s = AccelSeries::new(ax, ay, Class::Ad, Provenance { subject_id: format!("r{i}"), task_id: 13 }).unwrap();

        let m = series_to_matrix(&s);
        let flat = &m.data()[..2 * len];
        round_trip &= (0..len).all(|t| flat[2 * t] == s.ax[t] && flat[2 * t + 1] == s.ay[t]);
        round_trip &= m.data()[2 * len..].iter().all(|&v| v == 0.0);

        let (a1, b1, a2, b2) =
            (rng.random_range(0.01..50.0), rng.random_range(-100.0..100.0), rng.random_range(0.01..50.0), rng.random_range(-100.0..100.0));
        let t = AccelSeries {
            ax: s.ax.iter().map(|v| a1 * v + b1).collect(),
            ay: s.ay.iter().map(|v| a2 * v + b2).collect(),
            ..s.clone()
        };
        let (p, q) = (series_to_image(&s), series_to_image(&t));
        affine = p.pixels().iter().zip(q.pixels()).map(|(x, y)| (x - y).abs()).fold(affine, f64::max);

        let side = m.shape()[0];
        let c = rng.random_range(-10.0..10.0);
        let out = lanczos_resize(&Tensor::filled(&[side, side], c), IMAGE_SIDE);
        constant = out.data().iter().map(|v| (v - c).abs()).fold(constant, f64::max);

        let square = random(&[IMAGE_SIDE, IMAGE_SIDE], &mut rng);
        let same = lanczos_resize(&square, IMAGE_SIDE);
        identity = same.data().iter().zip(square.data()).map(|(x, y)| (x - y).abs()).fold(identity, f64::max);
    }
    let ok = constant <= IMAGE_EXACT_TOL && identity <= IMAGE_EXACT_TOL && round_trip && affine <= AFFINE_TOL;
    Outcome::check(
        ok,
        format!(
            "1000 series: constant {constant:.1e}, identity {identity:.1e} (<= {IMAGE_EXACT_TOL:e}), round trip {round_trip}, affine {affine:.1e} (<= {AFFINE_TOL:e})"
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn mixture_sampling() -> Outcome {
    let mut raw = vec![0.0; 6 * 20];
    for (k, v) in raw.iter_mut().take(20).enumerate() {
        *v = ((k * 37) % 11) as f64 * 0.3 - 1.5;
    }
    let mix = mdn_params(&raw, 20).unwrap();
    let draws = 100_000;
    let mut counts = [0usize; 20];
    let mut rng = rng_from_seed(derive_seed(1, "acceptance/mixture"));
    for _ in 0..draws {
        counts[mix.sample_component(&mut rng)] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&mix.weights)
        .map(|(&c, &p)| (c as f64 - p * draws as f64).powi(2) / (p * draws as f64))
        .sum();
    Outcome::check(chi2 < CHI2_19_P99, format!("chi-square {chi2:.2} over {draws} draws (< {CHI2_19_P99}, df 19, alpha 0.01)"))
}

// 9 -------------------------------------------------------------------------

fn real_corpus() -> Outcome {
    let Some(root) = std::env::var_os("SYNTHWRITE_DARWIN_ROOT") else {
        return Outcome::skip("SYNTHWRITE_DARWIN_ROOT not set");
    };
    let corpus = load_corpus(Path::new(&root)).unwrap();
    let report = run_matrix(&corpus, &[13, 16], &[MovementMode::InAir], &[0], &EvalConfig::default(), 0).unwrap();
    let targets = [56.78, 57.12];
    let ok = report.rows.iter().zip(targets).all(|(r, t)| (r.mean - t).abs() <= DARWIN_ACC_TOL);
    let means: Vec<String> = report.rows.iter().map(|r| format_pct(r.mean)).collect();
    Outcome::check(ok, format!("means {} (targets 56.78 / 57.12 ± {DARWIN_ACC_TOL})", means.join(" / ")))
}
