//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use puffscan::dataset::{balance, partition_sizes, MiniGesture, Window, WindowOrigin};
use puffscan::eval::{confusion, match_puffs, report, round_half_up, MetricsReport};
use puffscan::grammar::{parse, read_events_path, BoundMode, EventKind, GrammarConfig, PuffEvent, Token};
use puffscan::models::{Architecture, Classifier, LstmLayout, Model};
use puffscan::numerics::{loss, Activation, AdamConfig, AdamState, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn balancing() -> Outcome {
    use MiniGesture::*;
    // listed as classes 2, 3, 4, 1
    let order = [HandToLip, HandOnLip, HandOffLip, NonSmoking];
    let counts = [172usize, 5054, 172, 5854];
    let mut windows = Vec::new();
    for (class, &n) in order.iter().zip(&counts) {
        for k in 0..n {
            windows.push(Window {
                features: Vec::new(),
                label: *class,
                origin: WindowOrigin { stream: class.index(), start: k },
                replica: 0,
            });
        }
    }
    let out = balance(&windows, 30, &[HandToLip, HandOffLip]);
    let got = order.map(|c| out.iter().filter(|w| w.label == c).count());
    check(got == [5160, 5054, 5160, 5854], format!("counts {got:?}"))?;
    check(out.len() == 21_228, format!("total {}", out.len()))?;
    Ok(format!("{got:?}, total {}", out.len()))
}

const ANN_MATRIX: [[u64; 4]; 4] = [[1125, 5, 9, 3], [14, 1021, 11, 0], [59, 7, 930, 9], [25, 10, 0, 1018]];
const LSTM_MATRIX: [[u64; 4]; 4] = [[1090, 7, 33, 12], [17, 1017, 12, 0], [43, 23, 929, 10], [10, 25, 24, 994]];
const ANN_REPORT: [(f64, f64, f64, u64); 7] = [
    (0.92, 0.99, 0.95, 1142),
    (0.98, 0.98, 0.98, 1046),
    (0.98, 0.93, 0.95, 1005),
    (0.99, 0.97, 0.98, 1053),
    (0.96, 0.96, 0.96, 4246),
    (0.97, 0.96, 0.96, 4246),
    (0.97, 0.96, 0.96, 4246),
];
const LSTM_REPORT: [(f64, f64, f64, u64); 7] = [
    (0.94, 0.95, 0.95, 1142),
    (0.95, 0.97, 0.96, 1046),
    (0.93, 0.92, 0.93, 1005),
    (0.98, 0.94, 0.96, 1053),
    (0.95, 0.95, 0.95, 4246),
    (0.95, 0.95, 0.95, 4246),
    (0.95, 0.95, 0.95, 4246),
];

fn report_of(counts: &[[u64; 4]; 4]) -> MetricsReport {
    let (mut predicted, mut actual) = (Vec::new(), Vec::new());
    for (a, row) in counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            actual.extend(std::iter::repeat_n(MiniGesture::ALL[a], n as usize));
            predicted.extend(std::iter::repeat_n(MiniGesture::ALL[p], n as usize));
        }
    }
    report(&confusion(&predicted, &actual).unwrap()).unwrap()
}

fn compare_table(name: &str, r: &MetricsReport, table: &[(f64, f64, f64, u64); 7]) -> Result<(), String> {
    for ((label, m), &want) in r.rows().iter().zip(table) {
        let got = (round_half_up(m.precision, 2), round_half_up(m.recall, 2), round_half_up(m.f1, 2), m.support);
        check(got == want, format!("{name} {label}: got {got:?}, expected {want:?}"))?;
    }
    Ok(())
}

fn tables() -> Outcome {
    let ann = report_of(&ANN_MATRIX);
    let lstm = report_of(&LSTM_MATRIX);
    compare_table("ANN", &ann, &ANN_REPORT)?;
    compare_table("LSTM", &lstm, &LSTM_REPORT)?;
    Ok(format!(
        "14 rows match; micro {:.2} and {:.2}",
        round_half_up(ann.accuracy, 2),
        round_half_up(lstm.accuracy, 2)
    ))
}

fn random_batch(seed: u64, rows: usize) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let x: Vec<f64> = (0..rows * 60).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; rows * 4];
    for r in 0..rows {
        y[r * 4 + rng.random_range(0..4)] = 1.0;
    }
    (Matrix::from_vec(rows, 60, x).unwrap(), Matrix::from_vec(rows, 4, y).unwrap())
}

/// Signs of every relu pre-activation; empty for the LSTM.
fn relu_pattern(model: &Model, x: &Matrix) -> Vec<bool> {
    let Model::Mlp(mlp) = model else {
        return Vec::new();
    };
    let mut pattern = Vec::new();
    let mut a = x.clone();
    for layer in &mlp.layers {
        let mut z = a.matmul(&layer.weights).unwrap();
        z.add_row_vector(&layer.bias).unwrap();
        if layer.activation == Activation::Relu {
            pattern.extend(z.as_slice().iter().map(|&v| v > 0.0));
        }
        a = z.map(|v| layer.activation.apply(v));
    }
    pattern
}

/// Worst relative error and the number of coordinates whose 1e-5 probe
/// straddled a relu kink and had to be re-taken with a smaller step.
fn worst_gradient_error(model: &Model, x: &Matrix, y: &Matrix) -> (f64, usize) {
    let objective = |m: &Model| loss(m.loss_kind(), &m.forward(x).unwrap(), y).unwrap();
    let (_, grads) = model.backward(x, y).unwrap();
    let base = relu_pattern(model, x);
    let mut probe = model.clone();
    let (mut worst, mut kinks) = (0.0f64, 0);
    for (b, grad) in grads.iter().enumerate() {
        for (k, &analytic) in grad.iter().enumerate() {
            let orig = probe.param_blocks()[b][k];
            let mut h = 1e-5;
            let numeric = loop {
                probe.param_blocks_mut()[b][k] = orig + h;
                let (up, up_pat) = (objective(&probe), relu_pattern(&probe, x));
                probe.param_blocks_mut()[b][k] = orig - h;
                let (down, down_pat) = (objective(&probe), relu_pattern(&probe, x));
                probe.param_blocks_mut()[b][k] = orig;
                if (up_pat == base && down_pat == base) || h < 1e-9 {
                    break (up - down) / (2.0 * h);
                }
                h /= 10.0;
            };
            if h < 1e-5 {
                kinks += 1;
            }
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
        }
    }
    (worst, kinks)
}

fn gradients() -> Outcome {
    let archs = [
        Architecture::Mlp { hidden: vec![12, 8] },
        Architecture::Lstm { units: 3, layout: LstmLayout::Stacked },
    ];
    let mut worst = 0.0f64;
    let (mut checks, mut kinks) = (0, 0);
    for seed in 0..20u64 {
        for rows in [1, 8] {
            for arch in &archs {
                let model = Model::init(arch, arch.family().default_loss(), seed).unwrap();
                let (x, y) = random_batch(seed, rows);
                let (e, k) = worst_gradient_error(&model, &x, &y);
                kinks += k;
                check(e < 1e-4, format!("{arch:?} seed {seed} batch {rows}: relative error {e:e}"))?;
                worst = worst.max(e);
                checks += 1;
            }
        }
    }
    Ok(format!(
        "{checks} models, worst relative error {worst:.1e}; {kinks} coordinates re-probed below a relu kink"
    ))
}

fn adam() -> Outcome {
    // gradients 0.5 then -0.25 from p = 1 with the default hyperparameters
    let step1 = 1.0 - 0.001 * 0.5 / (0.25f64.sqrt() + 1e-8);
    let m2 = 0.9 * 0.05 + 0.1 * -0.25;
    let v2 = 0.999 * 0.00025 + 0.001 * 0.0625;
    let step2 = step1 - 0.001 * (m2 / 0.19) / ((v2 / 0.001999f64).sqrt() + 1e-8);

    let mut state = AdamState::new(AdamConfig::default(), &[1]);
    let mut p = [1.0];
    state.step(&mut [&mut p[..]], &[vec![0.5]]).unwrap();
    let got1 = p[0];
    state.step(&mut [&mut p[..]], &[vec![-0.25]]).unwrap();
    let got2 = p[0];
    let (e1, e2) = ((got1 - step1).abs(), (got2 - step2).abs());
    check(e1 < 1e-12 && e2 < 1e-12, format!("step errors {e1:e}, {e2:e}"))?;
    Ok(format!("p1 = {got1:.12}, p2 = {got2:.12}"))
}

fn letter(c: MiniGesture) -> char {
    match c {
        MiniGesture::NonSmoking => 'a',
        MiniGesture::HandToLip => 'b',
        MiniGesture::HandOnLip => 'c',
        MiniGesture::HandOffLip => 'd',
    }
}

/// Enumerates every span matching the puff language and keeps the
/// leftmost-longest non-overlapping ones.
fn brute_force(tokens: &[Token], cfg: &GrammarConfig) -> Vec<PuffEvent> {
    let t = cfg.noise_tolerance;
    let re = Regex::new(&format!("^b+c(?:[ab]{{0,{t}}}c)*[ab]{{0,{t}}}d$")).unwrap();
    let text: String = tokens.iter().map(|k| letter(k.class)).collect();
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    for s in (0..bytes.len()).filter(|&s| bytes[s] == b'b') {
        for e in (s + 1..bytes.len()).filter(|&e| bytes[e] == b'd') {
            if !re.is_match(&text[s..=e]) {
                continue;
            }
            let first = s + text[s..=e].find('c').unwrap();
            let last = s + text[s..=e].rfind('c').unwrap();
            let d = (tokens[last].start_sample - tokens[first].start_sample + cfg.stride) as f64 / cfg.sample_rate_hz;
            let ok = match cfg.bounds {
                BoundMode::Inclusive => cfg.min_hol_s <= d && d <= cfg.max_hol_s,
                BoundMode::Exclusive => cfg.min_hol_s < d && d < cfg.max_hol_s,
            };
            if ok {
                spans.push((s, e, d));
            }
        }
    }
    spans.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut free = 0;
    let mut out = Vec::new();
    for (s, e, d) in spans {
        if s >= free {
            out.push(PuffEvent {
                start_sample: tokens[s].start_sample,
                end_sample: tokens[e].start_sample,
                hol_duration_s: d,
                token_span: (s, e),
            });
            free = e + 1;
        }
    }
    out
}

fn random_tokens(rng: &mut ChaCha8Rng, stride: usize) -> Vec<Token> {
    let len = rng.random_range(0..=200);
    let mut classes = Vec::with_capacity(len);
    while classes.len() < len {
        let (class, run) = match rng.random_range(0..10) {
            0 => (MiniGesture::NonSmoking, rng.random_range(1..=4)),
            1..=3 => (MiniGesture::HandToLip, rng.random_range(1..=3)),
            4..=7 => (MiniGesture::HandOnLip, rng.random_range(1..=30)),
            _ => (MiniGesture::HandOffLip, rng.random_range(1..=2)),
        };
        classes.extend(std::iter::repeat_n(class, run));
    }
    classes.truncate(len);
    classes
        .into_iter()
        .enumerate()
        .map(|(i, c)| Token::new(c, i * stride, 1.0))
        .collect()
}

fn grammar_oracle() -> Outcome {
    let mut events = 0;
    for tolerance in [0, 2] {
        for bounds in [BoundMode::Inclusive, BoundMode::Exclusive] {
            for seed in 0..1000u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919));
                let (stride, rate) = [(1, 25.0), (1, 50.0), (2, 25.0), (5, 50.0)][(seed % 4) as usize];
                let cfg = GrammarConfig {
                    noise_tolerance: tolerance,
                    bounds,
                    stride,
                    sample_rate_hz: rate,
                    ..GrammarConfig::default()
                };
                let tokens = random_tokens(&mut rng, stride);
                let got = parse(&tokens, &cfg).map_err(|e| e.to_string())?;
                let want = brute_force(&tokens, &cfg);
                check(got == want, format!("seed {seed} tolerance {tolerance} {bounds:?}: {got:?} vs {want:?}"))?;
                events += got.len();
            }
        }
    }
    Ok(format!("4000 streams agree, {events} puffs"))
}

fn single_puff(hol_tokens: usize) -> Vec<Token> {
    let mut classes = vec![MiniGesture::NonSmoking, MiniGesture::HandToLip];
    classes.extend(std::iter::repeat_n(MiniGesture::HandOnLip, hol_tokens));
    classes.extend([MiniGesture::HandOffLip, MiniGesture::NonSmoking]);
    classes
        .into_iter()
        .enumerate()
        .map(|(i, c)| Token::new(c, i, 1.0))
        .collect()
}

fn duration_rule() -> Outcome {
    // 50 Hz so every bound is a whole number of samples
    let cfg = GrammarConfig {
        sample_rate_hz: 50.0,
        ..GrammarConfig::default()
    };
    let mut seen = Vec::new();
    for (seconds, accept) in [(0.2, false), (3.5, false), (0.5, true), (3.0, true)] {
        let n = (seconds * 50.0f64).round() as usize;
        let puffs = parse(&single_puff(n), &cfg).map_err(|e| e.to_string())?;
        check(puffs.len() == usize::from(accept), format!("{seconds} s hold gave {} puffs", puffs.len()))?;
        seen.push(format!("{seconds} s {}", if accept { "accepted" } else { "rejected" }));
    }
    Ok(seen.join(", "))
}

fn split_rule() -> Outcome {
    let sizes = partition_sizes(21_228, (0.70, 0.15, 0.15)).map_err(|e| e.to_string())?;
    check(sizes == (14_859, 3_184, 3_185), format!("{sizes:?}"))?;
    Ok(format!("{sizes:?}"))
}

fn puffscan(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_puffscan"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "puffscan {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn accuracy_line(stdout: &str) -> Result<f64, String> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("accuracy "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| format!("no accuracy in eval output:\n{stdout}"))
}

fn puffs_in(path: &Path) -> Result<Vec<PuffEvent>, String> {
    Ok(read_events_path(path)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|r| r.kind == EventKind::Puff)
        .map(|r| {
            let d = r.hol_duration_s.unwrap_or(0.0);
            PuffEvent {
                start_sample: r.start_sample,
                end_sample: r.end_sample,
                hol_duration_s: d,
                token_span: (0, 0),
            }
        })
        .collect())
}

fn end_to_end(dir: &Path) -> Outcome {
    let f = |name: &str| dir.join(name).display().to_string();
    let data = f("synth.csv");
    let stream = ["--seed", "1", "--puffs", "40", "--distractors", "10", "--rest-min", "1.5", "--rest-max", "3"];
    puffscan(&[&["generate", "--out", &data][..], &stream].concat())?;
    let samples = fs::read_to_string(&data).map_err(|e| e.to_string())?.lines().count() - 1;
    let windows = samples + 1 - 20;
    check(windows >= 2000, format!("only {windows} windows"))?;

    let common = ["--data", &data, "--epochs", "200", "--batch", "100", "--seed", "1", "--leak-mode", "no_leak",
        "--balance-factor", "2"];
    let mlp = f("mlp.txt");
    let lstm = f("lstm.txt");
    puffscan(&[&["train", "--model", &mlp, "--family", "mlp", "--layers", "12,8"][..], &common].concat())?;
    puffscan(&[&["train", "--model", &lstm, "--family", "lstm", "--units", "3"][..], &common].concat())?;
    let mlp_acc = accuracy_line(&puffscan(&["eval", "--model", &mlp, "--data", &data])?)?;
    let lstm_acc = accuracy_line(&puffscan(&["eval", "--model", &lstm, "--data", &data])?)?;

    let clean = f("clean.csv");
    puffscan(&[
        "generate", "--out", &clean, "--seed", "2", "--puffs", "40", "--distractors", "10", "--rest-min", "1.5",
        "--rest-max", "3", "--noise", "0", "--hol-min", "1", "--hol-max", "2.5",
    ])?;
    let events = f("clean.events.csv");
    puffscan(&["detect", "--model", &mlp, "--data", &clean, "--events", &events])?;
    let truth = puffs_in(Path::new(&format!("{clean}.truth.csv")))?;
    let found = puffs_in(Path::new(&events))?;
    // detections are placed at window starts, up to one window ahead of the truth
    let m = match_puffs(&found, &truth, 20);

    let summary = format!(
        "{windows} windows; MLP test acc {mlp_acc:.4}; LSTM test acc {lstm_acc:.4}; detect recall {}/{} precision {}/{}",
        m.matched, m.truth, m.matched, m.detected
    );
    check(mlp_acc >= 0.95, format!("MLP below 0.95: {summary}"))?;
    check(lstm_acc >= 0.90, format!("LSTM below 0.90: {summary}"))?;
    check(m.truth > 0 && m.matched == m.truth, format!("missed puffs: {summary}"))?;
    Ok(summary)
}

fn replay_identical(manifest: &str, artifacts: &[String]) -> Result<(), String> {
    let before: Vec<Vec<u8>> = artifacts
        .iter()
        .map(|a| fs::read(a).map_err(|e| format!("{a}: {e}")))
        .collect::<Result<_, _>>()?;
    for a in artifacts {
        fs::remove_file(a).map_err(|e| e.to_string())?;
    }
    puffscan(&["replay", manifest])?;
    for (a, old) in artifacts.iter().zip(&before) {
        let new = fs::read(a).map_err(|e| format!("{a} after replay: {e}"))?;
        check(&new == old, format!("{a} differs after replay"))?;
    }
    Ok(())
}

fn determinism(dir: &Path) -> Outcome {
    let f = |name: &str| dir.join(name).display().to_string();
    let data = f("d.csv");
    let model = f("d.model");
    let report = f("d.report.csv");
    let events = f("d.events.csv");
    let sweep = f("d.sweep.csv");
    puffscan(&["generate", "--out", &data, "--seed", "5", "--puffs", "8", "--distractors", "3"])?;
    puffscan(&["train", "--data", &data, "--model", &model, "--epochs", "5", "--seed", "5"])?;
    puffscan(&["eval", "--model", &model, "--data", &data, "--report", &report])?;
    puffscan(&["detect", "--model", &model, "--data", &data, "--events", &events])?;
    puffscan(&["sweep", "--data", &data, "--out", &sweep, "--epochs", "2,3", "--batches", "64", "--layers", "1,2"])?;

    replay_identical(&format!("{data}.manifest"), &[data.clone(), format!("{data}.truth.csv"), format!("{data}.meta")])?;
    replay_identical(&format!("{model}.manifest"), &[model.clone(), format!("{model}.trace.csv")])?;
    replay_identical(&format!("{report}.manifest"), std::slice::from_ref(&report))?;
    replay_identical(&format!("{events}.manifest"), std::slice::from_ref(&events))?;
    replay_identical(&format!("{sweep}.manifest"), std::slice::from_ref(&sweep))?;
    Ok("generate, train, eval, detect and sweep replay byte-identically".into())
}

fn main() {
    let dir = TempDir::new().expect("temp dir");
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 balancing arithmetic", Box::new(balancing)),
        ("2 report tables", Box::new(tables)),
        ("3 gradient correctness", Box::new(gradients)),
        ("4 adam oracle", Box::new(adam)),
        ("5 grammar oracle", Box::new(grammar_oracle)),
        ("6 duration rule", Box::new(duration_rule)),
        ("7 end-to-end training and detection", Box::new(|| end_to_end(dir.path()))),
        ("8 replay determinism", Box::new(|| determinism(dir.path()))),
        ("9 split rule", Box::new(split_rule)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.1} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1} s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
