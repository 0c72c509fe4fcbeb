use puffscan::dataset::{encode_targets, extract_windows, features_matrix, MiniGesture, Standardizer};
use puffscan::eval::{confusion, report, round_half_up};
use puffscan::models::{argmax, load, Classifier};
use puffscan::numerics::Matrix;

use crate::pipeline::{self, PipelineConfig};
use crate::settings::Settings;
use crate::CliError;

pub fn defaults() -> Vec<(&'static str, &'static str)> {
    vec![
        ("model", ""),
        ("data", ""),
        ("report", ""),
        ("manifest", ""),
        ("all", "false"),
        ("rate_check", "true"),
    ]
}

pub fn resolve(s: &mut Settings) -> Result<(), CliError> {
    s.path("model")?;
    s.path("data")?;
    s.derive_path("report", "model", ".report.csv")?;
    s.derive_path("manifest", "report", ".manifest")?;
    s.get::<bool>("all")?;
    s.get::<bool>("rate_check")?;
    Ok(())
}

pub(crate) fn labels(m: &Matrix) -> Vec<MiniGesture> {
    (0..m.rows())
        .map(|r| MiniGesture::from_index(argmax(m.row(r))).expect("four outputs"))
        .collect()
}

pub fn run(s: &Settings) -> Result<(), CliError> {
    let file = load(s.path("model")?)?;
    let pipe = PipelineConfig::from_header(&file.header)?;
    let scaler = Standardizer::read_meta(&file.header.extra)?;
    let stream = pipeline::load_stream(
        &s.path("data")?,
        pipe.sample_rate_hz,
        pipe.spec.feature_order,
        s.get("rate_check")?,
    )?;
    let (x, y) = if s.get("all")? {
        let windows = extract_windows(&stream, 0, &pipe.spec)?;
        let mut x = features_matrix(&windows)?;
        if let (Some(sc), true) = (&scaler, x.rows() > 0) {
            sc.apply(&mut x)?;
        }
        (x, encode_targets(&windows))
    } else {
        let ds = pipeline::build(&stream, &pipe)?;
        pipeline::test_data(&ds, scaler.as_ref())?
    };
    if x.rows() == 0 {
        return Err(CliError::Parse("no windows to evaluate".into()));
    }
    let predicted = labels(&file.model.forward(&x)?);
    let cm = confusion(&predicted, &labels(&y))?;
    let metrics = report(&cm)?;
    metrics.write_path(&s.path("report")?)?;

    println!("confusion (rows actual, columns predicted):");
    for row in cm.counts {
        println!("  {row:?}");
    }
    for (label, m) in metrics.rows() {
        println!(
            "{label:>12}  precision {:.2}  recall {:.2}  f1 {:.2}  support {}",
            round_half_up(m.precision, 2),
            round_half_up(m.recall, 2),
            round_half_up(m.f1, 2),
            m.support
        );
    }
    println!("accuracy {:.4}", metrics.accuracy);
    Ok(())
}
