use puffscan::dataset::{window_features, Standardizer};
use puffscan::grammar::{event_records, group_sessions, parse, tokenize, write_events_path, GrammarConfig};
use puffscan::models::{load, Classifier};
use puffscan::numerics::Matrix;

use crate::pipeline::{self, PipelineConfig};
use crate::settings::Settings;
use crate::CliError;

pub fn defaults() -> Vec<(&'static str, &'static str)> {
    vec![
        ("model", ""),
        ("data", ""),
        ("events", ""),
        ("manifest", ""),
        ("stride", "1"),
        ("min_hol", "0.5"),
        ("max_hol", "3"),
        ("noise_tolerance", "2"),
        ("min_puffs", "2"),
        ("max_gap", "60"),
        ("bounds", "inclusive"),
        ("rate_check", "true"),
    ]
}

fn grammar(s: &Settings, sample_rate_hz: f64) -> Result<GrammarConfig, CliError> {
    let cfg = GrammarConfig {
        sample_rate_hz,
        min_hol_s: s.get("min_hol")?,
        max_hol_s: s.get("max_hol")?,
        noise_tolerance: s.get("noise_tolerance")?,
        stride: s.get("stride")?,
        min_puffs: s.get("min_puffs")?,
        max_gap_s: s.get("max_gap")?,
        bounds: s.get("bounds")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve(s: &mut Settings) -> Result<(), CliError> {
    s.path("model")?;
    s.derive_path("events", "data", ".events.csv")?;
    s.derive_path("manifest", "events", ".manifest")?;
    grammar(s, puffscan::dataset::DEFAULT_SAMPLE_RATE_HZ)?;
    s.get::<bool>("rate_check")?;
    Ok(())
}

pub fn run(s: &Settings) -> Result<(), CliError> {
    let file = load(s.path("model")?)?;
    let mut pipe = PipelineConfig::from_header(&file.header)?;
    pipe.spec.stride = s.get("stride")?;
    let cfg = grammar(s, pipe.sample_rate_hz)?;
    let stream = pipeline::load_stream(
        &s.path("data")?,
        pipe.sample_rate_hz,
        pipe.spec.feature_order,
        s.get("rate_check")?,
    )?;
    let windows = window_features(&stream, 0, &pipe.spec)?;
    let events = s.path("events")?;
    if windows.is_empty() {
        log::warn!("stream has {} samples, shorter than one window", stream.len());
        write_events_path(&events, &[])?;
        println!("0 puffs, 0 sessions");
        return Ok(());
    }
    let rows: Vec<&[f64]> = windows.iter().map(|(_, f)| f.as_slice()).collect();
    let mut x = Matrix::from_rows(&rows).map_err(|e| CliError::Parse(e.to_string()))?;
    if let Some(sc) = Standardizer::read_meta(&file.header.extra)? {
        sc.apply(&mut x)?;
    }
    let origins: Vec<usize> = windows.iter().map(|(o, _)| o.start).collect();
    let tokens = tokenize(&file.model.forward(&x)?, &origins)?;
    let puffs = parse(&tokens, &cfg)?;
    let sessions = group_sessions(&puffs, &cfg);
    write_events_path(&events, &event_records(&puffs, &sessions))?;
    println!("{} puffs, {} sessions", puffs.len(), sessions.len());
    Ok(())
}
