use puffscan::dataset::{export_stream_path, DatasetMeta};
use puffscan::grammar::{event_records, write_events_path};
use puffscan::synth::{generate, SynthConfig};

use crate::settings::Settings;
use crate::CliError;

pub fn defaults() -> Vec<(&'static str, &'static str)> {
    vec![
        ("out", ""),
        ("truth", ""),
        ("manifest", ""),
        ("seed", "0"),
        ("puffs", "12"),
        ("distractors", "4"),
        ("noise", "0.05"),
        ("sample_rate", "25"),
        ("hol_min", "0.5"),
        ("hol_max", "3"),
        ("ramp", "0.8"),
        ("rest_min", "4"),
        ("rest_max", "8"),
        ("distractor_min", "2"),
        ("distractor_max", "5"),
    ]
}

fn config(s: &Settings) -> Result<SynthConfig, CliError> {
    let cfg = SynthConfig {
        seed: s.get("seed")?,
        sample_rate_hz: s.get("sample_rate")?,
        puffs: s.get("puffs")?,
        distractors: s.get("distractors")?,
        noise_sigma: s.get("noise")?,
        hol_range_s: (s.get("hol_min")?, s.get("hol_max")?),
        ramp_s: s.get("ramp")?,
        rest_range_s: (s.get("rest_min")?, s.get("rest_max")?),
        distractor_range_s: (s.get("distractor_min")?, s.get("distractor_max")?),
        ..SynthConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve(s: &mut Settings) -> Result<(), CliError> {
    s.path("out")?;
    s.derive_path("truth", "out", ".truth.csv")?;
    s.derive_path("manifest", "out", ".manifest")?;
    config(s)?;
    Ok(())
}

pub fn run(s: &Settings) -> Result<(), CliError> {
    let cfg = config(s)?;
    let out = s.path("out")?;
    let synth = generate(&cfg)?;
    export_stream_path(&out, &synth.stream)?;
    let meta = DatasetMeta {
        sample_rate_hz: cfg.sample_rate_hz,
        seed: cfg.seed,
        ..DatasetMeta::default()
    };
    meta.write(DatasetMeta::sidecar_path(&out))?;
    write_events_path(&s.path("truth")?, &event_records(&synth.truth, &[]))?;
    println!(
        "wrote {} samples with {} puffs to {}",
        synth.stream.len(),
        synth.truth.len(),
        out.display()
    );
    Ok(())
}
