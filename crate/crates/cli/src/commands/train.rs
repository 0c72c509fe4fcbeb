use puffscan::dataset::FeatureOrder;
use puffscan::eval::export_curves;
use puffscan::models::{fit, save, Architecture, Family, ModelFile, TrainConfig};
use puffscan::numerics::{AdamConfig, LossKind};

use crate::pipeline::{self, PipelineConfig};
use crate::settings::Settings;
use crate::CliError;

pub fn defaults() -> Vec<(&'static str, &'static str)> {
    let mut d = pipeline::defaults();
    d.extend([
        ("model", ""),
        ("trace", ""),
        ("manifest", ""),
        ("family", "mlp"),
        ("layers", "12,8"),
        ("units", "3"),
        ("lstm_layout", "stacked"),
        ("epochs", "50"),
        ("batch", "100"),
    ]);
    d
}

/// Fills an empty `loss` with the family default.
pub(crate) fn resolve_loss(s: &mut Settings, family: Family) -> Result<(), CliError> {
    if s.raw("loss").is_empty() {
        s.set("loss", family.default_loss().name());
    }
    s.get::<LossKind>("loss")?;
    Ok(())
}

pub(crate) fn adam(s: &Settings) -> Result<AdamConfig, CliError> {
    Ok(AdamConfig {
        lr: s.get("lr")?,
        ..AdamConfig::default()
    })
}

fn architecture(s: &Settings) -> Result<Architecture, CliError> {
    let family: Family = s.get("family")?;
    let spec = match family {
        Family::Mlp => s.raw("layers").to_string(),
        Family::Lstm => format!("{}:{}", s.raw("units"), s.raw("lstm_layout")),
    };
    Ok(Architecture::parse(family, &spec)?)
}

fn config(s: &Settings) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::new(architecture(s)?, s.get("epochs")?, s.get("batch")?, s.get("seed")?);
    cfg.loss = s.get("loss")?;
    cfg.adam = adam(s)?;
    cfg.shuffle = s.get("shuffle")?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve(s: &mut Settings) -> Result<(), CliError> {
    s.path("model")?;
    s.derive_path("trace", "model", ".trace.csv")?;
    s.derive_path("manifest", "model", ".manifest")?;
    pipeline::resolve(s)?;
    resolve_loss(s, s.get("family")?)?;
    config(s)?;
    Ok(())
}

pub fn run(s: &Settings) -> Result<(), CliError> {
    let pipe = PipelineConfig::from_settings(s)?;
    let cfg = config(s)?;
    let order: FeatureOrder = pipe.spec.feature_order;
    let stream = pipeline::load_stream(&s.path("data")?, pipe.sample_rate_hz, order, pipe.rate_check)?;
    let ds = pipeline::build(&stream, &pipe)?;
    let (data, scaler) = pipeline::train_data(&ds, &pipe)?;
    let (model, trace) = fit(&data, &cfg)?;

    let mut header = pipe.header();
    if let Some(sc) = &scaler {
        sc.write_meta(&mut header.extra);
    }
    let model_path = s.path("model")?;
    save(&ModelFile::new(model, header), &model_path)?;
    export_curves(&trace, &s.path("trace")?)?;
    if let Some(last) = trace.last() {
        println!(
            "{} {}: loss {:.4} val_loss {:.4} acc {:.4} val_acc {:.4}",
            cfg.architecture.family(),
            cfg.architecture.spec_string(),
            last.train_loss,
            last.val_loss,
            last.train_acc,
            last.val_acc
        );
    }
    println!("saved {}", model_path.display());
    Ok(())
}
