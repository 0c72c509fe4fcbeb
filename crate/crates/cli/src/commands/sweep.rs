use std::fmt::Write as _;

use rayon::prelude::*;

use puffscan::eval::round_half_up;
use puffscan::models::{
    accuracy, default_hidden_widths, fit, AccuracyMode, Architecture, Classifier, Family, LstmLayout, TrainConfig,
};

use crate::commands::train::{adam, resolve_loss};
use crate::manifest::write_file;
use crate::pipeline::{self, PipelineConfig};
use crate::settings::Settings;
use crate::CliError;

pub const HEADER: &str = "rank,epoch,batch,arch,params,loss,val_loss,acc,val_acc,test_acc";

pub fn defaults() -> Vec<(&'static str, &'static str)> {
    let mut d = pipeline::defaults();
    d.extend([
        ("out", ""),
        ("manifest", ""),
        ("family", "mlp"),
        ("epochs", "50"),
        ("batches", "100"),
        ("layers", "1,2,3,4"),
        ("units", "1,2,3,4"),
        ("lstm_layout", "stacked"),
        ("jobs", "0"),
    ]);
    d
}

/// One grid point and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epochs: usize,
    pub batch: usize,
    pub architecture: Architecture,
    pub params: usize,
    pub loss: f64,
    pub val_loss: f64,
    pub acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

/// Grid points in epochs, batch, architecture order.
fn grid(s: &Settings) -> Result<Vec<TrainConfig>, CliError> {
    let family: Family = s.get("family")?;
    let archs = match family {
        Family::Mlp => s
            .list::<usize>("layers")?
            .into_iter()
            .map(|n| Ok(Architecture::Mlp { hidden: default_hidden_widths(n)? }))
            .collect::<Result<Vec<_>, CliError>>()?,
        Family::Lstm => {
            let layout: LstmLayout = s.get("lstm_layout")?;
            s.list::<usize>("units")?
                .into_iter()
                .map(|units| Architecture::Lstm { units, layout })
                .collect()
        }
    };
    let seed: u64 = s.get("seed")?;
    let mut out = Vec::new();
    for epochs in s.list::<usize>("epochs")? {
        for batch in s.list::<usize>("batches")? {
            for arch in &archs {
                let mut cfg = TrainConfig::new(arch.clone(), epochs, batch, seed);
                cfg.loss = s.get("loss")?;
                cfg.adam = adam(s)?;
                cfg.shuffle = s.get("shuffle")?;
                cfg.validate()?;
                out.push(cfg);
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("sweep grid is empty"));
    }
    Ok(out)
}

pub fn resolve(s: &mut Settings) -> Result<(), CliError> {
    s.path("out")?;
    s.derive_path("manifest", "out", ".manifest")?;
    pipeline::resolve(s)?;
    resolve_loss(s, s.get("family")?)?;
    s.get::<usize>("jobs")?;
    grid(s)?;
    Ok(())
}

/// Sorts best first: lower rounded `loss + val_loss`, then fewer layers or
/// units, then fewer parameters, then grid order.
pub fn rank(rows: &mut [SweepRow]) {
    let score = |r: &SweepRow| round_half_up(r.loss + r.val_loss, 2);
    // stable sort keeps grid order for full ties
    rows.sort_by(|a, b| {
        score(a)
            .total_cmp(&score(b))
            .then(a.architecture.depth().cmp(&b.architecture.depth()))
            .then(a.params.cmp(&b.params))
    });
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            r.epochs,
            r.batch,
            r.architecture.spec_string().replace(',', "-"),
            r.params,
            r.loss,
            r.val_loss,
            r.acc,
            r.val_acc,
            r.test_acc
        );
    }
    out
}

pub fn run(s: &Settings) -> Result<(), CliError> {
    let pipe = PipelineConfig::from_settings(s)?;
    let configs = grid(s)?;
    let stream =
        pipeline::load_stream(&s.path("data")?, pipe.sample_rate_hz, pipe.spec.feature_order, pipe.rate_check)?;
    let ds = pipeline::build(&stream, &pipe)?;
    let (data, scaler) = pipeline::train_data(&ds, &pipe)?;
    let (test_x, test_y) = pipeline::test_data(&ds, scaler.as_ref())?;

    let job = |cfg: &TrainConfig| -> Result<SweepRow, CliError> {
        let (model, trace) = fit(&data, cfg)?;
        let last = trace.last().expect("at least one epoch");
        let test_acc = if test_x.rows() > 0 {
            accuracy(&model.forward(&test_x)?, &test_y, AccuracyMode::Argmax)?
        } else {
            0.0
        };
        log::info!("{} x{} b{}: done", cfg.architecture.spec_string(), cfg.epochs, cfg.batch);
        Ok(SweepRow {
            epochs: cfg.epochs,
            batch: cfg.batch,
            architecture: cfg.architecture.clone(),
            params: model.param_count(),
            loss: last.train_loss,
            val_loss: last.val_loss,
            acc: last.train_acc,
            val_acc: last.val_acc,
            test_acc,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.get("jobs")?)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let mut rows = pool.install(|| configs.par_iter().map(job).collect::<Result<Vec<_>, _>>())?;
    rank(&mut rows);
    let out = s.path("out")?;
    write_file(&out, to_csv(&rows).as_bytes())?;
    if let Some(best) = rows.first() {
        println!(
            "best of {}: {} epochs {} batch {} (loss {:.4} val_loss {:.4})",
            rows.len(),
            best.architecture.spec_string(),
            best.epochs,
            best.batch,
            best.loss,
            best.val_loss
        );
    }
    Ok(())
}
