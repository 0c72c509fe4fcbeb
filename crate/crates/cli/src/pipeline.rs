//! Stream loading, windowing, splitting and scaling shared by the commands.

use std::collections::BTreeMap;
use std::path::Path;

use puffscan::dataset::{
    build_dataset, check_sample_rate, extract_windows, ingest_path, BalanceConfig, Dataset, DatasetMeta,
    FeatureOrder, LeakMode, MiniGesture, Partition, SampleStream, SplitConfig, Standardizer, WindowSpec,
    DEFAULT_SAMPLE_RATE_HZ, WINDOW_LEN,
};
use puffscan::models::{ModelHeader, TrainData};
use puffscan::numerics::{derive_seed, Matrix};

use crate::settings::Settings;
use crate::CliError;

/// Relative sample-rate tolerance when `rate_check` is on.
pub const RATE_TOLERANCE: f64 = 0.01;

pub fn defaults() -> Vec<(&'static str, &'static str)> {
    vec![
        ("data", ""),
        ("seed", "0"),
        ("lr", "0.001"),
        ("loss", ""),
        ("shuffle", "true"),
        ("balance_factor", "30"),
        ("balance_classes", "2,4"),
        ("leak_mode", "paper"),
        ("ratios", "0.7,0.15,0.15"),
        ("stride", "1"),
        ("feature_order", ""),
        ("normalize", "false"),
        ("standardize", "true"),
        ("sample_rate", ""),
        ("rate_check", "true"),
    ]
}

/// Dataset sidecar next to `data`, if one was written.
pub fn read_meta(data: &Path) -> Result<Option<DatasetMeta>, CliError> {
    let path = DatasetMeta::sidecar_path(data);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(DatasetMeta::read(&path)?))
}

/// Fills `feature_order` and `sample_rate` from the dataset sidecar (or the
/// built-in defaults) and checks every pipeline value parses.
pub fn resolve(s: &mut Settings) -> Result<(), CliError> {
    let data = s.path("data")?;
    if !data.exists() {
        return Err(CliError::MissingFile(data.display().to_string()));
    }
    let meta = read_meta(&data)?;
    if s.raw("feature_order").is_empty() {
        let order = meta.as_ref().map(|m| m.feature_order).unwrap_or_default();
        s.set("feature_order", order.name());
    }
    if s.raw("sample_rate").is_empty() {
        let rate = meta.as_ref().map(|m| m.sample_rate_hz).unwrap_or(DEFAULT_SAMPLE_RATE_HZ);
        s.set("sample_rate", rate.to_string());
    }
    if let Some(m) = &meta {
        let order: FeatureOrder = s.get("feature_order")?;
        if order != m.feature_order {
            return Err(CliError::Compat(format!(
                "feature order {order} requested but the dataset metadata says {}",
                m.feature_order
            )));
        }
    }
    PipelineConfig::from_settings(s)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub split: SplitConfig,
    pub spec: WindowSpec,
    pub standardize: bool,
    pub sample_rate_hz: f64,
    pub rate_check: bool,
}

impl PipelineConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let seed: u64 = s.get("seed")?;
        let ratios: Vec<f64> = s.list("ratios")?;
        let [a, b, c] = ratios[..] else {
            return Err(CliError::usage(format!("ratios needs three values, got {}", ratios.len())));
        };
        let classes = s
            .list::<u8>("balance_classes")?
            .into_iter()
            .map(MiniGesture::from_id)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::usage(e.to_string()))?;
        let leak_mode: LeakMode = s.get("leak_mode")?;
        let spec = WindowSpec {
            window: WINDOW_LEN,
            stride: s.get("stride")?,
            feature_order: s.get("feature_order")?,
            normalize: s.get("normalize")?,
        };
        spec.validate()?;
        let sample_rate_hz: f64 = s.get("sample_rate")?;
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(CliError::usage(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        Ok(Self {
            split: SplitConfig {
                ratios: (a, b, c),
                seed: derive_seed(seed, "data"),
                leak_mode,
                balance: BalanceConfig {
                    factor: s.get("balance_factor")?,
                    classes,
                },
            },
            spec,
            standardize: s.get("standardize")?,
            sample_rate_hz,
            rate_check: s.get("rate_check")?,
        })
    }

    /// Provenance stored in the model header so `eval` can rebuild the split.
    pub fn header(&self) -> ModelHeader {
        let mut extra = BTreeMap::new();
        let sp = &self.split;
        extra.insert("data.stride".into(), self.spec.stride.to_string());
        extra.insert("data.normalize".into(), self.spec.normalize.to_string());
        extra.insert("data.ratios".into(), format!("{},{},{}", sp.ratios.0, sp.ratios.1, sp.ratios.2));
        extra.insert("data.split_seed".into(), sp.seed.to_string());
        extra.insert("data.leak_mode".into(), sp.leak_mode.name().into());
        extra.insert("data.balance_factor".into(), sp.balance.factor.to_string());
        let classes: Vec<String> = sp.balance.classes.iter().map(|c| c.id().to_string()).collect();
        extra.insert("data.balance_classes".into(), classes.join(","));
        ModelHeader {
            feature_order: self.spec.feature_order,
            sample_rate_hz: self.sample_rate_hz,
            window: self.spec.window,
            extra,
        }
    }

    /// Inverse of [`PipelineConfig::header`].
    pub fn from_header(h: &ModelHeader) -> Result<Self, CliError> {
        let get = |k: &str| {
            h.extra
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| CliError::Parse(format!("model header lacks `meta.{k}`")))
        };
        let mut s = Settings::from_defaults(&defaults());
        s.set("stride", get("data.stride")?);
        s.set("normalize", get("data.normalize")?);
        s.set("ratios", get("data.ratios")?);
        s.set("leak_mode", get("data.leak_mode")?);
        s.set("balance_factor", get("data.balance_factor")?);
        s.set("balance_classes", get("data.balance_classes")?);
        s.set("feature_order", h.feature_order.name());
        s.set("sample_rate", h.sample_rate_hz.to_string());
        let mut cfg = Self::from_settings(&s)?;
        cfg.split.seed = get("data.split_seed")?
            .parse()
            .map_err(|e| CliError::Parse(format!("meta.data.split_seed: {e}")))?;
        cfg.standardize = Standardizer::read_meta(&h.extra)?.is_some();
        Ok(cfg)
    }
}

/// Reads a stream and checks it against the expected rate and the dataset
/// sidecar's feature order.
pub fn load_stream(
    data: &Path,
    sample_rate_hz: f64,
    feature_order: FeatureOrder,
    rate_check: bool,
) -> Result<SampleStream, CliError> {
    if let Some(meta) = read_meta(data)? {
        if meta.feature_order != feature_order {
            return Err(CliError::Compat(format!(
                "model expects {feature_order} features, dataset metadata says {}",
                meta.feature_order
            )));
        }
        if (meta.sample_rate_hz - sample_rate_hz).abs() > RATE_TOLERANCE * sample_rate_hz {
            return Err(CliError::Compat(format!(
                "model expects {sample_rate_hz} Hz, dataset metadata says {} Hz",
                meta.sample_rate_hz
            )));
        }
    }
    let stream = ingest_path(data)?;
    if rate_check {
        check_sample_rate(&stream, sample_rate_hz, RATE_TOLERANCE)?;
    }
    Ok(stream)
}

pub fn build(stream: &SampleStream, cfg: &PipelineConfig) -> Result<Dataset, CliError> {
    let windows = extract_windows(stream, 0, &cfg.spec)?;
    let ds = build_dataset(windows, &cfg.split)?;
    let (train, val, test) = ds.sizes();
    log::info!(
        "{} windows (train {train}, val {val}, test {test}), class counts {:?}",
        ds.len(),
        ds.class_counts
    );
    Ok(ds)
}

/// Training matrices, scaled when configured, plus the fitted scaler.
pub fn train_data(ds: &Dataset, cfg: &PipelineConfig) -> Result<(TrainData, Option<Standardizer>), CliError> {
    let mut data = TrainData::from_dataset(ds)?;
    if !cfg.standardize {
        return Ok((data, None));
    }
    let scaler = Standardizer::fit(&data.train_x)?;
    scaler.apply(&mut data.train_x)?;
    scaler.apply(&mut data.val_x)?;
    Ok((data, Some(scaler)))
}

/// Test-partition features and targets, scaled with `scaler`.
pub fn test_data(ds: &Dataset, scaler: Option<&Standardizer>) -> Result<(Matrix, Matrix), CliError> {
    let mut x = ds.features(Partition::Test)?;
    if let Some(sc) = scaler {
        if x.rows() > 0 {
            sc.apply(&mut x)?;
        }
    }
    Ok((x, ds.targets(Partition::Test)))
}
