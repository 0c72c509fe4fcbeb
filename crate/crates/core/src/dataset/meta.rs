use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DataError, FeatureOrder, LeakMode, DEFAULT_SAMPLE_RATE_HZ, WINDOW_LEN};

const FORMAT: &str = "puffscan-dataset-meta/1";

/// Sidecar metadata written next to an exported dataset CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub sample_rate_hz: f64,
    pub window: usize,
    pub stride: usize,
    pub feature_order: FeatureOrder,
    pub leak_mode: LeakMode,
    pub seed: u64,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            window: WINDOW_LEN,
            stride: 1,
            feature_order: FeatureOrder::Interleaved,
            leak_mode: LeakMode::Paper,
            seed: 0,
        }
    }
}

impl DatasetMeta {
    /// `data.csv` -> `data.csv.meta`
    pub fn sidecar_path(csv_path: impl AsRef<Path>) -> PathBuf {
        let mut s = csv_path.as_ref().as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }

    pub fn to_text(&self) -> String {
        format!(
            "format={FORMAT}\nsample_rate_hz={}\nwindow={}\nstride={}\nfeature_order={}\nleak_mode={}\nseed={}\n",
            self.sample_rate_hz,
            self.window,
            self.stride,
            self.feature_order,
            self.leak_mode,
            self.seed
        )
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DataError::Meta(format!("line {}: expected key=value", n + 1)))?;
            kv.insert(k.trim(), v.trim());
        }
        match kv.get("format") {
            Some(&FORMAT) => {}
            Some(other) => return Err(DataError::Meta(format!("unsupported format `{other}`"))),
            None => return Err(DataError::Meta("missing `format` key".into())),
        }
        fn get<T: std::str::FromStr>(kv: &BTreeMap<&str, &str>, key: &str) -> Result<T, DataError> {
            let raw = kv
                .get(key)
                .ok_or_else(|| DataError::Meta(format!("missing `{key}`")))?;
            raw.parse()
                .map_err(|_| DataError::Meta(format!("bad value `{raw}` for `{key}`")))
        }
        Ok(Self {
            sample_rate_hz: get(&kv, "sample_rate_hz")?,
            window: get(&kv, "window")?,
            stride: get(&kv, "stride")?,
            feature_order: get(&kv, "feature_order")?,
            leak_mode: get(&kv, "leak_mode")?,
            seed: get(&kv, "seed")?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}
