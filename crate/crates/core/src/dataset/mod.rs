//! Labeled accelerometer streams and the windowed, balanced, partitioned
//! datasets the classifiers train on.
//!
//! A stream is cut into windows of 20 consecutive samples (0.8 s at 25 Hz),
//! each flattened to 60 features. Hand-to-lip and hand-off-lip windows are
//! rare, so they are duplicated before (or, in [`LeakMode::NoLeak`], after)
//! the 70/15/15 hold-out split.

mod io;
mod meta;
mod scale;
mod split;
mod window;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use io::{export_stream, export_stream_path, ingest_path, ingest_reader};
pub use meta::DatasetMeta;
pub use scale::Standardizer;
pub use split::{
    build_dataset, partition_sizes, split, BalanceConfig, Dataset, LeakMode, Partition,
    SplitConfig,
};
pub use window::{
    balance, check_sample_rate, encode_targets, extract_windows, features_matrix,
    majority_label, window_features, FeatureOrder, Window, WindowOrigin, WindowSpec,
};

/// Nominal sampling rate of the wrist accelerometer.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 25.0;
/// Samples per window.
pub const WINDOW_LEN: usize = 20;
/// Accelerometer axes per sample.
pub const AXES: usize = 3;
/// Features per window: 20 samples x 3 axes.
pub const FEATURES: usize = WINDOW_LEN * AXES;
/// Number of mini-gesture classes.
pub const NUM_CLASSES: usize = 4;

/// The four mini-gesture classes, with their 1-based class ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MiniGesture {
    NonSmoking = 1,
    HandToLip = 2,
    HandOnLip = 3,
    HandOffLip = 4,
}

impl MiniGesture {
    pub const ALL: [MiniGesture; 4] = [
        MiniGesture::NonSmoking,
        MiniGesture::HandToLip,
        MiniGesture::HandOnLip,
        MiniGesture::HandOffLip,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Zero-based column index in one-hot targets and confusion matrices.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_id(id: u8) -> Result<Self, DataError> {
        match id {
            1 => Ok(MiniGesture::NonSmoking),
            2 => Ok(MiniGesture::HandToLip),
            3 => Ok(MiniGesture::HandOnLip),
            4 => Ok(MiniGesture::HandOffLip),
            other => Err(DataError::InvalidLabel(other.to_string())),
        }
    }

    pub fn from_index(index: usize) -> Result<Self, DataError> {
        u8::try_from(index + 1)
            .map_err(|_| DataError::InvalidLabel(index.to_string()))
            .and_then(Self::from_id)
    }

    pub fn one_hot(self) -> [f64; NUM_CLASSES] {
        let mut code = [0.0; NUM_CLASSES];
        code[self.index()] = 1.0;
        code
    }

    pub fn is_smoking(self) -> bool {
        self != MiniGesture::NonSmoking
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MiniGesture::NonSmoking => "Rest",
            MiniGesture::HandToLip => "H-to-L",
            MiniGesture::HandOnLip => "H-on-L",
            MiniGesture::HandOffLip => "H-off-L",
        }
    }
}

impl fmt::Display for MiniGesture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl FromStr for MiniGesture {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| DataError::InvalidLabel(s.to_string()))
            .and_then(Self::from_id)
    }
}

/// One timestamped 3-axis accelerometer reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub label: Option<MiniGesture>,
}

/// An ordered run of samples from one recording.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleStream {
    pub name: String,
    pub samples: Vec<Sample>,
}

impl SampleStream {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Self {
        Self {
            name: name.into(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.samples.iter().all(|s| s.label.is_some())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp {t} does not increase (previous {prev})")]
    NonMonotonic { line: u64, prev: f64, t: f64 },
    #[error("stream `{stream}` sample {index} has no label")]
    MissingLabel { stream: String, index: usize },
    #[error("invalid class label `{0}` (expected 1, 2, 3 or 4)")]
    InvalidLabel(String),
    #[error("stream `{stream}` runs at {measured:.3} Hz, expected {expected} Hz")]
    SampleRate {
        stream: String,
        expected: f64,
        measured: f64,
    },
    #[error("need at least 3 windows to split, got {0}")]
    TooFewWindows(usize),
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    BadRatios((f64, f64, f64)),
    #[error("invalid window spec: {0}")]
    BadWindowSpec(String),
    #[error("metadata: {0}")]
    Meta(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
