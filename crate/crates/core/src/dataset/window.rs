use std::fmt;
use std::str::FromStr;

use crate::numerics::Matrix;

use super::{DataError, MiniGesture, SampleStream, AXES, NUM_CLASSES, WINDOW_LEN};

/// How the 20x3 samples of a window are flattened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureOrder {
    /// `[x1, y1, z1, x2, y2, z2, ...]`
    #[default]
    Interleaved,
    /// `[x1..x20, y1..y20, z1..z20]`
    Planar,
}

impl FeatureOrder {
    pub fn name(self) -> &'static str {
        match self {
            FeatureOrder::Interleaved => "xyz-interleaved",
            FeatureOrder::Planar => "xyz-planar",
        }
    }
}

impl fmt::Display for FeatureOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xyz-interleaved" => Ok(FeatureOrder::Interleaved),
            "xyz-planar" => Ok(FeatureOrder::Planar),
            other => Err(format!("unknown feature order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub window: usize,
    pub stride: usize,
    pub feature_order: FeatureOrder,
    /// Min-max scale each window's features into [0, 1].
    pub normalize: bool,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window: WINDOW_LEN,
            stride: 1,
            feature_order: FeatureOrder::Interleaved,
            normalize: false,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.window == 0 {
            return Err(DataError::BadWindowSpec("window must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(DataError::BadWindowSpec("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of windows a stream of `n` samples yields.
    pub fn count(&self, n: usize) -> usize {
        if n < self.window {
            0
        } else {
            (n - self.window) / self.stride + 1
        }
    }
}

/// Where a window was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowOrigin {
    pub stream: usize,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub features: Vec<f64>,
    pub label: MiniGesture,
    pub origin: WindowOrigin,
    /// 0 for an original window, `k` for the k-th duplicate made by [`balance`].
    pub replica: u32,
}

/// Plurality label of a window. Ties go to the smoking class with the lowest
/// id, and to non-smoking only when no smoking class is among the tied.
pub fn majority_label(labels: impl IntoIterator<Item = MiniGesture>) -> Option<MiniGesture> {
    let mut counts = [0usize; NUM_CLASSES];
    let mut any = false;
    for l in labels {
        counts[l.index()] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let best = *counts.iter().max().expect("four classes");
    let smoking_winner = (1..NUM_CLASSES).find(|&i| counts[i] == best);
    let index = smoking_winner.unwrap_or(0);
    Some(MiniGesture::from_index(index).expect("index < 4"))
}

fn flatten(stream: &SampleStream, start: usize, spec: &WindowSpec) -> Vec<f64> {
    let samples = &stream.samples[start..start + spec.window];
    let mut out = Vec::with_capacity(spec.window * AXES);
    match spec.feature_order {
        FeatureOrder::Interleaved => {
            for s in samples {
                out.extend_from_slice(&[s.ax, s.ay, s.az]);
            }
        }
        FeatureOrder::Planar => {
            out.extend(samples.iter().map(|s| s.ax));
            out.extend(samples.iter().map(|s| s.ay));
            out.extend(samples.iter().map(|s| s.az));
        }
    }
    if spec.normalize {
        min_max_scale(&mut out);
    }
    out
}

fn min_max_scale(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
    }
}

/// Feature vectors of every window, labeled or not. Used for detection on
/// raw streams.
pub fn window_features(
    stream: &SampleStream,
    stream_index: usize,
    spec: &WindowSpec,
) -> Result<Vec<(WindowOrigin, Vec<f64>)>, DataError> {
    spec.validate()?;
    Ok((0..spec.count(stream.len()))
        .map(|k| {
            let start = k * spec.stride;
            (
                WindowOrigin {
                    stream: stream_index,
                    start,
                },
                flatten(stream, start, spec),
            )
        })
        .collect())
}

/// Cuts a labeled stream into rolling windows starting at `0, stride, 2*stride, ...`.
///
/// A stream shorter than one window yields nothing. Every sample must carry a
/// label otherwise.
pub fn extract_windows(
    stream: &SampleStream,
    stream_index: usize,
    spec: &WindowSpec,
) -> Result<Vec<Window>, DataError> {
    spec.validate()?;
    if stream.len() < spec.window {
        return Ok(Vec::new());
    }
    let labels = stream
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            s.label.ok_or_else(|| DataError::MissingLabel {
                stream: stream.name.clone(),
                index,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(window_features(stream, stream_index, spec)?
        .into_iter()
        .map(|(origin, features)| {
            let span = &labels[origin.start..origin.start + spec.window];
            Window {
                features,
                label: majority_label(span.iter().copied()).expect("window is non-empty"),
                origin,
                replica: 0,
            }
        })
        .collect())
}

/// Duplicates windows of the targeted classes so each appears `factor` times.
///
/// Output order: all input windows unchanged, then for each targeted window
/// (in input order) its `factor - 1` copies.
pub fn balance(windows: &[Window], factor: usize, classes: &[MiniGesture]) -> Vec<Window> {
    let factor = factor.max(1);
    let extra = windows
        .iter()
        .filter(|w| classes.contains(&w.label))
        .count()
        * (factor - 1);
    let mut out = Vec::with_capacity(windows.len() + extra);
    out.extend_from_slice(windows);
    for w in windows.iter().filter(|w| classes.contains(&w.label)) {
        for k in 1..factor {
            let mut copy = w.clone();
            copy.replica = k as u32;
            out.push(copy);
        }
    }
    out
}

/// One-hot target rows in the order of `windows`.
pub fn encode_targets<'a>(windows: impl IntoIterator<Item = &'a Window>) -> Matrix {
    let rows: Vec<[f64; NUM_CLASSES]> = windows.into_iter().map(|w| w.label.one_hot()).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, NUM_CLASSES);
    }
    Matrix::from_rows(&rows).expect("fixed width")
}

/// Stacks window features into an `N x features` matrix.
pub fn features_matrix<'a>(
    windows: impl IntoIterator<Item = &'a Window>,
) -> Result<Matrix, DataError> {
    let rows: Vec<&[f64]> = windows.into_iter().map(|w| w.features.as_slice()).collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(&rows).map_err(|e| DataError::BadWindowSpec(e.to_string()))
}

/// Rejects a stream whose mean sampling interval is more than `rel_tol` off
/// the expected rate.
pub fn check_sample_rate(
    stream: &SampleStream,
    expected_hz: f64,
    rel_tol: f64,
) -> Result<(), DataError> {
    if stream.len() < 2 {
        return Ok(());
    }
    let first = stream.samples[0].t;
    let last = stream.samples[stream.len() - 1].t;
    let measured = (stream.len() - 1) as f64 / (last - first);
    if ((measured - expected_hz) / expected_hz).abs() > rel_tol {
        return Err(DataError::SampleRate {
            stream: stream.name.clone(),
            expected: expected_hz,
            measured,
        });
    }
    Ok(())
}
