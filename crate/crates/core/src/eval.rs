//! Confusion matrices, per-class metrics and report export.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::dataset::{MiniGesture, NUM_CLASSES};
use crate::grammar::PuffEvent;
use crate::models::{ModelError, TrainTrace};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predicted} predictions but {actual} labels")]
    Length { predicted: usize, actual: usize },
    #[error("cannot report on an empty confusion matrix")]
    Empty,
    #[error("trace has no epochs")]
    EmptyTrace,
    #[error("report I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rows are the actual class, columns the predicted class, both in id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion(predicted: &[MiniGesture], actual: &[MiniGesture]) -> Result<ConfusionMatrix, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::Length {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (p, a) in predicted.iter().zip(actual) {
        cm.counts[a.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub classes: [ClassMetrics; NUM_CLASSES],
    pub micro: ClassMetrics,
    pub macro_avg: ClassMetrics,
    pub weighted: ClassMetrics,
    /// Argmax accuracy, equal to the micro average.
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64, what: &str, class: usize) -> f64 {
    if den == 0 {
        log::warn!("{what} of class {} has a zero denominator; reporting 0", class + 1);
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    let classes: [ClassMetrics; NUM_CLASSES] = std::array::from_fn(|c| {
        let tp = cm.counts[c][c];
        let precision = ratio(tp, cm.col_sum(c), "precision", c);
        let recall = ratio(tp, cm.row_sum(c), "recall", c);
        ClassMetrics {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: cm.row_sum(c),
        }
    });
    let accuracy = cm.trace() as f64 / n as f64;
    let k = NUM_CLASSES as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / k;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / n as f64
    };
    Ok(MetricsReport {
        classes,
        micro: ClassMetrics {
            precision: accuracy,
            recall: accuracy,
            f1: accuracy,
            support: n,
        },
        macro_avg: ClassMetrics {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            support: n,
        },
        weighted: ClassMetrics {
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
            support: n,
        },
        accuracy,
    })
}

/// Half-up rounding for display. The small nudge keeps values such as 0.125
/// that are stored just below the tie from rounding down.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale + 0.5 + 1e-9).floor() / scale
}

pub const REPORT_HEADER: [&str; 5] = ["class", "precision", "recall", "f1", "support"];

impl MetricsReport {
    /// `(label, metrics)` rows: four classes, then micro, macro and weighted averages.
    pub fn rows(&self) -> Vec<(String, ClassMetrics)> {
        let mut rows: Vec<(String, ClassMetrics)> = MiniGesture::ALL
            .iter()
            .zip(self.classes)
            .map(|(g, m)| (g.short_name().to_string(), m))
            .collect();
        rows.push(("micro avg".into(), self.micro));
        rows.push(("macro avg".into(), self.macro_avg));
        rows.push(("weighted avg".into(), self.weighted));
        rows
    }

    /// Full-precision CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_HEADER)?;
        for (label, m) in self.rows() {
            w.write_record([
                label,
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                m.support.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<(), EvalError> {
        let file = std::fs::File::create(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Writes the per-epoch curves as CSV.
pub fn export_curves(trace: &TrainTrace, path: &Path) -> Result<(), EvalError> {
    if trace.epochs.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    trace.write_path(path)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchSummary {
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
}

impl MatchSummary {
    pub fn recall(&self) -> f64 {
        if self.truth == 0 {
            1.0
        } else {
            self.matched as f64 / self.truth as f64
        }
    }

    pub fn precision(&self) -> f64 {
        if self.detected == 0 {
            1.0
        } else {
            self.matched as f64 / self.detected as f64
        }
    }
}

/// One-to-one matching of detected to true puffs. A pair matches when both
/// the start and end samples differ by at most `tolerance` samples; each true
/// puff takes the closest unused detection.
pub fn match_puffs(detected: &[PuffEvent], truth: &[PuffEvent], tolerance: usize) -> MatchSummary {
    let mut used = vec![false; detected.len()];
    let mut matched = 0;
    for t in truth {
        let best = detected
            .iter()
            .enumerate()
            .filter(|(i, d)| {
                !used[*i]
                    && d.start_sample.abs_diff(t.start_sample) <= tolerance
                    && d.end_sample.abs_diff(t.end_sample) <= tolerance
            })
            .min_by_key(|(_, d)| d.start_sample.abs_diff(t.start_sample) + d.end_sample.abs_diff(t.end_sample));
        if let Some((i, _)) = best {
            used[i] = true;
            matched += 1;
        }
    }
    MatchSummary {
        matched,
        detected: detected.len(),
        truth: truth.len(),
    }
}
