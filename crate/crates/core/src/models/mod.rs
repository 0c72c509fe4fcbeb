//! The two classifier families and their training loop.
//!
//! Both families map a batch of 60-feature windows to a batch of 4 sigmoid
//! outputs, one per mini-gesture class. Parameters are exposed as an ordered
//! list of flat blocks so the optimizer and the model file can treat every
//! family the same way.

mod file;
mod lstm;
mod mlp;
mod train;

use std::fmt;
use std::str::FromStr;

pub use file::{load, load_lstm, load_mlp, save, ModelFile, ModelHeader, FORMAT_VERSION};
pub use lstm::{LstmCell, LstmLayout, LstmModel};
pub use mlp::{default_hidden_widths, DenseLayer, MlpModel};
pub use train::{fit, train, EpochRecord, TrainConfig, TrainData, TrainTrace};

use crate::dataset::{FEATURES, NUM_CLASSES};
use crate::numerics::{LossKind, Matrix, NumericsError};

pub const INPUT_WIDTH: usize = FEATURES;
pub const OUTPUT_WIDTH: usize = NUM_CLASSES;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Dimension(#[from] NumericsError),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Optimizer {
        epoch: usize,
        batch: usize,
        #[source]
        source: NumericsError,
    },
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("unsupported model file version `{0}`")]
    Version(String),
    #[error("model file checksum mismatch (expected {expected}, computed {computed})")]
    Checksum { expected: String, computed: String },
    #[error("model file is truncated: {0}")]
    Truncated(String),
    #[error("model file holds a {found} model, expected {expected}")]
    FamilyMismatch { expected: Family, found: Family },
    #[error("model file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Mlp,
    Lstm,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Mlp => "mlp",
            Family::Lstm => "lstm",
        }
    }

    /// Loss used when none is configured: bce for the MLP, mse for the LSTM.
    pub fn default_loss(self) -> LossKind {
        match self {
            Family::Mlp => LossKind::Bce,
            Family::Lstm => LossKind::Mse,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(Family::Mlp),
            "lstm" => Ok(Family::Lstm),
            other => Err(format!("unknown model family `{other}` (expected mlp or lstm)")),
        }
    }
}

/// Shape of a network, independent of its parameter values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Architecture {
    Mlp { hidden: Vec<usize> },
    Lstm { units: usize, layout: LstmLayout },
}

impl Architecture {
    pub fn family(&self) -> Family {
        match self {
            Architecture::Mlp { .. } => Family::Mlp,
            Architecture::Lstm { .. } => Family::Lstm,
        }
    }

    /// Hidden-layer count for the MLP, unit count for the LSTM.
    pub fn depth(&self) -> usize {
        match self {
            Architecture::Mlp { hidden } => hidden.len(),
            Architecture::Lstm { units, .. } => *units,
        }
    }

    /// Compact text form: `12,8` for an MLP, `3` or `3:wide` for an LSTM.
    pub fn spec_string(&self) -> String {
        match self {
            Architecture::Mlp { hidden } => hidden
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
            Architecture::Lstm { units, layout } => match layout {
                LstmLayout::Stacked => units.to_string(),
                LstmLayout::Wide => format!("{units}:wide"),
            },
        }
    }

    pub fn parse(family: Family, spec: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::Architecture(format!("cannot parse `{spec}` as a {family} architecture"));
        match family {
            Family::Mlp => {
                let hidden = if spec.trim().is_empty() {
                    Vec::new()
                } else {
                    spec.split(',')
                        .map(|w| w.trim().parse::<usize>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>, _>>()?
                };
                Ok(Architecture::Mlp { hidden })
            }
            Family::Lstm => {
                let (units, layout) = match spec.split_once(':') {
                    Some((u, "wide")) => (u, LstmLayout::Wide),
                    Some((u, "stacked")) => (u, LstmLayout::Stacked),
                    Some(_) => return Err(bad()),
                    None => (spec, LstmLayout::Stacked),
                };
                let units = units.trim().parse().map_err(|_| bad())?;
                Ok(Architecture::Lstm { units, layout })
            }
        }
    }
}

/// Common surface of both classifier families.
pub trait Classifier {
    fn forward(&self, x: &Matrix) -> Result<Matrix, ModelError>;

    /// Loss and its gradient with respect to every parameter block, in
    /// [`Classifier::param_blocks`] order.
    fn backward(&self, x: &Matrix, targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>), ModelError>;

    fn param_blocks(&self) -> Vec<&[f64]>;

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;

    /// Human-readable names of the parameter blocks.
    fn param_names(&self) -> Vec<String>;

    fn loss_kind(&self) -> LossKind;

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }
}

/// A model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Lstm(LstmModel),
}

impl Model {
    pub fn init(architecture: &Architecture, loss: LossKind, seed: u64) -> Result<Self, ModelError> {
        match architecture {
            Architecture::Mlp { hidden } => Ok(Model::Mlp(MlpModel::new(hidden, loss, seed)?)),
            Architecture::Lstm { units, layout } => {
                Ok(Model::Lstm(LstmModel::new(*units, *layout, loss, seed)?))
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Model::Mlp(_) => Family::Mlp,
            Model::Lstm(_) => Family::Lstm,
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Model::Mlp(m) => m.architecture(),
            Model::Lstm(m) => m.architecture(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Model::Mlp(m) => m.seed,
            Model::Lstm(m) => m.seed,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Mlp(m) => m,
            Model::Lstm(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Classifier {
        match self {
            Model::Mlp(m) => m,
            Model::Lstm(m) => m,
        }
    }
}

impl Classifier for Model {
    fn forward(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        self.inner().forward(x)
    }

    fn backward(&self, x: &Matrix, targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
        self.inner().backward(x, targets)
    }

    fn param_blocks(&self) -> Vec<&[f64]> {
        self.inner().param_blocks()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.inner_mut().param_blocks_mut()
    }

    fn param_names(&self) -> Vec<String> {
        self.inner().param_names()
    }

    fn loss_kind(&self) -> LossKind {
        self.inner().loss_kind()
    }
}

/// How predictions are compared with one-hot targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccuracyMode {
    /// Row is correct when its highest output is the hot index.
    #[default]
    Argmax,
    /// Every output thresholded at 0.5 and compared bit by bit.
    Elementwise,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(predictions: &Matrix, targets: &Matrix, mode: AccuracyMode) -> Result<f64, ModelError> {
    predictions.check_same_shape("accuracy", targets)?;
    if predictions.rows() == 0 {
        return Ok(0.0);
    }
    let hits = match mode {
        AccuracyMode::Argmax => (0..predictions.rows())
            .filter(|&r| argmax(predictions.row(r)) == argmax(targets.row(r)))
            .count(),
        AccuracyMode::Elementwise => predictions
            .as_slice()
            .iter()
            .zip(targets.as_slice())
            .filter(|(&p, &t)| (p >= 0.5) == (t >= 0.5))
            .count(),
    };
    let total = match mode {
        AccuracyMode::Argmax => predictions.rows(),
        AccuracyMode::Elementwise => predictions.as_slice().len(),
    };
    Ok(hits as f64 / total as f64)
}

pub(crate) fn check_input(x: &Matrix) -> Result<(), ModelError> {
    if x.cols() != INPUT_WIDTH {
        return Err(NumericsError::Shape {
            op: "forward",
            left: x.shape(),
            right: (INPUT_WIDTH, OUTPUT_WIDTH),
        }
        .into());
    }
    Ok(())
}
