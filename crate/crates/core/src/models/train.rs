use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::dataset::{Dataset, Partition};
use crate::numerics::{derive_seed, loss, rng_from_seed, AdamConfig, AdamState, LossKind, Matrix};

use super::{accuracy, AccuracyMode, Architecture, Classifier, Model, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch: usize,
    pub loss: LossKind,
    pub adam: AdamConfig,
    /// Run seed. Initialization and shuffling draw from named sub-seeds.
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    /// Defaults for the given architecture: family-default loss, Adam
    /// defaults, shuffling on.
    pub fn new(architecture: Architecture, epochs: usize, batch: usize, seed: u64) -> Self {
        let loss = architecture.family().default_loss();
        Self {
            architecture,
            epochs,
            batch,
            loss,
            adam: AdamConfig::default(),
            seed,
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(ModelError::Config("batch must be at least 1".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(ModelError::Config(format!("invalid Adam hyperparameters {a:?}")));
        }
        Ok(())
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, "init")
    }

    pub fn shuffle_seed(&self) -> u64 {
        derive_seed(self.seed, "shuffle")
    }
}

/// Feature and target matrices of the train and validation partitions.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train_x: Matrix,
    pub train_y: Matrix,
    pub val_x: Matrix,
    pub val_y: Matrix,
}

impl TrainData {
    pub fn from_dataset(dataset: &Dataset) -> Result<Self, ModelError> {
        let features = |p| dataset.features(p).map_err(|e| ModelError::Config(e.to_string()));
        Ok(Self {
            train_x: features(Partition::Train)?,
            train_y: dataset.targets(Partition::Train),
            val_x: features(Partition::Val)?,
            val_y: dataset.targets(Partition::Val),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Per-epoch loss and argmax accuracy on the train and validation partitions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

const TRACE_HEADER: &str = "epoch,train_loss,val_loss,train_acc,val_acc";

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.epochs {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.epoch, r.train_loss, r.val_loss, r.train_acc, r.val_acc
            )?;
        }
        w.flush()
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, String> {
        let mut lines = BufReader::new(r).lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == TRACE_HEADER => {}
            _ => return Err(format!("expected header `{TRACE_HEADER}`")),
        }
        let mut epochs = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format!("line {}: malformed trace row `{line}`", n + 2);
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            epochs.push(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad())?,
                train_loss: num(1)?,
                val_loss: num(2)?,
                train_acc: num(3)?,
                val_acc: num(4)?,
            });
        }
        Ok(Self { epochs })
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let io = |source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io)?;
        self.write_csv(BufWriter::new(file)).map_err(io)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file).map_err(|message| ModelError::Malformed { line: 0, message })
    }
}

fn evaluate<M: Classifier + ?Sized>(model: &M, x: &Matrix, y: &Matrix) -> Result<(f64, f64), ModelError> {
    let p = model.forward(x)?;
    Ok((loss(model.loss_kind(), &p, y)?, accuracy(&p, y, AccuracyMode::Argmax)?))
}

/// Mini-batch Adam over the training partition for `config.epochs` epochs.
///
/// The last short batch of each epoch is included. Batches are visited in a
/// fixed order derived from the shuffle sub-seed, so identical inputs give
/// bit-identical parameters.
pub fn train<M: Classifier + ?Sized>(
    model: &mut M,
    data: &TrainData,
    config: &TrainConfig,
) -> Result<TrainTrace, ModelError> {
    config.validate()?;
    if data.train_x.rows() == 0 {
        return Err(ModelError::EmptyPartition("train"));
    }
    if data.val_x.rows() == 0 {
        return Err(ModelError::EmptyPartition("validation"));
    }

    let sizes: Vec<usize> = model.param_blocks().iter().map(|b| b.len()).collect();
    let mut adam = AdamState::new(config.adam, &sizes);
    let mut rng = rng_from_seed(config.shuffle_seed());
    let mut order: Vec<usize> = (0..data.train_x.rows()).collect();
    let mut trace = TrainTrace::default();

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for (batch, rows) in order.chunks(config.batch).enumerate() {
            let x = data.train_x.select_rows(rows);
            let y = data.train_y.select_rows(rows);
            let (value, grads) = model.backward(&x, &y)?;
            if !value.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, batch });
            }
            let mut params = model.param_blocks_mut();
            adam.step(&mut params, &grads)
                .map_err(|source| ModelError::Optimizer { epoch, batch, source })?;
        }
        let (train_loss, train_acc) = evaluate(model, &data.train_x, &data.train_y)?;
        let (val_loss, val_acc) = evaluate(model, &data.val_x, &data.val_y)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(config.batch),
            });
        }
        log::debug!("epoch {epoch}: loss {train_loss:.5} val_loss {val_loss:.5} acc {train_acc:.4} val_acc {val_acc:.4}");
        trace.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
        });
    }
    Ok(trace)
}

/// Initializes a model from the config's architecture and trains it.
pub fn fit(data: &TrainData, config: &TrainConfig) -> Result<(Model, TrainTrace), ModelError> {
    config.validate()?;
    let mut model = Model::init(&config.architecture, config.loss, config.init_seed())?;
    let trace = train(&mut model, data, config)?;
    Ok((model, trace))
}
