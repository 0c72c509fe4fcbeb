use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::numerics::{rng_from_seed, Matrix};

use super::{balance, encode_targets, features_matrix, DataError, MiniGesture, Window, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Val,
    Test,
}

/// Whether balancing happens before the split (duplicates may land in
/// validation and test) or only inside the training partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LeakMode {
    #[default]
    Paper,
    NoLeak,
}

impl LeakMode {
    pub fn name(self) -> &'static str {
        match self {
            LeakMode::Paper => "paper",
            LeakMode::NoLeak => "no_leak",
        }
    }
}

impl fmt::Display for LeakMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LeakMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(LeakMode::Paper),
            "no_leak" | "no-leak" => Ok(LeakMode::NoLeak),
            other => Err(format!("unknown leak mode `{other}` (expected paper or no_leak)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceConfig {
    pub factor: usize,
    pub classes: Vec<MiniGesture>,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            factor: 30,
            classes: vec![MiniGesture::HandToLip, MiniGesture::HandOffLip],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub ratios: (f64, f64, f64),
    pub seed: u64,
    pub leak_mode: LeakMode,
    pub balance: BalanceConfig,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: (0.70, 0.15, 0.15),
            seed: 0,
            leak_mode: LeakMode::Paper,
            balance: BalanceConfig::default(),
        }
    }
}

/// Windows tagged with their hold-out partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub partitions: Vec<Partition>,
    pub class_counts: [usize; NUM_CLASSES],
}

impl Dataset {
    fn new(windows: Vec<Window>, partitions: Vec<Partition>) -> Self {
        let mut class_counts = [0; NUM_CLASSES];
        for w in &windows {
            class_counts[w.label.index()] += 1;
        }
        Self {
            windows,
            partitions,
            class_counts,
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn part(&self, which: Partition) -> impl Iterator<Item = &Window> {
        self.windows
            .iter()
            .zip(&self.partitions)
            .filter(move |(_, p)| **p == which)
            .map(|(w, _)| w)
    }

    /// Partition sizes as (train, val, test).
    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |p| self.partitions.iter().filter(|&&q| q == p).count();
        (count(Partition::Train), count(Partition::Val), count(Partition::Test))
    }

    pub fn features(&self, which: Partition) -> Result<Matrix, DataError> {
        features_matrix(self.part(which))
    }

    pub fn targets(&self, which: Partition) -> Matrix {
        encode_targets(self.part(which))
    }
}

/// `(floor(r_train * n), floor(r_val * n), remainder)`.
pub fn partition_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize), DataError> {
    let (a, b, c) = ratios;
    if a < 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(DataError::BadRatios(ratios));
    }
    if n < 3 {
        return Err(DataError::TooFewWindows(n));
    }
    // the nudge keeps products like 0.7 * 100 from flooring to 69
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let train = floor(a).min(n);
    let val = floor(b).min(n - train);
    Ok((train, val, n - train - val))
}

/// Shuffles with the seeded PRNG and partitions by the floor rule. Windows
/// are stored in shuffled order.
pub fn split(windows: Vec<Window>, ratios: (f64, f64, f64), seed: u64) -> Result<Dataset, DataError> {
    let (train, val, _) = partition_sizes(windows.len(), ratios)?;
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));

    let mut slots: Vec<Option<Window>> = windows.into_iter().map(Some).collect();
    let shuffled: Vec<Window> = order
        .iter()
        .map(|&i| slots[i].take().expect("permutation visits each index once"))
        .collect();
    let partitions = (0..shuffled.len())
        .map(|i| {
            if i < train {
                Partition::Train
            } else if i < train + val {
                Partition::Val
            } else {
                Partition::Test
            }
        })
        .collect();
    Ok(Dataset::new(shuffled, partitions))
}

/// Balances and splits according to the leak mode.
pub fn build_dataset(windows: Vec<Window>, config: &SplitConfig) -> Result<Dataset, DataError> {
    match config.leak_mode {
        LeakMode::Paper => {
            let balanced = balance(&windows, config.balance.factor, &config.balance.classes);
            split(balanced, config.ratios, config.seed)
        }
        LeakMode::NoLeak => {
            let ds = split(windows, config.ratios, config.seed)?;
            let train: Vec<Window> = ds.part(Partition::Train).cloned().collect();
            let copies =
                balance(&train, config.balance.factor, &config.balance.classes).split_off(train.len());
            let Dataset {
                mut windows,
                mut partitions,
                ..
            } = ds;
            partitions.extend(std::iter::repeat_n(Partition::Train, copies.len()));
            windows.extend(copies);
            Ok(Dataset::new(windows, partitions))
        }
    }
}
