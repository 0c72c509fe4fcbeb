//! Versioned, checksummed text container for trained models.
//!
//! ```text
//! format=puffscan-model
//! version=1
//! family=mlp
//! architecture=12,8
//! loss=bce
//! seed=...
//! feature_order=xyz-interleaved
//! sample_rate_hz=25
//! window=20
//! meta.<key>=<value>          (zero or more, sorted)
//! blocks=6
//! block layer0.weight 60 12
//! <one line per row, space-separated shortest round-trip floats>
//! ...
//! checksum=sha256:<hex of every byte above this line>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dataset::{FeatureOrder, DEFAULT_SAMPLE_RATE_HZ, WINDOW_LEN};
use crate::numerics::LossKind;

use super::{Architecture, Classifier, Family, LstmModel, MlpModel, Model, ModelError};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "puffscan-model";
const CHECKSUM_PREFIX: &str = "checksum=sha256:";

/// Data-pipeline facts a model depends on at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub feature_order: FeatureOrder,
    pub sample_rate_hz: f64,
    pub window: usize,
    /// Free-form provenance (`meta.` keys), kept sorted.
    pub extra: BTreeMap<String, String>,
}

impl Default for ModelHeader {
    fn default() -> Self {
        Self {
            feature_order: FeatureOrder::Interleaved,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            window: WINDOW_LEN,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub header: ModelHeader,
}

impl ModelFile {
    pub fn new(model: Model, header: ModelHeader) -> Self {
        Self { model, header }
    }

    pub fn to_text(&self) -> String {
        let model = &self.model;
        let mut body = String::new();
        let h = &self.header;
        let _ = writeln!(body, "format={FORMAT_NAME}");
        let _ = writeln!(body, "version={FORMAT_VERSION}");
        let _ = writeln!(body, "family={}", model.family());
        let _ = writeln!(body, "architecture={}", model.architecture().spec_string());
        let _ = writeln!(body, "loss={}", model.loss_kind());
        let _ = writeln!(body, "seed={}", model.seed());
        let _ = writeln!(body, "feature_order={}", h.feature_order);
        let _ = writeln!(body, "sample_rate_hz={}", h.sample_rate_hz);
        let _ = writeln!(body, "window={}", h.window);
        for (k, v) in &h.extra {
            let _ = writeln!(body, "meta.{k}={v}");
        }
        let blocks = model.param_blocks();
        let shapes = block_shapes(model);
        let _ = writeln!(body, "blocks={}", blocks.len());
        for ((name, (rows, cols)), values) in model.param_names().iter().zip(&shapes).zip(&blocks) {
            let _ = writeln!(body, "block {name} {rows} {cols}");
            for row in values.chunks(*cols) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(body, "{}", line.join(" "));
            }
        }
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        body.push_str(CHECKSUM_PREFIX);
        body.push_str(&digest);
        body.push('\n');
        body
    }

    /// Hex SHA-256 recorded in the trailer of [`ModelFile::to_text`].
    pub fn checksum(&self) -> String {
        let text = self.to_text();
        let start = text.rfind(CHECKSUM_PREFIX).expect("trailer present") + CHECKSUM_PREFIX.len();
        text[start..].trim().to_string()
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let body = verify_checksum(text)?;
        let mut lines = body.lines().enumerate().map(|(i, l)| (i + 1, l));

        let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut extra = BTreeMap::new();
        let block_count: usize;
        loop {
            let Some((n, line)) = lines.next() else {
                return Err(ModelError::Truncated("header ends before `blocks=`".into()));
            };
            let (k, v) = line.split_once('=').ok_or_else(|| ModelError::Malformed {
                line: n,
                message: format!("expected key=value, found `{line}`"),
            })?;
            if k == "blocks" {
                block_count = v.parse().map_err(|_| ModelError::Malformed {
                    line: n,
                    message: "bad block count".into(),
                })?;
                break;
            }
            if let Some(meta_key) = k.strip_prefix("meta.") {
                extra.insert(meta_key.to_string(), v.to_string());
            } else {
                header.insert(k.to_string(), (n, v.to_string()));
            }
        }

        let field = |key: &str| -> Result<&(usize, String), ModelError> {
            header.get(key).ok_or_else(|| ModelError::Malformed {
                line: 0,
                message: format!("missing header key `{key}`"),
            })
        };
        fn parsed<T: std::str::FromStr>(entry: &(usize, String), key: &str) -> Result<T, ModelError> {
            entry.1.parse().map_err(|_| ModelError::Malformed {
                line: entry.0,
                message: format!("bad value `{}` for `{key}`", entry.1),
            })
        }

        if field("format")?.1 != FORMAT_NAME {
            return Err(ModelError::Malformed {
                line: field("format")?.0,
                message: format!("not a {FORMAT_NAME} file"),
            });
        }
        let version = &field("version")?.1;
        if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
            return Err(ModelError::Version(version.clone()));
        }
        let family: Family = parsed(field("family")?, "family")?;
        let architecture = Architecture::parse(family, &field("architecture")?.1)?;
        let loss: LossKind = parsed(field("loss")?, "loss")?;
        let seed: u64 = parsed(field("seed")?, "seed")?;
        let header = ModelHeader {
            feature_order: parsed(field("feature_order")?, "feature_order")?,
            sample_rate_hz: parsed(field("sample_rate_hz")?, "sample_rate_hz")?,
            window: parsed(field("window")?, "window")?,
            extra,
        };

        let mut model = Model::init(&architecture, loss, seed)?;
        let names = model.param_names();
        let shapes = block_shapes(&model);
        if block_count != names.len() {
            return Err(ModelError::Malformed {
                line: 0,
                message: format!("{architecture:?} has {} blocks, file declares {block_count}", names.len()),
            });
        }
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(block_count);
        for (name, &(rows, cols)) in names.iter().zip(&shapes) {
            let Some((n, line)) = lines.next() else {
                return Err(ModelError::Truncated(format!("missing block `{name}`")));
            };
            let expected = format!("block {name} {rows} {cols}");
            if line != expected {
                return Err(ModelError::Malformed {
                    line: n,
                    message: format!("expected `{expected}`, found `{line}`"),
                });
            }
            let mut block = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let Some((n, line)) = lines.next() else {
                    return Err(ModelError::Truncated(format!("block `{name}` is short")));
                };
                let row = line
                    .split_ascii_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| ModelError::Malformed {
                        line: n,
                        message: e.to_string(),
                    })?;
                if row.len() != cols || row.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::Malformed {
                        line: n,
                        message: format!("expected {cols} finite values"),
                    });
                }
                block.extend(row);
            }
            values.push(block);
        }
        if let Some((n, line)) = lines.next() {
            return Err(ModelError::Malformed {
                line: n,
                message: format!("unexpected trailing content `{line}`"),
            });
        }
        for (dst, src) in model.param_blocks_mut().into_iter().zip(&values) {
            dst.copy_from_slice(src);
        }
        Ok(Self { model, header })
    }
}

fn verify_checksum(text: &str) -> Result<&str, ModelError> {
    let trimmed = text.trim_end_matches('\n');
    let start = trimmed.rfind('\n').map_or(0, |i| i + 1);
    let last = &trimmed[start..];
    let Some(expected) = last.strip_prefix(CHECKSUM_PREFIX) else {
        return Err(ModelError::Truncated("checksum trailer missing".into()));
    };
    let body = &text[..start];
    let computed = hex::encode(Sha256::digest(body.as_bytes()));
    if computed != expected.trim() {
        return Err(ModelError::Checksum {
            expected: expected.trim().to_string(),
            computed,
        });
    }
    Ok(body)
}

fn block_shapes(model: &Model) -> Vec<(usize, usize)> {
    match model {
        Model::Mlp(m) => m
            .layers
            .iter()
            .flat_map(|l| [l.weights.shape(), (1, l.bias.len())])
            .collect(),
        Model::Lstm(m) => {
            let mut shapes: Vec<(usize, usize)> = m
                .cells
                .iter()
                .flat_map(|c| [c.kernel.shape(), c.recurrent.shape(), (1, c.bias.len())])
                .collect();
            if let Some(r) = &m.readout {
                shapes.push(r.weights.shape());
                shapes.push((1, r.bias.len()));
            }
            shapes
        }
    }
}

pub fn save(file: &ModelFile, path: impl AsRef<Path>) -> Result<(), ModelError> {
    if file.model.param_blocks().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
        return Err(ModelError::Config("refusing to save a model with non-finite parameters".into()));
    }
    let path = path.as_ref();
    fs::write(path, file.to_text()).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelFile, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ModelFile::parse(&text)
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<(MlpModel, ModelHeader), ModelError> {
    let file = load(path)?;
    match file.model {
        Model::Mlp(m) => Ok((m, file.header)),
        other => Err(ModelError::FamilyMismatch {
            expected: Family::Mlp,
            found: other.family(),
        }),
    }
}

pub fn load_lstm(path: impl AsRef<Path>) -> Result<(LstmModel, ModelHeader), ModelError> {
    let file = load(path)?;
    match file.model {
        Model::Lstm(m) => Ok((m, file.header)),
        other => Err(ModelError::FamilyMismatch {
            expected: Family::Lstm,
            found: other.family(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LstmLayout;
    use crate::numerics::Matrix;

    fn mlp_file() -> ModelFile {
        let model = Model::init(&Architecture::Mlp { hidden: vec![12, 8] }, LossKind::Bce, 77).unwrap();
        let mut header = ModelHeader::default();
        header.extra.insert("stride".into(), "1".into());
        ModelFile::new(model, header)
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        for arch in [
            Architecture::Mlp { hidden: vec![12, 8] },
            Architecture::Lstm { units: 3, layout: LstmLayout::Stacked },
            Architecture::Lstm { units: 2, layout: LstmLayout::Wide },
        ] {
            let mut model = Model::init(&arch, LossKind::Mse, 5).unwrap();
            // include awkward values
            model.param_blocks_mut()[0][0] = 1e-300;
            model.param_blocks_mut()[0][1] = -0.1 - 0.2;
            let file = ModelFile::new(model, ModelHeader::default());
            let back = ModelFile::parse(&file.to_text()).unwrap();
            assert_eq!(back, file);
            let x = Matrix::from_vec(2, 60, (0..120).map(|i| (i as f64).sin()).collect()).unwrap();
            assert_eq!(
                back.model.forward(&x).unwrap().as_slice(),
                file.model.forward(&x).unwrap().as_slice()
            );
        }
    }

    #[test]
    fn checksum_corruption_detected() {
        let text = mlp_file().to_text();
        let tampered = text.replacen("block layer0.bias 1 12\n0e0", "block layer0.bias 1 12\n1e0", 1);
        assert_ne!(tampered, text);
        assert!(matches!(ModelFile::parse(&tampered), Err(ModelError::Checksum { .. })));

        let bad_sum = format!("{}0\n", text.trim_end());
        assert!(matches!(ModelFile::parse(&bad_sum), Err(ModelError::Checksum { .. })));
    }

    #[test]
    fn truncation_detected() {
        let text = mlp_file().to_text();
        let cut = &text[..text.len() / 2];
        assert!(matches!(ModelFile::parse(cut), Err(ModelError::Truncated(_))));
    }

    #[test]
    fn version_mismatch_detected() {
        let text = mlp_file().to_text();
        let start = text.rfind(CHECKSUM_PREFIX).unwrap();
        let body = text[..start].replace("version=1\n", "version=2\n");
        let resealed = format!("{body}{CHECKSUM_PREFIX}{}\n", hex::encode(Sha256::digest(body.as_bytes())));
        assert!(matches!(ModelFile::parse(&resealed), Err(ModelError::Version(v)) if v == "2"));
    }

    #[test]
    fn family_mismatch_on_typed_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lstm.model");
        let model = Model::init(&Architecture::Lstm { units: 2, layout: LstmLayout::Stacked }, LossKind::Mse, 1).unwrap();
        save(&ModelFile::new(model, ModelHeader::default()), &path).unwrap();
        assert!(matches!(
            load_mlp(&path),
            Err(ModelError::FamilyMismatch { expected: Family::Mlp, found: Family::Lstm })
        ));
        assert!(load_lstm(&path).is_ok());
    }

    #[test]
    fn header_records_cells_and_metadata() {
        let model = Model::init(&Architecture::Lstm { units: 3, layout: LstmLayout::Stacked }, LossKind::Mse, 1).unwrap();
        let text = ModelFile::new(model, ModelHeader::default()).to_text();
        assert!(text.contains("family=lstm\n"));
        assert!(text.contains("architecture=3\n"));
        assert!(text.contains("feature_order=xyz-interleaved\n"));
        assert!(mlp_file().to_text().contains("meta.stride=1\n"));
    }
}
