use std::collections::BTreeMap;

use crate::numerics::Matrix;

use super::DataError;

const MEAN_KEY: &str = "standardize.mean";
const SCALE_KEY: &str = "standardize.scale";

/// Per-feature z-scoring with statistics from the training partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features get 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self, DataError> {
        if x.rows() == 0 {
            return Err(DataError::BadWindowSpec("cannot fit feature scaling on zero rows".into()));
        }
        let n = x.rows() as f64;
        let mean: Vec<f64> = x.column_sums().iter().map(|s| s / n).collect();
        let mut var = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for (j, v) in x.row(r).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &mut Matrix) -> Result<(), DataError> {
        if x.cols() != self.mean.len() {
            return Err(DataError::BadWindowSpec(format!(
                "feature scaling fitted on {} columns, input has {}",
                self.mean.len(),
                x.cols()
            )));
        }
        for r in 0..x.rows() {
            for (j, v) in x.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        Ok(())
    }

    /// Stores the statistics as space-separated round-trip floats.
    pub fn write_meta(&self, meta: &mut BTreeMap<String, String>) {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        meta.insert(MEAN_KEY.into(), join(&self.mean));
        meta.insert(SCALE_KEY.into(), join(&self.scale));
    }

    /// `Ok(None)` when the keys are absent.
    pub fn read_meta(meta: &BTreeMap<String, String>) -> Result<Option<Self>, DataError> {
        let parse = |key: &str| -> Result<Option<Vec<f64>>, DataError> {
            meta.get(key)
                .map(|s| {
                    s.split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|e| DataError::Meta(format!("{key}: `{t}`: {e}"))))
                        .collect()
                })
                .transpose()
        };
        match (parse(MEAN_KEY)?, parse(SCALE_KEY)?) {
            (None, None) => Ok(None),
            (Some(mean), Some(scale)) if mean.len() == scale.len() => Ok(Some(Self { mean, scale })),
            _ => Err(DataError::Meta("feature scaling keys are incomplete or mismatched".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_columns_have_zero_mean_unit_variance() {
        let mut x = Matrix::from_rows(&[vec![1.0, 5.0, 2.0], vec![3.0, 5.0, 4.0], vec![5.0, 5.0, 9.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.scale[1], 1.0);
        s.apply(&mut x).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| x.get(r, j)).collect();
            let m = col.iter().sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-15);
            if j != 1 {
                let v = col.iter().map(|c| c * c).sum::<f64>() / 3.0;
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn meta_round_trip_is_exact() {
        let s = Standardizer {
            mean: vec![0.1 + 0.2, -1.0 / 3.0],
            scale: vec![1e-300, 7.0],
        };
        let mut meta = BTreeMap::new();
        s.write_meta(&mut meta);
        assert_eq!(Standardizer::read_meta(&meta).unwrap(), Some(s));
        assert_eq!(Standardizer::read_meta(&BTreeMap::new()).unwrap(), None);
    }
}
