use serde::{Deserialize, Serialize};

use super::{MetricFrame, MetricsError, Result, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Training,
    Validation,
}

/// Rows are scrapes in time order, columns are metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub timestamps: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, timestamps: Vec<f64>, rows: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(timestamps.len(), rows.len());
        Dataset { columns, timestamps, rows, split: None }
    }

    pub fn from_frames(columns: Vec<String>, frames: &[MetricFrame]) -> Self {
        Dataset {
            columns,
            timestamps: frames.iter().map(|f| f.timestamp).collect(),
            rows: frames.iter().map(|f| f.values.clone()).collect(),
            split: None,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[index]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn series(&self, index: usize) -> Result<TimeSeries> {
        let metric = self.columns[index].parse()?;
        Ok(TimeSeries::new(
            metric,
            self.timestamps.iter().copied().zip(self.column(index)).collect(),
        ))
    }

    /// First `train_fraction` of rows for training, the rest for validation.
    pub fn split_chronological(&self, train_fraction: f64) -> (Dataset, Dataset) {
        let cut = ((self.len() as f64) * train_fraction).round() as usize;
        let cut = cut.min(self.len());
        let part = |range: std::ops::Range<usize>, split| Dataset {
            columns: self.columns.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            rows: self.rows[range].to_vec(),
            split: Some(split),
        };
        (part(0..cut, Split::Training), part(cut..self.len(), Split::Validation))
    }
}

/// Per-column min-max scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(dataset: &Dataset) -> Result<Scaler> {
        let first = dataset.rows.first().ok_or(MetricsError::EmptyDataset)?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in &dataset.rows[1..] {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    fn check(&self, width: usize) -> Result<()> {
        if width != self.width() {
            return Err(MetricsError::ScalerWidth { scaler: self.width(), dataset: width });
        }
        Ok(())
    }

    /// Constant columns map to 0.5.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    (v - self.min[j]) / range
                } else {
                    0.5
                }
            })
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    v * range + self.min[j]
                } else {
                    self.min[j]
                }
            })
            .collect()
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        self.check(dataset.width())?;
        Ok(Dataset {
            rows: dataset.rows.iter().map(|r| self.transform_row(r)).collect(),
            ..dataset.clone()
        })
    }

    pub fn inverse(&self, dataset: &Dataset) -> Result<Dataset> {
        self.check(dataset.width())?;
        Ok(Dataset {
            rows: dataset.rows.iter().map(|r| self.inverse_row(r)).collect(),
            ..dataset.clone()
        })
    }
}

/// Fits a [`Scaler`] on `dataset` and maps it into `[0, 1]`.
pub fn normalize_minmax(dataset: &Dataset) -> Result<(Dataset, Scaler)> {
    let scaler = Scaler::fit(dataset)?;
    let scaled = scaler.transform(dataset)?;
    Ok((scaled, scaler))
}

pub fn denormalize(dataset01: &Dataset, scaler: &Scaler) -> Result<Dataset> {
    scaler.inverse(dataset01)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_column(values: &[f64]) -> Dataset {
        Dataset::new(
            vec!["m{a}".into()],
            (0..values.len()).map(|i| i as f64).collect(),
            values.iter().map(|&v| vec![v]).collect(),
        )
    }

    #[test]
    fn column_scales_to_unit_interval() {
        let (d, _) = normalize_minmax(&single_column(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(d.column(0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_half() {
        let (d, s) = normalize_minmax(&single_column(&[3.0, 3.0, 3.0])).unwrap();
        assert_eq!(d.column(0), vec![0.5; 3]);
        assert_eq!(denormalize(&d, &s).unwrap().column(0), vec![3.0; 3]);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(normalize_minmax(&single_column(&[])), Err(MetricsError::EmptyDataset)));
    }

    #[test]
    fn chronological_split_is_disjoint_and_exhaustive() {
        let d = single_column(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (a, b) = d.split_chronological(0.8);
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(a.split, Some(Split::Training));
        assert_eq!(b.timestamps, vec![8.0, 9.0]);
    }

    proptest! {
        #[test]
        fn round_trip_within_1e_12(
            rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 111), 2..20)
        ) {
            let n = rows.len();
            let d = Dataset::new((0..111).map(|i| format!("m{{{i}}}")).collect(), (0..n).map(|i| i as f64).collect(), rows);
            let (scaled, scaler) = normalize_minmax(&d).unwrap();
            for row in &scaled.rows {
                for v in row {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
            let back = denormalize(&scaled, &scaler).unwrap();
            for (r0, r1) in d.rows.iter().zip(&back.rows) {
                for (j, (a, b)) in r0.iter().zip(r1).enumerate() {
                    if scaler.max[j] > scaler.min[j] {
                        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(scaler.max[j] - scaler.min[j]));
                    }
                }
            }
        }
    }
}
