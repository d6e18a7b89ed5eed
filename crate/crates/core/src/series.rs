use chrono::{DateTime, Duration, Utc};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Hourly samples of a set of labelled quantities: rows are time, columns
/// are nodes or lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesEnsemble {
    timestamps: Vec<DateTime<Utc>>,
    labels: Vec<String>,
    values: DMatrix<f64>,
}

impl TimeSeriesEnsemble {
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        labels: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != timestamps.len() {
            return Err(Error::DimensionMismatch {
                context: "time series rows vs timestamps",
                expected: timestamps.len(),
                found: values.nrows(),
            });
        }
        if values.ncols() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "time series columns vs labels",
                expected: labels.len(),
                found: values.ncols(),
            });
        }
        for w in timestamps.windows(2) {
            if w[1] - w[0] != Duration::hours(1) {
                return Err(Error::validation(format!(
                    "timestamps must be strictly increasing with hourly spacing ({} -> {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            timestamps,
            labels,
            values,
        })
    }

    /// `hours` consecutive hourly stamps starting at `start`.
    pub fn hourly_index(start: DateTime<Utc>, hours: usize) -> Vec<DateTime<Utc>> {
        (0..hours)
            .map(|h| start + Duration::hours(h as i64))
            .collect()
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// T x D values.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn into_parts(self) -> (Vec<DateTime<Utc>>, Vec<String>, DMatrix<f64>) {
        (self.timestamps, self.labels, self.values)
    }

    /// Same timestamps, new labels and values.
    pub fn with_values(&self, labels: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        Self::new(self.timestamps.clone(), labels, values)
    }

    /// Errors unless both series share timestamps and labels.
    pub fn check_aligned(&self, other: &Self) -> Result<()> {
        if self.timestamps != other.timestamps {
            return Err(Error::validation("time series have different timestamps"));
        }
        if self.labels != other.labels {
            return Err(Error::validation(
                "time series have different column labels",
            ));
        }
        Ok(())
    }

    /// Column means over time.
    pub fn column_means(&self) -> Vec<f64> {
        let t = self.len().max(1) as f64;
        self.values
            .column_iter()
            .map(|c| c.iter().sum::<f64>() / t)
            .collect()
    }

    /// Reorders (and selects) columns to match `labels`.
    pub fn select(&self, labels: &[String]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| {
                self.labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::validation(format!("time series has no column `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self.values.select_columns(idx.iter());
        self.with_values(labels.to_vec(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn start() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2011, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn rejects_irregular_spacing() {
        let ts = vec![start(), start() + Duration::hours(2)];
        let r = TimeSeriesEnsemble::new(ts, vec!["a".into()], DMatrix::zeros(2, 1));
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_label_mismatch() {
        let ts = TimeSeriesEnsemble::hourly_index(start(), 3);
        let r = TimeSeriesEnsemble::new(ts, vec!["a".into()], DMatrix::zeros(3, 2));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn select_reorders() {
        let ts = TimeSeriesEnsemble::hourly_index(start(), 2);
        let s = TimeSeriesEnsemble::new(
            ts,
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
        )
        .unwrap();
        let r = s.select(&["b".into(), "a".into()]).unwrap();
        assert_eq!(r.values()[(1, 0)], 4.0);
        assert!(s.select(&["c".into()]).is_err());
    }
}
