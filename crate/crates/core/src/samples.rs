use crate::error::{Error, Result};

/// Row-major `rows × labels.len()` matrix of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    labels: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(labels: Vec<String>, data: Vec<f64>) -> Result<SampleMatrix> {
        let cols = labels.len();
        if cols == 0 {
            if !data.is_empty() {
                return Err(Error::DimensionMismatch("data given for zero columns".into()));
            }
            return Ok(SampleMatrix { labels, rows: 0, data });
        }
        if data.len() % cols != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not fill rows of {cols} columns",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("sample contains non-finite value {bad}")));
        }
        Ok(SampleMatrix {
            labels,
            rows: data.len() / cols,
            data,
        })
    }

    /// Zero-column matrices still carry a row count.
    pub(crate) fn with_rows(labels: Vec<String>, rows: usize, data: Vec<f64>) -> SampleMatrix {
        debug_assert_eq!(data.len(), rows * labels.len());
        SampleMatrix { labels, rows, data }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    pub fn column_by_label(&self, label: &str) -> Option<Vec<f64>> {
        self.labels.iter().position(|l| l == label).map(|j| self.column(j))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> Vec<f64> {
        let c = self.cols();
        let mut m = vec![0.0; c];
        for r in self.iter_rows() {
            for (acc, x) in m.iter_mut().zip(r) {
                *acc += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= self.rows as f64);
        m
    }

    /// Unbiased sample covariance, row-major `cols × cols`.
    pub fn covariance(&self) -> Vec<f64> {
        let c = self.cols();
        let mu = self.mean();
        let mut s = vec![0.0; c * c];
        for r in self.iter_rows() {
            for a in 0..c {
                let da = r[a] - mu[a];
                for b in 0..c {
                    s[a * c + b] += da * (r[b] - mu[b]);
                }
            }
        }
        let denom = (self.rows.max(2) - 1) as f64;
        s.iter_mut().for_each(|x| *x /= denom);
        s
    }
}
