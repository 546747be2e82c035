use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::loss::Label;

/// Dense feature matrix with binary labels and optional group ids.
///
/// Rows are instances, columns are features. Group ids identify the subject a
/// record belongs to, for leave-one-group-out evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<Label>,
    group_ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<Label>) -> Result<Self> {
        Self::with_groups(features, labels, None)
    }

    pub fn with_groups(
        features: Array2<f64>,
        labels: Vec<Label>,
        group_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let (m, n) = features.dim();
        if m == 0 {
            return Err(Error::InvalidInput("dataset has no instances".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no features".into()));
        }
        if labels.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: labels.len(),
            });
        }
        if let Some(groups) = &group_ids {
            if groups.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: groups.len(),
                });
            }
        }
        check_finite(features.view())?;
        Ok(Dataset {
            features,
            labels,
            group_ids,
        })
    }

    /// Convenience constructor from row vectors and 0/1 labels.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let features = Array2::from_shape_vec((rows.len(), n), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let labels = labels
            .iter()
            .map(|&y| Label::try_from(y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, labels)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn group_ids(&self) -> Option<&[String]> {
        self.group_ids.as_deref()
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Copy of the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let group_ids = self
            .group_ids
            .as_ref()
            .map(|g| indices.iter().map(|&i| g[i].clone()).collect());
        Dataset::with_groups(features, labels, group_ids)
    }
}

pub(crate) fn check_finite(features: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in features.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "feature value at row {row}, column {col} is not finite"
            )));
        }
    }
    Ok(())
}
