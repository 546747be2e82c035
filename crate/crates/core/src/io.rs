//! CSV ingestion and prediction output.
//!
//! Input files are comma-separated with a required header row. One column
//! holds the 0/1 label, an optional column holds group ids, and every other
//! column is a numeric feature, kept in header order.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::Label;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvSchema {
    pub label_column: String,
    pub group_column: Option<String>,
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        CsvSchema {
            label_column: label_column.into(),
            group_column: None,
        }
    }

    pub fn with_group(mut self, group_column: impl Into<String>) -> Self {
        self.group_column = Some(group_column.into());
        self
    }
}

struct Table {
    feature_names: Vec<String>,
    features: Array2<f64>,
    labels: Option<Vec<Label>>,
    groups: Option<Vec<String>>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
}

fn read_table(
    reader: impl std::io::Read,
    label_column: Option<&str>,
    group_column: Option<&str>,
) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_at = label_column
        .map(|c| column_index(&headers, c))
        .transpose()?;
    let group_at = group_column
        .map(|c| column_index(&headers, c))
        .transpose()?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| Some(c) != label_at && Some(c) != group_at)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |c: usize| record.get(c).unwrap_or("").trim();
        for &c in &feature_cols {
            let raw = cell(c);
            let v: f64 = raw.parse().map_err(|_| Error::Ingestion {
                row,
                column: headers[c].to_string(),
                message: format!("cannot parse `{raw}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row,
                    column: headers[c].to_string(),
                    message: format!("non-finite value `{raw}`"),
                });
            }
            values.push(v);
        }
        if let Some(c) = label_at {
            let raw = cell(c);
            let label = match raw.parse::<f64>() {
                Ok(0.0) => Label::Negative,
                Ok(1.0) => Label::Positive,
                _ => {
                    return Err(Error::Ingestion {
                        row,
                        column: headers[c].to_string(),
                        message: format!("label must be 0 or 1, got `{raw}`"),
                    })
                }
            };
            labels.push(label);
        }
        if let Some(c) = group_at {
            groups.push(cell(c).to_string());
        }
        rows += 1;
    }
    let features = Array2::from_shape_vec((rows, feature_cols.len()), values)
        .expect("one value per feature column per row");
    Ok(Table {
        feature_names: feature_cols
            .iter()
            .map(|&c| headers[c].to_string())
            .collect(),
        features,
        labels: label_at.map(|_| labels),
        groups: group_at.map(|_| groups),
    })
}

/// Loads a labelled dataset. Row and column order are preserved.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

pub fn read_dataset(reader: impl std::io::Read, schema: &CsvSchema) -> Result<Dataset> {
    let table = read_table(
        reader,
        Some(&schema.label_column),
        schema.group_column.as_deref(),
    )?;
    Dataset::with_groups(
        table.features,
        table.labels.expect("label column requested"),
        table.groups,
    )
}

/// Loads only the feature matrix, skipping the named columns if present.
pub fn load_features(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
    group_column: Option<&str>,
) -> Result<(Vec<String>, Array2<f64>)> {
    let file = std::fs::File::open(path)?;
    let table = read_table(file, label_column, group_column)?;
    Ok((table.feature_names, table.features))
}

/// The four prediction forms a model can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    #[default]
    Raw,
    Sigmoid,
    Determine,
    OneHot,
}

impl std::str::FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(OutputMode::Raw),
            "sigmoid" => Ok(OutputMode::Sigmoid),
            "determine" => Ok(OutputMode::Determine),
            "onehot" => Ok(OutputMode::OneHot),
            other => Err(Error::InvalidInput(format!(
                "unknown output mode `{other}`"
            ))),
        }
    }
}

pub fn write_predictions(
    out: &mut impl Write,
    mode: OutputMode,
    model: &crate::booster::BoostedModel,
    features: ndarray::ArrayView2<'_, f64>,
) -> Result<()> {
    match mode {
        OutputMode::Raw => {
            writeln!(out, "raw")?;
            for v in model.predict_raw(features)? {
                writeln!(out, "{v:?}")?;
            }
        }
        OutputMode::Sigmoid => {
            writeln!(out, "probability")?;
            for v in model.predict_sigmoid(features)? {
                writeln!(out, "{v:?}")?;
            }
        }
        OutputMode::Determine => {
            writeln!(out, "label")?;
            for y in model.predict_determine(features)? {
                writeln!(out, "{}", u8::from(y))?;
            }
        }
        OutputMode::OneHot => {
            writeln!(out, "class_0,class_1")?;
            for row in model.predict_two_classes(features)?.outer_iter() {
                writeln!(out, "{},{}", row[0], row[1])?;
            }
        }
    }
    Ok(())
}
