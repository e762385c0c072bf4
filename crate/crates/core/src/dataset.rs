//! Labelled feature tables read from and written to CSV. The label column is
//! named `label`; every other column is a feature.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::ForestError;
use crate::forest::ForestModel;

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForestError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ForestError> {
        let mut csv = csv::Reader::from_reader(reader);
        let header: Vec<String> = csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let label_at = header.iter().position(|h| h == LABEL_COLUMN);
        let feature_names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(i, _)| Some(i) != label_at)
            .map(|(_, h)| h.clone())
            .collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in csv.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(feature_names.len());
            for (i, field) in record.iter().enumerate() {
                let field = field.trim();
                if Some(i) == label_at {
                    let label: f64 = field.parse().map_err(|_| {
                        ForestError::Schema(format!("row {}: label `{field}` is not a class index", line + 1))
                    })?;
                    if label < 0.0 || label.fract() != 0.0 {
                        return Err(ForestError::Schema(format!(
                            "row {}: label `{field}` is not a class index",
                            line + 1
                        )));
                    }
                    labels.push(label as usize);
                } else {
                    row.push(
                        field
                            .parse()
                            .map_err(|_| ForestError::Schema(format!("row {}: `{field}` is not a number", line + 1)))?,
                    );
                }
            }
            rows.push(row);
        }
        if label_at.is_none() {
            labels = vec![0; rows.len()];
        }
        Ok(Self {
            feature_names,
            rows,
            labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ForestError> {
        self.to_writer(std::fs::File::create(path)?)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), ForestError> {
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push(LABEL_COLUMN.to_string());
        csv.write_record(&header)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(f64::to_string).collect();
            fields.push(label.to_string());
            csv.write_record(&fields)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Rows with columns reordered to the model's feature order.
    pub fn aligned_rows(&self, model: &ForestModel) -> Result<Vec<Vec<f64>>, ForestError> {
        self.columns(&model.feature_names())
    }

    /// Rows restricted and reordered to the named columns.
    pub fn columns(&self, names: &[String]) -> Result<Vec<Vec<f64>>, ForestError> {
        let order = names
            .iter()
            .map(|name| {
                self.feature_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| ForestError::UnknownFeature(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i]).collect())
            .collect())
    }

    /// Splits off the first `ceil(fraction * len)` rows.
    pub fn split(&self, fraction: f64) -> (Self, Self) {
        let at = ((self.len() as f64 * fraction).ceil() as usize).min(self.len());
        let part = |range: std::ops::Range<usize>| Self {
            feature_names: self.feature_names.clone(),
            rows: self.rows[range.clone()].to_vec(),
            labels: self.labels[range].to_vec(),
        };
        (part(0..at), part(at..self.len()))
    }
}
