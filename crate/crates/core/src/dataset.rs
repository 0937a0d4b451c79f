use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;
use crate::error::{DctError, Result};

/// One feature vector with its class and domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub class_id: usize,
    pub domain_id: usize,
}

/// Column-oriented collection of labeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub class_labels: Vec<usize>,
    pub domain_labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, class_labels: Vec<usize>, domain_labels: Vec<usize>) -> Result<Self> {
        let n = features.rows();
        if class_labels.len() != n || domain_labels.len() != n {
            return Err(DctError::ShapeMismatch {
                context: "Dataset labels".into(),
                expected: (n, n),
                got: (class_labels.len(), domain_labels.len()),
            });
        }
        Ok(Self {
            features,
            class_labels,
            domain_labels,
        })
    }

    pub fn from_samples(samples: &[LabeledSample]) -> Result<Self> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
        Self::new(
            Matrix::from_rows(&rows)?,
            samples.iter().map(|s| s.class_id).collect(),
            samples.iter().map(|s| s.domain_id).collect(),
        )
    }

    pub fn samples(&self) -> impl Iterator<Item = LabeledSample> + '_ {
        (0..self.len()).map(|i| LabeledSample {
            features: self.features.row(i).to_vec(),
            class_id: self.class_labels[i],
            domain_id: self.domain_labels[i],
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn num_domains(&self) -> usize {
        self.domain_labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            class_labels: indices.iter().map(|&i| self.class_labels[i]).collect(),
            domain_labels: indices.iter().map(|&i| self.domain_labels[i]).collect(),
        }
    }

    pub fn filter_domains(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.domain_labels[i])).collect();
        self.subset(&idx)
    }

    /// CSV with header `class_id,domain_id,f0,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_csv(writer, "f", &self.class_labels, &self.domain_labels, &self.features)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        read_labeled_csv(reader, "f")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// 17 significant digits, enough for an exact `f64` round trip.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_labeled_csv<W: Write>(
    writer: W,
    prefix: &str,
    classes: &[usize],
    domains: &[usize],
    values: &Matrix,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["class_id".to_string(), "domain_id".to_string()];
    header.extend((0..values.cols()).map(|k| format!("{prefix}{k}")));
    w.write_record(&header)?;
    for r in 0..values.rows() {
        let mut record = vec![classes[r].to_string(), domains[r].to_string()];
        record.extend(values.row(r).iter().map(|&v| format_f64(v)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_labeled_csv<R: Read>(reader: R, prefix: &str) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "class_id" || &header[1] != "domain_id" {
        return Err(DctError::Format("header must start with class_id,domain_id".into()));
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("{prefix}{k}") {
            return Err(DctError::Format(format!("unexpected column {name:?}, expected {prefix}{k}")));
        }
    }
    let dim = header.len() - 2;
    let mut classes = Vec::new();
    let mut domains = Vec::new();
    let mut data = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parse_label = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| DctError::Format(format!("row {line}: bad label {s:?}: {e}")))
        };
        classes.push(parse_label(&record[0])?);
        domains.push(parse_label(&record[1])?);
        for field in record.iter().skip(2) {
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|e| DctError::Format(format!("row {line}: bad value {field:?}: {e}")))?,
            );
        }
    }
    let n = classes.len();
    Dataset::new(Matrix::new(n, dim, data)?, classes, domains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            rows in proptest::collection::vec(
                (0usize..5, 0usize..4, proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3)),
                1..20,
            )
        ) {
            let samples: Vec<LabeledSample> = rows
                .into_iter()
                .map(|(c, d, f)| LabeledSample { features: f, class_id: c, domain_id: d })
                .collect();
            let ds = Dataset::from_samples(&samples).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let back = Dataset::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }

    #[test]
    fn header_is_checked() {
        let bad = "class,domain_id,f0\n0,0,1.0\n";
        assert!(Dataset::read_csv(bad.as_bytes()).is_err());
        let bad = "class_id,domain_id,e0\n0,0,1.0\n";
        assert!(Dataset::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn header_layout() {
        let ds = Dataset::new(Matrix::zeros(1, 2), vec![3], vec![1]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("class_id,domain_id,f0,f1\n3,1,"));
    }
}
