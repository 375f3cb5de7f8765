use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Dataset, Label};
use crate::error::{MomError, Result};

const OUTLIER_COLUMN: &str = "is_outlier";

/// Which column holds the label.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// Header name; requires a header row.
    Name(String),
    /// Zero-based column index.
    Index(usize),
    /// Last column, not counting a trailing `is_outlier` column.
    #[default]
    Last,
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s == "last" {
            LabelColumn::Last
        } else if let Ok(i) = s.parse() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(s.to_owned())
        })
    }
}

pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MomError::io(path, e))?;
    read_csv(file, label)
}

/// Parses comma-separated samples. A first row containing any non-numeric
/// field is taken as a header. Labels may be encoded as {-1, 1} or {0, 1}.
/// A header column named `is_outlier` is read as ground-truth flags rather
/// than as a feature.
pub fn read_csv<R: Read>(reader: R, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| MomError::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        rows.push(rec);
    }
    let first = rows.first().ok_or(MomError::Parse {
        row: 1,
        message: "empty file".into(),
    })?;
    let width = first.len();
    let header: Option<Vec<String>> = first
        .iter()
        .any(|f| f.parse::<f64>().is_err())
        .then(|| first.iter().map(str::to_owned).collect());

    let flag_col = header
        .as_ref()
        .and_then(|h| h.iter().position(|c| c == OUTLIER_COLUMN));
    let label_idx = match label {
        LabelColumn::Last => match flag_col {
            Some(f) if f == width - 1 && width > 1 => width - 2,
            _ => width - 1,
        },
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| MomError::argument(format!("no column named {name:?}")))?,
    };
    let outlier_idx = flag_col.filter(|&i| i != label_idx);
    if label_idx >= width {
        return Err(MomError::argument(format!(
            "label column {label_idx} out of range for {width} columns"
        )));
    }
    let dim = width - 1 - usize::from(outlier_idx.is_some());
    if dim == 0 {
        return Err(MomError::argument("no feature columns"));
    }

    let skip = usize::from(header.is_some());
    let mut features = Vec::with_capacity((rows.len() - skip) * dim);
    let mut labels = Vec::with_capacity(rows.len() - skip);
    let mut flags = outlier_idx.map(|_| Vec::with_capacity(rows.len() - skip));
    for (r, rec) in rows.iter().enumerate().skip(skip) {
        let row = r + 1;
        if rec.len() != width {
            return Err(MomError::Dimension {
                expected: width,
                found: rec.len(),
            });
        }
        for (c, field) in rec.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| MomError::Parse {
                row,
                message: format!("column {c}: {field:?} is not a number"),
            })?;
            if c == label_idx {
                labels.push(parse_label(value).ok_or_else(|| MomError::Label {
                    row,
                    value: field.to_owned(),
                })?);
            } else if Some(c) == outlier_idx {
                flags.as_mut().expect("flags allocated").push(value != 0.0);
            } else {
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(MomError::Parse {
            row: rows.len(),
            message: "no data rows".into(),
        });
    }
    Dataset::with_outlier_flags(dim, features, labels, flags)
}

fn parse_label(v: f64) -> Option<Label> {
    if v == 1.0 {
        Some(Label::Positive)
    } else if v == -1.0 || v == 0.0 {
        Some(Label::Negative)
    } else {
        None
    }
}

/// Writes `x0,..,x{p-1},label[,is_outlier]` with a header row.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| MomError::Parse {
        row: 0,
        message: e.to_string(),
    };
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    if ds.outlier_flags().is_some() {
        header.push(OUTLIER_COLUMN.into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.features(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(ds.label(i).to_string());
        if let Some(flags) = ds.outlier_flags() {
            rec.push(u8::from(flags[i]).to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| MomError::Parse {
        row: ds.len(),
        message: e.to_string(),
    })
}
