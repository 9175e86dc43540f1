//! Dataset CSV ingestion and emission. Features are parsed as reals; the
//! label column maps to class indices in first-appearance order of the
//! label strings, so arbitrary label text works.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use gsgd_core::data::Dataset;
use gsgd_core::model::Example;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub has_header: bool,
    /// 0-based label column; None means the last column.
    pub label_col: Option<usize>,
    pub delimiter: u8,
    /// When set, a label outside this list is a fatal error (strict mode).
    pub expected_classes: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            has_header: false,
            label_col: None,
            delimiter: b',',
            expected_classes: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub header: Option<Vec<String>>,
    /// Resolved 0-based label column.
    pub label_col: usize,
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadedCsv> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter)
        .flexible(false)
        .from_path(path)
        .with_context(|| format!("cannot open dataset {}", path.display()))?;

    let header = if schema.has_header {
        Some(
            reader
                .headers()
                .context("reading header")?
                .iter()
                .map(str::to_string)
                .collect::<Vec<String>>(),
        )
    } else {
        None
    };

    let mut class_names: Vec<String> = schema.expected_classes.clone().unwrap_or_default();
    let strict = schema.expected_classes.is_some();
    let mut examples = Vec::new();
    let mut width: Option<usize> = None;
    let mut label_col = 0usize;

    for (i, record) in reader.records().enumerate() {
        let row = i + 1 + usize::from(schema.has_header); // 1-based file line
        let record = record.with_context(|| format!("row {row}: malformed record"))?;
        let cols = record.len();
        if cols < 2 {
            bail!("row {row}: need at least one feature column and a label column");
        }
        if let Some(w) = width {
            if cols != w {
                bail!("row {row}: {cols} columns, expected {w}");
            }
        } else {
            width = Some(cols);
            label_col = match schema.label_col {
                Some(c) if c < cols => c,
                Some(c) => bail!("label column {c} out of range for {cols} columns"),
                None => cols - 1,
            };
        }

        let label_str = record.get(label_col).expect("checked width");
        let label = match class_names.iter().position(|c| c == label_str) {
            Some(k) => k,
            None if strict => bail!("row {row}: unknown label {label_str:?}"),
            None => {
                class_names.push(label_str.to_string());
                class_names.len() - 1
            }
        };

        let mut features = Vec::with_capacity(cols - 1);
        for (c, field) in record.iter().enumerate() {
            if c == label_col {
                continue;
            }
            let v: f64 = field.trim().parse().with_context(|| {
                format!("row {row}, column {}: invalid numeric value {field:?}", c + 1)
            })?;
            features.push(v);
        }
        examples.push(Example { features, label });
    }

    let feature_count = width.map(|w| w - 1).unwrap_or(0);
    if examples.is_empty() {
        bail!("dataset {} has no data rows", path.display());
    }
    Ok(LoadedCsv {
        dataset: Dataset {
            name,
            feature_count,
            class_count: class_names.len(),
            class_names,
            examples,
        },
        header,
        label_col,
    })
}

/// Write a dataset back out with the same column layout it was read with.
pub fn write_csv(
    path: &Path,
    dataset: &Dataset,
    header: Option<&[String]>,
    label_col: usize,
) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create output {}", path.display()))?;
    let mut out = BufWriter::new(file);
    if let Some(header) = header {
        writeln!(out, "{}", header.join(","))?;
    }
    for ex in &dataset.examples {
        let mut fields: Vec<String> = ex.features.iter().map(|v| v.to_string()).collect();
        let label = dataset.class_names[ex.label].clone();
        if label_col >= fields.len() {
            fields.push(label);
        } else {
            fields.insert(label_col, label);
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_binary_csv() {
        let f = write_tmp("1.0,2.0,yes\n3.5,4.5,no\n5.0,6.0,yes\n");
        let loaded = load_csv(f.path(), &CsvSchema::default()).unwrap();
        let ds = loaded.dataset;
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_count, 2);
        assert_eq!(ds.class_count, 2);
        assert_eq!(ds.class_names, ["yes", "no"]);
        assert_eq!(ds.examples[1].label, 1);
        assert_eq!(ds.examples[2].features, [5.0, 6.0]);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let f = write_tmp("1.0,2.0,a\n1.0,oops,b\n");
        let err = load_csv(f.path(), &CsvSchema::default()).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn header_and_label_col_override() {
        let f = write_tmp("label,f1,f2\npos,1,2\nneg,3,4\n");
        let schema = CsvSchema {
            has_header: true,
            label_col: Some(0),
            ..CsvSchema::default()
        };
        let loaded = load_csv(f.path(), &schema).unwrap();
        assert_eq!(loaded.dataset.feature_count, 2);
        assert_eq!(loaded.dataset.class_names, ["pos", "neg"]);
        assert_eq!(loaded.dataset.examples[1].features, [3.0, 4.0]);
        assert_eq!(loaded.header.as_deref().unwrap(), ["label", "f1", "f2"]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_tmp("1,2,a\n1,2,3,b\n");
        assert!(load_csv(f.path(), &CsvSchema::default()).is_err());
    }

    #[test]
    fn strict_mode_rejects_unknown_label() {
        let f = write_tmp("1,2,weird\n");
        let schema = CsvSchema {
            expected_classes: Some(vec!["yes".into(), "no".into()]),
            ..CsvSchema::default()
        };
        let err = load_csv(f.path(), &schema).unwrap_err();
        assert!(format!("{err:#}").contains("unknown label"));
    }

    #[test]
    fn round_trips_through_write() {
        let f = write_tmp("h1,h2,cls\n1.5,2,a\n3,4.25,b\n");
        let schema = CsvSchema {
            has_header: true,
            ..CsvSchema::default()
        };
        let loaded = load_csv(f.path(), &schema).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(
            out.path(),
            &loaded.dataset,
            loaded.header.as_deref(),
            loaded.label_col,
        )
        .unwrap();
        let mut reloaded = load_csv(out.path(), &schema).unwrap();
        reloaded.dataset.name = loaded.dataset.name.clone(); // names come from file stems
        assert_eq!(reloaded.dataset, loaded.dataset);
        assert_eq!(reloaded.header, loaded.header);
    }
}
