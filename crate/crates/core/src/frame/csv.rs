use std::path::Path;

use super::infer::{infer_column_type, parse_cells, DEFAULT_CATEGORICAL_THRESHOLD};
use super::{Column, DataTable, FrameError};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// When false, columns are named `0`, `1`, ... and the first row is data.
    pub has_header: bool,
    pub categorical_threshold: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            categorical_threshold: DEFAULT_CATEGORICAL_THRESHOLD,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, name: &str, options: &CsvOptions) -> Result<DataTable, FrameError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FrameError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv_str(&text, name, options)
}

/// Parses RFC-4180 text. Ragged rows are rejected with their 0-based data row index.
pub fn read_csv_str(text: &str, name: &str, options: &CsvOptions) -> Result<DataTable, FrameError> {
    let mut reader = ::csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut index = 0usize;
    while let Some(record) = records.next() {
        let record = record.map_err(|e| FrameError::Csv {
            row: index,
            message: e.to_string(),
        })?;
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        match &header {
            None if options.has_header => {
                header = Some(fields);
                continue;
            }
            None => {
                header = Some((0..fields.len()).map(|i| i.to_string()).collect());
            }
            Some(_) => {}
        }
        let expected = header.as_ref().map_or(0, Vec::len);
        if fields.len() != expected {
            return Err(FrameError::RaggedRow {
                row: index,
                expected,
                found: fields.len(),
            });
        }
        rows.push(fields);
        index += 1;
    }

    let header = header.unwrap_or_default();
    let mut columns = Vec::with_capacity(header.len());
    for (j, col_name) in header.iter().enumerate() {
        let raw: Vec<&str> = rows.iter().map(|r| r[j].as_str()).collect();
        let dtype = infer_column_type(&raw, options.categorical_threshold);
        columns.push(Column::new(col_name.clone(), dtype, parse_cells(&raw, dtype))?);
    }
    DataTable::with_rows(name, columns, rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Dtype, Value};

    #[test]
    fn quoted_fields_and_embedded_commas() {
        let t = read_csv_str("a,b\n\"x, y\",1\n\"say \"\"hi\"\"\",2\n", "t", &CsvOptions::default()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.column("a").unwrap().values()[0], Value::str("x, y"));
        assert_eq!(t.column("a").unwrap().values()[1], Value::str("say \"hi\""));
    }

    #[test]
    fn ragged_row_reports_index() {
        let err = read_csv_str("a,b\n1,2\n3\n", "t", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, FrameError::RaggedRow { row: 1, expected: 2, found: 1 }), "{err}");
    }

    #[test]
    fn header_only() {
        let t = read_csv_str("a,b\n", "t", &CsvOptions::default()).unwrap();
        assert_eq!(t.n_rows(), 0);
        assert!(t.columns().iter().all(|c| c.dtype() == Dtype::String));
    }

    #[test]
    fn headerless_uses_positional_names() {
        let opts = CsvOptions {
            has_header: false,
            ..CsvOptions::default()
        };
        let t = read_csv_str("1;2\n3;4\n", "t", &CsvOptions { delimiter: b';', ..opts }).unwrap();
        assert_eq!(t.column_names(), vec!["0", "1"]);
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/x.csv", "x", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, FrameError::Io { .. }));
    }
}
