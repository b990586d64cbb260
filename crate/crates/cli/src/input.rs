//! Numeric column loading for `fit` and `compare`.

use std::path::Path;

use powertail::{Error, Result};

#[derive(Debug)]
pub struct Column {
    pub values: Vec<f64>,
    /// Header name of the column read, when the file has a header.
    pub name: Option<String>,
    /// Rows with an empty cell in the column.
    pub skipped_empty: usize,
}

/// Reads one numeric column from a CSV or one-value-per-line file.
///
/// A first row whose selected cell is not a number is treated as a header.
/// Without `column`, an `earnings` column is preferred, then the first column.
/// Empty cells are skipped; any other non-numeric cell is a schema error.
pub fn read_column(path: &Path, column: Option<&str>) -> Result<Column> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = reader.records();
    let first = match rows.next() {
        Some(r) => r?,
        None => {
            return Ok(Column {
                values: Vec::new(),
                name: None,
                skipped_empty: 0,
            })
        }
    };
    let header_like = first.iter().any(|c| !c.is_empty() && c.parse::<f64>().is_err());
    let (idx, name) = if header_like {
        let pick = match column {
            Some(c) => first.iter().position(|h| h.eq_ignore_ascii_case(c)).ok_or_else(|| {
                Error::Schema(format!("no column named '{c}' in {}", path.display()))
            })?,
            None => first
                .iter()
                .position(|h| h.eq_ignore_ascii_case("earnings"))
                .unwrap_or(0),
        };
        (pick, Some(first[pick].to_string()))
    } else {
        if let Some(c) = column {
            return Err(Error::Schema(format!(
                "column '{c}' requested but {} has no header",
                path.display()
            )));
        }
        (0, None)
    };

    let mut out = Column {
        values: Vec::new(),
        name,
        skipped_empty: 0,
    };
    let data_rows = (!header_like).then_some(Ok(first)).into_iter().chain(rows);
    for (i, row) in data_rows.enumerate() {
        let row = row?;
        let line = i + 1 + usize::from(header_like);
        let cell = row.get(idx).unwrap_or("");
        if cell.is_empty() {
            out.skipped_empty += 1;
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::Schema(format!("line {line}: '{cell}' is not a number")))?;
        out.values.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, column: Option<&str>) -> Result<Column> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, text).unwrap();
        read_column(&path, column)
    }

    #[test]
    fn headerless_single_column() {
        // Blank lines are not rows.
        let c = load("1.5\n2\n\n3e2\n", None).unwrap();
        assert_eq!(c.values, vec![1.5, 2.0, 300.0]);
        assert_eq!(c.name, None);
        assert_eq!(c.skipped_empty, 0);
    }

    #[test]
    fn prefers_earnings_column() {
        let c = load("id,earnings\na,12\nb,\nc,40\n", None).unwrap();
        assert_eq!(c.values, vec![12.0, 40.0]);
        assert_eq!(c.name.as_deref(), Some("earnings"));
        assert_eq!(c.skipped_empty, 1);
    }

    #[test]
    fn named_column_and_errors() {
        let c = load("a,b\n1,2\n3,4\n", Some("B")).unwrap();
        assert_eq!(c.values, vec![2.0, 4.0]);
        assert!(matches!(load("a,b\n1,2\n", Some("z")), Err(Error::Schema(_))));
        assert!(matches!(load("1\n2\n", Some("a")), Err(Error::Schema(_))));
        let err = load("v\n1\nx\n", None).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
