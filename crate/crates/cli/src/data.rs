//! CSV ingestion. The dialect is fixed: a header row, comma separators, `.`
//! decimals and no missing values. Row order is treated as time order by the
//! HAC estimator.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::error::CliError;

/// A fully loaded CSV table, kept as strings until columns are requested.
#[derive(Debug, Clone)]
pub struct Table {
    headers: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("cannot read header row: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut index = HashMap::new();
        for (j, h) in headers.iter().enumerate() {
            if index.insert(h.clone(), j).is_some() {
                return Err(CliError::Input(format!("duplicate column name '{h}'")));
            }
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            // line 1 is the header
            let line = i + 2;
            let record = record.map_err(|e| CliError::Input(format!("line {line}: {e}")))?;
            let row: Vec<String> = record.iter().map(|v| v.trim().to_string()).collect();
            if let Some(j) = row.iter().position(|v| v.is_empty()) {
                return Err(CliError::Input(format!("line {line}, column '{}': missing value", headers[j])));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Input("no data rows".into()));
        }
        Ok(Self { headers, index, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn position(&self, name: &str) -> Result<usize, CliError> {
        self.index.get(name).copied().ok_or_else(|| {
            CliError::Input(format!("column '{name}' not found (available: {})", self.headers.join(", ")))
        })
    }

    /// Parses a column as finite floats.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let j = self.position(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let raw = &row[j];
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => {
                        Err(CliError::Input(format!("line {}, column '{name}': '{raw}' is not a finite number", i + 2)))
                    }
                }
            })
            .collect()
    }

    /// Raw string values, used for cluster identifiers.
    pub fn labels(&self, name: &str) -> Result<Vec<String>, CliError> {
        let j = self.position(name)?;
        Ok(self.rows.iter().map(|row| row[j].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_parses() {
        let t = Table::from_reader("y, x,g\n1,2.5,a\n-3,1e2,b\n".as_bytes()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.numeric("x").unwrap(), vec![2.5, 100.0]);
        assert_eq!(t.labels("g").unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn errors_carry_locations() {
        let t = Table::from_reader("y,x\n1,2\n3,abc\n".as_bytes()).unwrap();
        let msg = t.numeric("x").unwrap_err().to_string();
        assert!(msg.contains("line 3") && msg.contains("'x'"), "{msg}");
        assert!(t.numeric("z").unwrap_err().to_string().contains("'z' not found"));

        let msg = Table::from_reader("y,x\n1,\n".as_bytes()).unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("missing"), "{msg}");
        assert!(Table::from_reader("y,x\n1,2,3\n".as_bytes()).is_err());
        assert!(Table::from_reader("y,y\n1,2\n".as_bytes()).is_err());
        assert!(Table::from_reader("y,x\n".as_bytes()).is_err());
        let t = Table::from_reader("y\nNaN\n".as_bytes()).unwrap();
        assert!(t.numeric("y").is_err());
    }
}
