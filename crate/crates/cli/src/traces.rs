use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

/// A named numeric table written as `<dir>/<name>.csv`.
pub struct Trace {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Trace { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, values: &[f64]) {
        self.rows.push(values.to_vec());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
