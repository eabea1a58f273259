use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Files produced by a command, held in memory until the command succeeds.
pub struct Output {
    format: Format,
    files: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn new(format: Format) -> Self {
        Self { format, files: Vec::new() }
    }

    /// Adds a row table as `<stem>.csv` or `<stem>.json` depending on the format.
    pub fn table<R: Serialize>(&mut self, stem: &str, header: &[&str], rows: &[R]) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .has_headers(!rows.is_empty())
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                if rows.is_empty() {
                    w.write_record(header)?;
                }
                for r in rows {
                    w.serialize(r)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
                self.files.push((format!("{stem}.csv"), bytes));
            }
            Format::Json => self.json(stem, &rows)?,
        }
        Ok(())
    }

    /// Adds `<stem>.json` regardless of the format.
    pub fn json<T: Serialize + ?Sized>(&mut self, stem: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.files.push((format!("{stem}.json"), bytes));
        Ok(())
    }

    /// Writes every file plus a `<file>.meta.json` sidecar and returns the
    /// written names in insertion order.
    pub fn write_all(self, dir: &Path, meta: &serde_json::Value) -> Result<Vec<String>> {
        let wrap = |path: &Path, source| CliError::Write { path: path.to_path_buf(), source };
        fs::create_dir_all(dir).map_err(|e| wrap(dir, e))?;
        let mut names = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = dir.join(&name);
            fs::write(&path, bytes).map_err(|e| wrap(&path, e))?;
            let mut sidecar = serde_json::json!({ "file": name });
            if let (Some(s), Some(m)) = (sidecar.as_object_mut(), meta.as_object()) {
                s.extend(m.clone());
            }
            let mut side = serde_json::to_vec_pretty(&sidecar)?;
            side.push(b'\n');
            let side_path = dir.join(format!("{name}.meta.json"));
            fs::write(&side_path, side).map_err(|e| wrap(&side_path, e))?;
            names.push(name);
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn csv_tables_use_lf_and_empty_optionals() {
        let mut out = Output::new(Format::Csv);
        out.table("t", &["a", "b"], &[Row { a: 1, b: Some(0.5) }, Row { a: 2, b: None }]).unwrap();
        out.table("empty", &["a", "b"], &Vec::<Row>::new()).unwrap();
        assert_eq!(out.files[0], ("t.csv".into(), b"a,b\n1,0.5\n2,\n".to_vec()));
        assert_eq!(out.files[1].1, b"a,b\n");
    }

    #[test]
    fn json_tables_are_arrays() {
        let mut out = Output::new(Format::Json);
        out.table("t", &["a", "b"], &[Row { a: 1, b: None }]).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out.files[0].1).unwrap();
        assert_eq!(out.files[0].0, "t.json");
        assert_eq!(v, serde_json::json!([{ "a": 1, "b": null }]));
    }
}
