//! Run directories: `<outdir>/<command>-<seed>/` with data files and `meta.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hprobe::estimation::{AggVarSeries, CovarianceSeries, SpectrumSeries};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Format;
use crate::config::Result;

pub const DEFAULT_OUTDIR: &str = "hprobe-out";

pub struct RunDir {
    pub dir: PathBuf,
    pub format: Format,
}

impl RunDir {
    pub fn create(dir: PathBuf, format: Format) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, format })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn series_name(&self, stem: &str) -> String {
        match self.format {
            Format::Csv => format!("{stem}.csv"),
            Format::Json => format!("{stem}.json"),
        }
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn covariance(&self, stem: &str, c: &CovarianceSeries, meta: &[(&str, String)]) -> Result<()> {
        match self.format {
            Format::Csv => c.write_csv(self.writer(&self.series_name(stem))?, meta)?,
            Format::Json => self.json(&self.series_name(stem), c)?,
        }
        Ok(())
    }

    pub fn aggvar(&self, stem: &str, a: &AggVarSeries, meta: &[(&str, String)]) -> Result<()> {
        match self.format {
            Format::Csv => a.write_csv(self.writer(&self.series_name(stem))?, meta)?,
            Format::Json => self.json(&self.series_name(stem), a)?,
        }
        Ok(())
    }

    pub fn spectrum(&self, stem: &str, s: &SpectrumSeries, meta: &[(&str, String)]) -> Result<()> {
        match self.format {
            Format::Csv => s.write_csv(self.writer(&self.series_name(stem))?, meta)?,
            Format::Json => self.json(&self.series_name(stem), s)?,
        }
        Ok(())
    }

    /// A table of named float columns, as CSV or as a JSON object of arrays.
    pub fn table(&self, stem: &str, columns: &[(&str, Vec<Value>)]) -> Result<()> {
        match self.format {
            Format::Json => {
                let obj: serde_json::Map<String, Value> =
                    columns.iter().map(|(k, v)| (k.to_string(), Value::Array(v.clone()))).collect();
                self.json(&self.series_name(stem), &obj)
            }
            Format::Csv => {
                let mut w = self.writer(&self.series_name(stem))?;
                let header: Vec<&str> = columns.iter().map(|c| c.0).collect();
                writeln!(w, "{}", header.join(","))?;
                let rows = columns.iter().map(|c| c.1.len()).max().unwrap_or(0);
                for r in 0..rows {
                    let cells: Vec<String> = columns
                        .iter()
                        .map(|c| match c.1.get(r) {
                            Some(Value::String(s)) => s.clone(),
                            Some(Value::Null) | None => String::new(),
                            Some(v) => v.to_string(),
                        })
                        .collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
                w.flush()?;
                Ok(())
            }
        }
    }
}

/// Provenance next to the primary outputs; the only place with a timestamp.
pub fn write_meta(path: &Path, command: &str, seed: u64, config: Value) -> Result<()> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "tool": "hprobe",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "created_unix": created,
        "config": config,
    });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    Ok(())
}

/// Meta path for a single-file output: `<file>.meta.json`.
pub fn meta_beside(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
