//! Output directory writer: CSV, JSON and SVG files plus a manifest naming each file's schema.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::schema::{CsvSchema, FileFormat, JsonSchema, Manifest, ManifestEntry, MANIFEST, MANIFEST_VERSION};

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

pub fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub struct OutputDir {
    root: PathBuf,
    command: String,
    files: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_csv(&mut self, name: &str, schema: &CsvSchema, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            format: FileFormat::Csv,
            schema: Some(schema.name.to_string()),
            version: Some(schema.version),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, schema: &JsonSchema, value: &T) -> Result<()> {
        let path = self.root.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            format: FileFormat::Json,
            schema: Some(schema.name.to_string()),
            version: Some(schema.version),
        });
        Ok(())
    }

    pub fn write_svg(&mut self, name: &str, svg: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            format: FileFormat::Svg,
            schema: None,
            version: None,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            manifest_version: MANIFEST_VERSION,
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(self.root)
    }
}
