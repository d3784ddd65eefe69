//! Versioned CSV/JSON schemas for experiment outputs and a checker for whole output directories.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    /// Float, or `NA` where undefined.
    FloatOrNa,
    /// Integer, or `NA` where undefined.
    IntOrNa,
    Bool,
    Text,
}

impl Kind {
    fn accepts(self, cell: &str) -> bool {
        match self {
            Kind::Int => cell.parse::<i64>().is_ok(),
            Kind::Float => cell.parse::<f64>().is_ok(),
            Kind::FloatOrNa => cell == "NA" || cell.parse::<f64>().is_ok(),
            Kind::IntOrNa => cell == "NA" || cell.parse::<i64>().is_ok(),
            Kind::Bool => cell == "true" || cell == "false",
            Kind::Text => true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CsvSchema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [(&'static str, Kind)],
    /// Trailing columns matched by name prefix, e.g. `norm_` for `norm_1 .. norm_k`.
    pub dynamic: &'static [(&'static str, Kind)],
}

#[derive(Debug, Clone, Copy)]
pub struct JsonSchema {
    pub name: &'static str,
    pub version: u32,
    pub required: &'static [&'static str],
}

use Kind::*;

pub const TRAJECTORY: CsvSchema = CsvSchema {
    name: "trajectory",
    version: 1,
    columns: &[("t", Int), ("loss_total", Float), ("weight_norm", Float), ("grad_norm", Float)],
    dynamic: &[("loss_class", FloatOrNa), ("gc_class", Text), ("norm_", Float)],
};

pub const RUNS: CsvSchema = CsvSchema {
    name: "runs",
    version: 1,
    columns: &[
        ("cell", Text),
        ("theta", FloatOrNa),
        ("width", Int),
        ("init", Text),
        ("run", Int),
        ("seed", Int),
        ("stop_reason", Text),
        ("converged", Bool),
        ("iterations", IntOrNa),
        ("final_t", Int),
        ("final_loss", Float),
        ("max_weight_norm", Float),
        ("diverged", Bool),
        ("owner_violations", IntOrNa),
        ("first_hold", IntOrNa),
        ("persistence", FloatOrNa),
        ("sum_sq_loss_t2", FloatOrNa),
        ("final_grad_norm", Float),
        ("audit_verdict", Text),
    ],
    dynamic: &[],
};

pub const AGGREGATE: CsvSchema = CsvSchema {
    name: "aggregate",
    version: 1,
    columns: &[
        ("cell", Text),
        ("theta", FloatOrNa),
        ("width", Int),
        ("init", Text),
        ("runs", Int),
        ("converged", Int),
        ("mean", FloatOrNa),
        ("std", FloatOrNa),
        ("min", FloatOrNa),
        ("q1", FloatOrNa),
        ("median", FloatOrNa),
        ("q3", FloatOrNa),
        ("max", FloatOrNa),
    ],
    dynamic: &[],
};

pub const HISTOGRAM: CsvSchema = CsvSchema {
    name: "histogram",
    version: 1,
    columns: &[("bin", Int), ("lo", Float), ("hi", Float), ("count", Int)],
    dynamic: &[],
};

pub const GC_TABLE: CsvSchema = CsvSchema {
    name: "gc_table",
    version: 1,
    columns: &[
        ("d", Int),
        ("k", Int),
        ("closed_form", Float),
        ("exact", Text),
        ("mc_estimate", Float),
        ("mc_stderr", Float),
        ("trials", Int),
        ("holds", Int),
        ("z_score", FloatOrNa),
    ],
    dynamic: &[],
};

pub const CONFIG_JSON: JsonSchema = JsonSchema {
    name: "config",
    version: 1,
    required: &["task", "eta", "max_iters", "seed_base"],
};

pub const RUN_JSON: JsonSchema = JsonSchema {
    name: "run",
    version: 1,
    required: &["record", "trajectory", "final_weights"],
};

pub const PHASES_JSON: JsonSchema = JsonSchema {
    name: "phases",
    version: 1,
    required: &["reports"],
};

pub const AUDIT_JSON: JsonSchema = JsonSchema {
    name: "landscape_audit",
    version: 1,
    required: &["grad_norm", "loss", "nonzero_output_witness", "verdict"],
};

pub const BOUNDS_JSON: JsonSchema = JsonSchema {
    name: "bounds",
    version: 1,
    required: &["inputs", "measured", "warnings"],
};

pub const FRAMES_JSON: JsonSchema = JsonSchema {
    name: "frames",
    version: 1,
    required: &["data_kelvin", "frames"],
};

pub const LANDSCAPE_JSON: JsonSchema = JsonSchema {
    name: "landscape_report",
    version: 1,
    required: &["constructed", "audits", "lipschitz"],
};

pub const CSV_SCHEMAS: &[CsvSchema] = &[TRAJECTORY, RUNS, AGGREGATE, HISTOGRAM, GC_TABLE];
pub const JSON_SCHEMAS: &[JsonSchema] = &[CONFIG_JSON, RUN_JSON, PHASES_JSON, AUDIT_JSON, BOUNDS_JSON, FRAMES_JSON, LANDSCAPE_JSON];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub format: FileFormat,
    pub schema: Option<String>,
    pub version: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    pub tool_version: String,
    pub files: Vec<ManifestEntry>,
}

fn csv_schema(name: &str) -> Option<&'static CsvSchema> {
    CSV_SCHEMAS.iter().find(|s| s.name == name)
}

fn json_schema(name: &str) -> Option<&'static JsonSchema> {
    JSON_SCHEMAS.iter().find(|s| s.name == name)
}

pub fn validate_csv(path: &Path, schema: &CsvSchema) -> Result<usize> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = reader.headers()?.clone();
    let mut kinds = Vec::with_capacity(header.len());
    for (i, name) in header.iter().enumerate() {
        let kind = if let Some((expect, kind)) = schema.columns.get(i) {
            if name != *expect {
                bail!("{}: column {} is {name:?}, schema {} expects {expect:?}", path.display(), i + 1, schema.name);
            }
            *kind
        } else {
            schema
                .dynamic
                .iter()
                .find(|(prefix, _)| name.starts_with(prefix))
                .map(|(_, k)| *k)
                .ok_or_else(|| anyhow!("{}: unexpected column {name:?}", path.display()))?
        };
        kinds.push(kind);
    }
    if header.len() < schema.columns.len() {
        bail!("{}: missing columns for schema {}", path.display(), schema.name);
    }
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec?;
        rows += 1;
        for (cell, (kind, name)) in rec.iter().zip(kinds.iter().zip(header.iter())) {
            if !kind.accepts(cell) {
                bail!("{}: row {rows}, column {name}: {cell:?} is not {kind:?}", path.display());
            }
        }
    }
    Ok(rows)
}

pub fn validate_json(path: &Path, schema: &JsonSchema) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| anyhow!("{}: top level is not an object", path.display()))?;
    for key in schema.required {
        if !obj.contains_key(*key) {
            bail!("{}: missing key {key:?} required by schema {}", path.display(), schema.name);
        }
    }
    Ok(())
}

/// Checks every file listed in an output directory's manifest against its schema.
pub fn validate_dir(dir: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(dir.join(MANIFEST)).with_context(|| format!("reading manifest in {}", dir.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.manifest_version != MANIFEST_VERSION {
        bail!("unsupported manifest version {}", manifest.manifest_version);
    }
    for entry in &manifest.files {
        let path = dir.join(&entry.path);
        match entry.format {
            FileFormat::Csv => {
                let name = entry.schema.as_deref().ok_or_else(|| anyhow!("{}: CSV without schema", entry.path))?;
                let schema = csv_schema(name).ok_or_else(|| anyhow!("unknown CSV schema {name}"))?;
                if entry.version != Some(schema.version) {
                    bail!("{}: schema {name} version mismatch", entry.path);
                }
                validate_csv(&path, schema)?;
            }
            FileFormat::Json => {
                let name = entry.schema.as_deref().ok_or_else(|| anyhow!("{}: JSON without schema", entry.path))?;
                let schema = json_schema(name).ok_or_else(|| anyhow!("unknown JSON schema {name}"))?;
                if entry.version != Some(schema.version) {
                    bail!("{}: schema {name} version mismatch", entry.path);
                }
                validate_json(&path, schema)?;
            }
            FileFormat::Svg => {
                let text = std::fs::read_to_string(&path)?;
                if !text.starts_with("<svg") || !text.trim_end().ends_with("</svg>") {
                    bail!("{}: not an SVG document", entry.path);
                }
            }
        }
    }
    Ok(manifest.files.len())
}
