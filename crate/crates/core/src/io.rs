//! Dataset CSV exchange: columns `x1..xd,label` with 1-based labels.

use std::io::{Read, Write};

use crate::error::{config_err, Result};
use crate::loss::{LabeledDataset, LabeledSample};

pub fn write_dataset_csv<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for s in data.samples() {
        let mut row: Vec<String> = s.x.iter().map(|v| format!("{v:?}")).collect();
        row.push((s.label + 1).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset; `classes` defaults to the largest label present.
pub fn read_dataset_csv<R: Read>(reader: R, classes: Option<usize>) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let d = header.len().saturating_sub(1);
    if d == 0 || &header[d] != "label" {
        return config_err("dataset CSV needs columns x1..xd,label");
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .or_else(|_| config_err(format!("row {}: bad number {:?}", line + 1, &rec[i])))
        };
        let x = (0..d).map(parse).collect::<Result<Vec<f64>>>()?;
        let label: usize = rec[d]
            .trim()
            .parse()
            .or_else(|_| config_err(format!("row {}: bad label {:?}", line + 1, &rec[d])))?;
        if label == 0 {
            return config_err(format!("row {}: labels are 1-based", line + 1));
        }
        samples.push(LabeledSample { x, label: label - 1 });
    }
    let n = classes.unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(0));
    LabeledDataset::new(samples, n)
}
