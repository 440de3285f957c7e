//! Time-series persistence: one comma-separated text file with provenance
//! comment lines, a header row, and one row per record. Column names are
//! stable; everything is plain text so any analysis stack can consume it.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the exact bit patterns and repeated deterministic
//! runs produce byte-identical files.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::diagnostics::DiagRecord;
use crate::error::Error;
use crate::Result;

/// Provenance lines carried at the top of a series file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub config_hash: String,
    pub code_version: String,
    pub box_length: f64,
    pub resolution: usize,
    pub species: usize,
    pub k_max: usize,
}

/// Stable column layout for a series with `species` species and Sobolev
/// orders up to `k_max`.
pub fn column_names(species: usize, k_max: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=species {
        cols.push(format!("mass_{i}"));
    }
    cols.push("charge_total".into());
    for i in 1..=species {
        cols.push(format!("l2sq_c{i}"));
    }
    for k in 1..=k_max {
        for i in 1..=species {
            cols.push(format!("hksq_{k}_c{i}"));
        }
    }
    for p in [1, 2, 3, 4, 6] {
        cols.push(format!("lp_sigma_{p}"));
    }
    cols.push("rho_l2sq".into());
    cols.push("u_l2sq".into());
    cols.push("u_inf".into());
    cols.push("gradphi_l2".into());
    cols.push("gradphi_inf".into());
    for i in 1..=species {
        cols.push(format!("entropy_{i}"));
    }
    cols.push("entropy_total".into());
    for i in 1..=species {
        cols.push(format!("exp_entropy_{i}"));
    }
    for i in 1..=species {
        cols.push(format!("moment6_{i}"));
    }
    for i in 1..=species {
        cols.push(format!("local_entropy_{i}"));
    }
    cols.push("R_energy".into());
    cols.push("R_L2".into());
    cols.push("shell_ratio_max".into());
    for j in 1..=4 {
        cols.push(format!("ell_ratio_{j}"));
    }
    for k in 0..=k_max {
        for i in 1..=species {
            cols.push(format!("sharp_{k}_c{i}"));
        }
    }
    for i in 1..=species {
        cols.push(format!("min_c_{i}"));
    }
    cols
}

/// Flatten a record into the column order of [`column_names`].
pub fn record_row(r: &DiagRecord, species: usize, k_max: usize) -> Vec<f64> {
    let mut row = vec![r.t];
    row.extend_from_slice(&r.masses);
    row.push(r.charge_total);
    row.extend_from_slice(&r.l2sq);
    for k in 1..=k_max {
        row.extend_from_slice(&r.hksq[k - 1]);
    }
    row.extend_from_slice(&r.lp_sigma);
    row.push(r.rho_l2sq);
    row.push(r.u_l2sq);
    row.push(r.u_inf);
    row.push(r.gradphi_l2);
    row.push(r.gradphi_inf);
    row.extend_from_slice(&r.entropy);
    row.push(r.entropy_total);
    row.extend_from_slice(&r.exp_entropy);
    row.extend_from_slice(&r.moment6);
    row.extend_from_slice(&r.local_entropy);
    row.push(r.r_energy);
    row.push(r.r_l2);
    row.push(r.shell_ratio_max);
    row.extend_from_slice(&r.ell_ratios);
    for k in 0..=k_max {
        for i in 0..species {
            row.push(r.sharp[i][k]);
        }
    }
    row.extend_from_slice(&r.min_c);
    row
}

/// Format one float with exact round-trip text.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Incremental writer used as the run observer sink.
pub struct SeriesWriter<W: Write> {
    sink: W,
    species: usize,
    k_max: usize,
}

impl<W: Write> SeriesWriter<W> {
    /// Write provenance and header immediately.
    pub fn new(mut sink: W, meta: &SeriesMeta) -> Result<Self> {
        writeln!(sink, "# npd-series-v1")?;
        writeln!(sink, "# config_hash = {}", meta.config_hash)?;
        writeln!(sink, "# code_version = {}", meta.code_version)?;
        writeln!(sink, "# box_length = {}", format_value(meta.box_length))?;
        writeln!(sink, "# resolution = {}", meta.resolution)?;
        writeln!(sink, "# species = {}", meta.species)?;
        writeln!(sink, "# k_max = {}", meta.k_max)?;
        writeln!(sink, "{}", column_names(meta.species, meta.k_max).join(","))?;
        Ok(Self {
            sink,
            species: meta.species,
            k_max: meta.k_max,
        })
    }

    pub fn write_record(&mut self, record: &DiagRecord) -> Result<()> {
        let row = record_row(record, self.species, self.k_max);
        let mut line = String::with_capacity(row.len() * 24);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_value(*v));
        }
        writeln!(self.sink, "{line}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.sink.flush()?;
        Ok(())
    }
}

/// A series read back from disk: named columns over uniform rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format {
                path: "series".into(),
                message: format!("no column named `{name}`"),
            })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// `(t, column)` pairs ready for the rate fits.
    pub fn series(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        let t = self.column("t")?;
        let y = self.column(name)?;
        Ok(t.into_iter().zip(y).collect())
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.column("t")
    }
}

fn parse_float(path: &Path, token: &str) -> Result<f64> {
    match token {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => token.parse::<f64>().map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: format!("bad float `{token}`: {e}"),
        }),
    }
}

/// Read a series file back into a [`Table`].
pub fn read_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut meta = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        match &columns {
            None => {
                columns = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            }
            Some(cols) => {
                let row: Vec<f64> = line
                    .split(',')
                    .map(|tok| parse_float(path, tok.trim()))
                    .collect::<Result<_>>()?;
                if row.len() != cols.len() {
                    return Err(Error::Format {
                        path: path.display().to_string(),
                        message: format!(
                            "row has {} fields, header has {}",
                            row.len(),
                            cols.len()
                        ),
                    });
                }
                rows.push(row);
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        message: "missing header row".into(),
    })?;
    // Record times must strictly increase.
    if let Some(t_idx) = columns.iter().position(|c| c == "t") {
        for pair in rows.windows(2) {
            if pair[1][t_idx] <= pair[0][t_idx] {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    message: format!(
                        "record times must strictly increase ({} then {})",
                        pair[0][t_idx], pair[1][t_idx]
                    ),
                });
            }
        }
    }
    Ok(Table {
        meta,
        columns,
        rows,
    })
}
