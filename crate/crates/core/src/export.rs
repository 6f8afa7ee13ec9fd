//! CSV and JSON exports. Every file carries a schema version and the
//! resolved system parameters.
//!
//! JSON files are one object: `schema_version`, `kind`, `spec` and the
//! payload fields. CSV files start with `#` comment lines holding the
//! version and the resolved system parameters as JSON, followed by a
//! header row.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SystemSpec;
use crate::sweep::SweepRecord;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema_version: u32,
    pub kind: String,
    pub spec: Option<SystemSpec>,
    #[serde(flatten)]
    pub data: T,
}

impl<T> Document<T> {
    pub fn new(kind: &str, spec: Option<&SystemSpec>, data: T) -> Self {
        Document {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            spec: spec.cloned(),
            data,
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, doc: &Document<T>) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Document<T>> {
    let doc: Document<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Configuration(format!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            path.display(),
            doc.schema_version
        )));
    }
    Ok(doc)
}

/// One row of the sweep table. Missing values are empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub row: usize,
    pub col: usize,
    pub inv_kappa_c_ms: f64,
    pub inv_gamma_c_us: f64,
    pub nbar: Option<f64>,
    pub sz_h: Option<f64>,
    pub phase: String,
    pub residual: Option<f64>,
    pub tail_mass: Option<f64>,
    pub lindblad_phase: String,
    pub mf_nbar: Option<f64>,
    pub nbar_ratio: Option<f64>,
    pub growth_rate: Option<f64>,
    pub g_c: f64,
    pub gamma_c: f64,
    pub error: Option<String>,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        SweepRow {
            row: r.row,
            col: r.col,
            inv_kappa_c_ms: r.inv_kappa_c_ms,
            inv_gamma_c_us: r.inv_gamma_c_us,
            nbar: r.nbar,
            sz_h: r.sz_h,
            phase: r.phase.label().to_string(),
            residual: r.residual,
            tail_mass: r.tail_mass,
            lindblad_phase: r.lindblad_phase.label().to_string(),
            mf_nbar: r.mf_nbar,
            nbar_ratio: r.nbar_ratio,
            growth_rate: r.growth_rate,
            g_c: r.g_c,
            gamma_c: r.gamma_c,
            error: r.error.clone(),
        }
    }
}

/// Sweep table. Wall times are left out so reruns are byte-identical.
pub fn write_sweep_csv(path: &Path, spec: &SystemSpec, records: &[SweepRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = Vec::new();
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "# spec={}", serde_json::to_string(spec)?)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in records {
            w.serialize(SweepRow::from(r))?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub struct SweepTable {
    pub schema_version: u32,
    pub spec: SystemSpec,
    pub rows: Vec<SweepRow>,
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let text = fs::read_to_string(path)?;
    let (mut version, mut spec) = (None, None);
    for line in BufReader::new(text.as_bytes()).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix('#') else { break };
        let rest = rest.trim();
        if let Some(v) = rest.strip_prefix("schema_version=") {
            version = v.trim().parse::<u32>().ok();
        } else if let Some(s) = rest.strip_prefix("spec=") {
            spec = Some(serde_json::from_str::<SystemSpec>(s)?);
        }
    }
    let version = version.ok_or_else(|| Error::Configuration("missing schema_version line".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::Configuration(format!("schema version {version}, expected {SCHEMA_VERSION}")));
    }
    let spec = spec.ok_or_else(|| Error::Configuration("missing spec line".into()))?;
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = rd.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
    Ok(SweepTable {
        schema_version: version,
        spec,
        rows,
    })
}
