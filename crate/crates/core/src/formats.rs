//! On-disk formats: batch files, experiment manifests and the versioned
//! record envelope used for checkpoints and reports.
//!
//! A batch file is comma-separated text with header `y,a,x1,...,xp`; the
//! intercept is not stored and is prepended on load. An envelope is two
//! lines: a JSON header naming the format, version, payload length and
//! SHA-256 digest, followed by the JSON payload.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::glm::{FamilyKind, GlmFamily, Observation};
use crate::sequential::Batch;

pub const CHECKPOINT_FORMAT: &str = "post-checkpoint";
pub const REPORT_FORMAT: &str = "post-report";
pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeHeader {
    format: String,
    version: u32,
    sha256: String,
    length: usize,
}

pub fn write_envelope<T: Serialize>(format: &str, value: &T) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let header = EnvelopeHeader {
        format: format.to_string(),
        version: ENVELOPE_VERSION,
        sha256: hex::encode(Sha256::digest(&payload)),
        length: payload.len(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out.push(b'\n');
    Ok(out)
}

pub fn read_envelope<T: DeserializeOwned>(format: &str, bytes: &[u8]) -> Result<T> {
    let split = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: EnvelopeHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
    if header.format != format {
        return Err(Error::Checkpoint(format!("expected format '{format}', found '{}'", header.format)));
    }
    if header.version != ENVELOPE_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (this build reads version {ENVELOPE_VERSION})",
            header.version
        )));
    }
    let rest = &bytes[split + 1..];
    let payload = rest.strip_suffix(b"\n").unwrap_or(rest);
    if payload.len() != header.length {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, header declares {} (truncated or padded)",
            payload.len(),
            header.length
        )));
    }
    let digest = hex::encode(Sha256::digest(payload));
    if digest != header.sha256 {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    serde_json::from_slice(payload).map_err(|e| Error::Checkpoint(format!("unreadable payload: {e}")))
}

/// Binds a directory of batch files to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub family: FamilyKind,
    #[serde(default = "unit")]
    pub dispersion: f64,
    /// Number of covariates, excluding the intercept.
    pub p: usize,
    /// Covariate column names in file order; defaults to `x1..xp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Explicit batch order; defaults to sorted file names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<Vec<String>>,
    /// Per-arm horizon; defaults to the total per-arm size of all batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

fn unit() -> f64 {
    1.0
}

impl Manifest {
    pub fn new(family: FamilyKind, p: usize) -> Self {
        Self { family, dispersion: 1.0, p, columns: None, batches: None, horizon: None }
    }

    pub fn glm_family(&self) -> Result<GlmFamily> {
        GlmFamily::new(self.family, self.dispersion)
    }

    pub fn covariate_names(&self) -> Vec<String> {
        match &self.columns {
            Some(c) => c.clone(),
            None => (1..=self.p).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["y".to_string(), "a".to_string()];
        h.extend(self.covariate_names());
        h
    }

    pub fn validate(&self) -> Result<()> {
        self.glm_family()?;
        if let Some(c) = &self.columns {
            if c.len() != self.p {
                return Err(Error::invalid(format!("manifest lists {} columns for p = {}", c.len(), self.p)));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Format {
            file: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Parses one batch file. `source` names the file in error messages.
pub fn read_batch<R: Read>(reader: R, source: &str, manifest: &Manifest, sequence_number: u64) -> Result<Batch> {
    let family = manifest.glm_family()?;
    let fmt = |line: usize, column: usize, message: String| Error::Format {
        file: source.to_string(),
        line,
        column,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let expected = manifest.header();
    let header = match records.next() {
        Some(r) => r.map_err(|e| fmt(1, 1, e.to_string()))?,
        None => return Err(fmt(1, 1, "file is empty".into())),
    };
    if header.len() != expected.len() {
        return Err(fmt(1, header.len().min(expected.len()) + 1, format!(
            "header has {} columns, expected {} ({})",
            header.len(),
            expected.len(),
            expected.join(",")
        )));
    }
    for (k, (got, want)) in header.iter().zip(&expected).enumerate() {
        if got.trim() != want {
            return Err(fmt(1, k + 1, format!("header column '{}' should be '{want}'", got.trim())));
        }
    }
    let mut observations = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| fmt(e.position().map_or(0, |p| p.line() as usize), 1, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != expected.len() {
            return Err(fmt(line, rec.len().min(expected.len()) + 1, format!(
                "row has {} fields, expected {}",
                rec.len(),
                expected.len()
            )));
        }
        let mut values = Vec::with_capacity(rec.len());
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| fmt(line, k + 1, format!("'{cell}' in column '{}' is not a number", expected[k])))?;
            if !v.is_finite() {
                return Err(fmt(line, k + 1, format!("non-finite value in column '{}'", expected[k])));
            }
            values.push(v);
        }
        let treated = match values[1] {
            0.0 => false,
            1.0 => true,
            other => return Err(fmt(line, 2, format!("arm indicator must be 0 or 1, got {other}"))),
        };
        family.validate_response(values[0]).map_err(|e| fmt(line, 1, e.to_string()))?;
        observations.push(Observation::with_covariates(values[0], &values[2..], treated)?);
    }
    if observations.is_empty() {
        return Err(fmt(2, 1, "batch has no rows".into()));
    }
    Batch::new(sequence_number, observations)
}

pub fn read_batch_file(path: &Path, manifest: &Manifest, sequence_number: u64) -> Result<Batch> {
    let file = std::fs::File::open(path)?;
    read_batch(file, &path.display().to_string(), manifest, sequence_number)
}

/// Writes a batch with the intercept dropped, in shortest round-trip
/// decimal form.
pub fn write_batch<W: Write>(writer: W, batch: &Batch, manifest: &Manifest) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(manifest.header()).map_err(csv_err)?;
    for obs in &batch.observations {
        if obs.dim() != manifest.p + 1 {
            return Err(Error::DimensionMismatch(format!("observation has {} covariates, manifest p = {}", obs.dim() - 1, manifest.p)));
        }
        let mut row = vec![obs.y.to_string(), if obs.treated { "1".into() } else { "0".into() }];
        row.extend(obs.x[1..].iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
