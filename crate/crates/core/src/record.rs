//! Line-delimited JSON result records.
//!
//! Every line is one [`ResultRecord`]. Records embed the configuration that
//! produced them, so a record file is self-describing.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::action::{Configuration, CouplingParams};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::langevin::ContractionReport;
use crate::linalg::Mat;
use crate::stats::{BoundReport, DecayReport, EstimatorResult, Verdict};

pub const SCHEMA: &str = "lattice-ym.record";
pub const SCHEMA_VERSION: u32 = 1;

/// `CARGO_PKG_VERSION`, with the output of `git describe` appended when it
/// was provided at build time through `LATTICE_YM_GIT_DESCRIBE`.
pub fn version_string() -> String {
    match option_env!("LATTICE_YM_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{}-{g}", env!("CARGO_PKG_VERSION")),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Check,
    Checkpoint,
    Result,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub schema: String,
    pub schema_version: u32,
    pub kind: RecordKind,
    pub experiment_id: String,
    pub version: String,
    pub config: RunConfig,
    pub constants: Constants,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<NamedEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<NamedVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Details>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<Checkpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub k_s: f64,
    pub beta_threshold: f64,
    pub admissible: bool,
    pub casimir: f64,
    pub ricci: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilde_k: Option<f64>,
}

impl Constants {
    pub fn new(params: &CouplingParams, weight_a: Option<f64>) -> Self {
        Self {
            k_s: params.k_s,
            beta_threshold: params.beta_threshold,
            admissible: params.admissible,
            casimir: params.group.casimir(),
            ricci: params.group.ricci(),
            tilde_k: weight_a.and_then(|a| params.tilde_k(a).ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedEstimate {
    pub name: String,
    pub estimate: EstimatorResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedVerdict {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Details {
    Contraction(ContractionReport),
    Measure {
        bounds: Vec<BoundReport>,
        decay: DecayReport,
        acceptance_rate: f64,
    },
    Acceptance {
        rate: f64,
    },
}

/// Chain state sufficient to continue a run with identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    /// Steps or sweeps completed.
    pub step: u64,
    /// Row-major `[re, im, re, im, ...]` entries of each link.
    pub links: Vec<Vec<f64>>,
    /// Observable values recorded so far, by name.
    pub series: Vec<(String, Vec<f64>)>,
    #[serde(default)]
    pub accepted: u64,
    #[serde(default)]
    pub proposed: u64,
}

pub fn encode_links(cfg: &Configuration) -> Vec<Vec<f64>> {
    cfg.links()
        .iter()
        .map(|q| q.matrix().entries().iter().flat_map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn decode_links(links: &[Vec<f64>], n: usize, edge_count: usize) -> Result<Configuration> {
    if links.len() != edge_count {
        return Err(Error::Parse(format!("checkpoint has {} links, lattice has {edge_count}", links.len())));
    }
    let mut out = Vec::with_capacity(links.len());
    for raw in links {
        if raw.len() != 2 * n * n {
            return Err(Error::Parse(format!("link has {} reals, expected {}", raw.len(), 2 * n * n)));
        }
        let m = Mat::from_fn(n, |i, j| {
            let k = 2 * (i * n + j);
            num_complex::Complex64::new(raw[k], raw[k + 1])
        });
        if !(m.unitarity_defect() < 1e-8) {
            return Err(Error::Parse("checkpoint link is not unitary".into()));
        }
        out.push(GroupElement::from_matrix_unchecked(m));
    }
    Ok(Configuration::from_links(out))
}

pub fn to_line(record: &ResultRecord) -> Result<String> {
    Ok(serde_json::to_string(record)?)
}

/// Parses one line and checks the schema tag and version.
pub fn parse_record(line: &str) -> Result<ResultRecord> {
    let r: ResultRecord = serde_json::from_str(line)?;
    if r.schema != SCHEMA {
        return Err(Error::Parse(format!("unknown schema {:?}", r.schema)));
    }
    if r.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported schema version {}", r.schema_version)));
    }
    Ok(r)
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(parse_record(&line)?);
        }
    }
    Ok(out)
}

/// Appends records to a writer, one JSON document per line.
pub struct RecordSink<W: Write> {
    out: W,
}

impl<W: Write> RecordSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn emit(&mut self, record: &ResultRecord) -> Result<()> {
        writeln!(self.out, "{}", to_line(record)?)?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
