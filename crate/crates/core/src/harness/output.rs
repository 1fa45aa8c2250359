//! Result emission. The CSV schema is fixed and versioned; the JSON mirrors
//! it and adds the fully resolved configuration plus, when small enough, the
//! per-trial estimates the `topk` subcommand post-processes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::experiment::{ExperimentConfig, ResolvedParams};

/// Version comment emitted as the first CSV line.
pub const CSV_SCHEMA_VERSION: &str = "# shufflehist-results v1";

/// A single top-t measurement attached to a trial row.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TopkMetrics {
    pub t: usize,
    pub alpha_observed: f64,
    pub alpha_bound: Option<f64>,
    pub f1: f64,
}

/// One trial of one sweep entry.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub trial: u64,
    pub protocol: &'static str,
    pub k: u32,
    pub q: Option<f64>,
    pub max_error: f64,
    pub bound: Option<f64>,
    /// Wall time of the trial; the only non-deterministic field.
    pub runtime_ms: f64,
    pub topk: Vec<TopkMetrics>,
    pub attack_bias: Option<f64>,
    pub attack_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentMeta {
    pub schema: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub config: ExperimentConfig,
    pub resolved: Vec<ResolvedParams>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub meta: ExperimentMeta,
    pub rows: Vec<ResultRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_hist: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<Vec<f64>>>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentResult {
    /// The fixed-schema CSV. Rows carry the first requested t's top-t
    /// metrics; the full list lives in the JSON.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_SCHEMA_VERSION);
        out.push('\n');
        out.push_str(
            "trial,protocol,k,q,max_error,bound,runtime_ms,\
             topk_t,topk_alpha,topk_alpha_bound,topk_f1,attack_bias,attack_bound\n",
        );
        for row in &self.rows {
            let (tt, ta, tb, tf) = match row.topk.first() {
                Some(m) => (
                    m.t.to_string(),
                    m.alpha_observed.to_string(),
                    opt(m.alpha_bound),
                    m.f1.to_string(),
                ),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{:.3},{},{},{},{},{},{}",
                row.trial,
                row.protocol,
                row.k,
                opt(row.q),
                row.max_error,
                opt(row.bound),
                row.runtime_ms,
                tt,
                ta,
                tb,
                tf,
                opt(row.attack_bias),
                opt(row.attack_bound),
            )
            .expect("string write");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable result")
    }
}

/// Write `<prefix>.csv` and `<prefix>.json`; returns the two paths.
pub fn write_outputs(result: &ExperimentResult, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    let mut csv = std::fs::File::create(&csv_path)?;
    csv.write_all(result.to_csv().as_bytes())?;
    let mut json = std::fs::File::create(&json_path)?;
    json.write_all(result.to_json().as_bytes())?;
    json.write_all(b"\n")?;
    Ok((csv_path, json_path))
}
