//! Machine-readable input and output formats shared by the CLI: the network
//! spec file, the report envelope with its run manifest, and the JSON/CSV
//! serializers. JSON floats use the shortest round-trip representation; CSV
//! floats are printed with 17 significant digits. Either way a report parsed
//! back yields bit-identical numbers.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::allocation::{GoldenRuleAllocation, QueueStats};
use crate::distributed::RoundRecord;
use crate::flowbalance::FlowSolution;
use crate::jackson::SimReport;
use crate::linalg::Matrix;
use crate::model::{NetworkSpec, ValidationReport};
use crate::spectral::EigenPair;

/// One peer line of the input file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeerEntry {
    /// 1-based id; ids must be dense and in order.
    pub id: usize,
    pub lambda0: f64,
    pub mu: f64,
}

/// The network-spec file: peers plus the routing matrix, row `i` holding the
/// forwarding probabilities of peer `i`. The resolution probability is
/// implicit as one minus the row sum, which keeps the file free of redundant
/// (and potentially inconsistent) data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub peers: Vec<PeerEntry>,
    pub routing: Vec<Vec<f64>>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<NetworkSpec, String> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| format!("invalid spec file: {e}"))?;
        file.into_spec()
    }

    pub fn into_spec(self) -> Result<NetworkSpec, String> {
        let n = self.peers.len();
        if n == 0 {
            return Err("spec file has no peers".into());
        }
        for (idx, peer) in self.peers.iter().enumerate() {
            if peer.id != idx + 1 {
                return Err(format!(
                    "peer ids must be dense and ordered 1..{n}; found {} at position {}",
                    peer.id,
                    idx + 1
                ));
            }
        }
        if self.routing.len() != n || self.routing.iter().any(|row| row.len() != n) {
            return Err(format!("routing must be a {n}x{n} matrix"));
        }
        let routing = Matrix::from_rows(&self.routing);
        let lambda0 = self.peers.iter().map(|p| p.lambda0).collect();
        let mu = self.peers.iter().map(|p| p.mu).collect();
        NetworkSpec::new(routing, lambda0, mu).map_err(|e| e.to_string())
    }

    pub fn from_spec(spec: &NetworkSpec) -> Self {
        Self {
            peers: (0..spec.n)
                .map(|i| PeerEntry { id: i + 1, lambda0: spec.lambda0[i], mu: spec.mu[i] })
                .collect(),
            routing: spec.routing.to_rows(),
        }
    }
}

/// Embedded in every report so a run can be reproduced from its output alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub input: String,
    /// Resolved options: tolerances, seeds, horizons, feasibility settings.
    pub options: Value,
    pub artifact_version: String,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, input: &str, options: Value) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            subcommand: subcommand.to_string(),
            input: input.to_string(),
            options,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }
}

/// Convergence summary of the round-based harness, with the centralized
/// solution errors for quick inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributedReport {
    pub converged: bool,
    pub rounds_used: usize,
    pub message_count: u64,
    pub b: Matrix,
    pub v: Vec<f64>,
    pub b_error_vs_direct: f64,
    pub v_error_vs_direct: f64,
    pub lambda: Vec<f64>,
    pub lambda_rounds: usize,
    pub lambda_messages: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<RoundRecord>,
}

/// Domain failure carried in the report body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

/// Report envelope. Sections are present when the subcommand computed them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub manifest: RunManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen: Option<EigenPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<GoldenRuleAllocation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queue_stats: Option<QueueStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distributed: Option<DistributedReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl Report {
    pub fn new(manifest: RunManifest) -> Self {
        Self {
            manifest,
            validation: None,
            flow: None,
            eigen: None,
            allocation: None,
            queue_stats: None,
            simulation: None,
            distributed: None,
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flattens the report into `section,field,i,j,value` rows; matrices are
    /// emitted row-major with explicit indices.
    pub fn to_csv(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::from("section,field,i,j,value\n");
        if let Value::Object(sections) = value {
            for (section, body) in sections {
                flatten_csv(&section, "", &body, &mut out);
            }
        }
        out
    }
}

fn push_row(out: &mut String, section: &str, field: &str, i: &str, j: &str, value: &str) {
    out.push_str(section);
    out.push(',');
    out.push_str(field);
    out.push(',');
    out.push_str(i);
    out.push(',');
    out.push_str(j);
    out.push(',');
    out.push_str(value);
    out.push('\n');
}

/// Prints a JSON number losslessly: 17 significant digits for floats.
pub fn csv_number(v: &serde_json::Number) -> String {
    if let Some(i) = v.as_i64() {
        return i.to_string();
    }
    if let Some(u) = v.as_u64() {
        return u.to_string();
    }
    format!("{:.16e}", v.as_f64().unwrap_or(f64::NAN))
}

fn flatten_csv(section: &str, field: &str, value: &Value, out: &mut String) {
    match value {
        Value::Null => {}
        Value::Bool(b) => push_row(out, section, field, "", "", if *b { "true" } else { "false" }),
        Value::Number(x) => push_row(out, section, field, "", "", &csv_number(x)),
        Value::String(s) => {
            let quoted = format!("\"{}\"", s.replace('"', "\"\""));
            push_row(out, section, field, "", "", &quoted);
        }
        Value::Object(map) => {
            for (key, sub) in map {
                let path = if field.is_empty() { key.clone() } else { format!("{field}.{key}") };
                flatten_csv(section, &path, sub, out);
            }
        }
        Value::Array(items) => {
            let is_matrix = items.iter().all(|it| it.is_array())
                && items.iter().any(|it| !it.as_array().map(Vec::is_empty).unwrap_or(true));
            if is_matrix && items.iter().all(|row| {
                row.as_array().map(|r| r.iter().all(Value::is_number)).unwrap_or(false)
            }) {
                for (i, row) in items.iter().enumerate() {
                    for (j, cell) in row.as_array().unwrap().iter().enumerate() {
                        if let Value::Number(x) = cell {
                            push_row(
                                out,
                                section,
                                field,
                                &i.to_string(),
                                &j.to_string(),
                                &csv_number(x),
                            );
                        }
                    }
                }
            } else if items.iter().all(Value::is_number) {
                for (i, cell) in items.iter().enumerate() {
                    if let Value::Number(x) = cell {
                        push_row(out, section, field, &i.to_string(), "", &csv_number(x));
                    }
                }
            } else {
                for (i, item) in items.iter().enumerate() {
                    let path =
                        if field.is_empty() { i.to_string() } else { format!("{field}.{i}") };
                    flatten_csv(section, &path, item, out);
                }
            }
        }
    }
}
