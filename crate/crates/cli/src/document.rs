//! The JSON system description read by every file-based command.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dwellcert::certify::SwitchedSystem;
use dwellcert::graph::{Edge, OpenInterval, SwitchGraph, SwitchingSignal, VertexPath};
use dwellcert::matrix::{decomposition_from_parts, real_jordan, JordanBlock, SquareMatrix, DEFAULT_GAP_FACTOR};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::report::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub schema_version: u32,
    pub dimension: usize,
    /// Vertex `i` runs `matrices[i - 1]`.
    pub matrices: Vec<NamedMatrix>,
    pub edges: Vec<Edge>,
    /// Per vertex; `null` entries are computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompositions: Option<Vec<Option<DecompositionSpec>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<IntervalSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<EtaSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatrix {
    pub name: String,
    pub entries: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    pub p: Vec<Vec<f64>>,
    pub blocks: Vec<JordanBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub edge: Edge,
    pub interval: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSpec {
    pub edge: Edge,
    pub eta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub path: Vec<usize>,
    /// Absolute switching times.
    pub times: Vec<f64>,
}

/// A validated document together with the objects built from it.
pub struct Loaded {
    pub document: SystemDocument,
    pub digest: String,
    pub system: SwitchedSystem,
    pub supplied: Vec<bool>,
    pub intervals: Option<BTreeMap<Edge, OpenInterval>>,
    pub etas: Option<BTreeMap<Edge, f64>>,
    pub signal: Option<SwitchingSignal>,
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let document: SystemDocument = serde_json::from_slice(&bytes).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => Failure::Invalid(format!("schema error: {e}")),
            _ => Failure::Parse(e.to_string()),
        }
    })?;
    build(document, digest)
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<SquareMatrix, Failure> {
    let m = SquareMatrix::from_rows(rows.to_vec()).map_err(|e| Failure::Invalid(format!("{what}: {e}")))?;
    if m.dim() != n {
        return Err(Failure::Invalid(format!("{what} is {}x{0}, expected {n}x{n}", m.dim())));
    }
    Ok(m)
}

fn build(document: SystemDocument, digest: String) -> Result<Loaded, Failure> {
    let invalid = |s: String| Failure::Invalid(s);
    if document.schema_version != SCHEMA_VERSION {
        return Err(invalid(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            document.schema_version
        )));
    }
    let n = document.dimension;
    let k = document.matrices.len();
    let graph = SwitchGraph::new(k, document.edges.clone()).map_err(|e| invalid(e.to_string()))?;
    let mats = document
        .matrices
        .iter()
        .map(|m| matrix(&m.entries, n, &format!("matrix {}", m.name)))
        .collect::<Result<Vec<_>, _>>()?;

    let specs = match &document.decompositions {
        Some(d) if d.len() != k => {
            return Err(invalid(format!("{} decompositions for {k} matrices", d.len())));
        }
        Some(d) => d.clone(),
        None => vec![None; k],
    };
    let mut decs = Vec::with_capacity(k);
    for (i, (a, spec)) in mats.iter().zip(&specs).enumerate() {
        let d = match spec {
            Some(s) => {
                let p = matrix(&s.p, n, &format!("P of vertex {}", i + 1))?;
                decomposition_from_parts(p, s.blocks.clone(), a.clone())
            }
            None => real_jordan(a, DEFAULT_GAP_FACTOR * a.spectral_norm().max(1.0)),
        };
        decs.push(d.map_err(|e| invalid(format!("vertex {}: {e}", i + 1)))?);
    }
    let system = SwitchedSystem::new(graph, decs).map_err(|e| invalid(e.to_string()))?;
    let supplied = specs.iter().map(Option::is_some).collect();

    let intervals = match &document.intervals {
        None => None,
        Some(list) => {
            let mut map = BTreeMap::new();
            for spec in list {
                let [lo, hi] = spec.interval;
                if !system.graph().has_edge(spec.edge) {
                    return Err(invalid(format!("interval given for non-edge {}", spec.edge)));
                }
                if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                    return Err(invalid(format!("interval ({lo}, {hi}) for edge {} is empty", spec.edge)));
                }
                if map.insert(spec.edge, OpenInterval::new(lo, hi)).is_some() {
                    return Err(invalid(format!("edge {} has two intervals", spec.edge)));
                }
            }
            Some(map)
        }
    };
    let etas = match &document.etas {
        None => None,
        Some(list) => {
            let mut map = BTreeMap::new();
            for spec in list {
                if !system.graph().has_edge(spec.edge) {
                    return Err(invalid(format!("dwell given for non-edge {}", spec.edge)));
                }
                if !(spec.eta > 0.0 && spec.eta.is_finite()) {
                    return Err(invalid(format!("dwell {} for edge {} is not positive", spec.eta, spec.edge)));
                }
                map.insert(spec.edge, spec.eta);
            }
            Some(map)
        }
    };
    let signal = match &document.signal {
        None => None,
        Some(s) => {
            let path = VertexPath::new(s.path.clone()).map_err(|e| invalid(e.to_string()))?;
            Some(SwitchingSignal::new(path, s.times.clone()).map_err(|e| invalid(e.to_string()))?)
        }
    };
    Ok(Loaded { document, digest, system, supplied, intervals, etas, signal })
}

/// Writes a system's decompositions back as explicit parts.
pub fn decomposition_specs(system: &SwitchedSystem) -> Vec<Option<DecompositionSpec>> {
    system
        .decompositions()
        .iter()
        .map(|d| Some(DecompositionSpec { p: d.p().rows(), blocks: d.blocks().to_vec() }))
        .collect()
}
