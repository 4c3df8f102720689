//! JSON model files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "nodes": [
//!     {"id": "x", "type": "Input", "inputs": [], "output_shape": [2]},
//!     {"id": "y", "type": "Affine", "inputs": ["x"], "output_shape": [1],
//!      "weights": {"shape": [1, 2], "values": [1.0, 2.0]}, "bias": [2.0]}
//!   ],
//!   "outputs": ["y"],
//!   "constraint_groups": []
//! }
//! ```
//!
//! Floats are written with shortest round-trip formatting, so saving and
//! loading reproduces every parameter bit for bit.

use std::path::Path;

use deeplift_core::{ConstraintGroup, Graph, GraphDef, NodeSpec};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u64,
    nodes: Vec<NodeSpec>,
    outputs: Vec<String>,
    #[serde(default)]
    constraint_groups: Vec<ConstraintGroup>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u64>,
}

/// Parses and validates a model; `origin` names the source in errors.
pub fn model_from_str(text: &str, origin: &Path) -> Result<Graph> {
    if text.trim().is_empty() {
        return Err(Error::parse(origin, 1, "empty model file"));
    }
    let located = |e: serde_json::Error| Error::parse(origin, e.line(), format!("column {}: {e}", e.column()));
    let probe: VersionProbe = serde_json::from_str(text).map_err(located)?;
    match probe.version {
        Some(FORMAT_VERSION) => {}
        Some(found) => {
            return Err(Error::Version {
                path: origin.to_path_buf(),
                found,
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(Error::parse(origin, 1, "missing \"version\" field")),
    }
    let file: ModelFile = serde_json::from_str(text).map_err(located)?;
    Graph::new(GraphDef {
        nodes: file.nodes,
        outputs: file.outputs,
        constraint_groups: file.constraint_groups,
    })
    .map_err(|source| Error::Model {
        path: origin.to_path_buf(),
        source,
    })
}

pub fn model_to_string(graph: &Graph) -> String {
    let def = graph.to_def();
    let file = ModelFile {
        version: FORMAT_VERSION,
        nodes: def.nodes,
        outputs: def.outputs,
        constraint_groups: def.constraint_groups,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

pub fn load_model(path: &Path) -> Result<Graph> {
    model_from_str(&read_to_string(path)?, path)
}

pub fn save_model(path: &Path, graph: &Graph) -> Result<()> {
    write_string(path, &model_to_string(graph))
}
