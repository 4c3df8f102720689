//! Node kinds, graph validation and deterministic topological order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Layer semantics of a node.
///
/// Spatial layers (`Conv1d`, `MaxPool1d`) read `[length, channels]` tensors;
/// `Affine` and `Maxout` flatten their input row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type"))]
pub enum NodeKind {
    Input,
    /// `y = W x + b` with `W` of shape `[out, in]`.
    Affine { weights: Tensor, bias: Vec<f64> },
    /// Strided cross-correlation. `filters` has shape `[filters, width, channels]`.
    #[cfg_attr(feature = "serde", serde(rename = "Conv1D"))]
    Conv1d {
        filters: Tensor,
        bias: Vec<f64>,
        stride: usize,
    },
    /// Per-channel windowed maximum.
    #[cfg_attr(feature = "serde", serde(rename = "MaxPool1D"))]
    MaxPool1d { width: usize, stride: usize },
    #[cfg_attr(feature = "serde", serde(rename = "ReLU"))]
    Relu,
    /// Leaky rectifier with one slope per channel (last axis), or a single shared slope.
    #[cfg_attr(feature = "serde", serde(rename = "PReLU"))]
    Prelu { slope: Vec<f64> },
    Sigmoid,
    Tanh,
    /// Max over affine pieces. `weights` is `[pieces, out, in]`, `bias` is `[pieces, out]`.
    Maxout { weights: Tensor, bias: Tensor },
    /// Hadamard product of exactly two same-shaped inputs.
    ElementwiseProduct,
    /// Softmax over all elements of the input.
    Softmax,
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input => "Input",
            NodeKind::Affine { .. } => "Affine",
            NodeKind::Conv1d { .. } => "Conv1D",
            NodeKind::MaxPool1d { .. } => "MaxPool1D",
            NodeKind::Relu => "ReLU",
            NodeKind::Prelu { .. } => "PReLU",
            NodeKind::Sigmoid => "Sigmoid",
            NodeKind::Tanh => "Tanh",
            NodeKind::Maxout { .. } => "Maxout",
            NodeKind::ElementwiseProduct => "ElementwiseProduct",
            NodeKind::Softmax => "Softmax",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            NodeKind::Input => Some(0),
            NodeKind::ElementwiseProduct => Some(2),
            _ => Some(1),
        }
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        match self {
            NodeKind::Affine { weights, bias } => weights.len() + bias.len(),
            NodeKind::Conv1d { filters, bias, .. } => filters.len() + bias.len(),
            NodeKind::Prelu { slope } => slope.len(),
            NodeKind::Maxout { weights, bias } => weights.len() + bias.len(),
            _ => 0,
        }
    }

    fn parameters(&self) -> Vec<&[f64]> {
        match self {
            NodeKind::Affine { weights, bias } => vec![weights.values(), bias],
            NodeKind::Conv1d { filters, bias, .. } => vec![filters.values(), bias],
            NodeKind::Prelu { slope } => vec![slope],
            NodeKind::Maxout { weights, bias } => vec![weights.values(), bias.values()],
            _ => Vec::new(),
        }
    }

    pub(crate) fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            NodeKind::Affine { weights, bias } => vec![weights.values_mut(), bias],
            NodeKind::Conv1d { filters, bias, .. } => vec![filters.values_mut(), bias],
            NodeKind::Prelu { slope } => vec![slope],
            NodeKind::Maxout { weights, bias } => vec![weights.values_mut(), bias.values_mut()],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeSpec {
    pub id: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: NodeKind,
    pub inputs: Vec<String>,
    pub output_shape: Vec<usize>,
}

/// A set of flat indices of an input node whose activations always sum to `total`
/// (for example the four channels of one one-hot encoded position).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintGroup {
    pub node: String,
    pub indices: Vec<usize>,
    pub total: f64,
}

/// Unvalidated graph description, as read from or written to a model file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphDef {
    pub nodes: Vec<NodeSpec>,
    pub outputs: Vec<String>,
    pub constraint_groups: Vec<ConstraintGroup>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateId(String),
    DanglingInput { node: String, input: String },
    Arity { node: String, expected: usize, found: usize },
    Cycle(Vec<String>),
    ShapeMismatch { node: String, detail: String },
    Parameter { node: String, detail: String },
    Unreachable(String),
    UnknownOutput(String),
    NoInputNodes,
    NoOutputs,
    ConstraintGroup { group: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate node id `{id}`"),
            Violation::DanglingInput { node, input } => {
                write!(f, "node `{node}` references missing input `{input}`")
            }
            Violation::Arity { node, expected, found } => {
                write!(f, "node `{node}` needs {expected} input(s), has {found}")
            }
            Violation::Cycle(nodes) => write!(f, "cycle through {}", nodes.join(", ")),
            Violation::ShapeMismatch { node, detail } => {
                write!(f, "shape mismatch at `{node}`: {detail}")
            }
            Violation::Parameter { node, detail } => {
                write!(f, "bad parameters at `{node}`: {detail}")
            }
            Violation::Unreachable(id) => write!(f, "node `{id}` is not reachable from any input"),
            Violation::UnknownOutput(id) => write!(f, "output `{id}` is not a node"),
            Violation::NoInputNodes => write!(f, "graph has no input node"),
            Violation::NoOutputs => write!(f, "graph declares no outputs"),
            Violation::ConstraintGroup { group, detail } => {
                write!(f, "constraint group {group}: {detail}")
            }
        }
    }
}

/// Outcome of [`validate_graph`]; empty means the graph is well formed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Output shape of `kind` given its input shapes.
pub(crate) fn infer_shape(kind: &NodeKind, inputs: &[&[usize]]) -> core::result::Result<Vec<usize>, String> {
    let flat = |s: &[usize]| s.iter().product::<usize>();
    match kind {
        NodeKind::Input => Err("input nodes declare their own shape".into()),
        NodeKind::Affine { weights, bias } => {
            if weights.rank() != 2 {
                return Err(format!("weights must be rank 2, got {:?}", weights.shape()));
            }
            let (rows, cols) = (weights.shape()[0], weights.shape()[1]);
            if bias.len() != rows {
                return Err(format!("bias has {} entries for {rows} outputs", bias.len()));
            }
            let n_in = flat(inputs[0]);
            if n_in != cols {
                return Err(format!("weights {rows}x{cols} fed an input of length {n_in}"));
            }
            Ok(vec![rows])
        }
        NodeKind::Conv1d { filters, bias, stride } => {
            if filters.rank() != 3 {
                return Err(format!("filters must be rank 3, got {:?}", filters.shape()));
            }
            let (n_filters, width, channels) =
                (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
            if bias.len() != n_filters {
                return Err(format!("bias has {} entries for {n_filters} filters", bias.len()));
            }
            if *stride == 0 || width == 0 {
                return Err("stride and filter width must be positive".into());
            }
            let (len, in_channels) = spatial(inputs[0])?;
            if in_channels != channels {
                return Err(format!("filters expect {channels} channels, input has {in_channels}"));
            }
            if len < width {
                return Err(format!("input length {len} shorter than filter width {width}"));
            }
            Ok(vec![(len - width) / stride + 1, n_filters])
        }
        NodeKind::MaxPool1d { width, stride } => {
            if *width == 0 || *stride == 0 {
                return Err("pool width and stride must be positive".into());
            }
            let (len, channels) = spatial(inputs[0])?;
            if len < *width {
                return Err(format!("input length {len} shorter than pool width {width}"));
            }
            let out = (len - width) / stride + 1;
            if inputs[0].len() == 1 {
                Ok(vec![out])
            } else {
                Ok(vec![out, channels])
            }
        }
        NodeKind::Prelu { slope } => {
            let channels = *inputs[0].last().unwrap_or(&1);
            if slope.len() != 1 && slope.len() != channels {
                return Err(format!(
                    "{} slopes for {channels} channels (expected 1 or {channels})",
                    slope.len()
                ));
            }
            Ok(inputs[0].to_vec())
        }
        NodeKind::Relu | NodeKind::Sigmoid | NodeKind::Tanh | NodeKind::Softmax => {
            Ok(inputs[0].to_vec())
        }
        NodeKind::Maxout { weights, bias } => {
            if weights.rank() != 3 || bias.rank() != 2 {
                return Err("maxout weights must be [pieces, out, in] and bias [pieces, out]".into());
            }
            let (pieces, rows, cols) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
            if pieces == 0 {
                return Err("maxout needs at least one piece".into());
            }
            if bias.shape() != [pieces, rows] {
                return Err(format!(
                    "bias shape {:?} does not match [{pieces}, {rows}]",
                    bias.shape()
                ));
            }
            let n_in = flat(inputs[0]);
            if n_in != cols {
                return Err(format!("pieces expect {cols} inputs, got {n_in}"));
            }
            Ok(vec![rows])
        }
        NodeKind::ElementwiseProduct => {
            if inputs[0] != inputs[1] {
                return Err(format!("operands have shapes {:?} and {:?}", inputs[0], inputs[1]));
            }
            Ok(inputs[0].to_vec())
        }
    }
}

fn spatial(shape: &[usize]) -> core::result::Result<(usize, usize), String> {
    match shape {
        [len] => Ok((*len, 1)),
        [len, channels] => Ok((*len, *channels)),
        _ => Err(format!("expected [length] or [length, channels], got {shape:?}")),
    }
}

/// Kahn's algorithm with lexicographic tie-breaking. Returns the order and the
/// nodes left over when a cycle blocks progress.
fn kahn(nodes: &[NodeSpec]) -> (Vec<usize>, Vec<usize>) {
    let index: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut indegree = vec![0usize; nodes.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        for input in &node.inputs {
            if let Some(&j) = index.get(input.as_str()) {
                indegree[i] += 1;
                consumers[j].push(i);
            }
        }
    }
    let mut ready: BTreeSet<(&str, usize)> = indegree
        .iter()
        .enumerate()
        .filter(|(_, d)| **d == 0)
        .map(|(i, _)| (nodes[i].id.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(first) = ready.pop_first() {
        let i = first.1;
        order.push(i);
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert((nodes[c].id.as_str(), c));
            }
        }
    }
    let stuck = (0..nodes.len()).filter(|i| indegree[*i] > 0).collect();
    (order, stuck)
}

/// Checks every structural rule; never fails, the report carries the problems.
pub fn validate_graph(def: &GraphDef) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for node in &def.nodes {
        if !seen.insert(node.id.as_str()) {
            violations.push(Violation::DuplicateId(node.id.clone()));
        }
    }
    let ids: BTreeMap<&str, &NodeSpec> = def.nodes.iter().map(|n| (n.id.as_str(), n)).collect();

    for node in &def.nodes {
        for input in &node.inputs {
            if !ids.contains_key(input.as_str()) {
                violations.push(Violation::DanglingInput {
                    node: node.id.clone(),
                    input: input.clone(),
                });
            }
        }
        if let Some(expected) = node.kind.arity() {
            if node.inputs.len() != expected {
                violations.push(Violation::Arity {
                    node: node.id.clone(),
                    expected,
                    found: node.inputs.len(),
                });
            }
        }
        if node
            .kind
            .parameters()
            .iter()
            .any(|p| p.iter().any(|v| !v.is_finite()))
        {
            violations.push(Violation::Parameter {
                node: node.id.clone(),
                detail: "non-finite parameter".into(),
            });
        }
    }
    if !def.nodes.iter().any(|n| n.kind == NodeKind::Input) {
        violations.push(Violation::NoInputNodes);
    }
    if def.outputs.is_empty() {
        violations.push(Violation::NoOutputs);
    }
    for out in &def.outputs {
        if !ids.contains_key(out.as_str()) {
            violations.push(Violation::UnknownOutput(out.clone()));
        }
    }

    let (order, stuck) = kahn(&def.nodes);
    if !stuck.is_empty() {
        let mut names: Vec<String> = stuck.iter().map(|&i| def.nodes[i].id.clone()).collect();
        names.sort();
        violations.push(Violation::Cycle(names));
    }

    // Shape inference in topological order; nodes downstream of a failure are skipped.
    let mut shapes: BTreeMap<&str, Option<&[usize]>> = BTreeMap::new();
    for &i in &order {
        let node = &def.nodes[i];
        let arity_ok = node.kind.arity().is_none_or(|a| a == node.inputs.len());
        let declared = node.output_shape.as_slice();
        if node.kind == NodeKind::Input {
            if declared.is_empty() || declared.contains(&0) {
                violations.push(Violation::ShapeMismatch {
                    node: node.id.clone(),
                    detail: format!("input shape {declared:?} must have positive extents"),
                });
                shapes.insert(&node.id, None);
            } else {
                shapes.insert(&node.id, Some(declared));
            }
            continue;
        }
        let input_shapes: Option<Vec<&[usize]>> = node
            .inputs
            .iter()
            .map(|id| shapes.get(id.as_str()).copied().flatten())
            .collect();
        let ok = match (arity_ok, input_shapes) {
            (true, Some(input_shapes)) => match infer_shape(&node.kind, &input_shapes) {
                Ok(inferred) if inferred == declared => true,
                Ok(inferred) => {
                    violations.push(Violation::ShapeMismatch {
                        node: node.id.clone(),
                        detail: format!("declared {declared:?}, inferred {inferred:?}"),
                    });
                    false
                }
                Err(detail) => {
                    violations.push(Violation::ShapeMismatch {
                        node: node.id.clone(),
                        detail,
                    });
                    false
                }
            },
            _ => false,
        };
        shapes.insert(&node.id, ok.then_some(declared));
    }

    // Reachability from inputs.
    if stuck.is_empty() {
        let mut reachable: BTreeSet<&str> = BTreeSet::new();
        for &i in &order {
            let node = &def.nodes[i];
            if node.kind == NodeKind::Input
                || (!node.inputs.is_empty()
                    && node.inputs.iter().all(|id| reachable.contains(id.as_str())))
            {
                reachable.insert(&node.id);
            }
        }
        for node in &def.nodes {
            let dangling = node.inputs.iter().any(|id| !ids.contains_key(id.as_str()));
            if !reachable.contains(node.id.as_str()) && !dangling {
                violations.push(Violation::Unreachable(node.id.clone()));
            }
        }
    }

    for (g, group) in def.constraint_groups.iter().enumerate() {
        let detail = match ids.get(group.node.as_str()) {
            None => Some(format!("node `{}` does not exist", group.node)),
            Some(node) if node.kind != NodeKind::Input => {
                Some(format!("node `{}` is not an input node", group.node))
            }
            Some(node) => {
                let len: usize = node.output_shape.iter().product();
                let distinct: BTreeSet<usize> = group.indices.iter().copied().collect();
                if group.indices.is_empty() {
                    Some("group is empty".into())
                } else if distinct.len() != group.indices.len() {
                    Some("group repeats an index".into())
                } else if group.indices.iter().any(|&i| i >= len) {
                    Some(format!("index out of range for input of length {len}"))
                } else if !group.total.is_finite() {
                    Some("constraint total is not finite".into())
                } else {
                    None
                }
            }
        };
        if let Some(detail) = detail {
            violations.push(Violation::ConstraintGroup { group: g, detail });
        }
    }

    ValidationReport { violations }
}

/// Deterministic topological order of node ids; ties broken lexicographically.
pub fn topo_order(def: &GraphDef) -> Result<Vec<String>> {
    let (order, stuck) = kahn(&def.nodes);
    if !stuck.is_empty() {
        let mut names: Vec<String> = stuck.iter().map(|&i| def.nodes[i].id.clone()).collect();
        names.sort();
        return Err(Error::InvalidGraph(ValidationReport {
            violations: vec![Violation::Cycle(names)],
        }));
    }
    Ok(order.into_iter().map(|i| def.nodes[i].id.clone()).collect())
}

/// A validated, immutable computation graph with nodes stored in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: Vec<NodeSpec>,
    index: BTreeMap<String, usize>,
    preds: Vec<Vec<usize>>,
    consumers: Vec<Vec<usize>>,
    outputs: Vec<String>,
    constraint_groups: Vec<ConstraintGroup>,
}

impl Graph {
    pub fn new(def: GraphDef) -> Result<Self> {
        let report = validate_graph(&def);
        if !report.is_ok() {
            return Err(Error::InvalidGraph(report));
        }
        let (order, _) = kahn(&def.nodes);
        let mut slots: Vec<Option<NodeSpec>> = def.nodes.into_iter().map(Some).collect();
        let nodes: Vec<NodeSpec> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
        let index: BTreeMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let preds: Vec<Vec<usize>> = nodes
            .iter()
            .map(|n| n.inputs.iter().map(|id| index[id]).collect())
            .collect();
        let mut consumers = vec![Vec::new(); nodes.len()];
        for (i, p) in preds.iter().enumerate() {
            for &j in p {
                if !consumers[j].contains(&i) {
                    consumers[j].push(i);
                }
            }
        }
        Ok(Graph {
            nodes,
            index,
            preds,
            consumers,
            outputs: def.outputs,
            constraint_groups: def.constraint_groups,
        })
    }

    pub fn to_def(&self) -> GraphDef {
        GraphDef {
            nodes: self.nodes.clone(),
            outputs: self.outputs.clone(),
            constraint_groups: self.constraint_groups.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in topological order.
    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn require(&self, id: &str) -> Result<usize> {
        self.position(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub(crate) fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn consumers_of(&self, id: &str) -> Vec<&str> {
        match self.index.get(id) {
            Some(&i) => self.consumers[i]
                .iter()
                .map(|&c| self.nodes[c].id.as_str())
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn constraint_groups(&self) -> &[ConstraintGroup] {
        &self.constraint_groups
    }

    /// Input nodes in topological order.
    pub fn input_ids(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Input)
            .map(|n| n.id.as_str())
            .collect()
    }

    pub fn topo_ids(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.id.as_str()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.nodes.iter().map(|n| n.kind.parameter_count()).sum()
    }

    /// Same structure, replaced constraint groups.
    pub fn with_constraint_groups(&self, groups: Vec<ConstraintGroup>) -> Result<Graph> {
        let mut def = self.to_def();
        def.constraint_groups = groups;
        Graph::new(def)
    }

    /// Marks node `t` and everything it depends on.
    pub(crate) fn ancestors(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        seen[t] = true;
        for i in (0..=t).rev() {
            if seen[i] {
                for &p in &self.preds[i] {
                    seen[p] = true;
                }
            }
        }
        seen
    }

    /// Mutable parameter slices of node `i`. Only values change, never shapes.
    pub(crate) fn parameters_mut(&mut self, i: usize) -> Vec<&mut [f64]> {
        self.nodes[i].kind.parameters_mut()
    }
}

/// Incremental graph construction with inferred output shapes.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    def: GraphDef,
    shapes: BTreeMap<String, Vec<usize>>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(mut self, id: &str, shape: &[usize]) -> Self {
        self.shapes.insert(id.into(), shape.to_vec());
        self.def.nodes.push(NodeSpec {
            id: id.into(),
            kind: NodeKind::Input,
            inputs: Vec::new(),
            output_shape: shape.to_vec(),
        });
        self
    }

    /// Adds any non-input node; the output shape is inferred when possible and
    /// left empty otherwise so that validation reports the problem.
    pub fn node(mut self, id: &str, kind: NodeKind, inputs: &[&str]) -> Self {
        let input_shapes: Option<Vec<&[usize]>> = inputs
            .iter()
            .map(|i| self.shapes.get(*i).map(|s| s.as_slice()))
            .collect();
        let shape = input_shapes
            .filter(|s| kind.arity() == Some(s.len()))
            .and_then(|s| infer_shape(&kind, &s).ok())
            .unwrap_or_default();
        self.shapes.insert(id.into(), shape.clone());
        self.def.nodes.push(NodeSpec {
            id: id.into(),
            kind,
            inputs: inputs.iter().map(|s| String::from(*s)).collect(),
            output_shape: shape,
        });
        self
    }

    pub fn affine(self, id: &str, input: &str, weights: Tensor, bias: Vec<f64>) -> Self {
        self.node(id, NodeKind::Affine { weights, bias }, &[input])
    }

    pub fn conv1d(self, id: &str, input: &str, filters: Tensor, bias: Vec<f64>, stride: usize) -> Self {
        self.node(id, NodeKind::Conv1d { filters, bias, stride }, &[input])
    }

    pub fn maxpool1d(self, id: &str, input: &str, width: usize, stride: usize) -> Self {
        self.node(id, NodeKind::MaxPool1d { width, stride }, &[input])
    }

    pub fn relu(self, id: &str, input: &str) -> Self {
        self.node(id, NodeKind::Relu, &[input])
    }

    pub fn prelu(self, id: &str, input: &str, slope: Vec<f64>) -> Self {
        self.node(id, NodeKind::Prelu { slope }, &[input])
    }

    pub fn sigmoid(self, id: &str, input: &str) -> Self {
        self.node(id, NodeKind::Sigmoid, &[input])
    }

    pub fn tanh(self, id: &str, input: &str) -> Self {
        self.node(id, NodeKind::Tanh, &[input])
    }

    pub fn maxout(self, id: &str, input: &str, weights: Tensor, bias: Tensor) -> Self {
        self.node(id, NodeKind::Maxout { weights, bias }, &[input])
    }

    pub fn product(self, id: &str, a: &str, b: &str) -> Self {
        self.node(id, NodeKind::ElementwiseProduct, &[a, b])
    }

    pub fn softmax(self, id: &str, input: &str) -> Self {
        self.node(id, NodeKind::Softmax, &[input])
    }

    pub fn output(mut self, id: &str) -> Self {
        self.def.outputs.push(id.into());
        self
    }

    pub fn constraint_group(mut self, group: ConstraintGroup) -> Self {
        self.def.constraint_groups.push(group);
        self
    }

    pub fn into_def(self) -> GraphDef {
        self.def
    }

    pub fn build(self) -> Result<Graph> {
        Graph::new(self.def)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: &str, kind: NodeKind, inputs: &[&str], shape: &[usize]) -> NodeSpec {
        NodeSpec {
            id: id.into(),
            kind,
            inputs: inputs.iter().map(|s| String::from(*s)).collect(),
            output_shape: shape.to_vec(),
        }
    }

    #[test]
    fn input_relu_chain_validates() {
        let def = GraphBuilder::new()
            .input("x", &[3])
            .relu("r", "x")
            .output("r")
            .into_def();
        assert!(validate_graph(&def).is_ok());
    }

    #[test]
    fn affine_dimension_mismatch_is_reported() {
        let def = GraphDef {
            nodes: vec![
                spec("x", NodeKind::Input, &[], &[5]),
                spec(
                    "a",
                    NodeKind::Affine {
                        weights: Tensor::zeros(&[3, 4]),
                        bias: vec![0.0; 3],
                    },
                    &["x"],
                    &[3],
                ),
            ],
            outputs: vec!["a".into()],
            constraint_groups: vec![],
        };
        let report = validate_graph(&def);
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::ShapeMismatch { node, .. }] if node == "a"
        ));
    }

    #[test]
    fn mutual_references_are_a_cycle() {
        let def = GraphDef {
            nodes: vec![
                spec("x", NodeKind::Input, &[], &[2]),
                spec("a", NodeKind::Relu, &["b"], &[2]),
                spec("b", NodeKind::Relu, &["a"], &[2]),
            ],
            outputs: vec!["b".into()],
            constraint_groups: vec![],
        };
        let report = validate_graph(&def);
        assert!(report
            .violations
            .contains(&Violation::Cycle(vec!["a".into(), "b".into()])));
        assert!(topo_order(&def).is_err());
    }

    #[test]
    fn dangling_and_arity_violations() {
        let def = GraphDef {
            nodes: vec![
                spec("x", NodeKind::Input, &[], &[2]),
                spec("p", NodeKind::ElementwiseProduct, &["x"], &[2]),
                spec("r", NodeKind::Relu, &["ghost"], &[2]),
            ],
            outputs: vec!["r".into(), "nope".into()],
            constraint_groups: vec![],
        };
        let v = validate_graph(&def).violations;
        assert!(v.contains(&Violation::DanglingInput {
            node: "r".into(),
            input: "ghost".into()
        }));
        assert!(v.contains(&Violation::Arity {
            node: "p".into(),
            expected: 2,
            found: 1
        }));
        assert!(v.contains(&Violation::UnknownOutput("nope".into())));
    }

    #[test]
    fn product_requires_identical_shapes() {
        let def = GraphBuilder::new()
            .input("a", &[2])
            .input("b", &[3])
            .product("p", "a", "b")
            .output("p")
            .into_def();
        assert!(!validate_graph(&def).is_ok());
    }

    #[test]
    fn topo_order_chain_and_diamond() {
        let chain = GraphBuilder::new()
            .input("a", &[1])
            .relu("b", "a")
            .relu("c", "b")
            .output("c")
            .into_def();
        assert_eq!(topo_order(&chain).unwrap(), ["a", "b", "c"]);

        let diamond = GraphBuilder::new()
            .input("a", &[2])
            .tanh("c", "a")
            .relu("b", "a")
            .product("d", "b", "c")
            .output("d")
            .into_def();
        let order = topo_order(&diamond).unwrap();
        assert_eq!(order, ["a", "b", "c", "d"]);
        for _ in 0..5 {
            assert_eq!(topo_order(&diamond).unwrap(), order);
        }
    }

    #[test]
    fn constraint_group_must_target_input() {
        let def = GraphBuilder::new()
            .input("x", &[4])
            .relu("r", "x")
            .output("r")
            .constraint_group(ConstraintGroup {
                node: "r".into(),
                indices: vec![0, 1],
                total: 1.0,
            })
            .constraint_group(ConstraintGroup {
                node: "x".into(),
                indices: vec![3, 4],
                total: 1.0,
            })
            .into_def();
        let v = validate_graph(&def).violations;
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn conv_and_pool_shapes() {
        let g = GraphBuilder::new()
            .input("x", &[200, 4])
            .conv1d("c", "x", Tensor::zeros(&[20, 15, 4]), vec![0.0; 20], 1)
            .maxpool1d("m", "c", 50, 50)
            .output("m")
            .build()
            .unwrap();
        assert_eq!(g.node("c").unwrap().output_shape, [186, 20]);
        assert_eq!(g.node("m").unwrap().output_shape, [3, 20]);
    }
}
