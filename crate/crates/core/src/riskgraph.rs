//! Typed risk knowledge graph.
//!
//! Nodes are triggers, outcomes and exposure vessels keyed by
//! `(kind, canonical phrase)`. Edges follow a strict two-hop layering:
//!
//! ```text
//! Trigger --causes--> Outcome --impacts--> ExposureVessel
//! ```
//!
//! Parallel edges are merged; every node and edge carries the set of risk ids
//! that produced it. Storage is ordered (`BTreeMap`) so iteration, queries and
//! exports are deterministic regardless of insertion order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{normalize_phrase, CanonicalPhrase, Confidence, RiskDecomposition, RiskId};

pub const GRAPH_SCHEMA: &str = "riskgraph/1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("insufficient structure: risk {0} has only a trigger")]
    InsufficientStructure(RiskId),
    #[error("risk {0} has an empty trigger")]
    EmptyTrigger(RiskId),
    #[error("invalid graph document: {0}")]
    InvalidDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Trigger,
    Outcome,
    ExposureVessel,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Trigger => "trigger",
            NodeKind::Outcome => "outcome",
            NodeKind::ExposureVessel => "exposure_vessel",
        }
    }

    fn dot_style(self) -> (&'static str, &'static str) {
        match self {
            NodeKind::Trigger => ("box", "#f4cccc"),
            NodeKind::Outcome => ("ellipse", "#fff2cc"),
            NodeKind::ExposureVessel => ("hexagon", "#cfe2f3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Causes,
    Impacts,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Causes => "causes",
            Relation::Impacts => "impacts",
        }
    }

    /// The only (from, to) kinds this relation may connect.
    pub fn endpoint_kinds(self) -> (NodeKind, NodeKind) {
        match self {
            Relation::Causes => (NodeKind::Trigger, NodeKind::Outcome),
            Relation::Impacts => (NodeKind::Outcome, NodeKind::ExposureVessel),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeKey {
    pub kind: NodeKind,
    pub phrase: CanonicalPhrase,
}

impl NodeKey {
    pub fn new(kind: NodeKind, phrase: CanonicalPhrase) -> Self {
        NodeKey { kind, phrase }
    }

    /// Stable textual id, e.g. `trigger:cyber-attacks`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.kind.as_str(), self.phrase)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub relation: Relation,
    pub from: NodeKey,
    pub to: NodeKey,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<NodeKey, BTreeSet<RiskId>>,
    edges: BTreeMap<EdgeKey, BTreeSet<RiskId>>,
}

/// Per-node degree summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeDegree {
    pub kind: NodeKind,
    pub phrase: String,
    pub in_degree: usize,
    pub out_degree: usize,
    pub risk_count: usize,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeKey, &BTreeSet<RiskId>)> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &BTreeSet<RiskId>)> {
        self.edges.iter()
    }

    pub fn count_nodes(&self, kind: NodeKind) -> usize {
        self.nodes.keys().filter(|k| k.kind == kind).count()
    }

    pub fn count_edges(&self, relation: Relation) -> usize {
        self.edges.keys().filter(|k| k.relation == relation).count()
    }

    pub fn node_risks(&self, kind: NodeKind, phrase: &str) -> Option<&BTreeSet<RiskId>> {
        self.nodes.get(&NodeKey::new(kind, normalize_phrase(phrase)))
    }

    fn touch_node(&mut self, key: &NodeKey, risk: &RiskId) {
        self.nodes.entry(key.clone()).or_default().insert(risk.clone());
    }

    fn touch_edge(&mut self, relation: Relation, from: &NodeKey, to: &NodeKey, risk: &RiskId) {
        let (from_kind, to_kind) = relation.endpoint_kinds();
        assert!(
            from.kind == from_kind && to.kind == to_kind,
            "layering violated: {} edge {} -> {}",
            relation.as_str(),
            from.id(),
            to.id()
        );
        self.edges
            .entry(EdgeKey { relation, from: from.clone(), to: to.clone() })
            .or_default()
            .insert(risk.clone());
    }

    /// Merge one decomposition into the graph.
    pub fn add_risk(&mut self, decomposition: &RiskDecomposition) -> Result<(), GraphError> {
        let risk = &decomposition.risk_id;
        if decomposition.confidence == Confidence::TriggerOnly {
            return Err(GraphError::InsufficientStructure(risk.clone()));
        }
        if decomposition.trigger.is_empty() {
            return Err(GraphError::EmptyTrigger(risk.clone()));
        }
        let trigger = NodeKey::new(NodeKind::Trigger, decomposition.trigger.clone());
        self.touch_node(&trigger, risk);
        let vessels: Vec<NodeKey> = decomposition
            .exposure_vessels
            .iter()
            .filter(|v| !v.is_empty())
            .map(|v| NodeKey::new(NodeKind::ExposureVessel, v.clone()))
            .collect();
        for vessel in &vessels {
            self.touch_node(vessel, risk);
        }
        for outcome in decomposition.outcomes.iter().filter(|o| !o.is_empty()) {
            let outcome = NodeKey::new(NodeKind::Outcome, outcome.clone());
            self.touch_node(&outcome, risk);
            self.touch_edge(Relation::Causes, &trigger, &outcome, risk);
            for vessel in &vessels {
                self.touch_edge(Relation::Impacts, &outcome, vessel, risk);
            }
        }
        Ok(())
    }

    /// Risks whose trigger normalizes to `phrase`.
    pub fn risks_by_trigger(&self, phrase: &str) -> BTreeSet<RiskId> {
        self.node_risks(NodeKind::Trigger, phrase).cloned().unwrap_or_default()
    }

    /// Outcomes shared by two or more risks, largest sharing first.
    pub fn shared_outcomes(&self) -> Vec<(CanonicalPhrase, BTreeSet<RiskId>)> {
        let mut shared: Vec<_> = self
            .nodes
            .iter()
            .filter(|(k, ids)| k.kind == NodeKind::Outcome && ids.len() >= 2)
            .map(|(k, ids)| (k.phrase.clone(), ids.clone()))
            .collect();
        shared.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
        shared
    }

    pub fn degree_report(&self) -> Vec<NodeDegree> {
        let mut in_deg: BTreeMap<&NodeKey, usize> = BTreeMap::new();
        let mut out_deg: BTreeMap<&NodeKey, usize> = BTreeMap::new();
        for key in self.edges.keys() {
            *out_deg.entry(&key.from).or_default() += 1;
            *in_deg.entry(&key.to).or_default() += 1;
        }
        self.nodes
            .iter()
            .map(|(k, ids)| NodeDegree {
                kind: k.kind,
                phrase: k.phrase.to_string(),
                in_degree: in_deg.get(k).copied().unwrap_or(0),
                out_degree: out_deg.get(k).copied().unwrap_or(0),
                risk_count: ids.len(),
            })
            .collect()
    }

    /// Check every structural invariant. Used by tests and after import.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (key, ids) in &self.nodes {
            if ids.is_empty() {
                return Err(GraphError::InvalidDocument(format!("node {} has no risks", key.id())));
            }
            if key.phrase.is_empty() || normalize_phrase(key.phrase.as_str()) != key.phrase {
                return Err(GraphError::InvalidDocument(format!(
                    "node {} phrase is not canonical",
                    key.id()
                )));
            }
        }
        for (key, ids) in &self.edges {
            let (from_kind, to_kind) = key.relation.endpoint_kinds();
            if key.from.kind != from_kind || key.to.kind != to_kind {
                return Err(GraphError::InvalidDocument(format!(
                    "{} edge {} -> {} violates layering",
                    key.relation.as_str(),
                    key.from.id(),
                    key.to.id()
                )));
            }
            if !self.nodes.contains_key(&key.from) || !self.nodes.contains_key(&key.to) {
                return Err(GraphError::InvalidDocument(format!(
                    "edge {} -> {} has a dangling endpoint",
                    key.from.id(),
                    key.to.id()
                )));
            }
            if ids.is_empty() {
                return Err(GraphError::InvalidDocument("edge has no risks".into()));
            }
        }
        Ok(())
    }

    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Dot => self.to_dot(),
            ExportFormat::Json => self.to_json(),
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph riskgraph {\n  rankdir=LR;\n");
        for (key, ids) in &self.nodes {
            let (shape, color) = key.kind.dot_style();
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\", shape={}, style=filled, fillcolor=\"{}\", tooltip=\"{}\"];",
                dot_escape(&key.id()),
                dot_escape(key.phrase.as_str()),
                shape,
                color,
                dot_escape(&join_ids(ids)),
            );
        }
        for (key, ids) in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\", tooltip=\"{}\"];",
                dot_escape(&key.from.id()),
                dot_escape(&key.to.id()),
                key.relation.as_str(),
                dot_escape(&join_ids(ids)),
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            schema: GRAPH_SCHEMA.to_string(),
            nodes: self
                .nodes
                .iter()
                .map(|(k, ids)| NodeRecord {
                    id: k.id(),
                    kind: k.kind,
                    phrase: k.phrase.to_string(),
                    risk_ids: ids.iter().cloned().collect(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(k, ids)| EdgeRecord {
                    relation: k.relation,
                    from: k.from.id(),
                    to: k.to.id(),
                    risk_ids: ids.iter().cloned().collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_document()).expect("graph serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| GraphError::InvalidDocument(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self, GraphError> {
        if doc.schema != GRAPH_SCHEMA {
            return Err(GraphError::InvalidDocument(format!("unsupported schema {:?}", doc.schema)));
        }
        let mut graph = KnowledgeGraph::new();
        let mut by_id: BTreeMap<String, NodeKey> = BTreeMap::new();
        for node in doc.nodes {
            let key = NodeKey::new(node.kind, normalize_phrase(&node.phrase));
            if key.id() != node.id {
                return Err(GraphError::InvalidDocument(format!("node id {:?} does not match", node.id)));
            }
            if by_id.insert(node.id.clone(), key.clone()).is_some() {
                return Err(GraphError::InvalidDocument(format!("duplicate node {:?}", node.id)));
            }
            graph.nodes.insert(key, node.risk_ids.into_iter().collect());
        }
        for edge in doc.edges {
            let lookup = |id: &str| {
                by_id
                    .get(id)
                    .cloned()
                    .ok_or_else(|| GraphError::InvalidDocument(format!("unknown node {id:?}")))
            };
            let key = EdgeKey { relation: edge.relation, from: lookup(&edge.from)?, to: lookup(&edge.to)? };
            if graph.edges.insert(key, edge.risk_ids.into_iter().collect()).is_some() {
                return Err(GraphError::InvalidDocument("duplicate edge".into()));
            }
        }
        graph.validate()?;
        Ok(graph)
    }
}

fn join_ids(ids: &BTreeSet<RiskId>) -> String {
    ids.iter().map(RiskId::as_str).collect::<Vec<_>>().join(",")
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown graph format {other:?} (expected dot or json)")),
        }
    }
}

/// JSON graph document (`"schema": "riskgraph/1"`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub schema: String,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    pub kind: NodeKind,
    pub phrase: String,
    pub risk_ids: Vec<RiskId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub relation: Relation,
    pub from: String,
    pub to: String,
    pub risk_ids: Vec<RiskId>,
}
