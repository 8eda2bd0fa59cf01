//! Compiles process information (mentions, entities, relations) into a BPMN
//! 2.0 model in three stages: consolidation of the annotations, creation of
//! vertices (lanes, tasks, gateways, data objects, events) and linking them
//! with flows and data associations. A deterministic grid layout and an XML
//! writer/reader complete the chain.

mod consolidate;
mod layout;
mod link;
mod vertex;
mod xml;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{BpmnRoles, Document};

pub use consolidate::consolidate;
pub use layout::{layout, Bounds, LayoutedModel};
pub use link::{link, LinkWarning};
pub use vertex::{build_vertices, UNASSIGNED_LANE_LABEL};
pub use xml::{parse_bpmn, serialize_bpmn};

#[derive(Debug, thiserror::Error)]
pub enum BpmnError {
    #[error("malformed BPMN XML: {0}")]
    Xml(String),
    #[error("invalid BPMN model: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Task,
    XorGateway,
    AndGateway,
    StartEvent,
    EndEvent,
    DataObject,
}

impl NodeKind {
    /// Element name in the BPMN model namespace.
    pub fn element(self) -> &'static str {
        match self {
            NodeKind::Task => "task",
            NodeKind::XorGateway => "exclusiveGateway",
            NodeKind::AndGateway => "parallelGateway",
            NodeKind::StartEvent => "startEvent",
            NodeKind::EndEvent => "endEvent",
            NodeKind::DataObject => "dataObjectReference",
        }
    }

    pub fn from_element(name: &str) -> Option<Self> {
        [
            NodeKind::Task,
            NodeKind::XorGateway,
            NodeKind::AndGateway,
            NodeKind::StartEvent,
            NodeKind::EndEvent,
            NodeKind::DataObject,
        ]
        .into_iter()
        .find(|k| k.element() == name)
    }

    fn id_prefix(self) -> &'static str {
        match self {
            NodeKind::Task => "Task",
            NodeKind::XorGateway | NodeKind::AndGateway => "Gateway",
            NodeKind::StartEvent => "StartEvent",
            NodeKind::EndEvent => "EndEvent",
            NodeKind::DataObject => "DataObjectReference",
        }
    }

    /// Nodes that live in a lane and take part in sequence/message flows.
    pub fn is_flow_node(self) -> bool {
        self != NodeKind::DataObject
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    /// `None` for the lane collecting activities without an actor.
    pub actor_entity_id: Option<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
    /// Absent for data objects.
    pub lane_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub condition_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageFlow {
    pub id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataAssociation {
    pub id: String,
    pub data_object: String,
    pub task: String,
    pub direction: AssociationDirection,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessGraph {
    pub lanes: Vec<Lane>,
    pub nodes: Vec<Node>,
    pub sequence_flows: Vec<SequenceFlow>,
    pub message_flows: Vec<MessageFlow>,
    pub data_associations: Vec<DataAssociation>,
}

impl ProcessGraph {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Broken structural rules, empty for a valid graph.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let lanes: BTreeSet<&str> = self.lanes.iter().map(|l| l.id.as_str()).collect();
        let nodes: BTreeMap<&str, &Node> = self.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
        if nodes.len() != self.nodes.len() {
            problems.push("duplicate node id".to_string());
        }
        for node in &self.nodes {
            match (&node.lane_id, node.kind.is_flow_node()) {
                (Some(lane), true) if lanes.contains(lane.as_str()) => {}
                (None, false) => {}
                (lane, _) => problems.push(format!("node {} has lane {lane:?}", node.id)),
            }
        }
        let lane_of = |id: &str| nodes.get(id).map(|n| n.lane_id.clone());
        for f in &self.sequence_flows {
            match (lane_of(&f.source), lane_of(&f.target)) {
                (Some(Some(a)), Some(Some(b))) if a == b => {}
                (Some(Some(_)), Some(Some(_))) => problems.push(format!("sequence flow {} crosses lanes", f.id)),
                _ => problems.push(format!("sequence flow {} has an unresolved endpoint", f.id)),
            }
        }
        for f in &self.message_flows {
            match (lane_of(&f.source), lane_of(&f.target)) {
                (Some(Some(a)), Some(Some(b))) if a != b => {}
                (Some(Some(_)), Some(Some(_))) => problems.push(format!("message flow {} stays in one lane", f.id)),
                _ => problems.push(format!("message flow {} has an unresolved endpoint", f.id)),
            }
        }
        for a in &self.data_associations {
            let data_ok = nodes
                .get(a.data_object.as_str())
                .is_some_and(|n| n.kind == NodeKind::DataObject);
            let task_ok = nodes.get(a.task.as_str()).is_some_and(|n| n.kind == NodeKind::Task);
            if !data_ok || !task_ok {
                problems.push(format!("data association {} has an unresolved endpoint", a.id));
            }
        }
        if self.count(NodeKind::StartEvent) != 1 {
            problems.push(format!("{} start events", self.count(NodeKind::StartEvent)));
        }
        if self.count(NodeKind::EndEvent) == 0 {
            problems.push("no end event".to_string());
        }
        problems
    }
}

/// `<prefix>_<12 hex digits>` from a hash of the parts.
pub(crate) fn stable_id(prefix: &str, parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0]);
    }
    format!("{prefix}_{}", &hex::encode(hasher.finalize())[..12])
}

/// All three stages plus layout, for one document.
pub fn compile(doc: &Document, roles: &BpmnRoles) -> (LayoutedModel, Vec<LinkWarning>) {
    let consolidated = consolidate(doc, roles);
    let graph = build_vertices(&consolidated, roles);
    let (graph, warnings) = link(graph, &consolidated, roles);
    (layout(&graph), warnings)
}

/// Compiles a document straight to BPMN XML.
pub fn generate_bpmn(doc: &Document, roles: &BpmnRoles) -> (String, Vec<LinkWarning>) {
    let (model, warnings) = compile(doc, roles);
    (serialize_bpmn(&model), warnings)
}
