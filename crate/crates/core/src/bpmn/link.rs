use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::consolidate::has_role;
use super::vertex::plan_vertices;
use super::{stable_id, AssociationDirection, DataAssociation, MessageFlow, NodeKind, ProcessGraph, SequenceFlow};
use crate::corpus::{type_key, BpmnRoles, Document};

/// A relation that could not be turned into an edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkWarning {
    pub relation_id: String,
    pub message: String,
}

type Edge = (String, String, Option<String>);

fn push_edge(edges: &mut Vec<Edge>, edge: Edge) {
    if edge.0 != edge.1 && !edges.contains(&edge) {
        edges.push(edge);
    }
}

/// Connects the vertices of `graph`, built from the same consolidated
/// `doc`:
///
/// * flow relations become sequence flows inside a lane and message flows
///   across lanes; a flow through a condition mention becomes one edge from
///   the gateway labelled with the condition;
/// * `uses` relations become input data associations, and a one-word task
///   label is extended with the data mention's text;
/// * flow nodes without incoming (outgoing) edges are connected from the
///   start (to the end) event.
pub fn link(mut graph: ProcessGraph, doc: &Document, roles: &BpmnRoles) -> (ProcessGraph, Vec<LinkWarning>) {
    let plan = plan_vertices(doc, roles);
    let node_of = &plan.node_of_mention;
    let mention = doc.mention_index();
    let mut warnings = Vec::new();
    let mut warn = |relation_id: &str, message: String| {
        warnings.push(LinkWarning {
            relation_id: relation_id.to_string(),
            message,
        })
    };

    let is_condition = |id: &str| mention.get(id).is_some_and(|m| has_role(m, &roles.condition));
    let is_flow_node = |id: &str| {
        node_of
            .get(id)
            .and_then(|n| graph.node(n))
            .is_some_and(|n| n.kind.is_flow_node())
    };

    let mut edges: Vec<Edge> = Vec::new();
    let mut into_condition: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut out_of_condition: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let flow_key = type_key(&roles.flow);
    for r in doc.relations.iter().filter(|r| type_key(&r.relation_type) == flow_key) {
        let (s, t) = (r.source_mention_id.as_str(), r.target_mention_id.as_str());
        match (is_flow_node(s), is_flow_node(t), is_condition(s), is_condition(t)) {
            (true, true, _, _) => push_edge(&mut edges, (node_of[s].clone(), node_of[t].clone(), None)),
            (true, false, _, true) => into_condition.entry(t).or_default().push(node_of[s].clone()),
            (false, true, true, _) => out_of_condition.entry(s).or_default().push(node_of[t].clone()),
            _ => warn(
                &r.id,
                format!("flow {s} -> {t} does not connect activities or gateways"),
            ),
        }
    }
    let conditions: BTreeSet<&str> = into_condition.keys().chain(out_of_condition.keys()).copied().collect();
    let mut ordered: Vec<&str> = conditions.into_iter().collect();
    ordered.sort_by_key(|id| {
        mention
            .get(id)
            .map(|m| (m.token_indices.first().copied(), m.id.clone()))
    });
    for c in ordered {
        let (sources, targets) = (into_condition.get(c), out_of_condition.get(c));
        let (Some(sources), Some(targets)) = (sources, targets) else {
            warn(c, format!("condition {c} is not between a gateway and a successor"));
            continue;
        };
        let label = doc.surface(mention[c]);
        for s in sources {
            for t in targets {
                push_edge(&mut edges, (s.clone(), t.clone(), Some(label.clone())));
            }
        }
    }

    // Events close the flow.
    let start = graph
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::StartEvent)
        .map(|n| n.id.clone());
    let end = graph
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::EndEvent)
        .map(|n| n.id.clone());
    if let (Some(start), Some(end)) = (start, end) {
        let inner: Vec<String> = graph
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Task | NodeKind::XorGateway | NodeKind::AndGateway))
            .map(|n| n.id.clone())
            .collect();
        let has_in: BTreeSet<String> = edges.iter().map(|e| e.1.clone()).collect();
        let has_out: BTreeSet<String> = edges.iter().map(|e| e.0.clone()).collect();
        if inner.is_empty() {
            push_edge(&mut edges, (start.clone(), end.clone(), None));
        }
        for n in inner.iter().filter(|n| !has_in.contains(*n)) {
            push_edge(&mut edges, (start.clone(), n.clone(), None));
        }
        for n in inner.iter().filter(|n| !has_out.contains(*n)) {
            push_edge(&mut edges, (n.clone(), end.clone(), None));
        }
    }

    let lane_of = |id: &str| graph.node(id).and_then(|n| n.lane_id.clone());
    let mut sequence_flows = Vec::new();
    let mut message_flows = Vec::new();
    for (source, target, condition_label) in edges {
        if lane_of(&source) == lane_of(&target) {
            let ordinal = (sequence_flows.len() + 1).to_string();
            sequence_flows.push(SequenceFlow {
                id: stable_id("Flow", &[&source, &target, &ordinal]),
                source,
                target,
                condition_label,
            });
        } else {
            let ordinal = (message_flows.len() + 1).to_string();
            message_flows.push(MessageFlow {
                id: stable_id("MessageFlow", &[&source, &target, &ordinal]),
                source,
                target,
            });
        }
    }

    let uses_key = type_key(&roles.uses);
    let mut associations: Vec<DataAssociation> = Vec::new();
    let mut relabelled = BTreeSet::new();
    for r in doc.relations.iter().filter(|r| type_key(&r.relation_type) == uses_key) {
        let (s, t) = (r.source_mention_id.as_str(), r.target_mention_id.as_str());
        let task = node_of
            .get(s)
            .filter(|n| graph.node(n).is_some_and(|n| n.kind == NodeKind::Task));
        let data = node_of
            .get(t)
            .filter(|n| graph.node(n).is_some_and(|n| n.kind == NodeKind::DataObject));
        let (Some(task), Some(data)) = (task, data) else {
            warn(&r.id, format!("uses {s} -> {t} does not connect an activity with data"));
            continue;
        };
        if associations.iter().any(|a| a.task == *task && a.data_object == *data) {
            continue;
        }
        associations.push(DataAssociation {
            id: stable_id("DataAssociation", &[task, data]),
            data_object: data.clone(),
            task: task.clone(),
            direction: AssociationDirection::Input,
        });
        let node = graph
            .nodes
            .iter_mut()
            .find(|n| n.id == *task)
            .expect("task resolved above");
        if node.label.split_whitespace().count() == 1 && relabelled.insert(task.clone()) {
            node.label = format!("{} {}", node.label, doc.surface(mention[t]));
        }
    }
    // Associations are written inside their task; keep them in task order.
    let position: BTreeMap<&str, usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| (n.id.as_str(), k))
        .collect();
    associations.sort_by_key(|a| position[a.task.as_str()]);

    graph.sequence_flows = sequence_flows;
    graph.message_flows = message_flows;
    graph.data_associations = associations;
    (graph, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::test_support::roles;
    use crate::bpmn::{build_vertices, consolidate};
    use crate::corpus::test_support::{doc, mention, relation};

    fn linked(d: &Document) -> (ProcessGraph, Vec<LinkWarning>) {
        let c = consolidate(d, &roles());
        let g = build_vertices(&c, &roles());
        link(g, &c, &roles())
    }

    fn task<'a>(g: &'a ProcessGraph, label: &str) -> &'a str {
        &g.nodes.iter().find(|n| n.label == label).unwrap().id
    }

    #[test]
    fn same_lane_flow_is_sequence_flow() {
        let mut d = doc("d", "the clerk checks and files");
        d.mentions = vec![
            mention("a", "Actor", &[0, 1]),
            mention("x", "Activity", &[2]),
            mention("y", "Activity", &[4]),
        ];
        d.relations = vec![relation("r", "flow", "x", "y")];
        let (g, warnings) = linked(&d);
        assert!(warnings.is_empty());
        assert!(g.check().is_empty(), "{:?}", g.check());
        let (x, y) = (task(&g, "checks"), task(&g, "files"));
        assert!(g.sequence_flows.iter().any(|f| f.source == x && f.target == y));
        assert!(g.message_flows.is_empty());
        // start -> checks, checks -> files, files -> end
        assert_eq!(g.sequence_flows.len(), 3);
    }

    #[test]
    fn cross_lane_flow_is_message_flow() {
        let mut d = doc("d", "the clerk checks and the boss signs");
        d.mentions = vec![
            mention("a", "Actor", &[0, 1]),
            mention("x", "Activity", &[2]),
            mention("b", "Actor", &[4, 5]),
            mention("y", "Activity", &[6]),
        ];
        d.relations = vec![relation("r", "flow", "x", "y")];
        let (g, _) = linked(&d);
        assert!(g.check().is_empty(), "{:?}", g.check());
        let (x, y) = (task(&g, "checks"), task(&g, "signs"));
        assert!(g.message_flows.iter().any(|f| f.source == x && f.target == y));
        assert!(!g.sequence_flows.iter().any(|f| f.source == x && f.target == y));
    }

    #[test]
    fn uses_extends_label_and_adds_association() {
        let mut d = doc("d", "the clerk will register the claim");
        d.mentions = vec![
            mention("a", "Actor", &[0, 1]),
            mention("x", "Activity", &[3]),
            mention("c", "Activity Data", &[4, 5]),
        ];
        d.relations = vec![relation("r", "uses", "x", "c")];
        let (g, _) = linked(&d);
        let t = task(&g, "register the claim");
        assert_eq!(g.data_associations.len(), 1);
        assert_eq!(g.data_associations[0].task, t);
        assert_eq!(g.data_associations[0].direction, AssociationDirection::Input);
    }

    #[test]
    fn conditions_label_gateway_flows() {
        let mut d = doc("d", "the clerk checks it . if it is fine he pays");
        d.mentions = vec![
            mention("a", "Actor", &[0, 1]),
            mention("x", "Activity", &[2]),
            mention("g", "XOR Gateway", &[5]),
            mention("c", "Condition Specification", &[6, 7, 8]),
            mention("y", "Activity", &[10]),
        ];
        d.relations = vec![relation("r1", "flow", "x", "g"), relation("r2", "flow", "c", "y")];
        let (g, warnings) = linked(&d);
        assert!(warnings.is_empty(), "{warnings:?}");
        let gw = &g.nodes.iter().find(|n| n.kind == NodeKind::XorGateway).unwrap().id;
        let pay = task(&g, "pays");
        let f = g
            .sequence_flows
            .iter()
            .find(|f| f.source == *gw && f.target == pay)
            .unwrap();
        assert_eq!(f.condition_label.as_deref(), Some("it is fine"));
    }

    #[test]
    fn bad_endpoints_warn() {
        let mut d = doc("d", "the clerk checks it");
        d.mentions = vec![mention("a", "Actor", &[0, 1]), mention("x", "Activity", &[2])];
        d.relations = vec![relation("r", "flow", "x", "a")];
        let (g, warnings) = linked(&d);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].relation_id, "r");
        assert!(g.check().is_empty());
    }

    #[test]
    fn empty_document_links_start_to_end() {
        let (g, _) = linked(&doc("d", "nothing"));
        assert_eq!(g.sequence_flows.len(), 1);
        assert!(g.check().is_empty());
    }
}
