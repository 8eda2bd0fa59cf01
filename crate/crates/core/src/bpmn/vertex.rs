use std::collections::BTreeMap;

use super::consolidate::{first_token, has_role, is_gateway};
use super::{stable_id, Lane, Node, NodeKind, ProcessGraph};
use crate::corpus::{type_key, BpmnRoles, Document, Mention};

pub const UNASSIGNED_LANE_LABEL: &str = "unassigned";

/// Vertices plus the mapping from mentions to the nodes they became.
pub(crate) struct VertexPlan {
    pub graph: ProcessGraph,
    pub node_of_mention: BTreeMap<String, String>,
}

struct Group<'a> {
    id: String,
    members: Vec<&'a Mention>,
}

impl Group<'_> {
    fn start(&self) -> usize {
        first_token(self.members[0])
    }

    /// Longest member surface, earliest on ties.
    fn label(&self, doc: &Document) -> String {
        let mut best = String::new();
        for m in &self.members {
            let s = doc.surface(m);
            if s.len() > best.len() {
                best = s;
            }
        }
        best
    }
}

/// Mentions selected by `keep`, grouped by entity; mentions outside any
/// entity form their own group. Ordered by first mention.
fn groups<'a>(doc: &'a Document, keep: impl Fn(&Mention) -> bool) -> Vec<Group<'a>> {
    let index = doc.mention_index();
    let mut grouped = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for entity in &doc.entities {
        let mut members: Vec<&Mention> = entity
            .mention_ids
            .iter()
            .filter_map(|id| index.get(id.as_str()).copied())
            .filter(|m| keep(m))
            .collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by_key(|m| (first_token(m), m.id.clone()));
        grouped.extend(members.iter().map(|m| m.id.clone()));
        out.push(Group {
            id: entity.id.clone(),
            members,
        });
    }
    for m in &doc.mentions {
        if keep(m) && !grouped.contains(&m.id) {
            out.push(Group {
                id: m.id.clone(),
                members: vec![m],
            });
        }
    }
    out.sort_by_key(|g| (g.start(), g.id.clone()));
    out
}

struct NodeIds(BTreeMap<NodeKind, usize>);

impl NodeIds {
    fn next(&mut self, kind: NodeKind, label: &str) -> String {
        let ordinal = self.0.entry(kind).or_default();
        *ordinal += 1;
        stable_id(kind.id_prefix(), &[kind.element(), label, &ordinal.to_string()])
    }
}

pub(crate) fn plan_vertices(doc: &Document, roles: &BpmnRoles) -> VertexPlan {
    let actors = groups(doc, |m| has_role(m, &roles.actor));
    let data = groups(doc, |m| has_role(m, &roles.data));
    let gateways = groups(doc, |m| is_gateway(m, roles));
    let mut activities: Vec<&Mention> = doc.mentions.iter().filter(|m| has_role(m, &roles.activity)).collect();
    activities.sort_by_key(|m| (first_token(m), m.id.clone()));

    let mut lanes: Vec<Lane> = actors
        .iter()
        .map(|g| Lane {
            id: stable_id("Lane", &[&g.id]),
            actor_entity_id: Some(g.id.clone()),
            label: g.label(doc),
        })
        .collect();
    let mut lane_of_actor: BTreeMap<&str, String> = BTreeMap::new();
    for (group, lane) in actors.iter().zip(&lanes) {
        for m in &group.members {
            lane_of_actor.insert(m.id.as_str(), lane.id.clone());
        }
    }

    let performer_key = type_key(&roles.performer);
    let activity_lane: Vec<Option<String>> = activities
        .iter()
        .map(|a| {
            doc.relations
                .iter()
                .filter(|r| type_key(&r.relation_type) == performer_key && r.source_mention_id == a.id)
                .find_map(|r| lane_of_actor.get(r.target_mention_id.as_str()).cloned())
        })
        .collect();
    // A gateway sits in the lane of the closest activity before it, or else
    // of the first activity after it.
    let gateway_lane: Vec<Option<String>> = gateways
        .iter()
        .map(|g| {
            let before = activities.iter().rposition(|a| first_token(a) < g.start());
            let pick = before.or(if activities.is_empty() { None } else { Some(0) });
            pick.and_then(|k| activity_lane[k].clone())
                .or_else(|| lanes.first().map(|l| l.id.clone()))
        })
        .collect();

    let unassigned_id = stable_id("Lane", &[UNASSIGNED_LANE_LABEL]);
    if lanes.is_empty() || activity_lane.iter().chain(&gateway_lane).any(Option::is_none) {
        lanes.push(Lane {
            id: unassigned_id.clone(),
            actor_entity_id: None,
            label: UNASSIGNED_LANE_LABEL.to_string(),
        });
    }
    let first_lane = lanes[0].id.clone();
    let or_unassigned = |lane: &Option<String>| lane.clone().unwrap_or_else(|| unassigned_id.clone());

    let mut ids = NodeIds(BTreeMap::new());
    let mut node_of_mention = BTreeMap::new();
    let mut nodes = vec![Node {
        id: ids.next(NodeKind::StartEvent, "start"),
        kind: NodeKind::StartEvent,
        label: String::new(),
        lane_id: Some(first_lane.clone()),
    }];

    // Tasks and gateways in text order.
    let mut flow_nodes: Vec<(usize, NodeKind, String, String, Vec<&str>)> = Vec::new();
    for (a, lane) in activities.iter().zip(&activity_lane) {
        flow_nodes.push((
            first_token(a),
            NodeKind::Task,
            doc.surface(a),
            or_unassigned(lane),
            vec![&a.id],
        ));
    }
    for (g, lane) in gateways.iter().zip(&gateway_lane) {
        let kind = if has_role(g.members[0], &roles.and_gateway) {
            NodeKind::AndGateway
        } else {
            NodeKind::XorGateway
        };
        let members = g.members.iter().map(|m| m.id.as_str()).collect();
        flow_nodes.push((g.start(), kind, doc.surface(g.members[0]), or_unassigned(lane), members));
    }
    flow_nodes.sort_by_key(|a| (a.0, a.1));
    for (_, kind, label, lane, members) in flow_nodes {
        let id = ids.next(kind, &label);
        for m in members {
            node_of_mention.insert(m.to_string(), id.clone());
        }
        nodes.push(Node {
            id,
            kind,
            label,
            lane_id: Some(lane),
        });
    }

    nodes.push(Node {
        id: ids.next(NodeKind::EndEvent, "end"),
        kind: NodeKind::EndEvent,
        label: String::new(),
        lane_id: Some(first_lane),
    });
    for g in &data {
        let label = g.label(doc);
        let id = ids.next(NodeKind::DataObject, &label);
        for m in &g.members {
            node_of_mention.insert(m.id.clone(), id.clone());
        }
        nodes.push(Node {
            id,
            kind: NodeKind::DataObject,
            label,
            lane_id: None,
        });
    }

    VertexPlan {
        graph: ProcessGraph {
            lanes,
            nodes,
            ..ProcessGraph::default()
        },
        node_of_mention,
    }
}

/// Lanes (one per actor entity, plus an `unassigned` lane when needed),
/// one task per activity mention, one gateway per merged gateway, one data
/// object per data entity, and the start and end events. Expects a
/// consolidated document.
pub fn build_vertices(doc: &Document, roles: &BpmnRoles) -> ProcessGraph {
    plan_vertices(doc, roles).graph
}
