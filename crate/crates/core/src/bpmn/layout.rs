use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{NodeKind, ProcessGraph};

pub const COLUMN_WIDTH: i64 = 150;
pub const LANE_HEIGHT: i64 = 150;
/// Width of the pool and lane name bands on the left.
const HEADER: i64 = 30;
const FIRST_COLUMN: i64 = 2 * HEADER + 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl Bounds {
    pub fn center(&self) -> (i64, i64) {
        (self.x + self.width / 2, self.y + self.height / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutedModel {
    pub graph: ProcessGraph,
    pub positions: BTreeMap<String, Bounds>,
    pub lane_bounds: BTreeMap<String, Bounds>,
    pub pool_bounds: Bounds,
}

pub fn node_size(kind: NodeKind) -> (i64, i64) {
    match kind {
        NodeKind::Task => (100, 80),
        NodeKind::XorGateway | NodeKind::AndGateway => (50, 50),
        NodeKind::StartEvent | NodeKind::EndEvent => (36, 36),
        NodeKind::DataObject => (36, 50),
    }
}

/// Column order of the flow nodes: a topological order of the flow graph,
/// preferring earlier nodes, or plain node order if the graph has a cycle.
fn columns(graph: &ProcessGraph) -> Vec<usize> {
    let flow: Vec<usize> = (0..graph.nodes.len())
        .filter(|&k| graph.nodes[k].kind.is_flow_node())
        .collect();
    let index: BTreeMap<&str, usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| (n.id.as_str(), k))
        .collect();
    let edges = graph
        .sequence_flows
        .iter()
        .map(|f| (&f.source, &f.target))
        .chain(graph.message_flows.iter().map(|f| (&f.source, &f.target)));
    let mut successors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut indegree: BTreeMap<usize, usize> = flow.iter().map(|&k| (k, 0)).collect();
    for (s, t) in edges {
        if let (Some(&s), Some(&t)) = (index.get(s.as_str()), index.get(t.as_str())) {
            successors.entry(s).or_default().push(t);
            *indegree.entry(t).or_default() += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&k, _)| Reverse(k))
        .collect();
    let mut order = Vec::with_capacity(flow.len());
    while let Some(Reverse(k)) = ready.pop() {
        order.push(k);
        for &t in successors.get(&k).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(&t).expect("edge target is a node");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(t));
            }
        }
    }
    if order.len() == flow.len() {
        order
    } else {
        flow
    }
}

/// Grid layout: one column per flow node in topological order, one row per
/// lane, data objects in a row below the pool.
pub fn layout(graph: &ProcessGraph) -> LayoutedModel {
    let row: BTreeMap<&str, i64> = graph
        .lanes
        .iter()
        .enumerate()
        .map(|(k, l)| (l.id.as_str(), k as i64))
        .collect();
    let order = columns(graph);
    let mut positions = BTreeMap::new();
    for (column, &k) in order.iter().enumerate() {
        let node = &graph.nodes[k];
        let (w, h) = node_size(node.kind);
        let lane_row = node.lane_id.as_deref().and_then(|l| row.get(l)).copied().unwrap_or(0);
        positions.insert(
            node.id.clone(),
            Bounds {
                x: FIRST_COLUMN + column as i64 * COLUMN_WIDTH + (100 - w) / 2,
                y: lane_row * LANE_HEIGHT + (LANE_HEIGHT - h) / 2,
                width: w,
                height: h,
            },
        );
    }
    let lanes_height = graph.lanes.len().max(1) as i64 * LANE_HEIGHT;
    let data: Vec<_> = graph.nodes.iter().filter(|n| n.kind == NodeKind::DataObject).collect();
    for (k, node) in data.iter().enumerate() {
        let (w, h) = node_size(node.kind);
        positions.insert(
            node.id.clone(),
            Bounds {
                x: FIRST_COLUMN + k as i64 * COLUMN_WIDTH + (100 - w) / 2,
                y: lanes_height + 30,
                width: w,
                height: h,
            },
        );
    }

    let width = FIRST_COLUMN + order.len().max(data.len()).max(2) as i64 * COLUMN_WIDTH;
    let lane_bounds = graph
        .lanes
        .iter()
        .enumerate()
        .map(|(k, l)| {
            (
                l.id.clone(),
                Bounds {
                    x: HEADER,
                    y: k as i64 * LANE_HEIGHT,
                    width: width - HEADER,
                    height: LANE_HEIGHT,
                },
            )
        })
        .collect();
    LayoutedModel {
        graph: graph.clone(),
        positions,
        lane_bounds,
        pool_bounds: Bounds {
            x: 0,
            y: 0,
            width,
            height: lanes_height,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::{Lane, Node, SequenceFlow};

    fn node(id: &str, kind: NodeKind) -> Node {
        Node {
            id: id.into(),
            kind,
            label: id.into(),
            lane_id: Some("L".into()),
        }
    }

    fn flow(s: &str, t: &str) -> SequenceFlow {
        SequenceFlow {
            id: format!("{s}-{t}"),
            source: s.into(),
            target: t.into(),
            condition_label: None,
        }
    }

    fn graph(flows: Vec<SequenceFlow>) -> ProcessGraph {
        ProcessGraph {
            lanes: vec![Lane {
                id: "L".into(),
                actor_entity_id: None,
                label: "l".into(),
            }],
            // Listed out of flow order on purpose.
            nodes: vec![
                node("c", NodeKind::Task),
                node("a", NodeKind::Task),
                node("b", NodeKind::Task),
            ],
            sequence_flows: flows,
            ..ProcessGraph::default()
        }
    }

    #[test]
    fn chain_has_increasing_x() {
        let m = layout(&graph(vec![flow("a", "b"), flow("b", "c")]));
        let x = |id: &str| m.positions[id].x;
        assert!(x("a") < x("b") && x("b") < x("c"));
        assert_eq!(layout(&graph(vec![flow("a", "b"), flow("b", "c")])), m);
    }

    #[test]
    fn cycle_falls_back_to_node_order() {
        let m = layout(&graph(vec![flow("a", "b"), flow("b", "a")]));
        let x = |id: &str| m.positions[id].x;
        assert!(x("c") < x("a") && x("a") < x("b"));
    }

    #[test]
    fn boxes_do_not_overlap() {
        let m = layout(&graph(vec![]));
        let mut xs: Vec<_> = m.positions.values().map(|b| (b.x, b.x + b.width)).collect();
        xs.sort();
        assert!(xs.windows(2).all(|w| w[0].1 <= w[1].0));
    }
}
