use std::collections::BTreeMap;
use std::io;

use quick_xml::events::{BytesDecl, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};

use super::layout::{Bounds, LayoutedModel};
use super::{
    AssociationDirection, BpmnError, DataAssociation, Lane, MessageFlow, Node, NodeKind, ProcessGraph, SequenceFlow,
};

const BPMN_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
const BPMNDI_NS: &str = "http://www.omg.org/spec/BPMN/20100524/DI";
const DC_NS: &str = "http://www.omg.org/spec/DD/20100524/DC";
const DI_NS: &str = "http://www.omg.org/spec/DD/20100524/DI";
/// Extension namespace for the lane → actor entity link.
const EXT_NS: &str = "urn:procex:bpmn";
const ACTOR_ATTR: &str = "procex:actorEntity";

const COLLABORATION_ID: &str = "Collaboration_1";
const PARTICIPANT_ID: &str = "Participant_1";
const PROCESS_ID: &str = "Process_1";

type W = Writer<Vec<u8>>;

fn data_object_id(reference_id: &str) -> String {
    match reference_id.strip_prefix("DataObjectReference_") {
        Some(rest) => format!("DataObject_{rest}"),
        None => format!("{reference_id}_object"),
    }
}

/// BPMN 2.0 XML with one pool, its lanes, the process elements and a DI
/// section. Equal models give byte-identical output.
pub fn serialize_bpmn(model: &LayoutedModel) -> String {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    write_definitions(&mut w, model).expect("writing to memory does not fail");
    let mut out = String::from_utf8(w.into_inner()).expect("writer emits UTF-8");
    out.push('\n');
    out
}

fn write_definitions(w: &mut W, m: &LayoutedModel) -> io::Result<()> {
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
    w.create_element("bpmn:definitions")
        .with_attributes([
            ("xmlns:bpmn", BPMN_NS),
            ("xmlns:bpmndi", BPMNDI_NS),
            ("xmlns:dc", DC_NS),
            ("xmlns:di", DI_NS),
            ("xmlns:procex", EXT_NS),
            ("id", "Definitions_1"),
            ("targetNamespace", "http://bpmn.io/schema/bpmn"),
        ])
        .write_inner_content(|w| {
            write_collaboration(w, &m.graph)?;
            write_process(w, &m.graph)?;
            write_diagram(w, m)
        })?;
    Ok(())
}

fn write_collaboration(w: &mut W, g: &ProcessGraph) -> io::Result<()> {
    w.create_element("bpmn:collaboration")
        .with_attribute(("id", COLLABORATION_ID))
        .write_inner_content(|w| {
            w.create_element("bpmn:participant")
                .with_attributes([("id", PARTICIPANT_ID), ("name", "Process"), ("processRef", PROCESS_ID)])
                .write_empty()?;
            for f in &g.message_flows {
                w.create_element("bpmn:messageFlow")
                    .with_attributes([
                        ("id", f.id.as_str()),
                        ("sourceRef", &f.source),
                        ("targetRef", &f.target),
                    ])
                    .write_empty()?;
            }
            Ok(())
        })?;
    Ok(())
}

fn write_process(w: &mut W, g: &ProcessGraph) -> io::Result<()> {
    w.create_element("bpmn:process")
        .with_attributes([("id", PROCESS_ID), ("isExecutable", "false")])
        .write_inner_content(|w| {
            w.create_element("bpmn:laneSet")
                .with_attribute(("id", "LaneSet_1"))
                .write_inner_content(|w| {
                    for lane in &g.lanes {
                        let mut start = BytesStart::new("bpmn:lane");
                        start.push_attribute(("id", lane.id.as_str()));
                        start.push_attribute(("name", lane.label.as_str()));
                        if let Some(actor) = &lane.actor_entity_id {
                            start.push_attribute((ACTOR_ATTR, actor.as_str()));
                        }
                        let members: Vec<&Node> = g
                            .nodes
                            .iter()
                            .filter(|n| n.lane_id.as_ref() == Some(&lane.id))
                            .collect();
                        if members.is_empty() {
                            w.write_event(Event::Empty(start))?;
                            continue;
                        }
                        w.write_event(Event::Start(start.borrow()))?;
                        for n in members {
                            w.create_element("bpmn:flowNodeRef")
                                .write_text_content(BytesText::new(&n.id))?;
                        }
                        w.write_event(Event::End(start.to_end()))?;
                    }
                    Ok(())
                })?;
            for node in &g.nodes {
                write_node(w, g, node)?;
            }
            for f in &g.sequence_flows {
                let mut e = w.create_element("bpmn:sequenceFlow").with_attributes([
                    ("id", f.id.as_str()),
                    ("sourceRef", &f.source),
                    ("targetRef", &f.target),
                ]);
                if let Some(label) = &f.condition_label {
                    e = e.with_attribute(("name", label.as_str()));
                }
                e.write_empty()?;
            }
            Ok(())
        })?;
    Ok(())
}

fn write_node(w: &mut W, g: &ProcessGraph, node: &Node) -> io::Result<()> {
    let name = format!("bpmn:{}", node.kind.element());
    let attrs = [("id", node.id.as_str()), ("name", node.label.as_str())];
    match node.kind {
        NodeKind::DataObject => {
            let object = data_object_id(&node.id);
            w.create_element(name.as_str())
                .with_attributes(attrs)
                .with_attribute(("dataObjectRef", object.as_str()))
                .write_empty()?;
            w.create_element("bpmn:dataObject")
                .with_attribute(("id", object.as_str()))
                .write_empty()?;
        }
        NodeKind::Task => {
            let associations: Vec<&DataAssociation> =
                g.data_associations.iter().filter(|a| a.task == node.id).collect();
            let e = w.create_element(name.as_str()).with_attributes(attrs);
            if associations.is_empty() {
                e.write_empty()?;
            } else {
                e.write_inner_content(|w| {
                    for a in associations {
                        let (element, reference) = match a.direction {
                            AssociationDirection::Input => ("bpmn:dataInputAssociation", "bpmn:sourceRef"),
                            AssociationDirection::Output => ("bpmn:dataOutputAssociation", "bpmn:targetRef"),
                        };
                        w.create_element(element)
                            .with_attribute(("id", a.id.as_str()))
                            .write_inner_content(|w| {
                                w.create_element(reference)
                                    .write_text_content(BytesText::new(&a.data_object))?;
                                Ok(())
                            })?;
                    }
                    Ok(())
                })?;
            }
        }
        _ => {
            w.create_element(name.as_str()).with_attributes(attrs).write_empty()?;
        }
    }
    Ok(())
}

fn write_bounds(w: &mut W, b: &Bounds) -> io::Result<()> {
    let (x, y, width, height) = (
        b.x.to_string(),
        b.y.to_string(),
        b.width.to_string(),
        b.height.to_string(),
    );
    w.create_element("dc:Bounds")
        .with_attributes([("x", x.as_str()), ("y", &y), ("width", &width), ("height", &height)])
        .write_empty()?;
    Ok(())
}

fn write_shape(w: &mut W, element: &str, bounds: &Bounds, horizontal: bool) -> io::Result<()> {
    let id = format!("{element}_di");
    let mut e = w
        .create_element("bpmndi:BPMNShape")
        .with_attributes([("id", id.as_str()), ("bpmnElement", element)]);
    if horizontal {
        e = e.with_attribute(("isHorizontal", "true"));
    }
    e.write_inner_content(|w| write_bounds(w, bounds))?;
    Ok(())
}

fn write_edge(w: &mut W, element: &str, points: [(i64, i64); 2]) -> io::Result<()> {
    let id = format!("{element}_di");
    w.create_element("bpmndi:BPMNEdge")
        .with_attributes([("id", id.as_str()), ("bpmnElement", element)])
        .write_inner_content(|w| {
            for (x, y) in points {
                let (x, y) = (x.to_string(), y.to_string());
                w.create_element("di:waypoint")
                    .with_attributes([("x", x.as_str()), ("y", &y)])
                    .write_empty()?;
            }
            Ok(())
        })?;
    Ok(())
}

fn right_to_left(a: &Bounds, b: &Bounds) -> [(i64, i64); 2] {
    [(a.x + a.width, a.center().1), (b.x, b.center().1)]
}

fn vertical(a: &Bounds, b: &Bounds) -> [(i64, i64); 2] {
    if a.y <= b.y {
        [(a.center().0, a.y + a.height), (b.center().0, b.y)]
    } else {
        [(a.center().0, a.y), (b.center().0, b.y + b.height)]
    }
}

fn write_diagram(w: &mut W, m: &LayoutedModel) -> io::Result<()> {
    let zero = Bounds {
        x: 0,
        y: 0,
        width: 0,
        height: 0,
    };
    let at = |id: &str| m.positions.get(id).copied().unwrap_or(zero);
    w.create_element("bpmndi:BPMNDiagram")
        .with_attribute(("id", "BPMNDiagram_1"))
        .write_inner_content(|w| {
            w.create_element("bpmndi:BPMNPlane")
                .with_attributes([("id", "BPMNPlane_1"), ("bpmnElement", COLLABORATION_ID)])
                .write_inner_content(|w| {
                    write_shape(w, PARTICIPANT_ID, &m.pool_bounds, true)?;
                    for lane in &m.graph.lanes {
                        write_shape(w, &lane.id, &m.lane_bounds.get(&lane.id).copied().unwrap_or(zero), true)?;
                    }
                    for node in &m.graph.nodes {
                        if m.positions.contains_key(&node.id) {
                            write_shape(w, &node.id, &at(&node.id), false)?;
                        }
                    }
                    for f in &m.graph.sequence_flows {
                        write_edge(w, &f.id, right_to_left(&at(&f.source), &at(&f.target)))?;
                    }
                    for f in &m.graph.message_flows {
                        write_edge(w, &f.id, vertical(&at(&f.source), &at(&f.target)))?;
                    }
                    for a in &m.graph.data_associations {
                        let (from, to) = match a.direction {
                            AssociationDirection::Input => (at(&a.data_object), at(&a.task)),
                            AssociationDirection::Output => (at(&a.task), at(&a.data_object)),
                        };
                        write_edge(w, &a.id, vertical(&from, &to))?;
                    }
                    Ok(())
                })?;
            Ok(())
        })?;
    Ok(())
}

#[derive(Default)]
struct ParseState {
    stack: Vec<String>,
    lanes: Vec<Lane>,
    lane_refs: Vec<(String, String)>,
    nodes: Vec<Node>,
    sequence_flows: Vec<SequenceFlow>,
    message_flows: Vec<MessageFlow>,
    associations: Vec<DataAssociation>,
    current_task: Option<String>,
    current_association: Option<(String, AssociationDirection, Option<String>)>,
    current_shape: Option<String>,
    bounds: BTreeMap<String, Bounds>,
}

fn xml_err(e: impl std::fmt::Display) -> BpmnError {
    BpmnError::Xml(e.to_string())
}

fn attr(e: &BytesStart, name: &str) -> Result<Option<String>, BpmnError> {
    match e.try_get_attribute(name).map_err(xml_err)? {
        Some(a) => Ok(Some(a.unescape_value().map_err(xml_err)?.into_owned())),
        None => Ok(None),
    }
}

fn required(e: &BytesStart, name: &str) -> Result<String, BpmnError> {
    attr(e, name)?.ok_or_else(|| {
        BpmnError::Structure(format!(
            "<{}> lacks attribute `{name}`",
            String::from_utf8_lossy(e.name().as_ref())
        ))
    })
}

fn number(e: &BytesStart, name: &str) -> Result<i64, BpmnError> {
    let raw = required(e, name)?;
    raw.parse::<f64>()
        .map(|v| v.round() as i64)
        .map_err(|_| BpmnError::Structure(format!("`{name}` is not a number: {raw}")))
}

fn local(e: &BytesStart) -> String {
    String::from_utf8_lossy(e.local_name().as_ref()).into_owned()
}

impl ParseState {
    fn open(&mut self, e: &BytesStart) -> Result<(), BpmnError> {
        let name = local(e);
        if let Some(kind) = NodeKind::from_element(&name) {
            let id = required(e, "id")?;
            if kind == NodeKind::Task {
                self.current_task = Some(id.clone());
            }
            self.nodes.push(Node {
                id,
                kind,
                label: attr(e, "name")?.unwrap_or_default(),
                lane_id: None,
            });
        }
        match name.as_str() {
            "lane" => self.lanes.push(Lane {
                id: required(e, "id")?,
                actor_entity_id: attr(e, ACTOR_ATTR)?,
                label: attr(e, "name")?.unwrap_or_default(),
            }),
            "sequenceFlow" => self.sequence_flows.push(SequenceFlow {
                id: required(e, "id")?,
                source: required(e, "sourceRef")?,
                target: required(e, "targetRef")?,
                condition_label: attr(e, "name")?,
            }),
            "messageFlow" => self.message_flows.push(MessageFlow {
                id: required(e, "id")?,
                source: required(e, "sourceRef")?,
                target: required(e, "targetRef")?,
            }),
            "dataInputAssociation" | "dataOutputAssociation" => {
                let direction = if name == "dataInputAssociation" {
                    AssociationDirection::Input
                } else {
                    AssociationDirection::Output
                };
                self.current_association = Some((required(e, "id")?, direction, None));
            }
            "BPMNShape" => self.current_shape = Some(required(e, "bpmnElement")?),
            "Bounds" => {
                if let Some(element) = &self.current_shape {
                    let b = Bounds {
                        x: number(e, "x")?,
                        y: number(e, "y")?,
                        width: number(e, "width")?,
                        height: number(e, "height")?,
                    };
                    self.bounds.insert(element.clone(), b);
                }
            }
            _ => {}
        }
        self.stack.push(name);
        Ok(())
    }

    fn text(&mut self, text: &str) -> Result<(), BpmnError> {
        let text = text.trim().to_string();
        match self.stack.last().map(String::as_str) {
            Some("flowNodeRef") => {
                let lane = self
                    .lanes
                    .last()
                    .ok_or_else(|| BpmnError::Structure("flowNodeRef outside a lane".into()))?;
                self.lane_refs.push((lane.id.clone(), text));
            }
            Some("sourceRef") | Some("targetRef") => {
                if let Some((_, _, data)) = &mut self.current_association {
                    *data = Some(text);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn close(&mut self) -> Result<(), BpmnError> {
        let name = self.stack.pop().unwrap_or_default();
        match name.as_str() {
            "task" => self.current_task = None,
            "dataInputAssociation" | "dataOutputAssociation" => {
                let (id, direction, data) = self.current_association.take().expect("opened above");
                let task = self
                    .current_task
                    .clone()
                    .ok_or_else(|| BpmnError::Structure(format!("data association {id} outside a task")))?;
                let data_object =
                    data.ok_or_else(|| BpmnError::Structure(format!("data association {id} lacks a reference")))?;
                self.associations.push(DataAssociation {
                    id,
                    data_object,
                    task,
                    direction,
                });
            }
            "BPMNShape" => self.current_shape = None,
            _ => {}
        }
        Ok(())
    }
}

/// Reads a model written by [`serialize_bpmn`]. Fails on malformed XML and
/// on references that do not resolve.
pub fn parse_bpmn(xml: &str) -> Result<LayoutedModel, BpmnError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut state = ParseState::default();
    loop {
        match reader.read_event().map_err(xml_err)? {
            Event::Start(e) => state.open(&e)?,
            Event::Empty(e) => {
                state.open(&e)?;
                state.close()?;
            }
            Event::End(_) => state.close()?,
            Event::Text(t) => state.text(&t.decode().map_err(xml_err)?)?,
            Event::Eof => break,
            _ => {}
        }
    }

    for (lane, node_id) in &state.lane_refs {
        let node = state
            .nodes
            .iter_mut()
            .find(|n| n.id == *node_id)
            .ok_or_else(|| BpmnError::Structure(format!("lane {lane} references unknown node {node_id}")))?;
        node.lane_id = Some(lane.clone());
    }
    let graph = ProcessGraph {
        lanes: state.lanes,
        nodes: state.nodes,
        sequence_flows: state.sequence_flows,
        message_flows: state.message_flows,
        data_associations: state.associations,
    };
    let problems = graph.check();
    if !problems.is_empty() {
        return Err(BpmnError::Structure(problems.join("; ")));
    }

    let mut bounds = state.bounds;
    let pool_bounds = bounds
        .remove(PARTICIPANT_ID)
        .ok_or_else(|| BpmnError::Structure("no shape for the pool".into()))?;
    let lane_bounds = graph
        .lanes
        .iter()
        .filter_map(|l| bounds.remove(&l.id).map(|b| (l.id.clone(), b)))
        .collect();
    if let Some(unknown) = bounds.keys().find(|id| graph.node(id).is_none()) {
        return Err(BpmnError::Structure(format!("shape for unknown element {unknown}")));
    }
    Ok(LayoutedModel {
        graph,
        positions: bounds,
        lane_bounds,
        pool_bounds,
    })
}
