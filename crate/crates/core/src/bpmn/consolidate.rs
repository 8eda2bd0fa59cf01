use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{type_key, BpmnRoles, Document, Entity, Mention, Relation};

pub(crate) fn has_role(mention: &Mention, role: &str) -> bool {
    type_key(&mention.mention_type) == type_key(role)
}

pub(crate) fn is_gateway(mention: &Mention, roles: &BpmnRoles) -> bool {
    has_role(mention, &roles.xor_gateway) || has_role(mention, &roles.and_gateway)
}

pub(crate) fn first_token(m: &Mention) -> usize {
    m.token_indices.first().copied().unwrap_or(0)
}

fn last_token(m: &Mention) -> usize {
    m.token_indices.last().copied().unwrap_or(0)
}

/// The candidate ending closest before token `before`, measured by last
/// token; among equals the later start wins.
pub(crate) fn nearest_left<'a>(
    candidates: impl IntoIterator<Item = &'a Mention>,
    before: usize,
) -> Option<&'a Mention> {
    candidates
        .into_iter()
        .filter(|c| last_token(c) < before)
        .max_by_key(|c| (last_token(c), first_token(c)))
}

fn fresh_id(taken: &BTreeSet<String>, base: String) -> String {
    if !taken.contains(&base) {
        return base;
    }
    (2..)
        .map(|k| format!("{base}-{k}"))
        .find(|id| !taken.contains(id))
        .expect("unbounded")
}

fn push_relation(doc: &mut Document, base_id: String, relation_type: &str, source: &str, target: &str) {
    let taken: BTreeSet<String> = doc.relations.iter().map(|r| r.id.clone()).collect();
    doc.relations.push(Relation {
        id: fresh_id(&taken, base_id),
        relation_type: relation_type.to_string(),
        source_mention_id: source.to_string(),
        target_mention_id: target.to_string(),
    });
}

/// Prepares annotations for model synthesis:
///
/// 1. every condition mention without an incoming flow from a gateway gets
///    one from the nearest gateway mention to its left;
/// 2. gateway mentions referring to one decision point are merged into one
///    entity (same-gateway relations or shared entities; without either,
///    same-type gateways within one sentence);
/// 3. every activity without a performer gets the nearest actor mention to
///    its left. Activities with no actor to their left stay without one.
///
/// Consolidating twice gives the same document as consolidating once.
pub fn consolidate(doc: &Document, roles: &BpmnRoles) -> Document {
    let mut out = doc.clone();
    attach_conditions(&mut out, roles);
    merge_gateways(&mut out, roles);
    assign_performers(&mut out, roles);
    out
}

fn attach_conditions(doc: &mut Document, roles: &BpmnRoles) {
    let index: BTreeMap<String, Mention> = doc.mentions.iter().map(|m| (m.id.clone(), m.clone())).collect();
    let gateways: Vec<Mention> = doc.mentions.iter().filter(|m| is_gateway(m, roles)).cloned().collect();
    let conditions: Vec<Mention> = doc
        .mentions
        .iter()
        .filter(|m| has_role(m, &roles.condition))
        .cloned()
        .collect();
    for condition in conditions {
        let attached = doc.relations.iter().any(|r| {
            type_key(&r.relation_type) == type_key(&roles.flow)
                && r.target_mention_id == condition.id
                && index.get(&r.source_mention_id).is_some_and(|s| is_gateway(s, roles))
        });
        if attached {
            continue;
        }
        if let Some(gateway) = nearest_left(&gateways, first_token(&condition)) {
            let gateway_id = gateway.id.clone();
            push_relation(
                doc,
                format!("cons-cond-{}", condition.id),
                &roles.flow,
                &gateway_id,
                &condition.id,
            );
        }
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

fn merge_gateways(doc: &mut Document, roles: &BpmnRoles) {
    let mut gateways: Vec<&Mention> = doc.mentions.iter().filter(|m| is_gateway(m, roles)).collect();
    gateways.sort_by_key(|m| (first_token(m), m.id.clone()));
    let position: BTreeMap<&str, usize> = gateways.iter().enumerate().map(|(k, m)| (m.id.as_str(), k)).collect();
    let mut parent: Vec<usize> = (0..gateways.len()).collect();
    let mut explicit = false;

    if let Some(same) = &roles.same_gateway {
        for r in &doc.relations {
            if type_key(&r.relation_type) != type_key(same) {
                continue;
            }
            if let (Some(&a), Some(&b)) = (
                position.get(r.source_mention_id.as_str()),
                position.get(r.target_mention_id.as_str()),
            ) {
                union(&mut parent, a, b);
                explicit = true;
            }
        }
    }
    for entity in &doc.entities {
        let members: Vec<usize> = entity
            .mention_ids
            .iter()
            .filter_map(|id| position.get(id.as_str()).copied())
            .collect();
        if let Some((&first, rest)) = members.split_first() {
            explicit = true;
            for &other in rest {
                union(&mut parent, first, other);
            }
        }
    }
    if !explicit {
        let sentence = |m: &Mention| doc.tokens.get(first_token(m)).map(|t| t.sentence_index);
        for a in 0..gateways.len() {
            for b in a + 1..gateways.len() {
                if gateways[a].mention_type == gateways[b].mention_type
                    && sentence(gateways[a]) == sentence(gateways[b])
                {
                    union(&mut parent, a, b);
                }
            }
        }
    }

    let mut components: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (k, m) in gateways.iter().enumerate() {
        let root = find(&mut parent, k);
        components.entry(root).or_default().insert(m.id.clone());
    }
    for (root, members) in components {
        if members.len() < 2 || doc.entities.iter().any(|e| e.mention_ids == members) {
            continue;
        }
        for entity in &mut doc.entities {
            entity.mention_ids.retain(|id| !members.contains(id));
        }
        doc.entities.retain(|e| !e.mention_ids.is_empty());
        let taken: BTreeSet<String> = doc.entities.iter().map(|e| e.id.clone()).collect();
        let id = fresh_id(&taken, format!("cons-gw-{}", gateways[root].id));
        doc.entities.push(Entity {
            id,
            mention_ids: members,
        });
    }
}

fn assign_performers(doc: &mut Document, roles: &BpmnRoles) {
    let actors: Vec<Mention> = doc
        .mentions
        .iter()
        .filter(|m| has_role(m, &roles.actor))
        .cloned()
        .collect();
    let activities: Vec<Mention> = doc
        .mentions
        .iter()
        .filter(|m| has_role(m, &roles.activity))
        .cloned()
        .collect();
    for activity in activities {
        let has_performer = doc
            .relations
            .iter()
            .any(|r| type_key(&r.relation_type) == type_key(&roles.performer) && r.source_mention_id == activity.id);
        if has_performer {
            continue;
        }
        if let Some(actor) = nearest_left(&actors, first_token(&activity)) {
            let actor_id = actor.id.clone();
            push_relation(
                doc,
                format!("cons-perf-{}", activity.id),
                &roles.performer,
                &activity.id,
                &actor_id,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::test_support::{roles, schema};
    use crate::corpus::test_support::{doc, mention, relation};
    use crate::corpus::validate;

    fn performer_of<'a>(d: &'a Document, activity: &str) -> Option<&'a str> {
        d.relations
            .iter()
            .find(|r| r.relation_type == "actor performer" && r.source_mention_id == activity)
            .map(|r| r.target_mention_id.as_str())
    }

    #[test]
    fn nearest_actor_to_the_left() {
        let text = (0..45).map(|k| format!("w{k}")).collect::<Vec<_>>().join(" ");
        let mut d = doc("d", &text);
        d.mentions = vec![
            mention("a1", "Actor", &[5]),
            mention("a2", "Actor", &[30]),
            mention("act", "Activity", &[40, 41]),
            mention("a3", "Actor", &[43]),
        ];
        let c = consolidate(&d, &roles());
        assert_eq!(performer_of(&c, "act"), Some("a2"));
        assert!(validate(&c, &schema()).is_empty());
    }

    #[test]
    fn multi_token_actors_measured_by_last_token() {
        let mut d = doc("d", "the senior officer and the clerk then check it");
        d.mentions = vec![
            mention("long", "Actor", &[0, 1, 2]),
            mention("short", "Actor", &[4, 5]),
            mention("act", "Activity", &[7]),
        ];
        assert_eq!(performer_of(&consolidate(&d, &roles()), "act"), Some("short"));
    }

    #[test]
    fn existing_performer_is_kept_and_no_actor_leaves_none() {
        let mut d = doc("d", "check it then the clerk files it");
        d.mentions = vec![
            mention("act1", "Activity", &[0]),
            mention("clerk", "Actor", &[3, 4]),
            mention("act2", "Activity", &[5]),
        ];
        d.relations = vec![relation("r", "actor performer", "act2", "clerk")];
        let c = consolidate(&d, &roles());
        assert_eq!(performer_of(&c, "act1"), None);
        assert_eq!(c.relations.len(), 1);
    }

    #[test]
    fn gateways_in_one_entity_merge() {
        let mut d = doc("d", "if ok then go . otherwise stop .");
        d.mentions = vec![mention("g1", "XOR Gateway", &[0]), mention("g2", "XOR Gateway", &[5])];
        d.entities = vec![Entity {
            id: "e".into(),
            mention_ids: ["g1".to_string(), "g2".to_string()].into(),
        }];
        let c = consolidate(&d, &roles());
        assert_eq!(c.entities, d.entities);

        d.entities.clear();
        d.relations = vec![relation("r", "same gateway", "g1", "g2")];
        let c = consolidate(&d, &roles());
        assert_eq!(c.entities.len(), 1);
        assert_eq!(c.entities[0].mention_ids.len(), 2);
    }

    #[test]
    fn same_sentence_fallback_and_conditions() {
        let mut d = doc("d", "if it is fine the clerk pays , otherwise he rejects .");
        d.mentions = vec![
            mention("g1", "XOR Gateway", &[0]),
            mention("c1", "Condition Specification", &[1, 2, 3]),
            mention("clerk", "Actor", &[4, 5]),
            mention("pay", "Activity", &[6]),
            mention("g2", "XOR Gateway", &[8]),
        ];
        let c = consolidate(&d, &roles());
        assert_eq!(c.entities.len(), 1);
        assert!(c
            .relations
            .iter()
            .any(|r| r.relation_type == "flow" && r.source_mention_id == "g1" && r.target_mention_id == "c1"));
        assert!(validate(&c, &schema()).is_empty());
    }

    #[test]
    fn idempotent() {
        let mut d = doc(
            "d",
            "if it is fine the clerk pays , otherwise he rejects . the boss signs it .",
        );
        d.mentions = vec![
            mention("g1", "XOR Gateway", &[0]),
            mention("c1", "Condition Specification", &[1, 2, 3]),
            mention("clerk", "Actor", &[4, 5]),
            mention("pay", "Activity", &[6]),
            mention("g2", "XOR Gateway", &[8]),
            mention("rej", "Activity", &[10]),
            mention("boss", "Actor", &[12, 13]),
            mention("sign", "Activity", &[14]),
        ];
        let once = consolidate(&d, &roles());
        assert_eq!(consolidate(&once, &roles()), once);
    }
}
