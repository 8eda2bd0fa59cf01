use crate::corpus::{Document, SchemaDescriptor};
use crate::parser::{ENTITY_KEYWORD, NEGATION_FLAG};
use crate::task::Task;

/// Serializes a document's gold annotations for `task` as output-grammar
/// lines. Mentions are emitted in text order so that grounding them in turn
/// recovers the annotated spans.
pub fn render_gold(doc: &Document, task: Task, schema: &SchemaDescriptor) -> Vec<String> {
    match task {
        Task::Md => {
            let mut mentions: Vec<_> = doc.mentions.iter().collect();
            mentions.sort_by_key(|m| (m.token_indices.first().copied(), m.token_indices.len()));
            mentions
                .into_iter()
                .map(|m| format!("{}|{}", m.mention_type.to_lowercase(), doc.surface(m)))
                .collect()
        }
        Task::Er => doc
            .entity_clusters(schema)
            .into_iter()
            .map(|cluster| {
                let surfaces: Vec<String> = cluster.iter().map(|m| doc.surface(m)).collect();
                format!("{ENTITY_KEYWORD}|{}", surfaces.join("|"))
            })
            .collect(),
        Task::Re => {
            let index = doc.mention_index();
            doc.relations
                .iter()
                .filter_map(|r| {
                    let source = index.get(r.source_mention_id.as_str())?;
                    let target = index.get(r.target_mention_id.as_str())?;
                    Some(format!(
                        "{}|{}|{}",
                        r.relation_type.to_lowercase(),
                        doc.surface(source),
                        doc.surface(target)
                    ))
                })
                .collect()
        }
        Task::Ce => doc
            .constraints
            .iter()
            .map(|c| {
                let flag = if c.negated { NEGATION_FLAG } else { "" };
                let mut line = format!("{}|{flag}", c.constraint_type.to_lowercase());
                for action in c.actions() {
                    line.push('|');
                    line.push_str(action);
                }
                line
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::*;
    use crate::corpus::Constraint;

    #[test]
    fn relation_line() {
        let mut d = doc("d", "register the claim and examine the claim");
        d.mentions = vec![
            mention("m1", "Activity", &[0, 1, 2]),
            mention("m2", "Activity", &[4, 5, 6]),
        ];
        d.relations = vec![relation("r1", "flow", "m1", "m2")];
        assert_eq!(
            render_gold(&d, Task::Re, &pet_schema()),
            ["flow|register the claim|examine the claim"]
        );
    }

    #[test]
    fn nothing_annotated_renders_nothing() {
        let d = doc("d", "nothing here");
        for task in Task::ALL {
            assert!(render_gold(&d, task, &pet_schema()).is_empty());
        }
    }

    #[test]
    fn constraints_and_clusters() {
        let mut d = doc("d", "the clerk checks it and the clerk files it");
        d.constraints = vec![
            Constraint {
                id: "c1".into(),
                constraint_type: "Succession".into(),
                negated: false,
                first_action: "check claim".into(),
                second_action: Some("file claim".into()),
            },
            Constraint {
                id: "c2".into(),
                constraint_type: "Init".into(),
                negated: true,
                first_action: "file claim".into(),
                second_action: None,
            },
        ];
        assert_eq!(
            render_gold(&d, Task::Ce, &decon_schema()),
            ["succession||check claim|file claim", "init|not|file claim"]
        );
        d.mentions = vec![mention("m1", "Actor", &[0, 1]), mention("m2", "Actor", &[5, 6])];
        d.entities = vec![crate::corpus::Entity {
            id: "e1".into(),
            mention_ids: ["m1".to_string(), "m2".to_string()].into(),
        }];
        assert_eq!(render_gold(&d, Task::Er, &pet_schema()), ["entity|the clerk|the clerk"]);
    }
}
