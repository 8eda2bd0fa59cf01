use std::path::PathBuf;

use procex::corpus::{load_dataset, Dataset};
use procex::parser::{ground_clusters, ground_relations, ground_report, parse};
use procex::prompt::render_gold;
use procex::Task;

fn data(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(path)
}

fn load(path: &str) -> Dataset {
    load_dataset(&data(path), None).unwrap()
}

#[test]
fn shipped_corpora_load() {
    let pet = load("pet/pet.jsonl");
    assert_eq!(pet.documents.len(), 45);
    assert_eq!(pet.schema.dataset_name, "PET");
    assert!(pet.document("doc-3.3").is_some());
    assert_eq!(load("decon/decon.jsonl").documents.len(), 17);
    assert_eq!(load("atdp/atdp.jsonl").documents.len(), 18);
}

#[test]
fn gold_lines_ground_back_to_gold() {
    for path in ["pet/pet.jsonl", "decon/decon.jsonl", "atdp/atdp.jsonl"] {
        let ds = load(path);
        for doc in &ds.documents {
            let md = parse(&render_gold(doc, Task::Md, &ds.schema).join("\n"), Task::Md, &ds.schema);
            assert_eq!(md.error_count, 0);
            let (grounded, missing) = ground_report(&md, doc);
            assert!(missing.is_empty(), "{}", doc.id);
            let mut got: Vec<_> = grounded
                .iter()
                .map(|g| (g.mention_type.clone(), g.token_indices.clone()))
                .collect();
            let mut want: Vec<_> = doc
                .mentions
                .iter()
                .map(|m| (m.mention_type.clone(), m.token_indices.clone()))
                .collect();
            got.sort();
            want.sort();
            assert_eq!(got, want, "{}", doc.id);
            if ds.schema.supports(Task::Re) {
                let re = parse(&render_gold(doc, Task::Re, &ds.schema).join("\n"), Task::Re, &ds.schema);
                assert_eq!(ground_relations(&re, doc).len(), doc.relations.len());
            }
            if ds.schema.supports(Task::Er) {
                let er = parse(&render_gold(doc, Task::Er, &ds.schema).join("\n"), Task::Er, &ds.schema);
                assert_eq!(ground_clusters(&er, doc).len(), doc.entity_clusters(&ds.schema).len());
            }
        }
    }
}
