//! Regenerates `data/fixtures/replay/`: a PET subset, the response cache of
//! a grid run against a deterministic noisy stub, and the run's manifest,
//! scores and table.
//!
//!     SOURCE_DATE_EPOCH=0 cargo run -p procex --example record_replay_fixture

use std::path::PathBuf;
use std::sync::Arc;

use procex::corpus::{load_dataset, save_canonical, Dataset};
use procex::llm::{CacheMode, ChatRequest, ClientConfig, FnProvider, LlmClient, Provider};
use procex::pipeline::{gold_echo_stub, run_grid, write_run, Baselines, ExperimentConfig};
use procex::Task;
use sha2::{Digest, Sha256};

const DOCUMENTS: usize = 6;

/// Gold answer with some lines dropped, some mangled and a stray prose line,
/// picked by a hash of the prompt.
fn noisy(gold: &str, prompt: &str) -> String {
    let h = Sha256::digest(prompt.as_bytes());
    let mut out = vec!["Here is what I found:".to_string()];
    for (k, line) in gold.lines().enumerate() {
        match (h[k % 32] as usize + k) % 7 {
            0 => {}
            1 => out.push(line.replace('|', " - ")),
            _ => out.push(line.to_string()),
        }
    }
    if h[0] % 2 == 0 {
        out.push("actor|somebody unknown".into());
    }
    out.join("\n")
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let out = root.join("fixtures/replay");
    let pet = load_dataset(&root.join("pet/pet.jsonl"), None).unwrap();
    let subset = Dataset {
        schema: pet.schema.clone(),
        documents: pet.documents[..DOCUMENTS].to_vec(),
    };
    save_canonical(&subset, &out.join("dataset.jsonl")).unwrap();

    let gold = gold_echo_stub(&subset);
    let provider = FnProvider::new("noisy-gold", move |prompt: &str| {
        let text = gold.complete(&ChatRequest::new("stub", prompt)).unwrap().text;
        noisy(&text, prompt)
    });
    let cache_dir = out.join("cache");
    let _ = std::fs::remove_dir_all(&cache_dir);
    let client = LlmClient::new(
        Some(Arc::new(provider)),
        ClientConfig {
            mode: CacheMode::Record,
            cache_dir: Some(cache_dir),
            ..ClientConfig::default()
        },
    );
    let config = ExperimentConfig::default();
    let report = run_grid(&subset, &[Task::Md, Task::Er, Task::Re], &[0, 1, 3], &config, &client).unwrap();
    let baselines = Baselines::load(&root.join("baselines.json")).unwrap();
    let table = report.table(&baselines);
    let runs = tempfile::tempdir().unwrap();
    let dir = write_run(
        runs.path(),
        &report.manifest,
        &report.records,
        &report.scores_json(),
        &table,
    )
    .unwrap();
    for name in ["manifest.json", "scores.json", "table.txt"] {
        std::fs::copy(dir.join(name), out.join(name)).unwrap();
    }
    print!("{table}");
}
