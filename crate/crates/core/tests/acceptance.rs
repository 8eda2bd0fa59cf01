//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use procex::bpmn::{generate_bpmn, parse_bpmn, NodeKind};
use procex::corpus::{load_dataset, Dataset, Document, Mention, Relation, Token};
use procex::eval::{score_md, score_re, ConfusionCounts, MatchPolicy, TaskScores};
use procex::llm::{CacheMode, ClientConfig, LlmClient};
use procex::parser::{
    ground_clusters, ground_relations, ground_report, parse, Endpoint, GroundedMention, GroundedRelation, Span,
};
use procex::pipeline::{gold_echo_stub, run_grid, write_run, Baselines, CellOutcome, ExperimentConfig, RunManifest};
use procex::prompt::{
    ablation_variants, assemble, render_gold, PromptComponentKind, PromptConfig, PromptTemplate, ShotStrategy,
};
use procex::Task;

type Check = fn() -> Result<String, String>;

fn data(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(path)
}

fn load(path: &str) -> Dataset {
    load_dataset(&data(path), None).unwrap_or_else(|e| panic!("{path}: {e}"))
}

const CORPORA: [&str; 3] = ["pet/pet.jsonl", "decon/decon.jsonl", "atdp/atdp.jsonl"];

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn gold_closed_loop() -> Result<String, String> {
    let mut cells = 0;
    for path in CORPORA {
        let ds = load(path);
        let client = LlmClient::direct(gold_echo_stub(&ds));
        let tasks = ds.schema.tasks.clone();
        let report =
            run_grid(&ds, &tasks, &[0, 3], &ExperimentConfig::default(), &client).map_err(|e| e.to_string())?;
        ensure!(report.cells.len() == tasks.len() * 2, "{path}: missing cells");
        for c in &report.cells {
            let CellOutcome::Scored { scores, parse_errors } = &c.outcome else {
                return Err(format!("{path} {} {}-shot failed", c.task, c.shot_count));
            };
            ensure!(
                scores.precision == 1.0 && scores.recall == 1.0 && scores.f1 == 1.0 && *parse_errors == 0,
                "{path} {} {}-shot: {scores:?}",
                c.task,
                c.shot_count
            );
            cells += 1;
        }
    }
    Ok(format!("{cells} dataset/task/shot cells at P=R=F1=1.000"))
}

fn random_doc(rng: &mut ChaCha8Rng) -> Document {
    let words = ["a", "b", "c"];
    let n = rng.gen_range(4..12);
    let tokens: Vec<Token> = (0..n)
        .map(|index| Token {
            text: words[rng.gen_range(0..words.len())].to_string(),
            index,
            sentence_index: 0,
        })
        .collect();
    Document {
        id: "random".into(),
        raw_text: tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "),
        tokens,
        mentions: vec![],
        entities: vec![],
        relations: vec![],
        constraints: vec![],
    }
}

fn random_span(rng: &mut ChaCha8Rng, n: usize) -> Span {
    let start = rng.gen_range(0..n);
    (start, rng.gen_range(start + 1..=n.min(start + 3)))
}

/// Best one-to-one assignment found by trying every option for each
/// prediction in turn.
fn brute_force(pred: usize, gold: usize, edge: &dyn Fn(usize, usize) -> bool) -> usize {
    fn go(i: usize, pred: usize, gold: usize, used: &mut Vec<bool>, edge: &dyn Fn(usize, usize) -> bool) -> usize {
        if i == pred {
            return 0;
        }
        let mut best = go(i + 1, pred, gold, used, edge);
        for j in 0..gold {
            if !used[j] && edge(i, j) {
                used[j] = true;
                best = best.max(1 + go(i + 1, pred, gold, used, edge));
                used[j] = false;
            }
        }
        best
    }
    go(0, pred, gold, &mut vec![false; gold], edge)
}

fn metric_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let types = ["Actor", "Activity"];
    let policy = MatchPolicy::default();
    let mut nonzero = 0;
    for case in 0..200 {
        let mut doc = random_doc(&mut rng);
        let n = doc.tokens.len();
        let mut seen = BTreeSet::new();
        for k in 0..rng.gen_range(0..=6) {
            let (s, e) = random_span(&mut rng, n);
            let ty = types[rng.gen_range(0..2)];
            if seen.insert((ty, s, e)) {
                doc.mentions.push(Mention {
                    id: format!("m{k}"),
                    mention_type: ty.into(),
                    token_indices: (s..e).collect(),
                });
            }
        }
        let preds: Vec<GroundedMention> = (0..rng.gen_range(0..=6))
            .map(|_| {
                let (s, e) = random_span(&mut rng, n);
                GroundedMention {
                    mention_type: types[rng.gen_range(0..2)].into(),
                    token_indices: (s..e).collect(),
                    matched_surface: doc.span_text(&(s..e).collect::<Vec<_>>()),
                }
            })
            .collect();
        let md = score_md(&preds, &[], &doc.mentions, &doc, &policy);
        let span = |m: &Mention| (m.token_indices[0], m.token_indices[0] + m.token_indices.len());
        let expected = brute_force(preds.len(), doc.mentions.len(), &|i, j| {
            preds[i].mention_type == doc.mentions[j].mention_type && preds[i].span() == span(&doc.mentions[j])
        });
        ensure!(
            md.correct == expected,
            "case {case} MD: matching {} vs brute force {expected}",
            md.correct
        );

        if doc.mentions.is_empty() {
            continue;
        }
        let m = doc.mentions.len();
        doc.relations = (0..rng.gen_range(0..=6))
            .map(|k| Relation {
                id: format!("r{k}"),
                relation_type: ["flow", "uses"][rng.gen_range(0..2)].into(),
                source_mention_id: format!("m{}", rng.gen_range(0..m)),
                target_mention_id: format!("m{}", rng.gen_range(0..m)),
            })
            .filter(|r| doc.mention(&r.source_mention_id).is_some() && doc.mention(&r.target_mention_id).is_some())
            .collect();
        let endpoint = |rng: &mut ChaCha8Rng, doc: &Document| {
            let (s, e) = random_span(rng, doc.tokens.len());
            Endpoint::new(&doc.span_text(&(s..e).collect::<Vec<_>>()), doc)
        };
        let rels: Vec<GroundedRelation> = (0..rng.gen_range(0..=6))
            .map(|_| GroundedRelation {
                relation_type: ["flow", "uses"][rng.gen_range(0..2)].into(),
                source: endpoint(&mut rng, &doc),
                target: endpoint(&mut rng, &doc),
            })
            .collect();
        let re = score_re(&rels, &doc.relations, &doc, &policy);
        let expected = brute_force(rels.len(), doc.relations.len(), &|i, j| {
            let g = &doc.relations[j];
            let s = span(doc.mention(&g.source_mention_id).unwrap());
            let t = span(doc.mention(&g.target_mention_id).unwrap());
            rels[i].relation_type == g.relation_type
                && rels[i].source.candidates.contains(&s)
                && rels[i].target.candidates.contains(&t)
        });
        ensure!(
            re.correct == expected,
            "case {case} RE: matching {} vs brute force {expected}",
            re.correct
        );
        if md.correct + re.correct > 0 {
            nonzero += 1;
        }
    }
    Ok(format!("200 documents (MD and RE), {nonzero} with matches"))
}

fn formula_check() -> Result<String, String> {
    let s = TaskScores::from_counts(ConfusionCounts::new(2, 4, 5));
    let (p, r) = (2.0 / 4.0, 2.0 / 5.0);
    let f1 = 2.0 * p * r / (p + r);
    ensure!(
        (s.precision - 0.5).abs() < 1e-9 && (s.precision - p).abs() < 1e-12,
        "P = {}",
        s.precision
    );
    ensure!(
        (s.recall - 0.4).abs() < 1e-9 && (s.recall - r).abs() < 1e-12,
        "R = {}",
        s.recall
    );
    ensure!(
        (s.f1 - 0.4444444444).abs() < 1e-9 && (s.f1 - f1).abs() < 1e-12,
        "F1 = {}",
        s.f1
    );
    Ok(format!("P={:.3} R={:.3} F1={:.4}", s.precision, s.recall, s.f1))
}

fn parser_totality() -> Result<String, String> {
    let pet = load("pet/pet.jsonl").schema;
    let decon = load("decon/decon.jsonl").schema;
    let fragments: [&[u8]; 12] = [
        b"|",
        b"\n",
        b"\r\n",
        b"actor",
        b"flow",
        b"entity",
        b"not",
        b"precedence",
        b"```",
        b"Reflection:",
        b" ",
        b"\xff\xfe",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tasks = [Task::Md, Task::Er, Task::Re, Task::Ce];
    for case in 0..10_000 {
        let mut bytes = Vec::new();
        for _ in 0..rng.gen_range(0..40) {
            if rng.gen_bool(0.5) {
                bytes.extend_from_slice(fragments[rng.gen_range(0..fragments.len())]);
            } else {
                bytes.push(rng.gen());
            }
        }
        let raw = String::from_utf8_lossy(&bytes);
        let task = tasks[case % 4];
        let schema = if task == Task::Ce { &decon } else { &pet };
        let r = parse(&raw, task, schema);
        let accounted = r.items.len() + r.error_count + r.ignored_line_count;
        ensure!(
            accounted == raw.lines().count(),
            "case {case}: {accounted} != {} for {raw:?}",
            raw.lines().count()
        );
        ensure!(
            r.error_count == r.error_lines.len(),
            "case {case}: error count mismatch"
        );
    }
    Ok("10000 cases, every line accounted for".into())
}

fn error_accounting() -> Result<String, String> {
    let mut total = 0;
    for (path, task) in [
        ("pet/pet.jsonl", Task::Md),
        ("pet/pet.jsonl", Task::Re),
        ("decon/decon.jsonl", Task::Ce),
    ] {
        let ds = load(path);
        let doc = &ds.documents[0];
        let lines: Vec<String> = render_gold(doc, task, &ds.schema)
            .iter()
            .map(|l| l.replace('|', ": "))
            .collect();
        // Prose only before the records or under a prose header.
        let response = format!(
            "Sure, here is the output for the text.\n\n{}\n\nReflection:\nI double-checked every line.\n",
            lines.join("\n")
        );
        let r = parse(&response, task, &ds.schema);
        ensure!(
            r.error_count == lines.len(),
            "{path} {task}: {} errors for {} record lines",
            r.error_count,
            lines.len()
        );
        ensure!(r.items.is_empty(), "{path} {task}: items parsed from stripped lines");
        total += lines.len();
    }
    Ok(format!("{total} stripped lines, {total} parsing errors"))
}

fn span_of(p: &procex::prompt::RenderedPrompt, kind: PromptComponentKind) -> Option<(usize, usize)> {
    p.component_spans.get(&kind).copied()
}

/// Sections of the raw template file that use a placeholder.
fn sections_using(template: &str, placeholders: &[&str]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut current = String::new();
    for line in template.lines() {
        if line.starts_with('[') && line.ends_with(']') {
            current = line[1..line.len() - 1].split('.').next().unwrap().to_string();
        } else if !line.starts_with('#') && placeholders.iter().any(|p| line.contains(p)) {
            out.insert(current.clone());
        }
    }
    out
}

fn prompt_isolation() -> Result<String, String> {
    let ds = load("pet/pet.jsonl");
    let raw_template = std::fs::read_to_string(data("prompts/default.txt")).map_err(|e| e.to_string())?;
    let shortened = sections_using(&raw_template, &["{type_definitions}", "{disambiguation_hints}"]);
    let mut checked = 0;
    for task in [Task::Md, Task::Re] {
        let base = PromptConfig::full(task, ds.schema.clone(), PromptTemplate::default()).with_shots(1, 3);
        let variants = ablation_variants(&base).map_err(|e| e.to_string())?;
        ensure!(variants.len() == 10, "{} variants", variants.len());
        for doc in ds.documents.iter().take(5) {
            let baseline = assemble(&base, doc, &ds.documents).map_err(|e| e.to_string())?;
            ensure!(
                assemble(&base, doc, &ds.documents).unwrap() == baseline,
                "baseline not deterministic"
            );
            for (label, config) in &variants {
                let p = assemble(config, doc, &ds.documents).map_err(|e| e.to_string())?;
                let removed: Vec<PromptComponentKind> = PromptComponentKind::ALL
                    .into_iter()
                    .filter(|k| !config.enabled.contains(k))
                    .collect();
                match removed.as_slice() {
                    [] if label == "Baseline" => {
                        ensure!(p.text == baseline.text, "baseline variant differs")
                    }
                    [] => {
                        // Shortened definitions: every other component is byte-identical.
                        for kind in PromptComponentKind::ALL {
                            let (Some((s0, l0)), Some((s1, l1))) = (span_of(&baseline, kind), span_of(&p, kind)) else {
                                continue;
                            };
                            if !shortened.contains(kind.section_name()) {
                                ensure!(
                                    baseline.text[s0..s0 + l0] == p.text[s1..s1 + l1],
                                    "{label}: {kind} changed"
                                );
                            }
                        }
                        ensure!(p.text != baseline.text, "{label}: nothing shortened");
                        let input = |t: &str| t[t.rfind("Input:\n").unwrap()..].to_string();
                        ensure!(input(&p.text) == input(&baseline.text), "{label}: input changed");
                    }
                    [kind] => {
                        let (start, len) = span_of(&baseline, *kind).ok_or(format!("{label}: no {kind} span"))?;
                        let expected = format!("{}{}", &baseline.text[..start], &baseline.text[start + len..]);
                        ensure!(p.text == expected, "{label}: differs outside the {kind} span");
                    }
                    _ => return Err(format!("{label}: removes {} components", removed.len())),
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} variant prompts compared byte-wise"))
}

fn few_shot_integrity() -> Result<String, String> {
    let ds = load("pet/pet.jsonl");
    let mut prompts = 0;
    for strategy in [ShotStrategy::PerDocument, ShotStrategy::Fixed] {
        for task in [Task::Md, Task::Er, Task::Re] {
            for n in [0, 1, 3] {
                let mut config =
                    PromptConfig::full(task, ds.schema.clone(), PromptTemplate::default()).with_shots(n, 7);
                config.shot_strategy = strategy;
                for doc in &ds.documents {
                    let p = assemble(&config, doc, &ds.documents).map_err(|e| e.to_string())?;
                    ensure!(
                        p.shot_ids.len() == n,
                        "{}: {} shots for n={n}",
                        doc.id,
                        p.shot_ids.len()
                    );
                    ensure!(!p.shot_ids.contains(&doc.id), "{}: target drawn as a shot", doc.id);
                    let unique: BTreeSet<_> = p.shot_ids.iter().collect();
                    ensure!(unique.len() == n, "{}: repeated shot", doc.id);
                    ensure!(
                        p.text.matches(doc.raw_text.as_str()).count() == 1,
                        "{}: target text repeated",
                        doc.id
                    );
                    if let Some((s, l)) = p.component_spans.get(&PromptComponentKind::FewShot) {
                        let section = &p.text[*s..s + l];
                        ensure!(!section.contains(&doc.raw_text), "{}: target inside the shots", doc.id);
                        for id in &p.shot_ids {
                            ensure!(
                                section.contains(&ds.document(id).unwrap().raw_text),
                                "{}: shot {id} missing",
                                doc.id
                            );
                        }
                    }
                    prompts += 1;
                }
            }
        }
    }
    Ok(format!("{prompts} prompts, no target among its shots"))
}

fn gold_round_trip() -> Result<String, String> {
    let mut docs = 0;
    let span = |m: &Mention| (m.token_indices[0], m.token_indices[0] + m.token_indices.len());
    for path in CORPORA {
        let ds = load(path);
        if path.starts_with("pet") {
            ensure!(ds.documents.len() == 45, "PET has {} documents", ds.documents.len());
        }
        for doc in &ds.documents {
            for task in ds.schema.tasks.clone() {
                let r = parse(&render_gold(doc, task, &ds.schema).join("\n"), task, &ds.schema);
                ensure!(r.error_count == 0, "{} {task}: {} errors", doc.id, r.error_count);
                match task {
                    Task::Md => {
                        let (grounded, missing) = ground_report(&r, doc);
                        ensure!(missing.is_empty(), "{}: ungrounded {missing:?}", doc.id);
                        let got: BTreeSet<_> = grounded.iter().map(|g| (g.mention_type.clone(), g.span())).collect();
                        let want: BTreeSet<_> =
                            doc.mentions.iter().map(|m| (m.mention_type.clone(), span(m))).collect();
                        ensure!(
                            got == want && grounded.len() == doc.mentions.len(),
                            "{}: mentions differ",
                            doc.id
                        );
                    }
                    Task::Er => {
                        let clusters = ground_clusters(&r, doc);
                        let gold = doc.entity_clusters(&ds.schema);
                        ensure!(clusters.len() == gold.len(), "{}: {} clusters", doc.id, clusters.len());
                        for (c, g) in clusters.iter().zip(&gold) {
                            ensure!(c.members.len() == g.len(), "{}: cluster size", doc.id);
                            for (e, m) in c.members.iter().zip(g) {
                                ensure!(e.admits(span(m)), "{}: member {} not recovered", doc.id, m.id);
                            }
                        }
                    }
                    Task::Re => {
                        let rels = ground_relations(&r, doc);
                        ensure!(
                            rels.len() == doc.relations.len(),
                            "{}: {} relations",
                            doc.id,
                            rels.len()
                        );
                        for (p, g) in rels.iter().zip(&doc.relations) {
                            let s = span(doc.mention(&g.source_mention_id).unwrap());
                            let t = span(doc.mention(&g.target_mention_id).unwrap());
                            ensure!(
                                p.relation_type == g.relation_type && p.source.admits(s) && p.target.admits(t),
                                "{}: relation {} not recovered",
                                doc.id,
                                g.id
                            );
                        }
                    }
                    Task::Ce => {
                        let got: Vec<_> = r
                            .constraints()
                            .map(|c| (c.constraint_type.clone(), c.negated, c.actions.clone()))
                            .collect();
                        let want: Vec<_> = doc
                            .constraints
                            .iter()
                            .map(|c| {
                                (
                                    c.constraint_type.clone(),
                                    c.negated,
                                    c.actions().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                                )
                            })
                            .collect();
                        ensure!(got == want, "{}: constraints differ", doc.id);
                    }
                }
            }
            docs += 1;
        }
    }
    Ok(format!("{docs} documents round-trip exactly"))
}

fn bpmn_structure() -> Result<String, String> {
    let ds = load("fixtures/doc-3.3.jsonl");
    let doc = &ds.documents[0];
    let roles = ds.schema.bpmn_roles.clone().ok_or("schema has no BPMN roles")?;
    let (xml, _) = generate_bpmn(doc, &roles);
    let model = parse_bpmn(&xml).map_err(|e| e.to_string())?;
    let g = &model.graph;

    let expected: BTreeMap<String, usize> =
        serde_json::from_str(&std::fs::read_to_string(data("fixtures/doc-3.3.expected.json")).unwrap()).unwrap();
    let got: BTreeMap<String, usize> = [
        ("lanes", g.lanes.len()),
        ("tasks", g.count(NodeKind::Task)),
        ("exclusive_gateways", g.count(NodeKind::XorGateway)),
        ("parallel_gateways", g.count(NodeKind::AndGateway)),
        ("start_events", g.count(NodeKind::StartEvent)),
        ("end_events", g.count(NodeKind::EndEvent)),
        ("data_objects", g.count(NodeKind::DataObject)),
        ("sequence_flows", g.sequence_flows.len()),
        ("message_flows", g.message_flows.len()),
        ("data_associations", g.data_associations.len()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    ensure!(got == expected, "counts {got:?} != expected {expected:?}");

    let activities = doc.mentions.iter().filter(|m| m.mention_type == "Activity").count();
    let actor_entities = doc
        .entities
        .iter()
        .filter(|e| {
            e.mention_ids
                .iter()
                .all(|id| doc.mention(id).unwrap().mention_type == "Actor")
        })
        .count();
    ensure!(g.count(NodeKind::Task) == activities, "tasks != activity mentions");
    ensure!(g.lanes.len() == actor_entities, "lanes != actor entities");
    ensure!(g.count(NodeKind::StartEvent) == 1, "start events");
    let lane = |id: &str| g.node(id).and_then(|n| n.lane_id.clone());
    ensure!(
        g.sequence_flows.iter().all(|f| lane(&f.source) == lane(&f.target)),
        "lane-crossing sequence flow"
    );
    ensure!(
        g.message_flows.iter().all(|f| lane(&f.source) != lane(&f.target)),
        "intra-lane message flow"
    );
    ensure!(g.check().is_empty(), "{:?}", g.check());
    Ok(format!("{} elements match the hand count", got.values().sum::<usize>()))
}

fn replay_once(dir: &Path, out: &Path) -> Result<(String, String), String> {
    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
        .map_err(|e| e.to_string())?;
    let ds = load_dataset(&dir.join("dataset.jsonl"), None).map_err(|e| e.to_string())?;
    let config = manifest
        .experiment_config(PromptTemplate::default())
        .map_err(|e| e.to_string())?;
    let client = LlmClient::new(
        None,
        ClientConfig {
            mode: CacheMode::Replay,
            cache_dir: Some(dir.join("cache")),
            ..ClientConfig::default()
        },
    );
    let report = run_grid(&ds, &manifest.tasks, &manifest.shot_counts, &config, &client).map_err(|e| e.to_string())?;
    if let Some(c) = report.first_failure() {
        return Err(format!("{c:?}"));
    }
    let baselines = Baselines::load(&data("baselines.json")).map_err(|e| e.to_string())?;
    let run = write_run(
        out,
        &report.manifest,
        &report.records,
        &report.scores_json(),
        &report.table(&baselines),
    )
    .map_err(|e| e.to_string())?;
    let read = |name: &str| std::fs::read_to_string(run.join(name)).unwrap();
    Ok((read("scores.json"), read("table.txt")))
}

fn replay_regression() -> Result<String, String> {
    let dir = data("fixtures/replay");
    let scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = replay_once(&dir, &scratch.path().join("a"))?;
    let second = replay_once(&dir, &scratch.path().join("b"))?;
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    ensure!(
        first.0 == read("scores.json"),
        "scores.json differs from the recorded one"
    );
    ensure!(first.1 == read("table.txt"), "table.txt differs from the recorded one");
    ensure!(first == second, "reruns differ");
    Ok("scores.json and table.txt byte-identical over two replays".into())
}

fn main() {
    let checks: [(u32, &str, Check, Duration); 10] = [
        (1, "gold closed loop", gold_closed_loop, Duration::from_secs(30)),
        (2, "metric oracle", metric_oracle, Duration::from_secs(10)),
        (3, "formula check", formula_check, Duration::from_secs(5)),
        (
            4,
            "parser totality and accounting",
            parser_totality,
            Duration::from_secs(20),
        ),
        (5, "parsing-error accounting", error_accounting, Duration::from_secs(5)),
        (
            6,
            "prompt determinism and isolation",
            prompt_isolation,
            Duration::from_secs(5),
        ),
        (7, "few-shot integrity", few_shot_integrity, Duration::from_secs(30)),
        (8, "gold round-trip law", gold_round_trip, Duration::from_secs(30)),
        (9, "BPMN structural acceptance", bpmn_structure, Duration::from_secs(5)),
        (
            10,
            "end-to-end replay regression",
            replay_regression,
            Duration::from_secs(60),
        ),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, check, budget) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}, but took longer than {budget:?}")),
            other => other,
        };
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => {
                failed += 1;
                ("FAIL", e.clone())
            }
        };
        println!("{status} {id:>2} {name:<34} {:>7.2}s  {detail}", elapsed.as_secs_f64());
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
