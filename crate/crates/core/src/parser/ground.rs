//! Maps surface strings produced by a model onto token windows of the source
//! document. Both sides are compared after case folding, whitespace collapse
//! and stripping of leading/trailing punctuation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ParseReport, ParsedMention};
use crate::corpus::Document;

/// Half-open token window `start..end`.
pub type Span = (usize, usize);

pub fn normalize_surface(text: &str) -> String {
    let folded = text.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedMention {
    pub mention_type: String,
    pub token_indices: Vec<usize>,
    pub matched_surface: String,
}

impl GroundedMention {
    pub fn span(&self) -> Span {
        let start = self.token_indices.first().copied().unwrap_or(0);
        (start, start + self.token_indices.len())
    }
}

/// A surface string together with every window of the document it matches.
/// Surfaces that occur several times stay ambiguous; scoring resolves them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub surface: String,
    pub candidates: Vec<Span>,
}

impl Endpoint {
    pub fn new(surface: &str, doc: &Document) -> Self {
        Endpoint {
            surface: surface.to_string(),
            candidates: candidate_spans(surface, doc),
        }
    }

    pub fn admits(&self, span: Span) -> bool {
        self.candidates.contains(&span)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedRelation {
    pub relation_type: String,
    pub source: Endpoint,
    pub target: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedCluster {
    pub members: Vec<Endpoint>,
}

fn has_word_char(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

fn window_matches(doc: &Document, start: usize, len: usize, target: &str) -> bool {
    let window = &doc.tokens[start..start + len];
    if !has_word_char(&window[0].text) || !has_word_char(&window[len - 1].text) {
        return false;
    }
    let joined = window.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    normalize_surface(&joined) == target
}

/// Every token window whose normalized text equals the normalized surface,
/// left to right. Windows never start or end on a punctuation-only token.
pub fn candidate_spans(surface: &str, doc: &Document) -> Vec<Span> {
    let target = normalize_surface(surface);
    if target.is_empty() {
        return Vec::new();
    }
    let len = target.split(' ').count();
    if len > doc.tokens.len() {
        return Vec::new();
    }
    (0..=doc.tokens.len() - len)
        .filter(|&start| window_matches(doc, start, len, &target))
        .map(|start| (start, start + len))
        .collect()
}

fn overlaps(a: Span, b: Span) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// First window matching the surface that overlaps nothing in `used`. On
/// success the window is added to `used`.
pub fn ground(parsed: &ParsedMention, doc: &Document, used: &mut BTreeSet<Span>) -> Option<GroundedMention> {
    let span = candidate_spans(&parsed.surface, doc)
        .into_iter()
        .find(|&s| !used.iter().any(|&u| overlaps(s, u)))?;
    used.insert(span);
    let token_indices: Vec<usize> = (span.0..span.1).collect();
    Some(GroundedMention {
        mention_type: parsed.mention_type.clone(),
        matched_surface: doc.span_text(&token_indices),
        token_indices,
    })
}

/// Grounds the report's mentions in order with one shared `used` set and
/// splits them into grounded and ungroundable.
pub fn ground_report(report: &ParseReport, doc: &Document) -> (Vec<GroundedMention>, Vec<ParsedMention>) {
    let mut used = BTreeSet::new();
    let mut grounded = Vec::new();
    let mut ungrounded = Vec::new();
    for parsed in report.mentions() {
        match ground(parsed, doc, &mut used) {
            Some(g) => grounded.push(g),
            None => ungrounded.push(parsed.clone()),
        }
    }
    (grounded, ungrounded)
}

/// Relation endpoints are resolved independently per relation.
pub fn ground_relations(report: &ParseReport, doc: &Document) -> Vec<GroundedRelation> {
    report
        .relations()
        .map(|r| GroundedRelation {
            relation_type: r.relation_type.clone(),
            source: Endpoint::new(&r.source_surface, doc),
            target: Endpoint::new(&r.target_surface, doc),
        })
        .collect()
}

pub fn ground_clusters(report: &ParseReport, doc: &Document) -> Vec<GroundedCluster> {
    report
        .clusters()
        .map(|c| GroundedCluster {
            members: c.surfaces.iter().map(|s| Endpoint::new(s, doc)).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::doc;
    use crate::parser::ParsedItem;
    use proptest::prelude::*;

    fn pm(surface: &str) -> ParsedMention {
        ParsedMention {
            mention_type: "Actor".into(),
            surface: surface.into(),
        }
    }

    #[test]
    fn case_folded_match() {
        let d = doc("d", "First , A claims officer checks it .");
        let mut used = BTreeSet::new();
        let g = ground(&pm("a claims officer"), &d, &mut used).unwrap();
        assert_eq!(g.token_indices, vec![2, 3, 4]);
        assert_eq!(g.matched_surface, "A claims officer");
    }

    #[test]
    fn repeated_surface_grounds_left_to_right() {
        let d = doc("d", "the clerk calls the clerk .");
        let mut used = BTreeSet::new();
        let first = ground(&pm("The clerk"), &d, &mut used).unwrap();
        let second = ground(&pm("the clerk"), &d, &mut used).unwrap();
        assert_eq!(first.token_indices, vec![0, 1]);
        assert_eq!(second.token_indices, vec![3, 4]);
        assert!(ground(&pm("the clerk"), &d, &mut used).is_none());
    }

    #[test]
    fn absent_surface_is_no_match() {
        let d = doc("d", "the clerk registers the claim .");
        assert!(ground(&pm("approves the claim"), &d, &mut BTreeSet::new()).is_none());
        assert!(ground(&pm("  ... "), &d, &mut BTreeSet::new()).is_none());
    }

    #[test]
    fn punctuation_is_trimmed_on_both_sides() {
        let d = doc("d", "he registers the claim , then stops .");
        let g = ground(&pm("\"the claim,\""), &d, &mut BTreeSet::new()).unwrap();
        assert_eq!(g.token_indices, vec![2, 3]);
    }

    #[test]
    fn report_partitions_grounded_and_absent() {
        let d = doc("d", "the clerk registers the claim .");
        let report = ParseReport {
            items: vec![
                ParsedItem::Mention(pm("the clerk")),
                ParsedItem::Mention(pm("the manager")),
            ],
            ..Default::default()
        };
        let (g, u) = ground_report(&report, &d);
        assert_eq!((g.len(), u.len()), (1, 1));
        assert_eq!(ground_report(&ParseReport::default(), &d), (vec![], vec![]));
    }

    proptest! {
        #[test]
        fn grounding_never_overlaps_used(words in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "."]), 1..30),
                                         queries in prop::collection::vec("[abc]( [abc]){0,2}", 1..10)) {
            let d = doc("p", &words.join(" "));
            let mut used = BTreeSet::new();
            for q in queries {
                let before = used.clone();
                if let Some(g) = ground(&pm(&q), &d, &mut used) {
                    let span = g.span();
                    prop_assert!(before.iter().all(|&u| !overlaps(span, u)));
                    prop_assert_eq!(normalize_surface(&g.matched_surface), normalize_surface(&q));
                }
            }
        }
    }
}
