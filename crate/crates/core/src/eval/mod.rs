//! Precision, recall and F1 for the four extraction tasks. A prediction is
//! correct when it can be paired one-to-one with a gold item; the number of
//! correct predictions is the size of a maximum bipartite matching.

mod matching;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{type_key, Constraint, Document, Mention, Relation};
use crate::parser::{
    normalize_surface, GroundedCluster, GroundedMention, GroundedRelation, ParsedConstraint, ParsedMention, Span,
};

pub use matching::max_matching;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    #[default]
    ExactSpan,
    TextMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintNormalization {
    #[default]
    Verbatim,
    LemmaLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub span_mode: SpanMode,
    pub type_sensitive: bool,
    pub constraint_normalization: ConstraintNormalization,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy {
            span_mode: SpanMode::ExactSpan,
            type_sensitive: true,
            constraint_normalization: ConstraintNormalization::Verbatim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ConfusionCounts {
    pub fn new(correct: usize, predicted: usize, gold: usize) -> Self {
        debug_assert!(correct <= predicted.min(gold));
        ConfusionCounts {
            correct,
            predicted,
            gold,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            correct: self.correct + rhs.correct,
            predicted: self.predicted + rhs.predicted,
            gold: self.gold + rhs.gold,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

impl TaskScores {
    /// P = correct/predicted, R = correct/gold, F1 = 2PR/(P+R); any zero
    /// denominator yields 0.
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let precision = ratio(counts.correct, counts.predicted);
        let recall = ratio(counts.correct, counts.gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        TaskScores {
            precision,
            recall,
            f1,
            counts,
        }
    }
}

/// Micro-average: sums the per-document counts, then applies the formulas.
pub fn aggregate(per_doc: &[ConfusionCounts]) -> TaskScores {
    TaskScores::from_counts(per_doc.iter().copied().sum())
}

fn types_agree(policy: &MatchPolicy, a: &str, b: &str) -> bool {
    !policy.type_sensitive || type_key(a) == type_key(b)
}

fn mention_span(m: &Mention) -> Span {
    let start = m.token_indices.first().copied().unwrap_or(0);
    (start, start + m.token_indices.len())
}

/// A contiguous gold span; `None` for gappy mentions, which exact matching
/// can never hit with a token window.
fn contiguous_span(m: &Mention) -> Option<Span> {
    let span = mention_span(m);
    let contiguous = m.token_indices.windows(2).all(|w| w[1] == w[0] + 1);
    contiguous.then_some(span)
}

pub fn score_md(
    grounded: &[GroundedMention],
    ungrounded: &[ParsedMention],
    gold: &[Mention],
    doc: &Document,
    policy: &MatchPolicy,
) -> ConfusionCounts {
    struct Pred<'a> {
        mention_type: &'a str,
        surface: String,
        span: Option<Span>,
    }
    let preds: Vec<Pred> = grounded
        .iter()
        .map(|g| Pred {
            mention_type: &g.mention_type,
            surface: normalize_surface(&g.matched_surface),
            span: Some(g.span()),
        })
        .chain(ungrounded.iter().map(|u| Pred {
            mention_type: &u.mention_type,
            surface: normalize_surface(&u.surface),
            span: None,
        }))
        .collect();
    let gold_surfaces: Vec<String> = gold.iter().map(|m| normalize_surface(&doc.surface(m))).collect();
    let correct = max_matching(preds.len(), gold.len(), |i, j| {
        let (p, g) = (&preds[i], &gold[j]);
        types_agree(policy, p.mention_type, &g.mention_type)
            && match policy.span_mode {
                SpanMode::ExactSpan => p.span.is_some() && p.span == contiguous_span(g),
                SpanMode::TextMatch => p.surface == gold_surfaces[j],
            }
    });
    ConfusionCounts::new(correct, preds.len(), gold.len())
}

fn endpoint_hits(endpoint: &crate::parser::Endpoint, gold: &Mention, doc: &Document, policy: &MatchPolicy) -> bool {
    match policy.span_mode {
        SpanMode::ExactSpan => contiguous_span(gold).is_some_and(|s| endpoint.admits(s)),
        SpanMode::TextMatch => normalize_surface(&endpoint.surface) == normalize_surface(&doc.surface(gold)),
    }
}

/// A predicted cluster is correct when its members can be paired one-to-one
/// with the mentions of a gold entity of the same size.
pub fn score_er(
    pred: &[GroundedCluster],
    gold: &[Vec<&Mention>],
    doc: &Document,
    policy: &MatchPolicy,
) -> ConfusionCounts {
    let cluster_matches = |c: &GroundedCluster, e: &Vec<&Mention>| {
        c.members.len() == e.len()
            && max_matching(c.members.len(), e.len(), |i, j| {
                endpoint_hits(&c.members[i], e[j], doc, policy)
            }) == e.len()
    };
    let correct = max_matching(pred.len(), gold.len(), |i, j| cluster_matches(&pred[i], &gold[j]));
    ConfusionCounts::new(correct, pred.len(), gold.len())
}

/// Directed: the predicted source must hit the gold source and the predicted
/// target the gold target.
pub fn score_re(pred: &[GroundedRelation], gold: &[Relation], doc: &Document, policy: &MatchPolicy) -> ConfusionCounts {
    let index = doc.mention_index();
    let endpoints: Vec<Option<(&Mention, &Mention)>> = gold
        .iter()
        .map(|r| {
            Some((
                *index.get(r.source_mention_id.as_str())?,
                *index.get(r.target_mention_id.as_str())?,
            ))
        })
        .collect();
    let correct = max_matching(pred.len(), gold.len(), |i, j| {
        let (p, g) = (&pred[i], &gold[j]);
        let Some((source, target)) = endpoints[j] else {
            return false;
        };
        types_agree(policy, &p.relation_type, &g.relation_type)
            && endpoint_hits(&p.source, source, doc, policy)
            && endpoint_hits(&p.target, target, doc, policy)
    });
    ConfusionCounts::new(correct, pred.len(), gold.len())
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "its", "their", "his", "her",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "will", "shall", "should", "must",
    "can", "could", "may", "might", "would", "do", "does", "did",
];

/// Lower-cased content words of an action phrase with determiners and
/// auxiliaries removed.
pub fn lemma_like_words(phrase: &str) -> BTreeSet<String> {
    phrase
        .split(|c: char| !c.is_alphanumeric() && c != '-' && c != '\'')
        .map(str::to_lowercase)
        .filter(|w| !w.is_empty() && !DETERMINERS.contains(&w.as_str()) && !AUXILIARIES.contains(&w.as_str()))
        .collect()
}

pub fn actions_match(predicted: &str, gold: &str, normalization: ConstraintNormalization) -> bool {
    match normalization {
        ConstraintNormalization::Verbatim => predicted.trim() == gold.trim(),
        ConstraintNormalization::LemmaLike => lemma_like_words(predicted) == lemma_like_words(gold),
    }
}

pub fn score_constraints(pred: &[ParsedConstraint], gold: &[Constraint], policy: &MatchPolicy) -> ConfusionCounts {
    let correct = max_matching(pred.len(), gold.len(), |i, j| {
        let (p, g) = (&pred[i], &gold[j]);
        let gold_actions = g.actions();
        types_agree(policy, &p.constraint_type, &g.constraint_type)
            && p.negated == g.negated
            && p.actions.len() == gold_actions.len()
            && p.actions
                .iter()
                .zip(&gold_actions)
                .all(|(a, b)| actions_match(a, b, policy.constraint_normalization))
    });
    ConfusionCounts::new(correct, pred.len(), gold.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::*;
    use crate::parser::Endpoint;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn formula_two_of_four_against_five() {
        let s = TaskScores::from_counts(ConfusionCounts::new(2, 4, 5));
        assert!(close(s.precision, 0.5));
        assert!(close(s.recall, 0.4));
        assert!(close(s.f1, 4.0 / 9.0));
    }

    #[test]
    fn zero_denominators() {
        let s = TaskScores::from_counts(ConfusionCounts::new(0, 0, 3));
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = aggregate(&[]);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn aggregate_is_micro() {
        let c = ConfusionCounts::new(1, 2, 2);
        let s = aggregate(&[c, c]);
        assert!(close(s.precision, 0.5) && close(s.recall, 0.5) && close(s.f1, 0.5));
        assert_eq!(aggregate(&[c]), TaskScores::from_counts(c));
    }

    fn claim_doc() -> Document {
        let mut d = doc("d", "the clerk registers the claim . the manager checks the claim .");
        d.mentions = vec![
            mention("m0", "Actor", &[0, 1]),
            mention("m1", "Activity", &[2]),
            mention("m2", "Activity Data", &[3, 4]),
            mention("m3", "Actor", &[6, 7]),
            mention("m4", "Activity", &[8]),
            mention("m5", "Activity Data", &[9, 10]),
        ];
        d.relations = vec![relation("r0", "flow", "m1", "m4"), relation("r1", "uses", "m4", "m5")];
        d
    }

    fn gm(ty: &str, indices: &[usize], d: &Document) -> GroundedMention {
        GroundedMention {
            mention_type: ty.into(),
            token_indices: indices.to_vec(),
            matched_surface: d.span_text(indices),
        }
    }

    #[test]
    fn md_identity_and_type_sensitivity() {
        let d = claim_doc();
        let pol = MatchPolicy::default();
        let preds: Vec<_> = d
            .mentions
            .iter()
            .map(|m| gm(&m.mention_type, &m.token_indices, &d))
            .collect();
        let c = score_md(&preds, &[], &d.mentions, &d, &pol);
        assert_eq!(c, ConfusionCounts::new(6, 6, 6));

        let wrong = vec![gm("Activity", &[0, 1], &d)];
        let c = score_md(&wrong, &[], &d.mentions, &d, &pol);
        assert_eq!(c, ConfusionCounts::new(0, 1, 6));
        let lax = MatchPolicy {
            type_sensitive: false,
            ..pol
        };
        assert_eq!(score_md(&wrong, &[], &d.mentions, &d, &lax).correct, 1);
    }

    #[test]
    fn md_text_match_credits_ungrounded_surfaces() {
        let d = claim_doc();
        let text = MatchPolicy {
            span_mode: SpanMode::TextMatch,
            ..MatchPolicy::default()
        };
        let ungrounded = vec![ParsedMention {
            mention_type: "Actor".into(),
            surface: "The Clerk".into(),
        }];
        assert_eq!(score_md(&[], &ungrounded, &d.mentions, &d, &text).correct, 1);
        assert_eq!(
            score_md(&[], &ungrounded, &d.mentions, &d, &MatchPolicy::default()).correct,
            0
        );
    }

    fn rel(ty: &str, s: &str, t: &str, d: &Document) -> GroundedRelation {
        GroundedRelation {
            relation_type: ty.into(),
            source: Endpoint::new(s, d),
            target: Endpoint::new(t, d),
        }
    }

    #[test]
    fn re_direction_matters() {
        let d = claim_doc();
        let pol = MatchPolicy::default();
        let good = rel("flow", "registers", "checks", &d);
        let reversed = rel("flow", "checks", "registers", &d);
        assert_eq!(score_re(std::slice::from_ref(&good), &d.relations, &d, &pol).correct, 1);
        assert_eq!(
            score_re(std::slice::from_ref(&reversed), &d.relations, &d, &pol).correct,
            0
        );
        let s = TaskScores::from_counts(score_re(&[good, reversed], &d.relations, &d, &pol));
        assert!(close(s.precision, 0.5) && close(s.recall, 0.5) && close(s.f1, 0.5));
    }

    #[test]
    fn re_ambiguous_surface_matches_either_occurrence() {
        let d = claim_doc();
        // "the claim" occurs twice; the gold uses-target is the second one.
        let p = rel("uses", "checks", "the claim", &d);
        assert_eq!(score_re(&[p], &d.relations, &d, &MatchPolicy::default()).correct, 1);
    }

    #[test]
    fn er_merge_of_two_entities_is_wrong() {
        let d = claim_doc();
        let gold: Vec<Vec<&Mention>> = vec![vec![&d.mentions[0]], vec![&d.mentions[3]]];
        let cl = |surfaces: &[&str]| GroundedCluster {
            members: surfaces.iter().map(|s| Endpoint::new(s, &d)).collect(),
        };
        let pol = MatchPolicy::default();
        let exact = vec![cl(&["the clerk"]), cl(&["the manager"])];
        assert_eq!(score_er(&exact, &gold, &d, &pol), ConfusionCounts::new(2, 2, 2));
        let merged = vec![cl(&["the clerk", "the manager"])];
        assert_eq!(score_er(&merged, &gold, &d, &pol), ConfusionCounts::new(0, 1, 2));
        let s = TaskScores::from_counts(score_er(&[], &gold, &d, &pol));
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }

    fn constraint(ty: &str, negated: bool, a: &str, b: Option<&str>) -> Constraint {
        Constraint {
            id: "c".into(),
            constraint_type: ty.into(),
            negated,
            first_action: a.into(),
            second_action: b.map(str::to_string),
        }
    }

    fn parsed(ty: &str, negated: bool, actions: &[&str]) -> ParsedConstraint {
        ParsedConstraint {
            constraint_type: ty.into(),
            negated,
            actions: actions.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn constraint_matching() {
        let gold = vec![constraint("succession", false, "register claim", Some("examine claim"))];
        let lemma = MatchPolicy {
            constraint_normalization: ConstraintNormalization::LemmaLike,
            ..MatchPolicy::default()
        };
        let same = parsed("succession", false, &["register claim", "examine claim"]);
        assert_eq!(score_constraints(&[same], &gold, &MatchPolicy::default()).correct, 1);
        let cased = parsed("Succession", false, &["Register the Claim", "Examine Claim"]);
        assert_eq!(
            score_constraints(std::slice::from_ref(&cased), &gold, &lemma).correct,
            1
        );
        assert_eq!(score_constraints(&[cased], &gold, &MatchPolicy::default()).correct, 0);
        let negated = parsed("succession", true, &["register claim", "examine claim"]);
        assert_eq!(score_constraints(&[negated], &gold, &lemma).correct, 0);
        let swapped = parsed("succession", false, &["examine claim", "register claim"]);
        assert_eq!(score_constraints(&[swapped], &gold, &lemma).correct, 0);
    }

    #[test]
    fn lemma_like_strips_function_words() {
        assert_eq!(
            lemma_like_words("The claim is registered"),
            lemma_like_words("claim registered")
        );
        assert_ne!(lemma_like_words("register claim"), lemma_like_words("register"));
    }
}
