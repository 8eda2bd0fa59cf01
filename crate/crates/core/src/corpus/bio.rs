//! Strict BIO tag decoding. An `I-` tag must continue a span of the same type.

/// A decoded span over token positions `start..end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioSpan {
    pub mention_type: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BioError {
    #[error("tag {position} `{tag}` is not O, B-<type> or I-<type>")]
    BadTag { position: usize, tag: String },
    #[error("tag {position} `{tag}` does not continue a span of the same type")]
    OrphanInside { position: usize, tag: String },
}

pub fn decode_bio<S: AsRef<str>>(tags: &[S]) -> Result<Vec<BioSpan>, BioError> {
    let mut spans: Vec<BioSpan> = Vec::new();
    let mut open = false;
    for (position, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        if tag == "O" {
            open = false;
            continue;
        }
        let (prefix, ty) = match tag.split_once('-') {
            Some((p, t)) if !t.trim().is_empty() => (p, t),
            _ => {
                return Err(BioError::BadTag {
                    position,
                    tag: tag.to_string(),
                })
            }
        };
        match prefix {
            "B" => {
                spans.push(BioSpan {
                    mention_type: ty.to_string(),
                    start: position,
                    end: position + 1,
                });
                open = true;
            }
            "I" => match spans.last_mut() {
                Some(last) if open && last.mention_type == ty && last.end == position => {
                    last.end = position + 1;
                }
                _ => {
                    return Err(BioError::OrphanInside {
                        position,
                        tag: tag.to_string(),
                    })
                }
            },
            _ => {
                return Err(BioError::BadTag {
                    position,
                    tag: tag.to_string(),
                })
            }
        }
    }
    Ok(spans)
}

/// Inverse of [`decode_bio`] for non-overlapping spans.
pub fn encode_bio(len: usize, spans: &[BioSpan]) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for span in spans {
        let end = span.end.min(len);
        for (position, tag) in tags.iter_mut().enumerate().take(end).skip(span.start) {
            let prefix = if position == span.start { "B" } else { "I" };
            *tag = format!("{prefix}-{}", span.mention_type);
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_token_actor() {
        let spans = decode_bio(&["B-Actor", "I-Actor"]).unwrap();
        assert_eq!(
            spans,
            vec![BioSpan {
                mention_type: "Actor".into(),
                start: 0,
                end: 2
            }]
        );
    }

    #[test]
    fn adjacent_spans_and_types_with_spaces() {
        let spans = decode_bio(&["B-Activity", "B-Activity Data", "I-Activity Data", "O", "B-Actor"]).unwrap();
        let summary: Vec<_> = spans
            .iter()
            .map(|s| (s.mention_type.as_str(), s.start, s.end))
            .collect();
        assert_eq!(
            summary,
            vec![("Activity", 0, 1), ("Activity Data", 1, 3), ("Actor", 4, 5)]
        );
    }

    #[test]
    fn orphan_inside_is_rejected() {
        assert!(matches!(
            decode_bio(&["O", "I-Actor"]),
            Err(BioError::OrphanInside { position: 1, .. })
        ));
        assert!(matches!(
            decode_bio(&["B-Actor", "I-Activity"]),
            Err(BioError::OrphanInside { position: 1, .. })
        ));
        assert!(matches!(decode_bio(&["X-Actor"]), Err(BioError::BadTag { .. })));
        assert!(matches!(decode_bio(&["B-"]), Err(BioError::BadTag { .. })));
    }

    fn valid_tags() -> impl Strategy<Value = Vec<String>> {
        let ty = prop::sample::select(vec!["Actor", "Activity", "Activity Data"]);
        prop::collection::vec((0u8..3, ty), 0..40).prop_map(|raw| {
            let mut tags = Vec::new();
            let mut prev: Option<&str> = None;
            for (kind, ty) in raw {
                match (kind, prev) {
                    (0, _) => {
                        tags.push("O".to_string());
                        prev = None;
                    }
                    (1, Some(p)) => tags.push(format!("I-{p}")),
                    _ => {
                        tags.push(format!("B-{ty}"));
                        prev = Some(ty);
                    }
                }
            }
            tags
        })
    }

    proptest! {
        #[test]
        fn decode_then_encode_is_identity(tags in valid_tags()) {
            let spans = decode_bio(&tags).unwrap();
            prop_assert_eq!(encode_bio(tags.len(), &spans), tags);
        }
    }
}
