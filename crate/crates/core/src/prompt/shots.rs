use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{render_gold, PromptConfig, PromptError, ShotStrategy};
use crate::corpus::{Document, SchemaDescriptor};
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub source_document_id: String,
    pub input_text: String,
    pub expected_output_lines: Vec<String>,
}

/// Derives the sampling seed for one target so that each document gets its
/// own, reproducible draw.
pub fn shot_seed_for(seed: u64, target_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(target_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Draws `n` documents without replacement from `pool` minus `exclude`,
/// deterministically for a given seed, and renders their gold output.
pub fn select_shots(
    pool: &[Document],
    n: usize,
    exclude: &str,
    seed: u64,
    task: Task,
    schema: &SchemaDescriptor,
) -> Result<Vec<FewShotExample>, PromptError> {
    let candidates: Vec<&Document> = pool.iter().filter(|d| d.id != exclude).collect();
    if n > candidates.len() {
        return Err(PromptError::ShotsExceedPool {
            requested: n,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, candidates.len(), n)
        .into_iter()
        .map(|k| example(candidates[k], task, schema))
        .collect())
}

fn example(doc: &Document, task: Task, schema: &SchemaDescriptor) -> FewShotExample {
    FewShotExample {
        source_document_id: doc.id.clone(),
        input_text: doc.raw_text.clone(),
        expected_output_lines: render_gold(doc, task, schema),
    }
}

pub(super) fn shots_for(
    config: &PromptConfig,
    target: &Document,
    pool: &[Document],
) -> Result<Vec<FewShotExample>, PromptError> {
    let n = config.shot_count;
    if n == 0 {
        return Ok(Vec::new());
    }
    match config.shot_strategy {
        ShotStrategy::PerDocument => select_shots(
            pool,
            n,
            &target.id,
            shot_seed_for(config.shot_seed, &target.id),
            config.task,
            &config.schema,
        ),
        ShotStrategy::Fixed => {
            // One draw of n + 1 for the whole run; the spare stands in when
            // the target itself was drawn.
            let available = pool.iter().filter(|d| d.id != target.id).count();
            if n > available {
                return Err(PromptError::ShotsExceedPool {
                    requested: n,
                    available,
                });
            }
            let draw = (n + 1).min(pool.len());
            let mut rng = ChaCha8Rng::seed_from_u64(config.shot_seed);
            Ok(sample(&mut rng, pool.len(), draw)
                .into_iter()
                .map(|k| &pool[k])
                .filter(|d| d.id != target.id)
                .take(n)
                .map(|d| example(d, config.task, &config.schema))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::pet_schema;
    use crate::prompt::tests::small_pool;
    use crate::prompt::PromptTemplate;

    #[test]
    fn zero_shots_is_empty() {
        let pool = small_pool();
        assert!(select_shots(&pool, 0, "doc-0", 1, Task::Md, &pet_schema())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn stable_and_excluding() {
        let pool = small_pool();
        let a = select_shots(&pool, 3, "doc-2", 7, Task::Re, &pet_schema()).unwrap();
        let b = select_shots(&pool, 3, "doc-2", 7, Task::Re, &pet_schema()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|s| s.source_document_id != "doc-2"));
    }

    #[test]
    fn whole_pool_is_a_permutation() {
        let pool = small_pool();
        let shots = select_shots(&pool, 5, "elsewhere", 3, Task::Md, &pet_schema()).unwrap();
        let mut ids: Vec<_> = shots.iter().map(|s| s.source_document_id.clone()).collect();
        ids.sort();
        assert_eq!(ids, ["doc-0", "doc-1", "doc-2", "doc-3", "doc-4"]);
    }

    #[test]
    fn fixed_strategy_shares_shots_and_skips_target() {
        let pool = small_pool();
        let mut config = PromptConfig::full(Task::Md, pet_schema(), PromptTemplate::default()).with_shots(2, 11);
        config.shot_strategy = ShotStrategy::Fixed;
        for target in &pool {
            let shots = shots_for(&config, target, &pool).unwrap();
            assert_eq!(shots.len(), 2);
            assert!(shots.iter().all(|s| s.source_document_id != target.id));
        }
    }
}
