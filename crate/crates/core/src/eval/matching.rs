/// Size of a maximum matching in the bipartite graph `left × right` whose
/// edges are given by `edge(i, j)`. Kuhn's augmenting-path algorithm;
/// per-document inputs are small enough for its O(V·E) bound.
pub fn max_matching(left: usize, right: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let adjacency: Vec<Vec<usize>> = (0..left)
        .map(|i| (0..right).filter(|&j| edge(i, j)).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; right];
    let mut size = 0;
    for i in 0..left {
        let mut visited = vec![false; right];
        if augment(i, &adjacency, &mut owner, &mut visited) {
            size += 1;
        }
    }
    size
}

fn augment(i: usize, adjacency: &[Vec<usize>], owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
    for &j in &adjacency[i] {
        if visited[j] {
            continue;
        }
        visited[j] = true;
        let free = match owner[j] {
            None => true,
            Some(k) => augment(k, adjacency, owner, visited),
        };
        if free {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(left: usize, right: usize, edges: &[Vec<bool>]) -> usize {
        fn go(i: usize, left: usize, right: usize, edges: &[Vec<bool>], taken: &mut Vec<bool>) -> usize {
            if i == left {
                return 0;
            }
            let mut best = go(i + 1, left, right, edges, taken);
            for j in 0..right {
                if edges[i][j] && !taken[j] {
                    taken[j] = true;
                    best = best.max(1 + go(i + 1, left, right, edges, taken));
                    taken[j] = false;
                }
            }
            best
        }
        go(0, left, right, edges, &mut vec![false; right])
    }

    #[test]
    fn greedy_trap() {
        // Greedy would give 0→0 and leave 1 unmatched.
        let edges = [[true, true], [true, false]];
        assert_eq!(max_matching(2, 2, |i, j| edges[i][j]), 2);
    }

    proptest! {
        #[test]
        fn agrees_with_exhaustive_assignment(left in 0usize..7, right in 0usize..7, bits in any::<u64>()) {
            let edges: Vec<Vec<bool>> = (0..left)
                .map(|i| (0..right).map(|j| bits >> ((i * 7 + j) % 64) & 1 == 1).collect())
                .collect();
            prop_assert_eq!(max_matching(left, right, |i, j| edges[i][j]), brute_force(left, right, &edges));
        }
    }
}
