//! Grounded-path enumeration between a prediction's endpoints and the
//! aggregation of paths into relation paths.
//!
//! Paths are simple (no entity revisited, endpoints included) and bounded at
//! length 3. Enumeration is breadth-ordered: all length-1 paths, then
//! length-2, then length-3; within a length, steps expand in sorted
//! `(relation, inverse, entity)` order, so output order is deterministic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, Fact, KnowledgeGraph, SignedRelation};
use crate::{Error, Result};

/// One traversal step: a stored fact plus the direction it was walked in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub fact: Fact,
    pub sr: SignedRelation,
}

impl Step {
    /// Entity the step starts from.
    pub fn from_entity(&self) -> EntityId {
        if self.sr.inverse {
            self.fact.tail
        } else {
            self.fact.head
        }
    }

    /// Entity the step arrives at.
    pub fn to_entity(&self) -> EntityId {
        if self.sr.inverse {
            self.fact.head
        } else {
            self.fact.tail
        }
    }
}

/// A chain of 1..=3 steps from the prediction head to its tail.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundedPath {
    pub steps: Vec<Step>,
}

/// A path's signed-relation sequence with intermediate entities erased.
pub type RelationPath = Vec<SignedRelation>;

impl GroundedPath {
    pub fn relation_path(&self) -> RelationPath {
        self.steps.iter().map(|s| s.sr).collect()
    }

    pub fn first_fact(&self) -> Fact {
        self.steps[0].fact
    }

    pub fn last_fact(&self) -> Fact {
        self.steps[self.steps.len() - 1].fact
    }

    /// Entities visited, starting at the path's source.
    pub fn entities(&self) -> Vec<EntityId> {
        let mut out = vec![self.steps[0].from_entity()];
        out.extend(self.steps.iter().map(Step::to_entity));
        out
    }

    /// Steps chain end-to-start and no entity repeats.
    pub fn is_simple_chain(&self) -> bool {
        for w in self.steps.windows(2) {
            if w[0].to_entity() != w[1].from_entity() {
                return false;
            }
        }
        let mut seen = self.entities();
        seen.sort_unstable();
        let len = seen.len();
        seen.dedup();
        seen.len() == len
    }
}

/// Grounded paths sharing one relation path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathGroup {
    pub relation_path: RelationPath,
    pub grounded: Vec<GroundedPath>,
}

#[derive(Debug, Clone)]
pub struct PathSearch {
    pub paths: Vec<GroundedPath>,
    /// True if the cap cut enumeration short.
    pub truncated: bool,
}

pub const DEFAULT_MAX_LEN: usize = 3;
pub const DEFAULT_CAP: usize = 100_000;

/// All simple paths of length 1..=max_len from `h` to `t` over the train
/// split, walking facts in either orientation. Output is ordered by length,
/// then lexicographically by the step sequence; enumeration stops at `cap`.
pub fn find_grounded_paths(
    kg: &KnowledgeGraph,
    h: EntityId,
    t: EntityId,
    max_len: usize,
    cap: usize,
) -> Result<PathSearch> {
    if h == t {
        return Err(Error::SelfLoop);
    }
    assert!((1..=3).contains(&max_len), "path length bound must be 1..=3");
    let mut out = PathSearch { paths: Vec::new(), truncated: false };
    let mut steps: Vec<Step> = Vec::with_capacity(max_len);
    for target_len in 1..=max_len {
        extend(kg, h, t, target_len, &mut steps, &mut out, cap)?;
        if out.truncated {
            break;
        }
    }
    debug_assert!(out.paths.iter().all(GroundedPath::is_simple_chain));
    Ok(out)
}

fn extend(
    kg: &KnowledgeGraph,
    current: EntityId,
    t: EntityId,
    target_len: usize,
    steps: &mut Vec<Step>,
    out: &mut PathSearch,
    cap: usize,
) -> Result<()> {
    if out.paths.len() >= cap {
        out.truncated = true;
        return Ok(());
    }
    let remaining = target_len - steps.len();
    for (fact, other) in kg.neighbors(current, None)? {
        if other == current {
            // self-loop facts cannot advance a simple path
            continue;
        }
        let sr = if fact.head == current {
            SignedRelation::forward(fact.relation)
        } else {
            SignedRelation::inverse_of(fact.relation)
        };
        if remaining == 1 {
            if other != t {
                continue;
            }
        } else {
            // intermediate entities must be fresh and must not be t
            if other == t || steps.iter().any(|s| s.from_entity() == other) {
                continue;
            }
        }
        steps.push(Step { fact, sr });
        if remaining == 1 {
            out.paths.push(GroundedPath { steps: steps.clone() });
            if out.paths.len() >= cap {
                out.truncated = true;
                steps.pop();
                return Ok(());
            }
        } else {
            extend(kg, other, t, target_len, steps, out, cap)?;
        }
        steps.pop();
        if out.truncated {
            return Ok(());
        }
    }
    Ok(())
}

/// Partitions paths by relation path; group order is the relation paths'
/// lexicographic order, groundings keep their enumeration order.
pub fn aggregate(paths: &[GroundedPath]) -> Vec<PathGroup> {
    let mut groups: BTreeMap<RelationPath, Vec<GroundedPath>> = BTreeMap::new();
    for p in paths {
        groups.entry(p.relation_path()).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(relation_path, grounded)| PathGroup { relation_path, grounded })
        .collect()
}

/// Fraction of the group's groundings having `f` as their first edge (p_h)
/// and as their last edge (p_t). A length-1 grounding counts for both.
pub fn position_proportions(f: &Fact, g: &PathGroup) -> (f64, f64) {
    assert!(!g.grounded.is_empty(), "position proportions need a non-empty group");
    let n = g.grounded.len() as f64;
    let first = g.grounded.iter().filter(|p| p.first_fact() == *f).count() as f64;
    let last = g.grounded.iter().filter(|p| p.last_fact() == *f).count() as f64;
    (first / n, last / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KnowledgeGraph;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn t(h: &str, r: &str, t_: &str) -> (String, String, String) {
        (h.into(), r.into(), t_.into())
    }

    fn paths_of(kg: &KnowledgeGraph, h: &str, t_: &str) -> Vec<GroundedPath> {
        find_grounded_paths(
            kg,
            kg.entity_id(h).unwrap(),
            kg.entity_id(t_).unwrap(),
            3,
            DEFAULT_CAP,
        )
        .unwrap()
        .paths
    }

    #[test]
    fn single_edge_yields_one_path() {
        let kg = KnowledgeGraph::build(&[t("h", "r1", "t")], &[], &[]);
        let paths = paths_of(&kg, "h", "t");
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].steps.len(), 1);
        assert_eq!(paths[0].steps[0].sr, SignedRelation::forward(0));
    }

    #[test]
    fn two_hop_forward_path() {
        let kg = KnowledgeGraph::build(&[t("h", "r1", "a"), t("a", "r2", "t")], &[], &[]);
        let paths = paths_of(&kg, "h", "t");
        assert_eq!(paths.len(), 1);
        assert_eq!(
            paths[0].relation_path(),
            vec![SignedRelation::forward(0), SignedRelation::forward(1)]
        );
    }

    #[test]
    fn self_loop_prediction_errors() {
        let kg = KnowledgeGraph::build(&[t("h", "r", "t")], &[], &[]);
        let h = kg.entity_id("h").unwrap();
        assert!(matches!(find_grounded_paths(&kg, h, h, 3, 10), Err(Error::SelfLoop)));
    }

    #[test]
    fn inverse_orientation_is_walked() {
        // t --r--> h means h reaches t via the inverse view
        let kg = KnowledgeGraph::build(&[t("t", "r", "h")], &[], &[]);
        let paths = paths_of(&kg, "h", "t");
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].steps[0].sr, SignedRelation::inverse_of(0));
    }

    #[test]
    fn aggregation_partitions_by_relation_path() {
        let kg = KnowledgeGraph::build(
            &[
                t("h", "r1", "a"),
                t("a", "r2", "t"),
                t("h", "r1", "b"),
                t("b", "r2", "t"),
                t("h", "r1", "c"),
                t("t", "r2", "c"), // second hop inverted
            ],
            &[],
            &[],
        );
        let paths = paths_of(&kg, "h", "t");
        assert_eq!(paths.len(), 3);
        let groups = aggregate(&paths);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups.iter().map(|g| g.grounded.len()).sum::<usize>(), paths.len());
        for g in &groups {
            for p in &g.grounded {
                assert_eq!(p.relation_path(), g.relation_path);
            }
        }
    }

    #[test]
    fn proportion_fixtures() {
        let kg = KnowledgeGraph::build(
            &[t("h", "r1", "a"), t("a", "r2", "t"), t("h", "r1", "b"), t("b", "r2", "t")],
            &[],
            &[],
        );
        let groups = aggregate(&paths_of(&kg, "h", "t"));
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        let f = kg.resolve("h", "r1", "a").unwrap();
        let (p_h, p_t) = position_proportions(&f, g);
        assert_eq!((p_h, p_t), (0.5, 0.0));
        let absent = kg.resolve("a", "r2", "t").unwrap();
        assert_eq!(position_proportions(&absent, g), (0.0, 0.5));

        // length-1 group: single edge is both first and last
        let kg1 = KnowledgeGraph::build(&[t("h", "r1", "t")], &[], &[]);
        let groups1 = aggregate(&paths_of(&kg1, "h", "t"));
        let f1 = kg1.resolve("h", "r1", "t").unwrap();
        assert_eq!(position_proportions(&f1, &groups1[0]), (1.0, 1.0));
    }

    #[test]
    fn proportions_sum_to_one_over_distinct_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let triples: Vec<_> = (0..120)
            .map(|_| {
                t(
                    &format!("e{}", rng.gen_range(0..15)),
                    &format!("r{}", rng.gen_range(0..3)),
                    &format!("e{}", rng.gen_range(0..15)),
                )
            })
            .collect();
        let kg = KnowledgeGraph::build(&triples, &[], &[]);
        let h = EntityId(0);
        let t_ = EntityId(1);
        let found = find_grounded_paths(&kg, h, t_, 3, DEFAULT_CAP).unwrap();
        for g in aggregate(&found.paths) {
            let firsts: BTreeSet<Fact> = g.grounded.iter().map(GroundedPath::first_fact).collect();
            let lasts: BTreeSet<Fact> = g.grounded.iter().map(GroundedPath::last_fact).collect();
            let sum_h: f64 = firsts.iter().map(|f| position_proportions(f, &g).0).sum();
            let sum_t: f64 = lasts.iter().map(|f| position_proportions(f, &g).1).sum();
            assert!((sum_h - 1.0).abs() < 1e-12);
            assert!((sum_t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_truncates_deterministically() {
        let mut triples = Vec::new();
        for i in 0..30 {
            triples.push(t("h", "r1", &format!("m{i}")));
            triples.push(t(&format!("m{i}"), "r2", "t"));
        }
        let kg = KnowledgeGraph::build(&triples, &[], &[]);
        let h = kg.entity_id("h").unwrap();
        let t_ = kg.entity_id("t").unwrap();
        let capped = find_grounded_paths(&kg, h, t_, 2, 7).unwrap();
        assert!(capped.truncated);
        assert_eq!(capped.paths.len(), 7);
        let full = find_grounded_paths(&kg, h, t_, 2, DEFAULT_CAP).unwrap();
        assert!(!full.truncated);
        assert_eq!(full.paths[..7], capped.paths[..]);
    }

    /// Independent enumerator: recursive scan over the whole fact list,
    /// no neighbor index, results collected as a set.
    fn dfs_oracle(kg: &KnowledgeGraph, h: EntityId, t_: EntityId, max_len: usize) -> BTreeSet<GroundedPath> {
        fn go(
            kg: &KnowledgeGraph,
            current: EntityId,
            t_: EntityId,
            max_len: usize,
            visited: &mut Vec<EntityId>,
            steps: &mut Vec<Step>,
            out: &mut BTreeSet<GroundedPath>,
        ) {
            if steps.len() >= max_len {
                return;
            }
            for f in kg.train_facts() {
                let options: &[SignedRelation] = &[
                    SignedRelation::forward(f.relation),
                    SignedRelation::inverse_of(f.relation),
                ];
                for &sr in options {
                    let step = Step { fact: *f, sr };
                    if step.from_entity() != current {
                        continue;
                    }
                    let next = step.to_entity();
                    if next == t_ {
                        steps.push(step);
                        out.insert(GroundedPath { steps: steps.clone() });
                        steps.pop();
                        continue;
                    }
                    if visited.contains(&next) {
                        continue;
                    }
                    steps.push(step);
                    visited.push(next);
                    go(kg, next, t_, max_len, visited, steps, out);
                    visited.pop();
                    steps.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(kg, h, t_, max_len, &mut vec![h], &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn enumeration_matches_dfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for round in 0..15 {
            let n_ent = rng.gen_range(4..=30u32);
            let n_rel = rng.gen_range(1..=4u32);
            let n_facts = rng.gen_range(5..=90usize);
            let triples: Vec<_> = (0..n_facts)
                .map(|_| {
                    t(
                        &format!("e{}", rng.gen_range(0..n_ent)),
                        &format!("r{}", rng.gen_range(0..n_rel)),
                        &format!("e{}", rng.gen_range(0..n_ent)),
                    )
                })
                .collect();
            let kg = KnowledgeGraph::build(&triples, &[], &[]);
            let h = EntityId(rng.gen_range(0..kg.n_entities() as u32));
            let t_ = EntityId(rng.gen_range(0..kg.n_entities() as u32));
            if h == t_ {
                continue;
            }
            let max_len = rng.gen_range(1..=3usize);
            let found = find_grounded_paths(&kg, h, t_, max_len, DEFAULT_CAP).unwrap();
            assert!(!found.truncated);
            let got: BTreeSet<GroundedPath> = found.paths.iter().cloned().collect();
            assert_eq!(got.len(), found.paths.len(), "round {round}: duplicate paths");
            assert_eq!(got, dfs_oracle(&kg, h, t_, max_len), "round {round}");
            assert!(aggregate(&found.paths).len() <= found.paths.len().max(1));
        }
    }
}
