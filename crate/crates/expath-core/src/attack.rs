//! Adversarial-deletion evaluation harness.
//!
//! An attack removes each target's explanation facts from the train split in
//! one batch, retrains from scratch with the identical configuration and
//! seed, and measures the degradation of the targets' filtered reciprocal
//! ranks. With nothing removed the retrained model is bit-identical to the
//! original, so the deltas are exactly zero — that property anchors the
//! determinism tests.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{Fact, KnowledgeGraph};
use crate::kge::{train, EmbeddingModel, ModelConfig, RankResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub fact: Fact,
    pub original: RankResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub targets: Vec<Target>,
    pub seed: u64,
}

/// Seeded sample of up to `n` test facts whose filtered reciprocal rank
/// exceeds 0.5 under the given model.
pub fn select_targets(model: &EmbeddingModel, kg: &KnowledgeGraph, n: usize, seed: u64) -> Result<TargetSet> {
    let mut order: Vec<usize> = (0..kg.test_facts().len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut targets = Vec::new();
    for i in order {
        if targets.len() >= n {
            break;
        }
        let fact = kg.test_facts()[i];
        let original = model.rank_result(kg, &fact, true);
        if original.reciprocal_rank() > 0.5 {
            targets.push(Target { fact, original });
        }
    }
    if targets.is_empty() {
        return Err(Error::NoEligibleTargets);
    }
    Ok(TargetSet { targets, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub fact: Fact,
    pub rr_before: f64,
    pub rr_after: f64,
    pub h1_before: f64,
    pub h1_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: String,
    pub rows: Vec<TargetRow>,
    pub delta_mrr: f64,
    pub delta_h1: f64,
    pub removed: Vec<Fact>,
    pub seed: u64,
}

/// Eq.-style aggregation: relative drop of the summed reciprocal ranks; the
/// H@1 delta only counts targets that were at rank 1 to begin with.
pub fn aggregates(rows: &[TargetRow]) -> (f64, f64) {
    let rr_before: f64 = rows.iter().map(|r| r.rr_before).sum();
    let rr_after: f64 = rows.iter().map(|r| r.rr_after).sum();
    let delta_mrr = if rr_before > 0.0 { 1.0 - rr_after / rr_before } else { 0.0 };
    let eligible: Vec<&TargetRow> = rows.iter().filter(|r| r.h1_before > 0.0).collect();
    let delta_h1 = if eligible.is_empty() {
        0.0
    } else {
        let before: f64 = eligible.iter().map(|r| r.h1_before).sum();
        let after: f64 = eligible.iter().map(|r| r.h1_after).sum();
        1.0 - after / before
    };
    (delta_mrr, delta_h1)
}

/// Batch attack: remove the union of all removal sets once, retrain with the
/// same config, re-rank every target. `removals` aligns with the target list.
pub fn run_attack(
    kg: &KnowledgeGraph,
    config: &ModelConfig,
    targets: &TargetSet,
    removals: &[Vec<Fact>],
    method: &str,
) -> Result<AttackReport> {
    assert_eq!(removals.len(), targets.targets.len(), "one removal set per target");
    let union: BTreeSet<Fact> = removals.iter().flatten().copied().collect();
    let removed: Vec<Fact> = union.into_iter().collect();
    let attacked = kg.remove_facts(&removed)?;
    let retrained = train(&attacked, config)?;
    let rows: Vec<TargetRow> = targets
        .targets
        .iter()
        .map(|t| {
            let after = retrained.rank_result(&attacked, &t.fact, true);
            TargetRow {
                fact: t.fact,
                rr_before: t.original.reciprocal_rank(),
                rr_after: after.reciprocal_rank(),
                h1_before: t.original.hits_at_1(),
                h1_after: after.hits_at_1(),
            }
        })
        .collect();
    let (delta_mrr, delta_h1) = aggregates(&rows);
    Ok(AttackReport {
        method: method.to_string(),
        rows,
        delta_mrr,
        delta_h1,
        removed,
        seed: config.seed,
    })
}

/// Combines two attacks per target by keeping the side with the smaller
/// post-attack reciprocal rank (ties take the smaller H@1 too).
pub fn fuse(x: &AttackReport, y: &AttackReport) -> Result<AttackReport> {
    if x.rows.len() != y.rows.len()
        || x.rows
            .iter()
            .zip(&y.rows)
            .any(|(a, b)| a.fact != b.fact || a.rr_before != b.rr_before)
    {
        return Err(Error::Config("fusion requires identical target sets".into()));
    }
    let rows: Vec<TargetRow> = x
        .rows
        .iter()
        .zip(&y.rows)
        .map(|(a, b)| {
            let (rr_after, h1_after) = if a.rr_after < b.rr_after {
                (a.rr_after, a.h1_after)
            } else if b.rr_after < a.rr_after {
                (b.rr_after, b.h1_after)
            } else {
                (a.rr_after, a.h1_after.min(b.h1_after))
            };
            TargetRow { rr_after, h1_after, ..*a }
        })
        .collect();
    let (delta_mrr, delta_h1) = aggregates(&rows);
    let removed: BTreeSet<Fact> = x.removed.iter().chain(&y.removed).copied().collect();
    Ok(AttackReport {
        method: format!("{}+{}", x.method, y.method),
        rows,
        delta_mrr,
        delta_h1,
        removed: removed.into_iter().collect(),
        seed: x.seed,
    })
}

fn incident_facts(kg: &KnowledgeGraph, prediction: &Fact) -> Vec<Fact> {
    let mut facts: Vec<Fact> = Vec::new();
    for e in [prediction.head, prediction.tail] {
        if let Ok(nbrs) = kg.neighbors(e, None) {
            facts.extend(nbrs.into_iter().map(|(f, _)| f));
        }
    }
    facts.sort_unstable();
    facts.dedup();
    facts
}

/// Baseline: the k incident facts whose relations have the fewest train
/// facts. Relations order by (count, label); within one relation the pick
/// among equal facts is a seeded shuffle.
pub fn baseline_sparse(kg: &KnowledgeGraph, prediction: &Fact, k: usize, seed: u64) -> Vec<Fact> {
    let incident = incident_facts(kg, prediction);
    let mut by_relation: Vec<(usize, String, Vec<Fact>)> = Vec::new();
    for f in incident {
        let label = kg.relation_label(f.relation).to_string();
        match by_relation.iter_mut().find(|(_, l, _)| *l == label) {
            Some((_, _, list)) => list.push(f),
            None => by_relation.push((kg.facts_of_relation(f.relation).len(), label, vec![f])),
        }
    }
    by_relation.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, _, mut list) in by_relation {
        list.shuffle(&mut rng);
        for f in list {
            if out.len() >= k {
                return out;
            }
            out.push(f);
        }
    }
    out
}

/// Baseline: seeded uniform sample of k facts incident to either endpoint.
pub fn baseline_random(kg: &KnowledgeGraph, prediction: &Fact, k: usize, seed: u64) -> Vec<Fact> {
    let mut incident = incident_facts(kg, prediction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    incident.shuffle(&mut rng);
    incident.truncate(k);
    incident
}

fn fact_json(kg: &KnowledgeGraph, f: &Fact) -> serde_json::Value {
    serde_json::json!({
        "h": kg.entity_label(f.head),
        "r": kg.relation_label(f.relation),
        "t": kg.entity_label(f.tail),
    })
}

/// Exchange format for explanation sets:
/// `{targets: [{prediction: {h,r,t}, facts: [{h,r,t}, …]}]}`.
pub fn export_explanations(kg: &KnowledgeGraph, sets: &[(Fact, Vec<Fact>)]) -> serde_json::Value {
    let targets: Vec<serde_json::Value> = sets
        .iter()
        .map(|(prediction, facts)| {
            serde_json::json!({
                "prediction": fact_json(kg, prediction),
                "facts": facts.iter().map(|f| fact_json(kg, f)).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::json!({ "targets": targets })
}

/// Parses the exchange format back against the graph's dictionaries.
pub fn import_external_explanations(kg: &KnowledgeGraph, json: &str) -> Result<Vec<(Fact, Vec<Fact>)>> {
    #[derive(Deserialize)]
    struct RawFact {
        h: String,
        r: String,
        t: String,
    }
    #[derive(Deserialize)]
    struct RawTarget {
        prediction: RawFact,
        facts: Vec<RawFact>,
    }
    #[derive(Deserialize)]
    struct RawFile {
        targets: Vec<RawTarget>,
    }
    let raw: RawFile = serde_json::from_str(json)?;
    let resolve = |rf: &RawFact| -> Result<Fact> {
        kg.resolve(&rf.h, &rf.r, &rf.t).map_err(|e| {
            Error::Config(format!("record <{}, {}, {}>: {e}", rf.h, rf.r, rf.t))
        })
    };
    raw.targets
        .iter()
        .map(|t| {
            let prediction = resolve(&t.prediction)?;
            let facts = t.facts.iter().map(resolve).collect::<Result<Vec<_>>>()?;
            Ok((prediction, facts))
        })
        .collect()
}

/// Parses a single-run report produced by [`report_json`].
pub fn report_from_json(kg: &KnowledgeGraph, json: &str) -> Result<AttackReport> {
    #[derive(Deserialize)]
    struct RawFact {
        h: String,
        r: String,
        t: String,
    }
    #[derive(Deserialize)]
    struct RawRow {
        fact: RawFact,
        rr_before: f64,
        rr_after: f64,
        h1_before: f64,
        h1_after: f64,
    }
    #[derive(Deserialize)]
    struct RawReport {
        method: String,
        seed: u64,
        delta_mrr: f64,
        delta_h1: f64,
        targets: Vec<RawRow>,
        removed: Vec<RawFact>,
    }
    let raw: RawReport = serde_json::from_str(json)?;
    let resolve = |rf: &RawFact| -> Result<Fact> {
        kg.resolve(&rf.h, &rf.r, &rf.t)
            .map_err(|e| Error::Config(format!("record <{}, {}, {}>: {e}", rf.h, rf.r, rf.t)))
    };
    let rows = raw
        .targets
        .iter()
        .map(|r| {
            Ok(TargetRow {
                fact: resolve(&r.fact)?,
                rr_before: r.rr_before,
                rr_after: r.rr_after,
                h1_before: r.h1_before,
                h1_after: r.h1_after,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let removed = raw.removed.iter().map(resolve).collect::<Result<Vec<_>>>()?;
    Ok(AttackReport {
        method: raw.method,
        rows,
        delta_mrr: raw.delta_mrr,
        delta_h1: raw.delta_h1,
        removed,
        seed: raw.seed,
    })
}

/// Report JSON with label-resolved facts. Wall-clock timings deliberately
/// stay out of this document so reruns are byte-identical; they go to logs.
pub fn report_json(kg: &KnowledgeGraph, report: &AttackReport) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "fact": fact_json(kg, &r.fact),
                "rr_before": r.rr_before,
                "rr_after": r.rr_after,
                "h1_before": r.h1_before,
                "h1_after": r.h1_after,
            })
        })
        .collect();
    serde_json::json!({
        "method": report.method,
        "seed": report.seed,
        "delta_mrr": report.delta_mrr,
        "delta_h1": report.delta_h1,
        "targets": rows,
        "removed": report.removed.iter().map(|f| fact_json(kg, f)).collect::<Vec<_>>(),
    })
}

/// Mean and sample standard deviation (n−1); stddev is 0 for a single value.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty());
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}
