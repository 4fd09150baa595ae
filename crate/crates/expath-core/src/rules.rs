//! Prediction-local rule mining and metric evaluation.
//!
//! Two rule families are mined around a prediction `<h, r, t>`:
//!
//! - CP (closed path): `r(X, Y) <- sr1(X, A1) ∧ … ∧ srn(A_{n-1}, Y)`, built
//!   from the relation paths connecting h to t. Metrics are evaluated as
//!   binarized products of sparse adjacency matrices.
//! - PT (property transition): `r(X, c) <- sr0(X, c')` (head side) or the
//!   mirror over the tail variable, built from single facts incident to h or
//!   t. Metrics are evaluated as neighbor-set intersections.
//!
//! Candidate relation paths are pruned by head/tail relevance: each side's
//! entity is re-embedded with the path's boundary relation excluded (a mimic)
//! and the prediction's plausibility drop is measured against a mimic trained
//! with nothing excluded, so the identity case is exactly zero.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, Fact, KnowledgeGraph, SignedRelation};
use crate::kge::{plausibility_of_score, post_train_mimic, EmbeddingModel};
use crate::paths::{self, PathGroup, RelationPath};
use crate::{Error, Result};

/// Which prediction endpoint a PT rule's variable ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PtSide {
    /// r(X, c) <- sr0(X, c') with c = the prediction's tail.
    Head,
    /// r(h, Y) <- sr0(Y, c') with the constant h = the prediction's head.
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleBody {
    Cp(RelationPath),
    Pt {
        side: PtSide,
        /// Signed body relation, viewed from the rule variable.
        body_sr: SignedRelation,
        body_constant: EntityId,
        head_constant: EntityId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head_relation: u32,
    pub body: RuleBody,
}

impl Rule {
    pub fn cp(head_relation: u32, body: RelationPath) -> Self {
        assert!((1..=3).contains(&body.len()), "CP body length must be 1..=3");
        Self { head_relation, body: RuleBody::Cp(body) }
    }

    pub fn is_cp(&self) -> bool {
        matches!(self.body, RuleBody::Cp(_))
    }

    /// Human-readable form: CP as `head <- b1, b2'` with a trailing
    /// apostrophe marking inverse traversal; PT as `head(X, c) <- body(X, c')`
    /// or the tail-side mirror `head(c, Y) <- body(Y, c')`.
    pub fn to_string_with(&self, kg: &KnowledgeGraph) -> String {
        let rel = |sr: SignedRelation| {
            let mark = if sr.inverse { "'" } else { "" };
            format!("{}{mark}", kg.relation_label(sr.relation))
        };
        match &self.body {
            RuleBody::Cp(body) => {
                let parts: Vec<String> = body.iter().map(|&sr| rel(sr)).collect();
                format!("{} <- {}", kg.relation_label(self.head_relation), parts.join(", "))
            }
            RuleBody::Pt { side, body_sr, body_constant, head_constant } => {
                let c = kg.entity_label(*head_constant);
                let c2 = kg.entity_label(*body_constant);
                let head = kg.relation_label(self.head_relation);
                match side {
                    PtSide::Head => format!("{head}(X, {c}) <- {}(X, {c2})", rel(*body_sr)),
                    PtSide::Tail => format!("{head}({c}, Y) <- {}(Y, {c2})", rel(*body_sr)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleMetrics {
    pub supp: usize,
    pub sc: f64,
    pub hc: f64,
    pub conf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub min_sc: f64,
    pub min_hc: f64,
    pub min_supp: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { min_sc: 0.1, min_hc: 0.01, min_supp: 10 }
    }
}

/// Smoothed confidence: SC damped toward zero at low support, so a rule with
/// few groundings cannot dominate scoring.
pub fn conf(supp: usize, sc: f64, min_supp: usize) -> f64 {
    if supp == 0 {
        return 0.0;
    }
    sc * supp as f64 / (supp + min_supp) as f64
}

/// Plausibility drop of the prediction when each endpoint's mimic replaces
/// the original. `degenerate_*` marks sides where the exclusion removed every
/// incident fact (relevance pinned to 1.0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevancePair {
    pub rel_h: f64,
    pub rel_t: f64,
    pub degenerate_h: bool,
    pub degenerate_t: bool,
}

/// Evaluates a CP rule as a left-to-right fold of binarized adjacency
/// products; support is the overlap with the head relation's adjacency.
pub fn eval_cp(kg: &KnowledgeGraph, rule: &Rule, thresholds: &Thresholds) -> Result<RuleMetrics> {
    let body = match &rule.body {
        RuleBody::Cp(b) => b,
        RuleBody::Pt { .. } => panic!("eval_cp on a PT rule"),
    };
    assert!(!body.is_empty());
    let head = kg.adjacency(SignedRelation::forward(rule.head_relation));
    let head_count = head.entry_count();
    if head_count == 0 {
        return Err(Error::HeadRelationAbsent(kg.relation_label(rule.head_relation).to_string()));
    }
    let mut b = kg.adjacency(body[0]);
    for &sr in &body[1..] {
        b = b.multiply_binarized(&kg.adjacency(sr));
    }
    let body_count = b.entry_count();
    if body_count == 0 {
        return Ok(RuleMetrics { supp: 0, sc: 0.0, hc: 0.0, conf: 0.0 });
    }
    let supp = b.and_count(&head);
    let sc = supp as f64 / body_count as f64;
    let hc = supp as f64 / head_count as f64;
    Ok(RuleMetrics { supp, sc, hc, conf: conf(supp, sc, thresholds.min_supp) })
}

fn pt_variable_set(kg: &KnowledgeGraph, sr: SignedRelation, constant: EntityId) -> Result<HashSet<EntityId>> {
    // {X : sr(X, constant)} = entities reaching `constant` by walking sr,
    // i.e. the far endpoints of invert(sr) viewed from the constant.
    Ok(kg
        .neighbors(constant, Some(sr.invert()))?
        .into_iter()
        .map(|(_, other)| other)
        .collect())
}

/// Evaluates a PT rule by intersecting the head atom's and body atom's
/// variable sets.
pub fn eval_pt(kg: &KnowledgeGraph, rule: &Rule, thresholds: &Thresholds) -> Result<RuleMetrics> {
    let (side, body_sr, body_constant, head_constant) = match &rule.body {
        RuleBody::Pt { side, body_sr, body_constant, head_constant } => {
            (*side, *body_sr, *body_constant, *head_constant)
        }
        RuleBody::Cp(_) => panic!("eval_pt on a CP rule"),
    };
    let head_sr = match side {
        // head atom r(X, c): X walks r forward to c
        PtSide::Head => SignedRelation::forward(rule.head_relation),
        // head atom r(c, Y): Y walks r inverse to c
        PtSide::Tail => SignedRelation::inverse_of(rule.head_relation),
    };
    let head_set = pt_variable_set(kg, head_sr, head_constant)?;
    if head_set.is_empty() {
        return Err(Error::HeadRelationAbsent(kg.relation_label(rule.head_relation).to_string()));
    }
    let body_set = pt_variable_set(kg, body_sr, body_constant)?;
    if body_set.is_empty() {
        return Ok(RuleMetrics { supp: 0, sc: 0.0, hc: 0.0, conf: 0.0 });
    }
    let supp = head_set.intersection(&body_set).count();
    let sc = supp as f64 / body_set.len() as f64;
    let hc = supp as f64 / head_set.len() as f64;
    Ok(RuleMetrics { supp, sc, hc, conf: conf(supp, sc, thresholds.min_supp) })
}

#[derive(Debug, Clone)]
enum MimicOutcome {
    Vector(Vec<f64>),
    Degenerate,
}

/// Memo of mimic post-trainings keyed by (entity, excluded signed relation);
/// `None` is the baseline trained with nothing excluded.
#[derive(Debug, Default)]
pub struct MimicCache {
    entries: HashMap<(u32, Option<SignedRelation>), MimicOutcome>,
}

impl MimicCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn mimic(
        &mut self,
        model: &EmbeddingModel,
        kg: &KnowledgeGraph,
        e: EntityId,
        excluded_sr: Option<SignedRelation>,
        epochs: usize,
        both_orientations: bool,
    ) -> Result<MimicOutcome> {
        let key = (e.0, excluded_sr);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(hit.clone());
        }
        let mut excluded: Vec<Fact> = Vec::new();
        if let Some(sr) = excluded_sr {
            excluded.extend(kg.neighbors(e, Some(sr))?.into_iter().map(|(f, _)| f));
            if both_orientations {
                excluded.extend(kg.neighbors(e, Some(sr.invert()))?.into_iter().map(|(f, _)| f));
            }
        }
        let outcome = match post_train_mimic(model, kg, e, &excluded, epochs) {
            Ok(v) => MimicOutcome::Vector(v),
            Err(Error::DegenerateEntity(_)) => MimicOutcome::Degenerate,
            Err(other) => return Err(other),
        };
        self.entries.insert(key, outcome.clone());
        Ok(outcome)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub thresholds: Thresholds,
    pub max_path_len: usize,
    pub path_cap: usize,
    pub mimic_epochs: usize,
    /// Relevance must exceed this on both sides for a path to survive.
    pub rel_eps: f64,
    /// Exclude both orientations of the boundary relation when building
    /// mimics, not just the signed one.
    pub exclude_both_orientations: bool,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            max_path_len: paths::DEFAULT_MAX_LEN,
            path_cap: paths::DEFAULT_CAP,
            mimic_epochs: 50,
            rel_eps: 0.0,
            exclude_both_orientations: false,
        }
    }
}

/// One side of the relevance computation: 1 − plaus(mimic)/plaus(baseline).
fn relevance_side(
    model: &EmbeddingModel,
    kg: &KnowledgeGraph,
    cache: &mut MimicCache,
    prediction: &Fact,
    entity: EntityId,
    excluded_sr: SignedRelation,
    is_head_side: bool,
    epochs: usize,
    both: bool,
) -> Result<(f64, bool)> {
    let baseline = cache.mimic(model, kg, entity, None, epochs, both)?;
    let mimic = cache.mimic(model, kg, entity, Some(excluded_sr), epochs, both)?;
    let (base_vec, mimic_vec) = match (baseline, mimic) {
        (MimicOutcome::Vector(b), MimicOutcome::Vector(m)) => (b, m),
        // losing every incident fact certainly matters
        _ => return Ok((1.0, true)),
    };
    let (p_base, p_mimic) = if is_head_side {
        let t_vec = model.entity_vec(prediction.tail);
        (
            plausibility_of_score(model.score_with(&base_vec, prediction.relation, t_vec)),
            plausibility_of_score(model.score_with(&mimic_vec, prediction.relation, t_vec)),
        )
    } else {
        let h_vec = model.entity_vec(prediction.head);
        (
            plausibility_of_score(model.score_with(h_vec, prediction.relation, &base_vec)),
            plausibility_of_score(model.score_with(h_vec, prediction.relation, &mimic_vec)),
        )
    };
    Ok((1.0 - p_mimic / p_base, false))
}

/// Head/tail relevance of a relation path for a prediction. The head mimic
/// excludes h's facts along the path's first signed relation; the tail mimic
/// excludes t's facts along the last signed relation as seen from t.
pub fn relevance(
    model: &EmbeddingModel,
    kg: &KnowledgeGraph,
    cache: &mut MimicCache,
    prediction: &Fact,
    rp: &RelationPath,
    config: &MinerConfig,
) -> Result<RelevancePair> {
    assert!(!rp.is_empty());
    let (rel_h, degenerate_h) = relevance_side(
        model,
        kg,
        cache,
        prediction,
        prediction.head,
        rp[0],
        true,
        config.mimic_epochs,
        config.exclude_both_orientations,
    )?;
    let (rel_t, degenerate_t) = relevance_side(
        model,
        kg,
        cache,
        prediction,
        prediction.tail,
        rp[rp.len() - 1].invert(),
        false,
        config.mimic_epochs,
        config.exclude_both_orientations,
    )?;
    Ok(RelevancePair { rel_h, rel_t, degenerate_h, degenerate_t })
}

#[derive(Debug, Clone)]
pub struct MinedRule {
    pub rule: Rule,
    pub metrics: RuleMetrics,
    /// Present for CP rules only.
    pub relevance: Option<RelevancePair>,
    /// Groundings backing a CP rule.
    pub group: Option<PathGroup>,
    /// The single train fact a PT rule was built from.
    pub body_fact: Option<Fact>,
    /// Cached serialization, used for deterministic tie-breaking.
    pub serialized: String,
}

#[derive(Debug, Clone)]
pub struct MinedRuleSet {
    pub prediction: Fact,
    pub rules: Vec<MinedRule>,
    /// Path enumeration hit the cap.
    pub paths_truncated: bool,
}

/// Mines the candidate rule set for one test-split prediction: CP rules from
/// relevance-surviving relation paths, PT rules from facts incident to either
/// endpoint. Output is ordered by conf descending, ties by serialization.
pub fn mine(
    kg: &KnowledgeGraph,
    model: &EmbeddingModel,
    prediction: &Fact,
    config: &MinerConfig,
) -> Result<MinedRuleSet> {
    if !kg
        .test_facts()
        .iter()
        .any(|f| f == prediction)
    {
        return Err(Error::NotInTestSplit(kg.fact_to_string(prediction)));
    }
    let mut rules: Vec<MinedRule> = Vec::new();
    let mut truncated = false;

    // the head relation needs train groundings for any metric to exist
    if !kg.facts_of_relation(prediction.relation).is_empty() {
        let mut cache = MimicCache::new();
        let search =
            paths::find_grounded_paths(kg, prediction.head, prediction.tail, config.max_path_len, config.path_cap)?;
        truncated = search.truncated;
        for group in paths::aggregate(&search.paths) {
            let pair = relevance(model, kg, &mut cache, prediction, &group.relation_path, config)?;
            if pair.rel_h <= config.rel_eps || pair.rel_t <= config.rel_eps {
                continue;
            }
            let rule = Rule::cp(prediction.relation, group.relation_path.clone());
            let metrics = eval_cp(kg, &rule, &config.thresholds)?;
            if metrics.sc >= config.thresholds.min_sc && metrics.hc >= config.thresholds.min_hc {
                let serialized = rule.to_string_with(kg);
                rules.push(MinedRule {
                    rule,
                    metrics,
                    relevance: Some(pair),
                    group: Some(group),
                    body_fact: None,
                    serialized,
                });
            }
        }

        for (side, entity) in [(PtSide::Head, prediction.head), (PtSide::Tail, prediction.tail)] {
            let head_constant = match side {
                PtSide::Head => prediction.tail,
                PtSide::Tail => prediction.head,
            };
            let mut seen: BTreeSet<(SignedRelation, EntityId)> = BTreeSet::new();
            for (fact, other) in kg.neighbors(entity, None)? {
                let body_sr = if fact.head == entity {
                    SignedRelation::forward(fact.relation)
                } else {
                    SignedRelation::inverse_of(fact.relation)
                };
                if !seen.insert((body_sr, other)) {
                    continue;
                }
                // vacuous: the body atom is the head atom itself
                let vacuous = match side {
                    PtSide::Head => body_sr == SignedRelation::forward(prediction.relation) && other == prediction.tail,
                    PtSide::Tail => {
                        body_sr == SignedRelation::inverse_of(prediction.relation) && other == prediction.head
                    }
                };
                if vacuous || fact == *prediction {
                    continue;
                }
                let rule = Rule {
                    head_relation: prediction.relation,
                    body: RuleBody::Pt { side, body_sr, body_constant: other, head_constant },
                };
                let metrics = match eval_pt(kg, &rule, &config.thresholds) {
                    Ok(m) => m,
                    Err(Error::HeadRelationAbsent(_)) => continue,
                    Err(e) => return Err(e),
                };
                if metrics.sc >= config.thresholds.min_sc && metrics.hc >= config.thresholds.min_hc {
                    let serialized = rule.to_string_with(kg);
                    rules.push(MinedRule {
                        rule,
                        metrics,
                        relevance: None,
                        group: None,
                        body_fact: Some(fact),
                        serialized,
                    });
                }
            }
        }
    }

    rules.sort_by(|a, b| {
        b.metrics
            .conf
            .total_cmp(&a.metrics.conf)
            .then_with(|| a.serialized.cmp(&b.serialized))
    });
    Ok(MinedRuleSet { prediction: *prediction, rules, paths_truncated: truncated })
}

/// Parses the serialization produced by [`Rule::to_string_with`].
pub fn parse_rule(kg: &KnowledgeGraph, text: &str) -> Result<Rule> {
    let arrow = text.find("<-").ok_or_else(|| Error::RuleParse {
        position: text.len(),
        message: "missing '<-'".into(),
    })?;
    let head = text[..arrow].trim();
    let body = text[arrow + 2..].trim();
    let body_offset = arrow + 2 + (text[arrow + 2..].len() - text[arrow + 2..].trim_start().len());

    let signed = |name: &str, position: usize| -> Result<SignedRelation> {
        let (label, inverse) = match name.strip_suffix('\'') {
            Some(stripped) => (stripped, true),
            None => (name, false),
        };
        let relation = kg.relation_id(label).map_err(|_| Error::RuleParse {
            position,
            message: format!("unknown relation: {label}"),
        })?;
        Ok(SignedRelation { relation, inverse })
    };

    if head.contains('(') {
        // PT form: head(A, B) <- body(C, D)
        let parse_atom = |atom: &str, position: usize| -> Result<(String, String, String)> {
            let open = atom.find('(').ok_or_else(|| Error::RuleParse {
                position,
                message: "expected '('".into(),
            })?;
            let close = atom.rfind(')').ok_or_else(|| Error::RuleParse {
                position,
                message: "expected ')'".into(),
            })?;
            let rel = atom[..open].trim().to_string();
            let args: Vec<&str> = atom[open + 1..close].split(',').map(str::trim).collect();
            if args.len() != 2 {
                return Err(Error::RuleParse { position, message: "expected two arguments".into() });
            }
            Ok((rel, args[0].to_string(), args[1].to_string()))
        };
        let (head_rel, a, b) = parse_atom(head, 0)?;
        let (body_rel, c, d) = parse_atom(body, body_offset)?;
        let head_sr = signed(&head_rel, 0)?;
        if head_sr.inverse {
            return Err(Error::RuleParse { position: 0, message: "PT head relation cannot be inverted".into() });
        }
        let body_sr = signed(&body_rel, body_offset)?;
        let entity = |label: &str, position: usize| -> Result<EntityId> {
            kg.entity_id(label).map_err(|_| Error::RuleParse {
                position,
                message: format!("unknown entity: {label}"),
            })
        };
        let is_var = |s: &str| s == "X" || s == "Y";
        match (is_var(&a), is_var(&b)) {
            (true, false) => {
                if !is_var(&c) || is_var(&d) {
                    return Err(Error::RuleParse {
                        position: body_offset,
                        message: "body variable must be first for a head-side rule".into(),
                    });
                }
                Ok(Rule {
                    head_relation: head_sr.relation,
                    body: RuleBody::Pt {
                        side: PtSide::Head,
                        body_sr,
                        body_constant: entity(&d, body_offset)?,
                        head_constant: entity(&b, 0)?,
                    },
                })
            }
            (false, true) => {
                if !is_var(&c) || is_var(&d) {
                    return Err(Error::RuleParse {
                        position: body_offset,
                        message: "body variable must be first for a tail-side rule".into(),
                    });
                }
                Ok(Rule {
                    head_relation: head_sr.relation,
                    body: RuleBody::Pt {
                        side: PtSide::Tail,
                        body_sr,
                        body_constant: entity(&d, body_offset)?,
                        head_constant: entity(&a, 0)?,
                    },
                })
            }
            _ => Err(Error::RuleParse {
                position: 0,
                message: "head atom needs exactly one variable (X or Y)".into(),
            }),
        }
    } else {
        let head_sr = signed(head, 0)?;
        if head_sr.inverse {
            return Err(Error::RuleParse { position: 0, message: "CP head relation cannot be inverted".into() });
        }
        let mut parts = Vec::new();
        for raw in body.split(',') {
            let name = raw.trim();
            if name.is_empty() {
                return Err(Error::RuleParse { position: body_offset, message: "empty body atom".into() });
            }
            parts.push(signed(name, body_offset)?);
        }
        if parts.is_empty() || parts.len() > 3 {
            return Err(Error::RuleParse {
                position: body_offset,
                message: format!("CP body must have 1..=3 atoms, found {}", parts.len()),
            });
        }
        Ok(Rule::cp(head_sr.relation, parts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KnowledgeGraph;
    use crate::kge::{train, ModelConfig, ModelFamily};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn t(h: &str, r: &str, t_: &str) -> (String, String, String) {
        (h.into(), r.into(), t_.into())
    }

    fn th() -> Thresholds {
        Thresholds::default()
    }

    #[test]
    fn conf_fixtures() {
        assert_eq!(conf(10, 0.5, 10), 0.25);
        assert_eq!(conf(0, 0.9, 10), 0.0);
        assert!((conf(1_000_000, 0.8, 10) - 0.8).abs() < 1e-5);
        // monotone in supp at fixed SC, never exceeds SC
        assert!(conf(20, 0.5, 10) > conf(10, 0.5, 10));
        assert!(conf(20, 0.5, 10) <= 0.5);
    }

    #[test]
    fn eval_cp_two_hop_fixture() {
        let kg = KnowledgeGraph::build(
            &[t("a", "r1", "b"), t("b", "r2", "c"), t("d", "r1", "b"), t("a", "r", "c")],
            &[],
            &[],
        );
        let rule = Rule::cp(
            kg.relation_id("r").unwrap(),
            vec![
                SignedRelation::forward(kg.relation_id("r1").unwrap()),
                SignedRelation::forward(kg.relation_id("r2").unwrap()),
            ],
        );
        let m = eval_cp(&kg, &rule, &th()).unwrap();
        assert_eq!(m.supp, 1);
        assert_eq!(m.sc, 0.5);
        assert_eq!(m.hc, 1.0);
        assert!((m.conf - 0.5 * (1.0 / 11.0)).abs() < 1e-12);
    }

    #[test]
    fn eval_cp_head_relation_absent() {
        let kg = KnowledgeGraph::build(&[t("a", "r1", "b")], &[], &[t("a", "r", "b")]);
        let rule = Rule::cp(
            kg.relation_id("r").unwrap(),
            vec![SignedRelation::forward(kg.relation_id("r1").unwrap())],
        );
        assert!(matches!(eval_cp(&kg, &rule, &th()), Err(Error::HeadRelationAbsent(_))));
    }

    #[test]
    fn eval_cp_empty_body_is_zero_metrics() {
        let kg = KnowledgeGraph::build(&[t("a", "r", "b"), t("c", "r1", "d")], &[], &[]);
        // r1 then r1 never composes in this graph
        let r1 = kg.relation_id("r1").unwrap();
        let rule = Rule::cp(
            kg.relation_id("r").unwrap(),
            vec![SignedRelation::forward(r1), SignedRelation::forward(r1)],
        );
        let m = eval_cp(&kg, &rule, &th()).unwrap();
        assert_eq!((m.supp, m.sc, m.hc, m.conf), (0, 0.0, 0.0, 0.0));
    }

    /// Brute-force nested-join evaluation of a CP body over all entity pairs.
    fn cp_join_oracle(kg: &KnowledgeGraph, rule: &Rule) -> (usize, usize, usize) {
        let body = match &rule.body {
            RuleBody::Cp(b) => b.clone(),
            _ => unreachable!(),
        };
        let n = kg.n_entities() as u32;
        let holds = |sr: SignedRelation, x: u32, y: u32| {
            kg.train_facts().iter().any(|f| {
                if sr.inverse {
                    f.relation == sr.relation && f.tail.0 == x && f.head.0 == y
                } else {
                    f.relation == sr.relation && f.head.0 == x && f.tail.0 == y
                }
            })
        };
        let mut body_pairs = HashSet::new();
        for x in 0..n {
            for y in 0..n {
                let connected = match body.len() {
                    1 => holds(body[0], x, y),
                    2 => (0..n).any(|a| holds(body[0], x, a) && holds(body[1], a, y)),
                    3 => (0..n).any(|a| {
                        holds(body[0], x, a) && (0..n).any(|b| holds(body[1], a, b) && holds(body[2], b, y))
                    }),
                    _ => unreachable!(),
                };
                if connected {
                    body_pairs.insert((x, y));
                }
            }
        }
        let head_pairs: HashSet<(u32, u32)> = kg
            .facts_of_relation(rule.head_relation)
            .iter()
            .map(|f| (f.head.0, f.tail.0))
            .collect();
        let supp = body_pairs.intersection(&head_pairs).count();
        (supp, body_pairs.len(), head_pairs.len())
    }

    #[test]
    fn eval_cp_matches_join_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let n_ent = rng.gen_range(4..=25u32);
            let n_rel = rng.gen_range(2..=4u32);
            let triples: Vec<_> = (0..rng.gen_range(10..=80usize))
                .map(|_| {
                    t(
                        &format!("e{}", rng.gen_range(0..n_ent)),
                        &format!("r{}", rng.gen_range(0..n_rel)),
                        &format!("e{}", rng.gen_range(0..n_ent)),
                    )
                })
                .collect();
            let kg = KnowledgeGraph::build(&triples, &[], &[]);
            for _ in 0..10 {
                let head = rng.gen_range(0..kg.n_relations() as u32);
                if kg.facts_of_relation(head).is_empty() {
                    continue;
                }
                let len = rng.gen_range(1..=3usize);
                let body: RelationPath = (0..len)
                    .map(|_| SignedRelation {
                        relation: rng.gen_range(0..kg.n_relations() as u32),
                        inverse: rng.gen_bool(0.5),
                    })
                    .collect();
                let rule = Rule::cp(head, body);
                let m = eval_cp(&kg, &rule, &th()).unwrap();
                let (supp, body_count, head_count) = cp_join_oracle(&kg, &rule);
                assert_eq!(m.supp, supp);
                if body_count > 0 {
                    assert!((m.sc - supp as f64 / body_count as f64).abs() < 1e-12);
                    assert!((m.hc - supp as f64 / head_count as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eval_pt_single_entity_fixture() {
        let kg = KnowledgeGraph::build(
            &[t("m", "language", "Japanese"), t("m", "country", "Japan")],
            &[],
            &[],
        );
        let rule = Rule {
            head_relation: kg.relation_id("country").unwrap(),
            body: RuleBody::Pt {
                side: PtSide::Head,
                body_sr: SignedRelation::forward(kg.relation_id("language").unwrap()),
                body_constant: kg.entity_id("Japanese").unwrap(),
                head_constant: kg.entity_id("Japan").unwrap(),
            },
        };
        let m = eval_pt(&kg, &rule, &th()).unwrap();
        assert_eq!((m.supp, m.sc, m.hc), (1, 1.0, 1.0));
    }

    /// Scan-based set intersection over the raw fact list.
    fn pt_scan_oracle(kg: &KnowledgeGraph, rule: &Rule) -> (usize, usize, usize) {
        let (side, body_sr, body_constant, head_constant) = match &rule.body {
            RuleBody::Pt { side, body_sr, body_constant, head_constant } => {
                (*side, *body_sr, *body_constant, *head_constant)
            }
            _ => unreachable!(),
        };
        let set_of = |sr: SignedRelation, c: EntityId| -> HashSet<EntityId> {
            kg.train_facts()
                .iter()
                .filter_map(|f| {
                    if f.relation != sr.relation {
                        return None;
                    }
                    if sr.inverse {
                        (f.head == c).then_some(f.tail)
                    } else {
                        (f.tail == c).then_some(f.head)
                    }
                })
                .collect()
        };
        let head_sr = match side {
            PtSide::Head => SignedRelation::forward(rule.head_relation),
            PtSide::Tail => SignedRelation::inverse_of(rule.head_relation),
        };
        let head_set = set_of(head_sr, head_constant);
        let body_set = set_of(body_sr, body_constant);
        (head_set.intersection(&body_set).count(), body_set.len(), head_set.len())
    }

    #[test]
    fn eval_pt_matches_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let n_ent = rng.gen_range(4..=30u32);
            let n_rel = rng.gen_range(2..=4u32);
            let triples: Vec<_> = (0..rng.gen_range(10..=120usize))
                .map(|_| {
                    t(
                        &format!("e{}", rng.gen_range(0..n_ent)),
                        &format!("r{}", rng.gen_range(0..n_rel)),
                        &format!("e{}", rng.gen_range(0..n_ent)),
                    )
                })
                .collect();
            let kg = KnowledgeGraph::build(&triples, &[], &[]);
            for _ in 0..20 {
                let rule = Rule {
                    head_relation: rng.gen_range(0..kg.n_relations() as u32),
                    body: RuleBody::Pt {
                        side: if rng.gen_bool(0.5) { PtSide::Head } else { PtSide::Tail },
                        body_sr: SignedRelation {
                            relation: rng.gen_range(0..kg.n_relations() as u32),
                            inverse: rng.gen_bool(0.5),
                        },
                        body_constant: EntityId(rng.gen_range(0..kg.n_entities() as u32)),
                        head_constant: EntityId(rng.gen_range(0..kg.n_entities() as u32)),
                    },
                };
                let (supp, body_count, head_count) = pt_scan_oracle(&kg, &rule);
                match eval_pt(&kg, &rule, &th()) {
                    Ok(m) => {
                        assert_eq!(m.supp, supp);
                        if body_count > 0 {
                            assert!((m.sc - supp as f64 / body_count as f64).abs() < 1e-12);
                            assert!((m.hc - supp as f64 / head_count as f64).abs() < 1e-12);
                        } else {
                            assert_eq!((m.sc, m.hc), (0.0, 0.0));
                        }
                    }
                    Err(Error::HeadRelationAbsent(_)) => assert_eq!(head_count, 0),
                    Err(e) => panic!("unexpected error {e}"),
                }
            }
        }
    }

    #[test]
    fn serialization_round_trips() {
        let kg = KnowledgeGraph::build(
            &[t("a", "award", "b"), t("a", "award_nominee", "b"), t("Japan", "language", "Japanese")],
            &[],
            &[],
        );
        let cp = Rule::cp(
            kg.relation_id("award_nominee").unwrap(),
            vec![SignedRelation::inverse_of(kg.relation_id("award").unwrap())],
        );
        let s = cp.to_string_with(&kg);
        assert_eq!(s, "award_nominee <- award'");
        assert_eq!(parse_rule(&kg, &s).unwrap(), cp);

        let pt = Rule {
            head_relation: kg.relation_id("language").unwrap(),
            body: RuleBody::Pt {
                side: PtSide::Head,
                body_sr: SignedRelation::forward(kg.relation_id("award").unwrap()),
                body_constant: kg.entity_id("b").unwrap(),
                head_constant: kg.entity_id("Japanese").unwrap(),
            },
        };
        let s = pt.to_string_with(&kg);
        assert_eq!(s, "language(X, Japanese) <- award(X, b)");
        assert_eq!(parse_rule(&kg, &s).unwrap(), pt);

        let pt_tail = Rule {
            head_relation: kg.relation_id("language").unwrap(),
            body: RuleBody::Pt {
                side: PtSide::Tail,
                body_sr: SignedRelation::inverse_of(kg.relation_id("award").unwrap()),
                body_constant: kg.entity_id("a").unwrap(),
                head_constant: kg.entity_id("Japan").unwrap(),
            },
        };
        let s = pt_tail.to_string_with(&kg);
        assert_eq!(s, "language(Japan, Y) <- award'(Y, a)");
        assert_eq!(parse_rule(&kg, &s).unwrap(), pt_tail);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let kg = KnowledgeGraph::build(&[t("a", "r", "b")], &[], &[]);
        assert!(matches!(parse_rule(&kg, "r r1"), Err(Error::RuleParse { .. })));
        match parse_rule(&kg, "r <- nope") {
            Err(Error::RuleParse { position, .. }) => assert!(position >= 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_rule(&kg, "r <- r, r, r, r").is_err());
    }

    /// A small planted-rule graph: r(h, t) whenever r1(h, m) and r2(m, t).
    fn planted() -> (KnowledgeGraph, Fact) {
        let mut train = Vec::new();
        for g in 0..12 {
            let m = format!("m{g}");
            for s in 0..3 {
                train.push(t(&format!("s{g}_{s}"), "r1", &m));
            }
            for d in 0..3 {
                train.push(t(&m, "r2", &format!("d{g}_{d}")));
            }
            for s in 0..3 {
                for d in 0..3 {
                    if (g, s, d) != (0, 0, 0) {
                        train.push(t(&format!("s{g}_{s}"), "r", &format!("d{g}_{d}")));
                    }
                }
            }
        }
        let test = vec![t("s0_0", "r", "d0_0")];
        let kg = KnowledgeGraph::build(&train, &[], &test);
        let prediction = kg.resolve("s0_0", "r", "d0_0").unwrap();
        (kg, prediction)
    }

    #[test]
    fn mine_finds_planted_cp_rule() {
        let (kg, prediction) = planted();
        let model_config = ModelConfig {
            family: ModelFamily::Complex,
            dimension: 16,
            epochs: 200,
            learning_rate: 1.0,
            negatives: 4,
            batch_size: 64,
            regularization: 1e-4,
            margin: 1.0,
            seed: 5,
        };
        let model = train(&kg, &model_config).unwrap();
        let mined = mine(&kg, &model, &prediction, &MinerConfig::default()).unwrap();
        let r1 = kg.relation_id("r1").unwrap();
        let r2 = kg.relation_id("r2").unwrap();
        let wanted = vec![SignedRelation::forward(r1), SignedRelation::forward(r2)];
        let found = mined
            .rules
            .iter()
            .find(|m| matches!(&m.rule.body, RuleBody::Cp(b) if *b == wanted))
            .expect("planted CP rule not mined");
        let direct = eval_cp(&kg, &found.rule, &Thresholds::default()).unwrap();
        assert!((found.metrics.conf - direct.conf).abs() < 1e-9);
        assert!(found.group.as_ref().is_some_and(|g| !g.grounded.is_empty()));
        // determinism of the serialized rule list
        let again = mine(&kg, &model, &prediction, &MinerConfig::default()).unwrap();
        let a: Vec<&str> = mined.rules.iter().map(|m| m.serialized.as_str()).collect();
        let b: Vec<&str> = again.rules.iter().map(|m| m.serialized.as_str()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn mine_rejects_non_test_predictions() {
        let (kg, _) = planted();
        let model = train(
            &kg,
            &ModelConfig { dimension: 8, epochs: 1, ..Default::default() },
        )
        .unwrap();
        let train_fact = kg.train_facts()[0];
        assert!(matches!(
            mine(&kg, &model, &train_fact, &MinerConfig::default()),
            Err(Error::NotInTestSplit(_))
        ));
    }

    #[test]
    fn mine_with_no_paths_or_candidates_is_empty() {
        // isolated prediction endpoints: no train facts touch them
        let kg = KnowledgeGraph::build(&[t("a", "r", "b")], &[], &[t("x", "r", "y")]);
        let model = train(
            &kg,
            &ModelConfig { dimension: 8, epochs: 1, ..Default::default() },
        )
        .unwrap();
        let prediction = kg.resolve("x", "r", "y").unwrap();
        let mined = mine(&kg, &model, &prediction, &MinerConfig::default()).unwrap();
        assert!(mined.rules.is_empty());
    }
}
